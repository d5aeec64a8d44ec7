"""Exact linear maps between perspectives.

Switching from frame F to frame T uses only the momentum constraint:
positions become relative to T (x_K -> x_K - x_T, x_F -> -x_T) and the
momentum of the old frame becomes minus the sum of all described momenta.
The resulting map is integer valued.  It is built first in the "swap"
layout, where the old frame occupies the slot the new frame held, and then
permuted into global label order.

The ``predict_*`` functions evaluate the same transformations through scalar
relations between individual moments.  They never touch the matrix map and
serve as its independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    MomentState,
    Ordering,
    ParticleSystem,
    ZERO_TOL,
    make_state,
    reorder,
)
from .errors import InvalidFrameChoice, SameFrame, ZeroVarianceCorrelation


@dataclass(frozen=True, eq=False)
class FrameChangeMap:
    """Integer map carrying moments described by ``source`` to ``target``.

    ``alpha`` acts on the position column vector and ``beta`` on the momentum
    column vector, both in global label order; ``theta`` is their blocked
    direct sum.  ``alpha_swap``/``beta_swap`` are the same maps before the
    label-order permutation, and ``det_sign`` is that permutation's sign.
    """

    source: str
    target: str
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    alpha_swap: np.ndarray = field(repr=False)
    beta_swap: np.ndarray = field(repr=False)
    det_sign: int = 1

    def inverse(self, system: ParticleSystem) -> "FrameChangeMap":
        return frame_map(system, self.target, self.source)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def frame_map(system: ParticleSystem, source, target) -> FrameChangeMap:
    system.check(source, target)
    if source == target:
        raise SameFrame(f"source and target frame are both {source!r}")
    old = system.described(source)
    new = system.described(target)
    n = len(old)
    s = old.index(target)

    # swap layout: slot s holds the old frame, other slots keep their particle
    m = np.eye(n, dtype=np.int64)
    m[:, s] = -1
    swap_labels = list(old)
    swap_labels[s] = source

    perm = np.zeros((n, n), dtype=np.int64)
    for i, label in enumerate(new):
        perm[i, swap_labels.index(label)] = 1
    det_sign = int(round(np.linalg.det(perm)))

    alpha = perm @ m
    beta = perm @ m.T
    theta = np.zeros((2 * n, 2 * n), dtype=np.int64)
    theta[:n, :n] = alpha
    theta[n:, n:] = beta
    return FrameChangeMap(
        source,
        target,
        _readonly(alpha),
        _readonly(beta),
        _readonly(theta),
        _readonly(m),
        _readonly(m.T),
        det_sign,
    )


def apply_map(state: MomentState, fmap: FrameChangeMap) -> MomentState:
    """Conjugate the state's moments with ``fmap.theta``."""
    if fmap.source != state.frame:
        raise InvalidFrameChoice(
            f"map starts in {fmap.source!r} but the state is described by {state.frame!r}"
        )
    b = reorder(state, Ordering.BLOCKED)
    theta = fmap.theta.astype(float)
    mean = theta @ b.mean
    cov = theta @ b.cov @ theta.T
    cov = 0.5 * (cov + cov.T)
    out = make_state(state.system, fmap.target, mean, cov, Ordering.BLOCKED)
    return reorder(out, state.ordering)


def switch_frame(state: MomentState, to) -> MomentState:
    """Describe the same physical state from particle ``to``."""
    state.system.check(to)
    if to == state.frame:
        raise SameFrame(f"state is already described by {to!r}")
    return apply_map(state, frame_map(state.system, state.frame, to))


# -- scalar prediction formulas ---------------------------------------------


def _xx(state: MomentState, a, b) -> float:
    """cov(x_a, x_b) in the state's frame, with x_frame identically zero."""
    if a == state.frame or b == state.frame:
        return 0.0
    return float(state.cov[state.slot(a, "x"), state.slot(b, "x")])


def predict_position_moments(state: MomentState, I, K, L=None) -> dict:
    """Position moments seen from ``I``, predicted from the state's frame J.

    Returns ``var_I_of_K`` = var_I(x_K), ``recip_var`` = var_J(x_I) (which
    equals var_I(x_J)) and, when ``L`` is given, ``cov_I_of_KL`` = cov_I(x_K, x_L).
    """
    J = state.frame
    state.system.check(I, K, *(() if L is None else (L,)))
    if I == J:
        raise InvalidFrameChoice("prediction frame must differ from the state's frame")
    if K == I or L == I:
        raise InvalidFrameChoice("the new frame cannot describe itself")
    recip = _xx(state, I, I)
    out = {
        "recip_var": recip,
        "var_I_of_K": recip + _xx(state, K, K) - 2.0 * _xx(state, I, K),
    }
    if L is not None:
        out["cov_I_of_KL"] = _xx(state, K, L) - _xx(state, K, I) - _xx(state, L, I) + recip
    return out


def _pp(state: MomentState, a, b) -> float:
    return float(state.cov[state.slot(a, "p"), state.slot(b, "p")])


def _pcov_from(state: MomentState, target, a, b) -> float:
    """cov_target(p_a, p_b) from the state's moments in frame I.

    A spectator momentum is unchanged; the old frame's momentum becomes
    minus the sum of every momentum it described.
    """
    I = state.frame
    others = state.described
    if a == I and b == I:
        return sum(_pp(state, u, v) for u in others for v in others)
    if a == I:
        a, b = b, a
    if b == I:
        return -sum(_pp(state, a, u) for u in others)
    return _pp(state, a, b)


def predict_momentum_moments(state: MomentState, queries) -> list:
    """Momentum moments in arbitrary frames from the state's own frame.

    Each query is ``("var", frame, a)``, ``("cov", frame, a, b)`` or
    ``("corr", frame, a, b)`` and refers to particles described by ``frame``.
    """
    values = []
    for q in queries:
        kind, target, *ops = q
        state.system.check(target, *ops)
        if target in ops:
            raise InvalidFrameChoice(f"{target!r} does not describe its own momentum")
        if kind == "var":
            (a,) = ops
            values.append(_pcov_from(state, target, a, a))
            continue
        a, b = ops
        c = _pcov_from(state, target, a, b)
        if kind == "cov":
            values.append(c)
        elif kind == "corr":
            sa = math.sqrt(max(_pcov_from(state, target, a, a), 0.0))
            sb = math.sqrt(max(_pcov_from(state, target, b, b), 0.0))
            if sa <= ZERO_TOL or sb <= ZERO_TOL:
                raise ZeroVarianceCorrelation(f"zero momentum variance in query {q!r}")
            values.append(c / (sa * sb))
        else:
            raise ValueError(f"unknown momentum query kind {kind!r}")
    return values


def predict_mixed_covariance(state: MomentState, I, K, L) -> float:
    """cov_I(x_K, p_L) predicted from the state's frame J.

    For a spectator L this is cov_J(x_K, p_L) - cov_J(x_I, p_L); when L is
    the old frame J its momentum is replaced by minus the described total.
    """
    J = state.frame
    state.system.check(I, K, L)
    if I == J:
        raise InvalidFrameChoice("prediction frame must differ from the state's frame")
    if K == I or L == I:
        raise InvalidFrameChoice("the new frame cannot describe itself")

    def xp(a, b):
        if a == J:
            return 0.0
        return float(state.cov[state.slot(a, "x"), state.slot(b, "p")])

    if L == J:
        return -sum(xp(K, u) - xp(I, u) for u in state.described)
    return xp(K, L) - xp(I, L)
