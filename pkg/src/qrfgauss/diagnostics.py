"""Scalar functionals and consistency checks on perspective states.

Report functions never raise on a physics violation; they return margins
(positive = satisfied) and boolean flags, with ``None`` standing for a
quantity that is undefined because some variance vanishes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    PSD_TOL,
    ZERO_TOL,
    MomentState,
    Ordering,
    _as_ordering,
    p,
    p_bar,
    symplectic_form,
    uncertainty_margin,
    x,
)
from .errors import (
    DegenerateTriangle,
    FrameOverlapsPair,
    InvalidFrameChoice,
    NonPositiveDeterminant,
    OddDimension,
)
from .frame_transform import switch_frame

REPORT_TOL = 1e-9


def in_frame(state: MomentState, frame) -> MomentState:
    return state if frame == state.frame else switch_frame(state, frame)


def _var(state, obs):
    c = obs.vector(state)
    return float(c @ state.cov @ c)


def _cov(state, a, b):
    return float(a.vector(state) @ state.cov @ b.vector(state))


def _corr(state, a, b):
    sa = math.sqrt(max(_var(state, a), 0.0))
    sb = math.sqrt(max(_var(state, b), 0.0))
    if sa <= ZERO_TOL or sb <= ZERO_TOL:
        return None
    return _cov(state, a, b) / (sa * sb)


def rel_dev(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / max(scale, ZERO_TOL)


# -- uncertainty, spectrum, purity -----------------------------------------


def rs_uncertainty_check(state: MomentState) -> dict:
    """Robertson-Schroedinger margin and per-particle 2x2 determinants."""
    dets = {l: float(np.linalg.det(state.particle_block(l))) for l in state.described}
    margin = uncertainty_margin(state.cov, state.ordering)
    return {
        "psd_margin": margin,
        "per_particle_dets": dets,
        "psd_pass": margin >= -PSD_TOL,
        "per_particle_pass": all(d >= 0.25 - PSD_TOL for d in dets.values()),
    }


def symplectic_spectrum(cov, ordering=Ordering.BLOCKED) -> np.ndarray:
    """Symplectic eigenvalues from the spectrum of Omega @ cov, ascending."""
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
        raise OddDimension(f"covariance must be square with even size, got {cov.shape}")
    n = cov.shape[0] // 2
    omega = symplectic_form(n, _as_ordering(ordering)).matrix
    # eigenvalues come in pairs +-i nu
    mags = np.sort(np.abs(np.linalg.eigvals(omega @ cov).imag))
    return 0.5 * (mags[0::2] + mags[1::2])


def gaussian_purity(cov) -> float:
    """Purity 1 / (2^n sqrt(det cov)) of an n-mode Gaussian subsystem."""
    cov = np.asarray(cov, dtype=float)
    if cov.shape[0] % 2:
        raise OddDimension(f"covariance must have even size, got {cov.shape}")
    det = float(np.linalg.det(cov))
    if not det > 0:
        raise NonPositiveDeterminant(f"det = {det:.6g}")
    return 1.0 / (2 ** (cov.shape[0] // 2) * math.sqrt(det))


def particle_purity(state: MomentState, label) -> float:
    return gaussian_purity(state.particle_block(label))


# -- position triangle -------------------------------------------------------


@dataclass
class TriangleReport:
    """Position moments of three particles as a Euclidean triangle.

    ``cosines`` = (corr_I(x_J, x_K), corr_J(x_K, x_I), corr_K(x_I, x_J)) and
    ``sides`` = (sigma_I(x_J), sigma_I(x_K), sigma_J(x_K)), so side k is
    opposite the angle with cosine 2 - k.
    """

    frames: tuple
    sides: tuple
    cosines: tuple | None
    angles: tuple | None
    constraint_residual: float | None
    triangle_inequality: bool | None
    sum_bound: bool | None
    product_bound: bool | None
    pairwise_sum: bool | None
    pairwise_product: bool | None
    degenerate: bool = False
    tol: float = REPORT_TOL

    @property
    def flags(self) -> dict:
        return {
            "triangle_inequality": self.triangle_inequality,
            "sum_bound": self.sum_bound,
            "product_bound": self.product_bound,
            "pairwise_sum": self.pairwise_sum,
            "pairwise_product": self.pairwise_product,
        }

    @property
    def passed(self) -> bool | None:
        if self.degenerate:
            return None
        return all(self.flags.values()) and self.constraint_residual <= 1e-8

    def as_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def triangle_report(state: MomentState, I, J, K, tol: float = REPORT_TOL, strict: bool = False) -> TriangleReport:
    if len({I, J, K}) != 3:
        raise InvalidFrameChoice("triangle needs three distinct particles")
    state.system.check(I, J, K)
    sI, sJ, sK = in_frame(state, I), in_frame(state, J), in_frame(state, K)
    sides = (
        math.sqrt(max(_var(sI, x(J)), 0.0)),
        math.sqrt(max(_var(sI, x(K)), 0.0)),
        math.sqrt(max(_var(sJ, x(K)), 0.0)),
    )
    if min(sides) < ZERO_TOL:
        if strict:
            raise DegenerateTriangle(f"side lengths {sides}")
        return TriangleReport((I, J, K), sides, None, None, None, None, None, None, None, None, True, tol)

    c = (_corr(sI, x(J), x(K)), _corr(sJ, x(K), x(I)), _corr(sK, x(I), x(J)))
    c1, c2, c3 = c
    angles = tuple(math.acos(min(1.0, max(-1.0, ci))) for ci in c)
    residual = abs(c1 * c1 + c2 * c2 + c3 * c3 + 2 * c1 * c2 * c3 - 1.0)
    a, b, d = sides
    tri = all(
        abs(u - v) - tol * max(1.0, w) <= w <= u + v + tol * max(1.0, w)
        for u, v, w in ((a, b, d), (a, d, b), (b, d, a))
    )
    s, prod = sum(c), c1 * c2 * c3
    pairs = list(itertools.permutations(range(3), 2))
    return TriangleReport(
        frames=(I, J, K),
        sides=sides,
        cosines=c,
        angles=angles,
        constraint_residual=residual,
        triangle_inequality=tri,
        sum_bound=1.0 - tol <= s <= 1.5 + tol,
        product_bound=-1.0 - tol <= prod <= 0.125 + tol,
        pairwise_sum=all(c[i] + c[j] >= -tol for i, j in pairs),
        pairwise_product=all(c[i] * c[j] + c[3 - i - j] >= -tol for i, j in pairs),
        tol=tol,
    )


# -- momentum relations --------------------------------------------------------


def momentum_relation_report(state: MomentState, I, J, tol: float = 1e-10) -> dict:
    """Reciprocal momentum variances and correlations of two frames I, J.

    c1 = corr_I(p_IJbar, p_J), c2 = corr_J(p_IJbar, p_I) and
    c3 = corr_u(p_I, p_J) for a third frame u.  Margins are positive when
    the relation holds; entries that need a vanishing variance are ``None``.
    """
    system = state.system
    system.check(I, J)
    if I == J:
        raise InvalidFrameChoice("momentum relations need two distinct frames")
    if system.n < 3:
        raise InvalidFrameChoice("momentum relations need N >= 3")
    u = state.frame if state.frame not in (I, J) else next(l for l in system.labels if l not in (I, J))
    sI, sJ, su = in_frame(state, I), in_frame(state, J), in_frame(state, u)
    rest = p_bar(system, I, J)

    sig1 = math.sqrt(max(_var(sI, p(J)), 0.0))
    sig2 = math.sqrt(max(_var(sJ, p(I)), 0.0))
    sig3_I = math.sqrt(max(_var(sI, rest), 0.0))
    sig3_J = math.sqrt(max(_var(sJ, rest), 0.0))
    c1 = _corr(sI, rest, p(J))
    c2 = _corr(sJ, rest, p(I))
    c3 = _corr(su, p(I), p(J))

    rel = {"variance_triangle": sig3_I - abs(sig1 - sig2)}
    rel["corr_sum"] = None if c1 is None or c2 is None else -(c1 + c2)
    if None in (c1, c2, c3):
        rel["corr_product_1"] = rel["corr_product_2"] = None
    else:
        rel["corr_product_1"] = c3 * c2 - c1
        rel["corr_product_2"] = c3 * c1 - c2

    # corr_u(p_I, p_J) = -corr_I(p_Ibar, p_J) = -corr_J(p_Jbar, p_I)
    eq = None
    if c3 is not None:
        a = _corr(sI, p_bar(system, I), p(J))
        b = _corr(sJ, p_bar(system, J), p(I))
        if a is not None and b is not None:
            eq = max(abs(c3 + a), abs(c3 + b))
    status = {k: (None if v is None else v >= -tol) for k, v in rel.items()}
    status["corr_equality"] = None if eq is None else eq <= 1e-9
    return {
        "frames": (I, J),
        "third_frame": u,
        "sigma_I_pJ": sig1,
        "sigma_J_pI": sig2,
        "sigma_rest": sig3_I,
        "sigma_rest_from_J": sig3_J,
        "c1": c1,
        "c2": c2,
        "c3": c3,
        "margins": rel,
        "corr_equality_residual": eq,
        "status": status,
        "passed": all(v is not False for v in status.values()),
    }


# -- entanglement criteria ---------------------------------------------------


@dataclass
class CriteriaReport:
    frame: str
    pair: tuple
    c_prod: float
    c_sum: float
    entangled_flag_prod: bool
    entangled_flag_sum: bool
    margin_prod: float
    margin_sum: float

    def as_dict(self) -> dict:
        return asdict(self)


def entanglement_criteria(state: MomentState, K, L) -> CriteriaReport:
    """Product and sum variance criteria for the EPR pair x_K - x_L, p_K + p_L."""
    if K == L:
        raise InvalidFrameChoice("criteria need two distinct particles")
    vx = _var(state, x(K) - x(L))
    vp = _var(state, p(K) + p(L))
    cp, cs = vx * vp, vx + vp
    return CriteriaReport(state.frame, (K, L), cp, cs, cp < 1.0, cs < 2.0, cp - 1.0, cs - 2.0)


def criteria_invariance(state: MomentState, frames, K, L, tol: float = 1e-9) -> dict:
    frames = list(frames)
    state.system.check(K, L, *frames)
    bad = [f for f in frames if f in (K, L)]
    if bad:
        raise FrameOverlapsPair(f"frames {bad} belong to the pair ({K}, {L})")
    reports = [entanglement_criteria(in_frame(state, f), K, L) for f in frames]
    dev_prod = max((rel_dev(a.c_prod, b.c_prod) for a in reports for b in reports), default=0.0)
    dev_sum = max((rel_dev(a.c_sum, b.c_sum) for a in reports for b in reports), default=0.0)
    return {
        "pair": (K, L),
        "reports": [r.as_dict() for r in reports],
        "max_rel_dev_prod": dev_prod,
        "max_rel_dev_sum": dev_sum,
        "passed": dev_prod <= tol and dev_sum <= tol,
    }


# -- frame equivalence -------------------------------------------------------


def equivalence_conditions(state: MomentState, I, J, tol: float) -> dict:
    """Sufficient conditions for frames I and J to agree on all spectators.

    (a) var_I(x_J) <= tol; (b) |cov_I(x_J, x_K)| <= tol and
    |cov_I(x_J, p_K)| <= tol for every spectator K.  When they hold, the
    spectator covariance blocks seen from I and J differ by at most 3 * tol
    (the position-position entries pick up three such terms).
    """
    system = state.system
    system.check(I, J)
    if I == J:
        raise InvalidFrameChoice("equivalence needs two distinct frames")
    sI = in_frame(state, I)
    spectators = [l for l in system.labels if l not in (I, J)]
    var_xj = _var(sI, x(J))
    cond = {"var_x": tol - var_xj}
    for K in spectators:
        cond[f"cov_x{J}_x{K}"] = tol - abs(_cov(sI, x(J), x(K)))
        cond[f"cov_x{J}_p{K}"] = tol - abs(_cov(sI, x(J), p(K)))
    conditions_pass = all(m >= 0.0 for m in cond.values())
    out = {
        "frames": (I, J),
        "tol": tol,
        "var_I_xJ": var_xj,
        "margins": cond,
        "conditions_pass": conditions_pass,
        "block_deviation": None,
        "block_tol": 3.0 * tol,
        "purity_deviation": None,
    }
    if spectators:
        sJ = in_frame(state, J)
        dev = float(np.max(np.abs(sI.subsystem(spectators) - sJ.subsystem(spectators))))
        out["block_deviation"] = dev
        try:
            out["purity_deviation"] = max(
                abs(particle_purity(sI, K) - particle_purity(sJ, K)) for K in spectators
            )
        except NonPositiveDeterminant:
            pass
    blocks_agree = out["block_deviation"] is None or out["block_deviation"] <= out["block_tol"]
    out["blocks_agree"] = blocks_agree if conditions_pass else None
    out["passed"] = conditions_pass and blocks_agree
    return out


# -- determinant invariance --------------------------------------------------


def covariance_determinants(state: MomentState) -> dict:
    """det of the full, position-only and momentum-only covariance matrices."""
    b = state.blocked()
    n = b.n_modes
    return {
        "full": float(np.linalg.det(b.cov)),
        "position": float(np.linalg.det(b.cov[:n, :n])),
        "momentum": float(np.linalg.det(b.cov[n:, n:])),
    }


def determinant_invariance(state: MomentState, frames=None, tol: float = 1e-9) -> dict:
    frames = list(state.system.labels if frames is None else frames)
    dets = {f: covariance_determinants(in_frame(state, f)) for f in frames}
    ref = dets[frames[0]]
    dev = {}
    for key in ("full", "position", "momentum"):
        vals = [d[key] for d in dets.values()]
        dev[key] = max(abs(v - ref[key]) for v in vals) / max(1.0, abs(ref[key]))
    return {
        "determinants": dets,
        "max_rel_dev": dev,
        "passed": all(v <= tol for v in dev.values()),
    }
