"""Time evolution of perspective states under quadratic Hamiltonians.

H = 1/2 R^T G R in blocked ordering generates the symplectic propagator
S(t) = exp(Omega G t), and moments evolve as mean -> S mean,
cov -> S cov S^T.  The free perspective Hamiltonian couples every described
momentum through the reference particle's kinetic term p_bar^2 / 2 m_frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core import (
    SYM_TOL,
    MomentState,
    Ordering,
    ParticleSystem,
    make_state,
    reorder,
    symplectic_form,
)
from .errors import (
    DimensionMismatch,
    FrameMismatch,
    InvalidFrameChoice,
    NonPositiveMass,
    NonSymmetric,
    UnknownLabel,
)
from .frame_transform import switch_frame


@dataclass(frozen=True, eq=False)
class QuadraticHamiltonian:
    frame: str
    G: np.ndarray = field(repr=False)

    @property
    def n_modes(self) -> int:
        return self.G.shape[0] // 2

    @property
    def is_free(self) -> bool:
        """True when only the momentum block of G is nonzero."""
        n = self.n_modes
        return not np.any(self.G[:n, :]) and not np.any(self.G[:, :n])


@dataclass(frozen=True, eq=False)
class Propagator:
    S: np.ndarray = field(repr=False)
    t: float


def quadratic_hamiltonian(frame, G) -> QuadraticHamiltonian:
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] % 2:
        raise DimensionMismatch(f"G must be square with even size, got {G.shape}")
    asym = float(np.max(np.abs(G - G.T))) if G.size else 0.0
    if asym > SYM_TOL:
        raise NonSymmetric(f"G asymmetry {asym:.3g} exceeds {SYM_TOL:g}")
    G = 0.5 * (G + G.T)
    G.setflags(write=False)
    return QuadraticHamiltonian(frame, G)


def free_hamiltonian(system: ParticleSystem, frame) -> QuadraticHamiltonian:
    """p_bar^2 / 2 m_frame + sum_K p_K^2 / 2 m_K seen from ``frame``."""
    described = system.described(frame)
    n = len(described)
    gpp = np.full((n, n), 1.0 / system.mass(frame))
    gpp[np.diag_indices(n)] += [1.0 / system.mass(l) for l in described]
    G = np.zeros((2 * n, 2 * n))
    G[n:, n:] = gpp
    return quadratic_hamiltonian(frame, G)


def propagator(H: QuadraticHamiltonian, t: float) -> Propagator:
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"time must be finite, got {t}")
    n = H.n_modes
    generator = symplectic_form(n).matrix @ H.G
    if H.is_free:
        # Omega G is nilpotent of order two: exp(Omega G t) = I + t Omega G
        S = np.eye(2 * n) + t * generator
    else:
        S = expm(generator * t)
    S.setflags(write=False)
    return Propagator(S, t)


def evolve(state: MomentState, H: QuadraticHamiltonian, t: float) -> MomentState:
    if H.frame != state.frame:
        raise FrameMismatch(f"Hamiltonian is written in {H.frame!r}, state in {state.frame!r}")
    if H.n_modes != state.n_modes:
        raise DimensionMismatch(f"Hamiltonian has {H.n_modes} modes, state has {state.n_modes}")
    S = propagator(H, t).S
    b = state.blocked()
    cov = S @ b.cov @ S.T
    # symmetric in exact arithmetic; rounding grows with the entries of S
    out = make_state(state.system, state.frame, S @ b.mean, 0.5 * (cov + cov.T), Ordering.BLOCKED)
    return reorder(out, state.ordering)


def _split(state: MomentState):
    b = state.blocked()
    n = b.n_modes
    c = b.cov
    return b, c[:n, :n], c[:n, n:], c[n:, n:]


def free_evolution_closed_form(state: MomentState, t: float) -> MomentState:
    """Free evolution by the scalar moment formulas (velocity expansions).

    Positions advance as x_J + t v_J with v_J = p_J / m_J + p_bar / m_frame;
    every second moment is assembled entry by entry from the t = 0 moments.
    """
    b, xx, xp, pp = _split(state)
    system, labels = state.system, state.described
    n = len(labels)
    inv_m = [1.0 / system.mass(l) for l in labels]
    inv_mf = 1.0 / system.mass(state.frame)
    mean_x, mean_p = b.mean[:n], b.mean[n:]

    row_pp = [sum(pp[j, l] for l in range(n)) for j in range(n)]
    total_pp = sum(row_pp)
    row_xp = [sum(xp[j, l] for l in range(n)) for j in range(n)]

    def cov_vp(j, k):
        return inv_m[j] * pp[j, k] + inv_mf * row_pp[k]

    def cov_xv(j, k):
        return inv_m[k] * xp[j, k] + inv_mf * row_xp[j]

    def cov_vv(j, k):
        return (
            inv_m[j] * inv_m[k] * pp[j, k]
            + inv_m[j] * inv_mf * row_pp[j]
            + inv_m[k] * inv_mf * row_pp[k]
            + inv_mf * inv_mf * total_pp
        )

    new_xx = np.empty((n, n))
    new_xp = np.empty((n, n))
    for j in range(n):
        for k in range(n):
            new_xp[j, k] = xp[j, k] + t * cov_vp(j, k)
            new_xx[j, k] = xx[j, k] + t * (cov_xv(j, k) + cov_xv(k, j)) + t * t * cov_vv(j, k)
    sum_p = float(np.sum(mean_p))
    new_mx = np.array([mean_x[j] + t * (inv_m[j] * mean_p[j] + inv_mf * sum_p) for j in range(n)])

    new_xx = 0.5 * (new_xx + new_xx.T)
    cov = np.block([[new_xx, new_xp], [new_xp.T, pp]])
    out = make_state(system, state.frame, np.concatenate([new_mx, mean_p]), cov, Ordering.BLOCKED)
    return reorder(out, state.ordering)


def uncertainty_evolution(state: MomentState, J, t_list) -> dict:
    """var(x_J) var(p_J) and the 2x2 determinant of particle J as polynomials in t.

    Coefficients come from the t = 0 moments only; the momentum variance is
    conserved by free evolution so both quantities are quadratics in t.
    """
    b, xx, xp, pp = _split(state)
    labels = state.described
    if J not in labels:
        raise UnknownLabel(f"{J!r} is not described from {state.frame!r}")
    j = labels.index(J)
    mJ, mI = state.system.mass(J), state.system.mass(state.frame)
    sx, sp, c = xx[j, j], pp[j, j], xp[j, j]
    sum_xpl = float(np.sum(xp[j, :]))
    sum_ppl = float(np.sum(pp[j, :]))
    sum_pp = float(np.sum(pp))

    ur = (
        sx * sp,
        (2.0 * c / mJ + 2.0 * sum_xpl / mI) * sp,
        (sp / mJ**2 + 2.0 * sum_ppl / (mI * mJ) + sum_pp / mI**2) * sp,
    )
    det = (
        sx * sp - c * c,
        (sp * 2.0 * sum_xpl - sum_ppl * 2.0 * c) / mI,
        (sp * sum_pp - sum_ppl * sum_ppl) / mI**2,
    )
    t = np.asarray(t_list, dtype=float)
    return {
        "particle": J,
        "frame": state.frame,
        "t": t,
        "UR": ur[0] + ur[1] * t + ur[2] * t * t,
        "det2x2": det[0] + det[1] * t + det[2] * t * t,
        "UR_coeffs": ur,
        "det2x2_coeffs": det,
    }


def nonrelational_baseline(sigma_x2, sigma_p2, cov_xp, m, t) -> dict:
    """Free single-particle moments relative to an abstract (massless-free) frame."""
    if not m > 0:
        raise NonPositiveMass(f"mass must be positive, got {m}")
    t = np.asarray(t, dtype=float)
    c_t = cov_xp + t / m * sigma_p2
    sx_t = sigma_x2 + 2.0 * t / m * cov_xp + (t / m) ** 2 * sigma_p2
    ur = sigma_x2 * sigma_p2 + t * (2.0 * cov_xp / m) * sigma_p2 + t * t * sigma_p2**2 / m**2
    det = sigma_x2 * sigma_p2 - cov_xp**2
    return {
        "cov_xp": c_t,
        "sigma_x2": sx_t,
        "UR": ur,
        "det": det + 0.0 * t,
    }


@dataclass
class VelocityMoments:
    particle: str
    frame: str
    mean_velocity: float
    cov_with: dict
    addition_residual: float | None = None


def velocity_moments(state: MomentState, J, third_frame=None) -> VelocityMoments:
    """Moments of v_J = p_J / m_J + p_bar / m_frame in the state's frame.

    With ``third_frame`` K the velocity-addition identity
    <v_J(K)>_K = <v_J(I)>_I - <v_K(I)>_I is evaluated and its residual stored.
    """
    b, xx, xp, pp = _split(state)
    labels = state.described
    if J not in labels:
        raise UnknownLabel(f"{J!r} is not described from {state.frame!r}")
    n = len(labels)
    j = labels.index(J)
    system = state.system
    mI = system.mass(state.frame)
    coef = np.full(n, 1.0 / mI)
    coef[j] += 1.0 / system.mass(J)
    mean_p = b.mean[n:]

    cov_with = {}
    for k, K in enumerate(labels):
        cov_with[f"x_{K}"] = float(coef @ xp[k, :])
        cov_with[f"p_{K}"] = float(coef @ pp[:, k])
    cov_with[f"v_{J}"] = float(coef @ pp @ coef)
    vm = VelocityMoments(J, state.frame, float(coef @ mean_p), cov_with)

    if third_frame is not None:
        K = third_frame
        system.check(K)
        if K in (J, state.frame):
            raise InvalidFrameChoice("third frame must differ from the particle and the state's frame")
        in_k = switch_frame(state, K)
        lhs = velocity_moments(in_k, J).mean_velocity
        rhs = vm.mean_velocity - velocity_moments(state, K).mean_velocity
        vm.addition_residual = abs(lhs - rhs)
    return vm


def switch_evolve_commutator(state: MomentState, to, t: float) -> float:
    """max |switch(evolve(s)) - evolve(switch(s))| for the free Hamiltonians."""
    system = state.system
    a = switch_frame(evolve(state, free_hamiltonian(system, state.frame), t), to)
    b = evolve(switch_frame(state, to), free_hamiltonian(system, to), t)
    return float(max(np.max(np.abs(a.cov - b.cov)), np.max(np.abs(a.mean - b.mean))))
