"""Wavefunction-level ground truth for the moment pipeline.

A perspective state is stored as a pure Gaussian momentum wavefunction on a
uniform grid,

    psi(P) ~ exp(-1/4 (P - mu)^T C^{-1} (P - mu) + i/2 P^T Phi P + i l^T P),

and a change of perspective is carried out on the constraint surface by
substitution: seen from the new frame, the old frame's momentum argument is
minus the total of everything else.  Moments are then recomputed by
quadrature, with x = i d/dp evaluated by finite differences.  Nothing here
uses the matrix maps of :mod:`frame_transform`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import MomentState, Ordering, ParticleSystem, make_state
from .errors import (
    DifferentiationUnstable,
    DimensionMismatch,
    GridTooCoarse,
    InterpolationOutOfRange,
    NotPure,
    SameFrame,
    UnsupportedDimension,
)
from .frame_transform import switch_frame

NORM_TOL = 1e-6
SIGMA_P_TOL = 1e-6
RICHARDSON_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class GaussianWavefunctionSpec:
    system: ParticleSystem
    frame: str
    momentum_mean: np.ndarray
    momentum_covariance: np.ndarray
    phase_quadratic: np.ndarray
    phase_linear: np.ndarray

    def __post_init__(self):
        self.system.check(self.frame)
        d = self.system.n - 1
        if d not in (1, 2):
            raise UnsupportedDimension(f"grid oracle supports N in {{2, 3}}, got N={self.system.n}")
        conv = {
            "momentum_mean": (d,),
            "momentum_covariance": (d, d),
            "phase_quadratic": (d, d),
            "phase_linear": (d,),
        }
        for name, shape in conv.items():
            a = np.array(getattr(self, name), dtype=float).reshape(shape)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        c = self.momentum_covariance
        if not np.allclose(c, c.T, atol=1e-12) or np.linalg.eigvalsh(c)[0] <= 0:
            raise DimensionMismatch("momentum_covariance must be symmetric positive definite")
        if not np.allclose(self.phase_quadratic, self.phase_quadratic.T, atol=1e-12):
            raise DimensionMismatch("phase_quadratic must be symmetric")

    @property
    def described(self):
        return self.system.described(self.frame)


def gaussian_spec(system, frame, momentum_mean=None, momentum_covariance=None, phase_quadratic=None, phase_linear=None):
    """Spec with defaults: zero means and phases, vacuum momentum variance 1/2."""
    d = system.n - 1
    return GaussianWavefunctionSpec(
        system,
        frame,
        np.zeros(d) if momentum_mean is None else momentum_mean,
        0.5 * np.eye(d) if momentum_covariance is None else momentum_covariance,
        np.zeros((d, d)) if phase_quadratic is None else phase_quadratic,
        np.zeros(d) if phase_linear is None else phase_linear,
    )


def random_spec(system: ParticleSystem, frame, seed) -> GaussianWavefunctionSpec:
    """Random spec whose grids stay well resolved at the default sizes."""
    rng = np.random.default_rng(seed)
    d = system.n - 1
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    c = q @ np.diag(rng.uniform(0.25, 1.0, size=d)) @ q.T
    phi = rng.uniform(-0.4, 0.4, size=(d, d))
    phi = 0.5 * (phi + phi.T)
    return GaussianWavefunctionSpec(
        system,
        frame,
        rng.uniform(-1.0, 1.0, size=d),
        0.5 * (c + c.T),
        phi,
        rng.uniform(-1.0, 1.0, size=d),
    )


def analytic_moments(spec: GaussianWavefunctionSpec) -> MomentState:
    """Closed-form moments of the spec's Gaussian.

    Writing psi = g(P) exp(i S(P)) with real g, the position operator acts
    as x0 - grad S, where x0 has covariance C^{-1}/4 and no correlation with P.
    """
    mu, c = spec.momentum_mean, spec.momentum_covariance
    phi, ell = spec.phase_quadratic, spec.phase_linear
    xx = 0.25 * np.linalg.inv(c) + phi @ c @ phi
    xp = -phi @ c
    cov = np.block([[xx, xp], [xp.T, c]])
    mean = np.concatenate([-phi @ mu - ell, mu])
    return make_state(spec.system, spec.frame, mean, cov)


def spec_from_state(state: MomentState, tol: float = 1e-9) -> GaussianWavefunctionSpec:
    """Wavefunction spec reproducing a pure Gaussian moment state."""
    b = state.blocked()
    n = b.n_modes
    c = b.cov[n:, n:]
    xp = b.cov[:n, n:]
    phi = -xp @ np.linalg.inv(c)
    asym = float(np.max(np.abs(phi - phi.T)))
    phi = 0.5 * (phi + phi.T)
    xx = 0.25 * np.linalg.inv(c) + phi @ c @ phi
    scale = max(1.0, float(np.max(np.abs(b.cov))))
    resid = max(asym, float(np.max(np.abs(xx - b.cov[:n, :n])))) / scale
    if resid > tol:
        raise NotPure(f"state is not a pure Gaussian (residual {resid:.2e})")
    mu = b.mean[n:]
    ell = -phi @ mu - b.mean[:n]
    return GaussianWavefunctionSpec(state.system, state.frame, mu, c, phi, ell)


@dataclass(frozen=True)
class Axis:
    center: float
    step: float
    count: int

    @property
    def start(self) -> float:
        return self.center - 0.5 * (self.count - 1) * self.step

    def coords(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @classmethod
    def spanning(cls, center, sigma, n_sigma, count):
        return cls(float(center), 2.0 * n_sigma * float(sigma) / (count - 1), int(count))


@dataclass(frozen=True)
class GridPolicy:
    """Grid size and extent; ``points=None`` picks 4096 (1D) or 512 per axis (2D)."""

    points: int | None = None
    n_sigma: float = 7.0

    def count(self, dim: int) -> int:
        n = self.points if self.points is not None else (4096 if dim == 1 else 512)
        lo, hi = (256, 4096) if dim == 1 else (128, 1024)
        if n < lo or n > hi or n & (n - 1):
            raise GridTooCoarse(f"{dim}D grids need a power of two in [{lo}, {hi}], got {n}")
        if self.n_sigma < 6.0:
            raise GridTooCoarse(f"grid extent must cover at least 6 sigma, got {self.n_sigma}")
        return n


@dataclass(frozen=True, eq=False)
class GridWavefunction:
    system: ParticleSystem
    frame: str
    described: tuple
    axes: tuple
    values: np.ndarray = field(repr=False)

    @property
    def cell(self) -> float:
        return float(np.prod([a.step for a in self.axes]))

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.cell)

    def mesh(self):
        return np.meshgrid(*(a.coords() for a in self.axes), indexing="ij")


def _check_sigma_p(values, axes):
    """Compare the momentum variance on the grid with the every-other-point grid."""
    for k, axis in enumerate(axes):
        dens = np.abs(values) ** 2
        other = tuple(i for i in range(values.ndim) if i != k)
        marg = dens.sum(axis=other) if other else dens
        pk = axis.coords()

        def var(m, p, h):
            w = m * h
            norm = w.sum()
            mean = (w * p).sum() / norm
            return (w * (p - mean) ** 2).sum() / norm

        err = abs(var(marg, pk, axis.step) - var(marg[::2], pk[::2], 2 * axis.step))
        if err > SIGMA_P_TOL:
            raise GridTooCoarse(f"momentum variance along axis {k} unresolved (estimate {err:.2e})")


def gaussian_wavefunction(spec: GaussianWavefunctionSpec, grid_policy: GridPolicy | None = None) -> GridWavefunction:
    policy = grid_policy or GridPolicy()
    d = spec.system.n - 1
    count = policy.count(d)
    mu, c = spec.momentum_mean, spec.momentum_covariance
    axes = tuple(Axis.spanning(mu[k], math.sqrt(c[k, k]), policy.n_sigma, count) for k in range(d))
    grids = np.meshgrid(*(a.coords() for a in axes), indexing="ij")
    P = np.stack(grids, axis=-1)
    dP = P - mu
    cinv = np.linalg.inv(c)
    expo = -0.25 * np.einsum("...i,ij,...j->...", dP, cinv, dP)
    phase = 0.5 * np.einsum("...i,ij,...j->...", P, spec.phase_quadratic, P) + P @ spec.phase_linear
    values = np.exp(expo + 1j * phase)
    psi = GridWavefunction(spec.system, spec.frame, spec.described, axes, values)
    values /= math.sqrt(psi.norm())
    _check_sigma_p(values, axes)
    return psi


def _momentum_stats(psi: GridWavefunction):
    dens = np.abs(psi.values) ** 2 * psi.cell
    dens /= dens.sum()
    grids = psi.mesh()
    means = np.array([(dens * g).sum() for g in grids])
    cov = np.array([[(dens * (gi - mi) * (gj - mj)).sum() for gj, mj in zip(grids, means)] for gi, mi in zip(grids, means)])
    return means, cov


def substitute_frame(psi: GridWavefunction, to, grid_policy: GridPolicy | None = None) -> GridWavefunction:
    """Wavefunction seen from ``to``: psi'(p_old, spectators) = psi(p_to = -(p_old + sum spectators), spectators).

    Spectator axes are reused; the old frame's axis follows the extent rule
    for its momentum. Values outside the source grid are taken as zero, and
    InterpolationOutOfRange is raised if the result loses more than 1e-6 of norm.
    """
    policy = grid_policy or GridPolicy()
    psi.system.check(to)
    if to == psi.frame:
        raise SameFrame(f"wavefunction is already in frame {to!r}")
    old = psi.described
    a_to = old.index(to)
    new = psi.system.described(to)

    means, cov = _momentum_stats(psi)
    sigma = math.sqrt(float(cov.sum()))
    src_axis = psi.axes[a_to]
    new_axis = Axis.spanning(-means.sum(), sigma, policy.n_sigma, src_axis.count)

    # rows: spectator grid points (or one row in 1D); columns: new-axis points
    pf = new_axis.coords()
    if len(old) == 1:
        src = psi.values[None, :]
        spect = np.zeros(1)
    else:
        a_sp = 1 - a_to
        src = np.moveaxis(psi.values, a_to, -1)
        spect = psi.axes[a_sp].coords()
    query = -(pf[None, :] + spect[:, None])
    vals, outside = _kernels.interp_rows(src, src_axis.start, src_axis.step, query)

    axes_by_label = {psi.frame: new_axis}
    for k, label in enumerate(old):
        if label != to:
            axes_by_label[label] = psi.axes[k]
    axes = tuple(axes_by_label[l] for l in new)
    if len(old) == 1:
        values = vals[0]
    else:
        # vals[spectator, old-frame]; reorder to the target's label order
        values = vals if new.index(psi.frame) == 1 else vals.T
    out = GridWavefunction(psi.system, to, new, axes, np.ascontiguousarray(values))
    deficit = abs(out.norm() - psi.norm())
    if deficit > NORM_TOL:
        raise InterpolationOutOfRange(
            f"substitution lost {deficit:.2e} of norm ({outside} target points outside the source grid); "
            "enlarge the grids"
        )
    return out


def _moment_set(psi, values, spacing, P, norm):
    """Position-involving moments from derivatives with the given stencil spacing."""
    d = len(psi.axes)
    cell = psi.cell
    derivs = [_kernels.diff_axis(values, psi.axes[k].step, k, spacing) for k in range(d)]
    conj = np.conj(values)
    mx = np.array([float(np.real(np.sum(conj * 1j * dk)) * cell / norm) for dk in derivs])
    xx = np.empty((d, d))
    xp = np.empty((d, d))
    for k in range(d):
        for l in range(d):
            xx[k, l] = float(np.real(np.sum(np.conj(derivs[k]) * derivs[l])) * cell / norm)
            xp[k, l] = float(np.real(np.sum(conj * P[l] * 1j * derivs[k])) * cell / norm)
    return mx, xx, xp


def grid_moments(psi: GridWavefunction) -> MomentState:
    """All first and symmetrized second moments by quadrature on the grid.

    x_k = i d/dp_k uses a 4th-order central stencil; the same moments from
    its Richardson extrapolation with the stencil at twice the spacing must
    agree with it within 1e-5.
    """
    values = psi.values
    norm = psi.norm()
    P = psi.mesh()
    dens = np.abs(values) ** 2 * psi.cell / norm
    d = len(psi.axes)
    mp = np.array([float(np.sum(dens * P[k])) for k in range(d)])
    pp = np.array([[float(np.sum(dens * P[k] * P[l])) for l in range(d)] for k in range(d)])

    fine = _moment_set(psi, values, 1, P, norm)
    coarse = _moment_set(psi, values, 2, P, norm)
    # gap between the h stencil and its Richardson extrapolation (16 D_h - D_2h) / 15
    disagreement = max(float(np.max(np.abs(f - c))) / 15.0 for f, c in zip(fine, coarse))
    if disagreement > RICHARDSON_TOL:
        raise DifferentiationUnstable(f"stencils disagree by {disagreement:.2e}")
    mx, xx, xp = fine

    cxx = xx - np.outer(mx, mx)
    cxp = xp - np.outer(mx, mp)
    cpp = pp - np.outer(mp, mp)
    cov = np.block([[cxx, cxp], [cxp.T, cpp]])
    cov = 0.5 * (cov + cov.T)
    return make_state(psi.system, psi.frame, np.concatenate([mx, mp]), cov, Ordering.BLOCKED)


def _deviation(a: MomentState, b: MomentState) -> float:
    a, b = a.blocked(), b.blocked()
    return float(max(np.max(np.abs(a.mean - b.mean)), np.max(np.abs(a.cov - b.cov))))


def oracle_compare(spec: GaussianWavefunctionSpec, frame_list=None, tol: float = 1e-4, transform=None, grid_policy=None) -> dict:
    """Wavefunction moments versus the matrix pipeline in every listed frame.

    ``transform(state, frame)`` defaults to :func:`switch_frame`; tests pass a
    corrupted map here to confirm the comparison detects it.
    """
    transform = transform or switch_frame
    frames = list(spec.system.labels if frame_list is None else frame_list)
    spec.system.check(*frames)
    psi0 = gaussian_wavefunction(spec, grid_policy)
    base = grid_moments(psi0)
    rows = []
    for f in frames:
        if f == spec.frame:
            oracle, predicted, norm = base, base, psi0.norm()
        else:
            psi = substitute_frame(psi0, f, grid_policy)
            oracle, predicted, norm = grid_moments(psi), transform(base, f), psi.norm()
        dev = _deviation(oracle, predicted)
        rows.append({"frame": f, "max_abs_dev": dev, "norm": norm, "passed": dev <= tol})
    analytic_dev = _deviation(base, analytic_moments(spec))
    return {
        "spec_frame": spec.frame,
        "frames": rows,
        "analytic_dev": analytic_dev,
        "max_abs_dev": max(r["max_abs_dev"] for r in rows),
        "tol": tol,
        "passed": all(r["passed"] for r in rows) and analytic_dev <= tol,
    }
