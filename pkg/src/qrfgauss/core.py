"""Frame-neutral data model: particle systems, perspective states, observables.

Conventions: hbar = 1, [x, p] = i, vacuum quadrature variance 1/2.  A
perspective state of an N-particle system describes the N - 1 particles other
than the reference particle, always in global label order.  In the blocked
ordering the phase-space vector is (x_1, ..., x_n, p_1, ..., p_n); in the
interleaved ordering it is (x_1, p_1, ..., x_n, p_n).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import (
    DimensionMismatch,
    DuplicateLabel,
    InvalidNuRange,
    NonPositiveMass,
    NonSymmetric,
    TooFewParticles,
    UnknownLabel,
    ZeroVarianceCorrelation,
)

SYM_TOL = 1e-10
PSD_TOL = 1e-9
ZERO_TOL = 1e-12


class Ordering(enum.Enum):
    BLOCKED = "blocked"
    INTERLEAVED = "interleaved"


def _as_ordering(ordering) -> Ordering:
    if isinstance(ordering, Ordering):
        return ordering
    return Ordering(str(ordering).lower())


def interleave_permutation(n_modes: int) -> np.ndarray:
    """Index array ``perm`` with ``v_interleaved = v_blocked[perm]``."""
    perm = np.empty(2 * n_modes, dtype=np.intp)
    perm[0::2] = np.arange(n_modes)
    perm[1::2] = np.arange(n_modes, 2 * n_modes)
    return perm


@dataclass(frozen=True)
class ParticleSystem:
    """Ordered set of distinct particle labels with positive masses."""

    labels: tuple
    masses: Mapping[str, float] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.labels)

    def mass(self, label) -> float:
        try:
            return self.masses[label]
        except KeyError:
            raise UnknownLabel(f"unknown particle {label!r}") from None

    def check(self, *labels):
        for label in labels:
            if label not in self.masses:
                raise UnknownLabel(f"unknown particle {label!r}")

    def described(self, frame) -> tuple:
        """Labels seen from ``frame``, in global label order."""
        self.check(frame)
        return tuple(l for l in self.labels if l != frame)


def new_system(labels: Sequence, masses) -> ParticleSystem:
    """Validate and build a :class:`ParticleSystem`.

    Args:
        labels: distinct particle identifiers; their order fixes every slot layout.
        masses: mapping label -> mass, or a sequence aligned with ``labels``.
    """
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise DuplicateLabel(f"duplicate labels in {labels!r}")
    if len(labels) < 2:
        raise TooFewParticles("a relational description needs at least two particles")
    if isinstance(masses, Mapping):
        missing = [l for l in labels if l not in masses]
        if missing:
            raise UnknownLabel(f"no mass given for {missing!r}")
        mass_map = {l: float(masses[l]) for l in labels}
    else:
        masses = list(masses)
        if len(masses) != len(labels):
            raise DimensionMismatch(f"{len(labels)} labels but {len(masses)} masses")
        mass_map = {l: float(m) for l, m in zip(labels, masses)}
    for l, m in mass_map.items():
        if not (m > 0 and math.isfinite(m)):
            raise NonPositiveMass(f"mass of {l!r} must be positive and finite, got {m}")
    return ParticleSystem(labels, mass_map)


@dataclass(frozen=True)
class SymplecticForm:
    n_modes: int
    ordering: Ordering
    matrix: np.ndarray = field(repr=False)


def symplectic_form(n_modes: int, ordering=Ordering.BLOCKED) -> SymplecticForm:
    """Integer commutator matrix with [R_i, R_j] = i Omega_ij."""
    if n_modes < 1:
        raise DimensionMismatch("n_modes must be >= 1")
    ordering = _as_ordering(ordering)
    n = n_modes
    omega = np.zeros((2 * n, 2 * n), dtype=np.int64)
    if ordering is Ordering.BLOCKED:
        omega[:n, n:] = np.eye(n, dtype=np.int64)
        omega[n:, :n] = -np.eye(n, dtype=np.int64)
    else:
        for k in range(n):
            omega[2 * k, 2 * k + 1] = 1
            omega[2 * k + 1, 2 * k] = -1
    omega.setflags(write=False)
    return SymplecticForm(n, ordering, omega)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def uncertainty_margin(cov, ordering=Ordering.BLOCKED) -> float:
    """Smallest eigenvalue of the Hermitian matrix cov + (i/2) Omega."""
    cov = np.asarray(cov, dtype=float)
    omega = symplectic_form(cov.shape[0] // 2, ordering).matrix
    return float(np.linalg.eigvalsh(cov + 0.5j * omega)[0])


@dataclass(frozen=True, eq=False)
class MomentState:
    """First and second moments of the particles described by ``frame``.

    ``physical`` records whether cov + (i/2) Omega is positive semidefinite
    within ``PSD_TOL``; unphysical data is kept because the frame maps are
    linear and stay exact on any symmetric matrix.
    """

    system: ParticleSystem
    frame: str
    mean: np.ndarray
    cov: np.ndarray
    ordering: Ordering = Ordering.BLOCKED
    psd_margin: float = 0.0

    @property
    def described(self) -> tuple:
        return self.system.described(self.frame)

    @property
    def n_modes(self) -> int:
        return self.system.n - 1

    @property
    def physical(self) -> bool:
        return self.psd_margin >= -PSD_TOL

    def slot(self, label, quadrature: str) -> int:
        """Row of ``quadrature`` ('x' or 'p') of ``label`` in the current ordering."""
        try:
            k = self.described.index(label)
        except ValueError:
            raise UnknownLabel(
                f"particle {label!r} is not described from {self.frame!r}"
            ) from None
        n = self.n_modes
        if quadrature == "x":
            return k if self.ordering is Ordering.BLOCKED else 2 * k
        if quadrature == "p":
            return n + k if self.ordering is Ordering.BLOCKED else 2 * k + 1
        raise ValueError(f"quadrature must be 'x' or 'p', got {quadrature!r}")

    def blocked(self) -> "MomentState":
        return reorder(self, Ordering.BLOCKED)

    # blocked sub-blocks, regardless of the stored ordering
    @property
    def X(self) -> np.ndarray:
        n = self.n_modes
        return self.blocked().cov[:n, :n]

    @property
    def P(self) -> np.ndarray:
        n = self.n_modes
        return self.blocked().cov[n:, n:]

    @property
    def XP(self) -> np.ndarray:
        n = self.n_modes
        return self.blocked().cov[:n, n:]

    def particle_block(self, label) -> np.ndarray:
        """2x2 covariance matrix (x, p) of a single described particle."""
        i, j = self.slot(label, "x"), self.slot(label, "p")
        return self.cov[np.ix_([i, j], [i, j])]

    def subsystem(self, labels: Iterable) -> np.ndarray:
        """Interleaved covariance matrix of the listed described particles."""
        idx = []
        for label in labels:
            idx += [self.slot(label, "x"), self.slot(label, "p")]
        return self.cov[np.ix_(idx, idx)]

    def with_moments(self, mean, cov) -> "MomentState":
        return make_state(self.system, self.frame, mean, cov, self.ordering)

    def __repr__(self):
        flag = "PASS" if self.physical else "UNPHYSICAL"
        return (
            f"MomentState(frame={self.frame!r}, described={self.described}, "
            f"ordering={self.ordering.value}, physicality={flag})"
        )


def make_state(system: ParticleSystem, frame, mean, cov, ordering=Ordering.BLOCKED) -> MomentState:
    """Build a perspective state of ``system`` seen from ``frame``."""
    ordering = _as_ordering(ordering)
    system.check(frame)
    dim = 2 * (system.n - 1)
    mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    if mean.shape != (dim,):
        raise DimensionMismatch(f"mean must have length {dim}, got {mean.shape}")
    if cov.shape != (dim, dim):
        raise DimensionMismatch(f"cov must be {dim}x{dim}, got {cov.shape}")
    if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
        raise DimensionMismatch("moments must be finite")
    asym = float(np.max(np.abs(cov - cov.T)))
    if asym > SYM_TOL:
        raise NonSymmetric(f"cov asymmetry {asym:.3g} exceeds {SYM_TOL:g}")
    cov = 0.5 * (cov + cov.T)
    margin = uncertainty_margin(cov, ordering)
    return MomentState(system, frame, _frozen(mean), _frozen(cov), ordering, margin)


def reorder(state: MomentState, ordering) -> MomentState:
    """Apply the fixed blocked <-> interleaved slot permutation."""
    ordering = _as_ordering(ordering)
    if ordering is state.ordering:
        return state
    perm = interleave_permutation(state.n_modes)
    if ordering is Ordering.BLOCKED:
        perm = np.argsort(perm)
    mean = state.mean[perm]
    cov = state.cov[np.ix_(perm, perm)]
    return MomentState(state.system, state.frame, _frozen(mean), _frozen(cov), ordering, state.psd_margin)


def random_state(system: ParticleSystem, frame, seed, nu_range=(0.5, 3.0), ordering=Ordering.BLOCKED) -> MomentState:
    """Random physical state Sigma = S diag(nu) S^T with S = exp(Omega G).

    G is a random symmetric matrix with entries uniform in [-1, 1]; the
    symplectic eigenvalues are drawn uniformly from ``nu_range`` (a pair, or
    a single value for a fixed spectrum).  Means are uniform in [-1, 1].
    """
    if np.isscalar(nu_range):
        lo = hi = float(nu_range)
    else:
        lo, hi = (float(v) for v in nu_range)
    if not (lo >= 0.5 and hi >= lo and math.isfinite(hi)):
        raise InvalidNuRange(f"nu_range must lie in [1/2, inf), got {nu_range!r}")
    system.check(frame)
    n = system.n - 1
    rng = np.random.default_rng(seed)
    g = rng.uniform(-1.0, 1.0, size=(2 * n, 2 * n))
    g = np.triu(g) + np.triu(g, 1).T
    nu = rng.uniform(lo, hi, size=n) if hi > lo else np.full(n, lo)
    mean = rng.uniform(-1.0, 1.0, size=2 * n)
    omega = symplectic_form(n).matrix
    s = expm(omega @ g)
    cov = s @ np.diag(np.concatenate([nu, nu])) @ s.T
    cov = 0.5 * (cov + cov.T)
    state = make_state(system, frame, mean, cov)
    return reorder(state, ordering)


# -- observables -----------------------------------------------------------


class Observable:
    """Real linear combination of single-particle x and p operators."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for key, c in (terms or {}).items():
            c = float(c)
            if c != 0.0:
                clean[key] = c
        self.terms = clean

    def __add__(self, other):
        if not isinstance(other, Observable):
            return NotImplemented
        terms = dict(self.terms)
        for key, c in other.terms.items():
            terms[key] = terms.get(key, 0.0) + c
        return Observable(terms)

    def __neg__(self):
        return Observable({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return Observable({k: float(scalar) * c for k, c in self.terms.items()})

    __rmul__ = __mul__

    def labels(self):
        return {label for _, label in self.terms}

    def vector(self, state: MomentState) -> np.ndarray:
        c = np.zeros(2 * state.n_modes)
        for (quad, label), coef in self.terms.items():
            c[state.slot(label, quad)] += coef
        return c

    def __repr__(self):
        parts = [f"{c:+g}*{q}_{l}" for (q, l), c in sorted(self.terms.items())]
        return "Observable(" + " ".join(parts) + ")"


def x(label) -> Observable:
    return Observable({("x", label): 1.0})


def p(label) -> Observable:
    return Observable({("p", label): 1.0})


def momentum_sum(labels: Iterable) -> Observable:
    """Aggregate momentum sum_K p_K over ``labels``."""
    total = Observable()
    for label in labels:
        total = total + p(label)
    return total


def p_bar(system: ParticleSystem, *excluded) -> Observable:
    """Momentum of everything except ``excluded``: p_{I-bar} or p_{IJ-bar}."""
    system.check(*excluded)
    return momentum_sum(l for l in system.labels if l not in excluded)


class QueryKind(enum.Enum):
    VAR = "var"
    COV = "cov"
    CORR = "corr"
    MEAN = "mean"


@dataclass(frozen=True)
class MomentQuery:
    kind: QueryKind
    operands: tuple


def Var(a: Observable) -> MomentQuery:
    return MomentQuery(QueryKind.VAR, (a,))


def Cov(a: Observable, b: Observable) -> MomentQuery:
    return MomentQuery(QueryKind.COV, (a, b))


def Corr(a: Observable, b: Observable) -> MomentQuery:
    return MomentQuery(QueryKind.CORR, (a, b))


def Mean(a: Observable) -> MomentQuery:
    return MomentQuery(QueryKind.MEAN, (a,))


def moment(state: MomentState, query: MomentQuery) -> float:
    """Evaluate a first or symmetrized second moment of linear observables."""
    vecs = [op.vector(state) for op in query.operands]
    if query.kind is QueryKind.MEAN:
        return float(vecs[0] @ state.mean)
    if query.kind is QueryKind.VAR:
        return float(vecs[0] @ state.cov @ vecs[0])
    cab = float(vecs[0] @ state.cov @ vecs[1])
    if query.kind is QueryKind.COV:
        return cab
    sa = math.sqrt(max(float(vecs[0] @ state.cov @ vecs[0]), 0.0))
    sb = math.sqrt(max(float(vecs[1] @ state.cov @ vecs[1]), 0.0))
    if sa <= ZERO_TOL or sb <= ZERO_TOL:
        raise ZeroVarianceCorrelation("correlation with a zero-variance operand is undefined")
    return cab / (sa * sb)
