"""Gaussian moment toolkit for relational quantum reference frames."""

from .core import (
    Corr,
    Cov,
    Mean,
    MomentState,
    Observable,
    Ordering,
    ParticleSystem,
    Var,
    make_state,
    moment,
    momentum_sum,
    new_system,
    p,
    p_bar,
    random_state,
    reorder,
    symplectic_form,
    x,
)
from .diagnostics import (
    covariance_determinants,
    criteria_invariance,
    determinant_invariance,
    entanglement_criteria,
    equivalence_conditions,
    gaussian_purity,
    momentum_relation_report,
    particle_purity,
    rs_uncertainty_check,
    symplectic_spectrum,
    triangle_report,
)
from .dynamics import (
    evolve,
    free_evolution_closed_form,
    free_hamiltonian,
    nonrelational_baseline,
    propagator,
    quadratic_hamiltonian,
    uncertainty_evolution,
    velocity_moments,
)
from .errors import QRFError
from .frame_transform import (
    apply_map,
    frame_map,
    predict_mixed_covariance,
    predict_momentum_moments,
    predict_position_moments,
    switch_frame,
)
from .oracle import (
    GridPolicy,
    analytic_moments,
    gaussian_spec,
    gaussian_wavefunction,
    grid_moments,
    oracle_compare,
    random_spec,
    spec_from_state,
    substitute_frame,
)

__all__ = [
    "analytic_moments",
    "apply_map",
    "Corr",
    "Cov",
    "covariance_determinants",
    "criteria_invariance",
    "determinant_invariance",
    "entanglement_criteria",
    "equivalence_conditions",
    "evolve",
    "frame_map",
    "free_evolution_closed_form",
    "free_hamiltonian",
    "gaussian_purity",
    "gaussian_spec",
    "gaussian_wavefunction",
    "grid_moments",
    "GridPolicy",
    "make_state",
    "Mean",
    "moment",
    "MomentState",
    "momentum_relation_report",
    "momentum_sum",
    "new_system",
    "nonrelational_baseline",
    "Observable",
    "oracle_compare",
    "Ordering",
    "p",
    "p_bar",
    "particle_purity",
    "ParticleSystem",
    "predict_mixed_covariance",
    "predict_momentum_moments",
    "predict_position_moments",
    "propagator",
    "QRFError",
    "quadratic_hamiltonian",
    "random_spec",
    "random_state",
    "reorder",
    "rs_uncertainty_check",
    "spec_from_state",
    "substitute_frame",
    "switch_frame",
    "symplectic_form",
    "symplectic_spectrum",
    "triangle_report",
    "uncertainty_evolution",
    "Var",
    "velocity_moments",
    "x",
]

__version__ = "0.1.0"
