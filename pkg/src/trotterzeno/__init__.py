"""Trotter, Suzuki and quantum Zeno product formulas on truncated Fock spaces."""

__version__ = "0.1.0"

from .exceptions import (
    ConfigError,
    DenseLimitError,
    FitError,
    NumericalError,
    StepSizeUnderflow,
    TruncationError,
)
from .fock import (
    FockBasis,
    Ket,
    annihilation,
    cat_state,
    coherent_state,
    creation,
    fock_state,
    identity,
    maximally_mixed,
    number_operator,
    parity_operator,
    random_density_matrix,
)
from .liouville import (
    Liouvillian,
    ProjectorSuperop,
    SuperOperatorMatrix,
    commutator_generator,
    conjugation_superop,
    dissipator,
    flatten,
    gksl,
    projector_superop,
    unvec,
    vec,
)
from .metrics import (
    ConvergenceReport,
    SobolevWeight,
    drift_diagnostics,
    drift_inequality_check,
    fit_order,
    flattened_operator_norm,
    moment_stability_check,
    relative_bound_diagnostic,
    sobolev_norm,
    trace_norm,
    zeno_condition_check,
)
from .models import (
    Modulation,
    Monomial,
    NumberTerm,
    PolynomialSpec,
    build_hamiltonian,
    cat_projector,
    l_photon_dissipation,
    logical_x,
    ou_generator,
    schedule_from_spec,
    zeno_gate_target,
)
from .propagators import (
    PropagatorCache,
    Schedule,
    evolution_system_step,
    expm,
    reference_evolution,
    semigroup_step,
)
from .schemes import (
    Partition,
    SplittingScheme,
    ZenoSpec,
    make_uniform_power_contraction,
    strang_product,
    suzuki_product,
    telescopic_defect,
    time_dependent_trotter,
    trotter_product,
    zeno_product,
    zeno_product_general,
)

__all__ = [
    "__version__",
    "ConfigError",
    "DenseLimitError",
    "FitError",
    "NumericalError",
    "StepSizeUnderflow",
    "TruncationError",
    "FockBasis",
    "Ket",
    "annihilation",
    "cat_state",
    "coherent_state",
    "creation",
    "fock_state",
    "identity",
    "maximally_mixed",
    "number_operator",
    "parity_operator",
    "random_density_matrix",
    "Liouvillian",
    "ProjectorSuperop",
    "SuperOperatorMatrix",
    "commutator_generator",
    "conjugation_superop",
    "dissipator",
    "flatten",
    "gksl",
    "projector_superop",
    "unvec",
    "vec",
    "ConvergenceReport",
    "SobolevWeight",
    "drift_diagnostics",
    "drift_inequality_check",
    "fit_order",
    "flattened_operator_norm",
    "moment_stability_check",
    "relative_bound_diagnostic",
    "sobolev_norm",
    "trace_norm",
    "zeno_condition_check",
    "Modulation",
    "Monomial",
    "NumberTerm",
    "PolynomialSpec",
    "build_hamiltonian",
    "cat_projector",
    "l_photon_dissipation",
    "logical_x",
    "ou_generator",
    "schedule_from_spec",
    "zeno_gate_target",
    "PropagatorCache",
    "Schedule",
    "evolution_system_step",
    "expm",
    "reference_evolution",
    "semigroup_step",
    "Partition",
    "SplittingScheme",
    "ZenoSpec",
    "make_uniform_power_contraction",
    "strang_product",
    "suzuki_product",
    "telescopic_defect",
    "time_dependent_trotter",
    "trotter_product",
    "zeno_product",
    "zeno_product_general",
]
