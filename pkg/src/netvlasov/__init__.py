"""Adaptive networks, their graph limit and their Vlasov-type mean-field limit."""

from .continuum import GridSolution, graph_limit_rhs, integrate_graph_limit, project_initial
from .errors import BlowUpError, ConfigurationError, DomainError, InitializationError
from .harness import ExperimentConfig, RunReport, fit_loglog_slope, run_experiment
from .intermediate import ReplicaEnsemble, coupling_error, integrate_intermediate, intermediate_rhs
from .kernels import (
    KernelSpec,
    WeightDynamicsSpec,
    eval_lambda,
    eval_phi,
    get_lambda,
    get_phi,
    validate_hypotheses,
)
from .metrics import (
    DiscreteMeasure,
    FiberedDiscreteMeasure,
    d1_fibered,
    dbl_discrete,
    empirical_measures,
    mean_measure,
)
from .particle import (
    ParticleState,
    Trajectory,
    integrate_particle,
    lambda_cell_average,
    particle_rhs,
    weight_bound_margin,
)
from .vlasov import (
    BoundConstants,
    FiberedEnsemble,
    a_priori_checks,
    init_fibered,
    integrate_vlasov,
    vlasov_force,
)

__version__ = "0.1.0"
