"""Inverse propensity weighted ATT estimation for panel data where the
propensity score depends on latent factor loadings estimated by principal
components, with closed-form M-estimation standard errors."""

from ._backend import active_backend, available_backends
from .att import (
    AttEstimate,
    PipelineFit,
    att_variance,
    estimate_att,
    estimate_pipeline,
    hajek_att,
    influence_contributions,
)
from .diagnostics import (
    BalanceReport,
    FalsificationResult,
    OverlapReport,
    asd,
    att_weights,
    balance_report,
    falsification_run,
    overlap_report,
)
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DataError,
    DegenerateSeriesError,
    EstimandUndefinedError,
    EstimationError,
    ExtremePropensityWarning,
    FactorIPWError,
    OverlapError,
    SeparationError,
    SingularInformationError,
)
from .factors import FactorFit, RankSelection, estimate_factors, select_num_factors
from .io import RunConfig, emit_panel, load_panel, parse_config_file
from .panel import PanelData, prepare_returns
from .propensity import (
    PropensityFit,
    adjusted_beta_se,
    beta_variance,
    fit_logistic,
    information_matrix,
    phi_all,
    phi_i,
    score,
    score_loading_jacobian,
)
from .simulation import (
    CASE_SCALES,
    SCENARIO_BETAS,
    MonteCarloResult,
    ReplicationRecord,
    SimScenario,
    align_to_truth,
    assign_treatment,
    monte_carlo,
    benchmark_scenario,
    run_replication,
    simulate_factors,
    simulate_loadings,
    simulate_outcomes,
)

__version__ = "0.1.0"
