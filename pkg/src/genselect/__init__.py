"""genselect: diverse-team generation, selection, and evaluation toolkit."""

from . import _kernels
from .backends import (
    BackendInterface,
    LiveBackend,
    LiveEndpoint,
    MockBackend,
    MockModelProfile,
    encode_quality_text,
    parse_quality_text,
)
from .btscore import (
    BTConfig,
    BTFit,
    JudgeDiagnostics,
    PairwiseVerdict,
    bt_win_rate,
    cohen_kappa,
    fit_bt,
    judge_diagnostics,
    mean_pairwise_kappa,
)
from .calibration import (
    CalibrationInput,
    RegimeReport,
    calibrate_s_star,
    classify_regimes,
    make_synthetic_pilot,
    pilot_selector_s_hats,
)
from .config import (
    ExperimentConfig,
    bundled_mock_config_path,
    config_from_dict,
    load_bundled_mock_config,
    load_config,
)
from .errors import (
    ArtifactError,
    ConfigError,
    DegenerateAgreementWarning,
    DegenerateVarianceError,
    DiversityDominatedError,
    GenselectError,
    NoExploitableDiversityError,
    NoOracleAdvantageError,
    RankDeficiencyError,
    SelectorQualityWarning,
    SeparationError,
)
from .harness import (
    CellSpec,
    DecoupledReport,
    ExperimentArtifact,
    RunRecord,
    SeparationReport,
    TaskSpec,
    bt_win_rate_table,
    check_zero_overlap,
    cost_summary,
    decoupled_evaluation,
    load_records,
    load_tasks,
    persist_records,
    run_cell,
    run_experiment,
    save_tasks,
    synthetic_battery,
    task_win_rates,
    validate_separation,
)
from .quality import (
    MonteCarloConfig,
    QualityDistribution,
    SelectorCurve,
    Team,
    TeamStats,
    cjt_vote_accuracy,
    crossover_threshold,
    expected_quality,
    homogeneous_quality,
    marginal_gain,
    nonlinear_crossover,
    selector_quality_hat,
    team_mean,
    team_oracle,
    team_stats,
)
from .report import (
    ForestResult,
    ForestRow,
    ReportBundle,
    build_cell_table,
    build_cost_table,
    build_decoupled_table,
    build_forest,
    build_judge_table,
    build_regime_report,
    build_regression_table,
    build_report,
    pilot_from_artifact,
    render_csv,
    render_markdown,
    write_report,
)
from .selectors import (
    BlendParams,
    Candidate,
    CandidatePool,
    SelectionOutcome,
    SelectorSpec,
    estimate_selector_quality,
    judge_panel_select,
    majority_vote,
    select_noisy_argmax,
    select_oracle,
    select_random,
    synthesize,
)
from .stats import (
    DesignMatrixSpec,
    MixedFitResult,
    OLSResult,
    TestResult,
    bootstrap_ci,
    clopper_pearson,
    glass_delta,
    hedges_g,
    holm_bonferroni,
    logit_reanalysis,
    min_detectable_effect,
    ols_hc3,
    power_for_effect,
    random_intercept_fit,
    sign_test,
    spearman_rho,
    two_proportion_chisq,
    welch_t,
)

__version__ = "0.1.0"
