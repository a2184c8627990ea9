"""patchsim: quantify software-update strategies against APT campaign timelines.

Replays per-product release histories and attributed campaign events over a
month-granular window to compute, per update strategy, the conditional
probability of compromise, update cost, odds ratios, confidence intervals,
and exploit-age survival.
"""

from .campaigns import (
    AttackScenario,
    ExposureMatrix,
    TieRule,
    build_campaign_matrix,
    classify_attack,
    classify_campaign,
    fix_month,
    venn_counts,
)
from .catalog import (
    AttackVector,
    CampaignRecord,
    Catalog,
    LoadError,
    ReleaseTimeline,
    SoftwareProduct,
    VersionRelease,
    Violation,
    VulnRecord,
    catalog_diagnostics,
    load_catalog,
    save_catalog,
    validate_catalog,
)
from .evaluator import (
    CampaignOutcome,
    EvaluationReport,
    evaluate,
    odds_ratio,
    overall_probability,
    probability_at,
    successful_months,
)
from .months import (
    AfterHorizonError,
    BeforeEpochError,
    DataError,
    Horizon,
    MonthFormatError,
    format_month,
    parse_month,
)
from .stats import (
    BinomialCI,
    ExploitAgeSample,
    SurvivalCurve,
    agresti_coull,
    exploit_ages,
    kaplan_meier,
    normal_quantile,
    pairwise_agreement,
)
from .strategies import (
    ConfigurationError,
    DeploymentMatrix,
    MatrixSpace,
    Scenario,
    ScenarioError,
    StrategyConfig,
    StrategyKind,
    apply_apt_first,
    build_immediate,
    build_matrix,
    build_planned,
    build_reactive,
    count_updates,
    initial_versions,
)
from .versions import (
    Ordering,
    VersionConstraint,
    affected_releases,
    compare_versions,
    first_nonvulnerable,
    version_key,
)

__version__ = "0.1.0"
