"""Grid-BP cooperative localization: grid-cell ids, sparse beliefs, simulation."""

from .belief import (
    Belief,
    DegenerateInputError,
    OpCounter,
    SampleSet,
    belief_product,
    candidate_window,
    cavity,
    damped_update,
    filter_belief,
    has_converged,
    map_estimate,
    point_estimate,
    total_variation,
)
from .bp import (
    BpParams,
    Message,
    RangeMeasurement,
    bp_round,
    displacement_steps,
    gibbs_message,
    kernel_width,
    map_dm_to_id,
    message_record,
    pairwise_likelihood,
)
from .experiment import (
    PRESETS,
    ExperimentPlan,
    SummaryRow,
    complexity_counters,
    emit_csv,
    run_plan,
    trial_seed,
)
from .grid import (
    ExtentError,
    GridError,
    GridParseError,
    MgrsGrid,
    MgrsId,
    PlanarGrid,
    PlanarId,
    center_of,
    common_prefix_strip,
    format_mgrs,
    id_of,
    offset_id,
    parse_mgrs,
)
from .sim import (
    NodeState,
    ScenarioConfig,
    ScenarioError,
    TrialResult,
    compute_rmse,
    generate_scenario,
    init_beliefs,
    measure_ranges,
    run_noncooperative_baseline,
    run_time_slot,
    run_trial,
)

__version__ = "0.1.0"
