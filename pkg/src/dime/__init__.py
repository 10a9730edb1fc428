"""Sequential influence-maximization planning on uncertain social networks."""

from .network import (
    Edge,
    EdgeObservation,
    InstantiatedNetwork,
    NetworkError,
    UncertainNetwork,
    apply_observations,
    certainty_equivalent,
    decorate_uniform,
    generate_watts_strogatz,
    load_network,
    network_document,
    network_json,
    sample_instantiation,
    threshold_filter,
)
from .diffusion import (
    GenerativeSample,
    InstanceTooLargeError,
    diffuse_one_step,
    diffuse_steps,
    exact_expected_influence,
    generative_step,
)
from .pomdp import (
    ActionSet,
    InitialBelief,
    ObservationValue,
    PomdpState,
    SessionHistory,
    observation_edges,
    reward,
    sample_initial_state,
)
from .partitioner import Partitioning, induced_subnetwork, partition
from .tasp import KLevelTree, PlanningError, ReplayContext, TaspConfig, tasp_solve
from .heal import (
    EpisodeResult,
    PlanSession,
    Recommendation,
    SessionExhaustedError,
    record_execution,
    recommend,
    run_policy,
    start_session,
)
from .oracle import PolicyValue, brute_force_policy_value, verify_hidden_hub_bound, verify_submodularity_violation
from .baselines import degree_select, greedy_select, make_strategy, random_select, simulate_episode
from .experiments import ExperimentSpec, indirect_influence, run_experiment, spec_from_json

__version__ = "0.1.0"
