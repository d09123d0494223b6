from .indices import (
    brute_force_select_k,
    epsilon,
    greedy_select_k,
    joint_q_decomposition,
    joint_q_value,
    q_update,
    threshold_whittle_index,
    threshold_whittle_indices,
    whittle_estimate,
    whittle_estimates,
)
from .policies import (
    POLICIES,
    WIQL,
    EduQate,
    LearnerConfig,
    Myopic,
    RandomPolicy,
    TeacherPolicy,
    ThresholdWhittle,
    learn_from_batch,
    make_policy,
)
from .replay import Experience, ReplayBuffer

__all__ = [
    "POLICIES", "WIQL", "EduQate", "Experience", "LearnerConfig", "Myopic", "RandomPolicy",
    "ReplayBuffer", "TeacherPolicy", "ThresholdWhittle", "brute_force_select_k", "epsilon",
    "greedy_select_k", "joint_q_decomposition", "joint_q_value", "learn_from_batch",
    "make_policy", "q_update", "threshold_whittle_index", "threshold_whittle_indices",
    "whittle_estimate", "whittle_estimates",
]
