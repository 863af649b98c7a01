"""Context-aware status updating: urgency of information, the drift-plus-penalty
update policy, RVI baselines and the tracking-control reduction."""

from .metrics import step_age, step_error, step_error_delayed, uoi
from .policies import (AdaptivePolicyParams, PolicyDecision, PolicySpec, VirtualQueue, adaptive_decide,
                       periodic_decide, randomized_decide, tabular_decide, update_index, virtual_queue_step)
from .processes import (Channel, ConfigurationError, Constant, ConstantIncrement, IncrementProcess, Scheduled,
                        TwoPointIid, make_rng, sample_channel, sample_increment, sample_weight)
from .sim import (RunSummary, ScenarioConfig, Trace, compare_policies, drift_diagnostic, run,
                  theorem1_bound)

__version__ = "0.1.0"
