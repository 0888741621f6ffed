"""Multi-objective GFlowNets: preference-conditional samplers, metrics and active learning."""

from .core import Candidate, ContractError, Front, dominates, nondominated_filter
from .gflownet import PreferenceConditionalGFN, sample_candidates
from .metrics import gd_plus, hypervolume, r2_indicator
from .mobo import ALConfig, run_al_loop
from .reinforce import MOReinforce
from .scalarize import Scalarization, scalarize

__all__ = [
    "ALConfig", "Candidate", "ContractError", "Front", "MOReinforce", "PreferenceConditionalGFN",
    "Scalarization", "dominates", "gd_plus", "hypervolume", "nondominated_filter", "r2_indicator",
    "run_al_loop", "sample_candidates", "scalarize",
]
__version__ = "0.1.0"
