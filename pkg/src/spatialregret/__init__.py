"""Data-driven structured controller synthesis with spatial-regret objectives."""

from .errors import SpatialRegretError
from .evaluation import ClosedLoopFrf, closed_loop_frf, h2_norm, hinf_norm, spatial_regret_value
from .frf import GeneralizedPlantFrf, estimate_frf, impulse_experiments
from .grid import FrequencyGrid, make_log_grid
from .lti import StateSpaceModel, build_power_grid, assemble_networked
from .structure import SparsityPattern, build_factor_parameterization, pattern_from_graph
from .synthesis import SpatialRegret, iterate_synthesis, synthesize_oracle

__version__ = "0.1.0"
