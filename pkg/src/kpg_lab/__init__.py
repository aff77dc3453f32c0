"""K-level policy gradients on small differentiable and tabular games."""
from .core import (DifferentiableGame, FunctionGame, InputError, JointParams, NumericError,
                   fd_gradient, fd_hessian_blocks, pack, unpack)
from .engine import OptimizerState, gsppm_solve, kpg_update, train
from .games import MeetupGame, QuadraticGame, matrix_game_make, quadratic_make, two_player_quadratic
from .theory import (assemble_blocks, estimate_constants, gsppm_ratio, spectral_extremes,
                     theorem1_bound, theorem3_bound)
from .trace import ConvergenceTrace, LearningRates

__version__ = "0.1.0"
