from .descent import DescentOptions, ground_state
from .newton import newton_refine
from .records import (ConvergenceError, SolutionRecord, SolutionRejected, SolverError, Tolerances,
                      accept, l2_distance, make_record, node_count, violations)
from .shooting import (ShootingOutcome, excited_state, oracle_homogeneous, shoot,
                       shooting_profile, solve_unit_mass)
