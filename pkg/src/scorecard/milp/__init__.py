from .simplex import LPProblem, LPSolution, SimplexError, relaxation, simplex_solve
from .branch_bound import SolveResult, branch_and_bound
from .oracle import OracleResult, exhaustive_oracle
