"""
Declares the exceptions raised by the bellforge package.
"""


class BellforgeError(Exception):
    "Base class of every error raised on purpose by bellforge."
    pass


class ParameterError(BellforgeError, ValueError):
    "Raised when an argument is out of range or inconsistent with another one."
    pass


class CapacityError(BellforgeError):
    "Raised when a Bell scenario has too many deterministic strategies to build its linear program."
    pass


class SolverError(BellforgeError):
    "Raised when the linear program solver terminates without an optimum."
    pass


class InfeasibleError(SolverError):
    "Raised when the linear program has no feasible point."
    pass


class NonConvergenceError(SolverError):
    "Raised when the solver hits its iteration cap."
    pass
