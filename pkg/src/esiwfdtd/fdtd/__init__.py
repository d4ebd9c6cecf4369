from .core import CpmlConfig, FieldState, InstabilityError, Solver, cfl_dt, step

__all__ = ["CpmlConfig", "FieldState", "InstabilityError", "Solver", "cfl_dt", "step"]
