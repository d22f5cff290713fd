"""
Exception hierarchy for the PQ diffusion toolkit.
main.py is the only place that turns these into exit codes.
"""


class PQDiffusionError(Exception):
    """Base class for every error raised by this package"""


class GridError(PQDiffusionError, ValueError):
    """A time grid cannot be built or does not satisfy its invariants"""


class IntegrationError(PQDiffusionError, ArithmeticError):
    """Non-finite state met while integrating (stiffness or Riccati blow-up)"""

    def __init__(self, time, message=None):
        self.time = float(time)
        if message is None:
            message = (f"non-finite state encountered at t = {self.time:.6g}; "
                       "reduce dt or check the coefficient equation for a singularity")
        super().__init__(message)


class KernelNotZeroError(PQDiffusionError):
    """The memory kernel is not identically zero, so the formal solution does not apply"""

    def __init__(self, max_abs):
        self.max_abs = float(max_abs)
        super().__init__(f"memory kernel is not zero (max |G~| = {self.max_abs:.3e}); use solve_p instead")


class StatisticalQualityError(PQDiffusionError):
    """Too many trajectories were excluded as divergent"""

    def __init__(self, divergent, total, limit):
        self.divergent = int(divergent)
        self.total = int(total)
        self.limit = float(limit)
        super().__init__(f"{self.divergent}/{self.total} trajectories diverged "
                         f"(limit {self.limit:.1%}); reduce dt")


class ConfigError(PQDiffusionError):
    """Run configuration is invalid; carries one message per offending line"""

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))
