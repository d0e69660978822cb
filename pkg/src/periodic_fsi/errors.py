"""Failure types shared by the solvers.

Each class carries a short machine-readable ``failure_class`` that the command
line maps to an exit status.
"""


class FSIError(RuntimeError):
    failure_class = "error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def report(self):
        out = {"failure_class": self.failure_class, "message": str(self)}
        for key, val in self.details.items():
            out[key] = val
        return out


class ConfigError(FSIError):
    failure_class = "invalid-config"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations),
                         violations=self.violations)


class SolverFailure(FSIError):
    failure_class = "solver-failure"


class AssemblyFailure(FSIError):
    failure_class = "assembly-failure"


class PeriodicityDefect(FSIError):
    failure_class = "periodicity-defect"


class BallViolation(FSIError):
    failure_class = "ball-violation"


class DomainDegeneracy(FSIError):
    failure_class = "domain-degeneracy"


class DivergenceFailure(FSIError):
    failure_class = "non-contraction"


class VerificationFailure(FSIError):
    failure_class = "verification-failed"
