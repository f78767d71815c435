"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter is outside its documented range."""


class ContractError(ValueError):
    """Inputs violate a precondition (mismatched lengths, missing faces, ...)."""


class ClosureError(ContractError):
    """A simplex refers to a face that is not in the complex."""


class NoLoopError(RuntimeError):
    """No filtration radius produces a one-dimensional hole."""


class LiftRangeError(ValueError):
    def __init__(self, target, lo, hi):
        super().__init__(f"R_target={target:.6g} outside the lift domain [{lo:.6g}, {hi:.6g}]")
        self.target, self.lo, self.hi = target, lo, hi


class CalibrationError(RuntimeError):
    pass


class DegenerateEnsembleError(RuntimeError):
    """More than half of the realizations produced no r_min."""


class DomainExitError(RuntimeError):
    def __init__(self, message, last_valid):
        super().__init__(message)
        self.last_valid = last_valid


class ConvergenceError(RuntimeError):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class BifurcationError(RuntimeError):
    pass
