"""Exception types shared across the package."""


class UPTError(Exception):
    """Base class for errors raised by the testing pipeline."""


class NotPositiveDefiniteError(UPTError, ValueError):
    pass


class ComponentTooLargeError(UPTError):
    """A connected component exceeds the exhaustive-search cap.

    Signals that the separable-after-screening structure did not hold for
    this replicate; carries the offending size so harness code can log it.
    """

    def __init__(self, size, cap):
        self.size = int(size)
        self.cap = int(cap)
        super().__init__(
            f"component of size {self.size} exceeds cap {self.cap}; "
            "graph is not separable after screening"
        )


class TuningError(UPTError, ValueError):
    pass


class NegativeRadicandError(TuningError):
    def __init__(self, radicand):
        self.radicand = float(radicand)
        super().__init__(
            f"t2* radicand is negative ({self.radicand:.6g}); "
            "pass clamp=True to clamp t2 to 0"
        )


class NoExceedanceError(TuningError):
    def __init__(self, t1):
        self.t1 = float(t1)
        super().__init__(
            f"no marginal statistic exceeds t1={self.t1:.4g}; use a smaller t1"
        )
