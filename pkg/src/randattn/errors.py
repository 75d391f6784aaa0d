"""Exception types shared across the estimators and the harness."""


class InvalidArgumentError(ValueError):
    pass


class NumericalError(ArithmeticError):
    """A computation hit a numerically degenerate state."""


class FeatureOverflowError(NumericalError, OverflowError):
    def __init__(self, magnitude: float):
        self.magnitude = float(magnitude)
        super().__init__(
            f"feature-map exponent {self.magnitude:.6g} exceeds the overflow guard (700)"
        )


class DegenerateDenominatorError(NumericalError):
    def __init__(self, query_index: int, magnitude: float):
        self.query_index = int(query_index)
        self.magnitude = float(magnitude)
        super().__init__(
            f"denominator magnitude {self.magnitude:.3g} below 1e-30 at query {self.query_index}"
        )


class DegeneratePointError(NumericalError):
    """Every proposal density underflows at the probe point."""


class TensorFormatError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = int(offset)
        super().__init__(f"{message} (at byte offset {self.offset})")
