"""gverify: exact verification of graded bracket and bundle structures."""

__version__ = "0.1.0"

from .kernel import (  # noqa: F401
    EVEN,
    ODD,
    Chart,
    ChartMismatchError,
    ExprError,
    KernelError,
    NormalizationError,
    ParityError,
    Poly,
    Variable,
    WeightError,
)
