"""lqplab: linear query protocols for element extraction, desk scale.

Build and run k-round query trees over GF(2), Z_q, and bounded integers;
lift and shrink them through uniform families (round elimination); and
certify the rounds-vs-queries tradeoff against brute-force oracles and
closed-form bounds.
"""

from .errors import (
    BoundedIntOverflow,
    CapExceeded,
    CertificationBudgetExceeded,
    CodecError,
    DimensionMismatch,
    LqpError,
    MissingEdge,
    NoSuchEdge,
    SunflowerSearchRefused,
    TooSmall,
)
from .rings import Measurement, QueryMatrix, RingSpec, Vec01, mat_vec

__version__ = "0.1.0"

__all__ = [
    "BoundedIntOverflow",
    "CapExceeded",
    "CertificationBudgetExceeded",
    "CodecError",
    "DimensionMismatch",
    "LqpError",
    "Measurement",
    "MissingEdge",
    "NoSuchEdge",
    "QueryMatrix",
    "RingSpec",
    "SunflowerSearchRefused",
    "TooSmall",
    "Vec01",
    "mat_vec",
    "__version__",
]
