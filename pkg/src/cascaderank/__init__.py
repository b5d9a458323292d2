"""cascaderank: a desk-scale cascading learning-to-rank playground.

Synthetic corpus and engagement-log generation, position/age de-biased label
generation, featurization, six ranking models behind one contract, dual-source
stacking, a staged ranking funnel with a re-ranker, and an offline evaluation
harness with replay metrics.
"""

__version__ = "0.1.0"

from .errors import CascadeRankError, ConfigError, DataError, NumericalError

__all__ = [
    "CascadeRankError",
    "ConfigError",
    "DataError",
    "NumericalError",
    "__version__",
]
