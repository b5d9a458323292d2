"""Command line interface and the experiment pipeline behind it."""

from .experiment import ExperimentConfig
from .pipeline import run_reproduce

__all__ = ["ExperimentConfig", "run_reproduce"]
