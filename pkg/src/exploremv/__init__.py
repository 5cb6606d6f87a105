"""Exploratory (entropy-regularized) continuous-time mean-variance
portfolio selection: analytic solutions, a reinforcement learner, an
MLE adaptive-control baseline, and a benchmark harness."""

from ._backend import BACKEND_NAME
from . import analytic, bench, learner, market, mle

__all__ = ["analytic", "bench", "learner", "market", "mle", "BACKEND_NAME"]
__version__ = "0.1.0"
