"""Fair post-processing of soft classifiers under user-defined happiness functions."""

from .core import Dataset, HappinessSpec, LabelSpace, Sample, eval_happiness, happiness_from_exprs
from .criteria import equalized_odds_happiness, overall_accuracy_happiness, statistical_parity_happiness
from .estimators import EmpiricalMoments, estimate_moments, sample_size_bound
from .lp import LinearProgram, LPSolution, PostProcessor, build_fair_lp, build_gap_lp, solve_lp
from .postprocess import TradeoffCurve, TradeoffPoint, sweep

__version__ = "0.1.0"

__all__ = [
    "Dataset", "EmpiricalMoments", "HappinessSpec", "LPSolution", "LabelSpace", "LinearProgram",
    "PostProcessor", "Sample", "TradeoffCurve", "TradeoffPoint", "build_fair_lp", "build_gap_lp",
    "equalized_odds_happiness", "estimate_moments", "eval_happiness", "happiness_from_exprs",
    "overall_accuracy_happiness", "sample_size_bound", "solve_lp", "statistical_parity_happiness",
    "sweep",
]
