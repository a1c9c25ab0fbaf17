"""Fitting MOBA model curves and the teamfight parameter from match telemetry."""

from .fitting import (FitConfig, FitError, FittedParams, calibrate, curve_error,
                      empirical_estimates, fit_piecewise, fit_theta)
from .records import CorpusError, KillEvent, MatchRecord, load_corpus, save_corpus
from .stripping import RewardConfig, restore_gc_rewards, strip_gc_rewards
from .synth import synthesize_corpus
from .teamfights import cluster_kills, extract_teamfights, label_rounds

__all__ = [
    "FitConfig", "FitError", "FittedParams", "calibrate", "curve_error",
    "empirical_estimates", "fit_piecewise", "fit_theta", "CorpusError", "KillEvent",
    "MatchRecord", "load_corpus", "save_corpus", "RewardConfig", "restore_gc_rewards",
    "strip_gc_rewards", "synthesize_corpus", "cluster_kills", "extract_teamfights",
    "label_rounds",
]
