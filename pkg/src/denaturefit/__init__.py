"""Two-state chemical denaturation fits with linear extrapolation of dG.

Fits in three parameterizations of the linear free-energy model, with
marginal, re-optimization search and Monte Carlo confidence intervals.
"""

from .confidence import (
    CIMethod,
    ConfidenceInterval,
    McMode,
    Relation,
    fit_best,
    marginal_ci,
    monte_carlo_ci,
    monte_carlo_ensemble,
    profile_trace,
    propagate_error,
    propagate_third,
    search_ci,
    shortest_interval,
)
from .lm import FitError, FitResult, LmOptions, MaxIterationsError, lm_fit
from .model import (
    DenaturationDataset,
    FullParams,
    LemForm,
    LemParams,
    LemTriple,
    ModelConstants,
    convert,
    initial_guess,
    model_signal,
    to_triple,
)
from .rng import GaussianNoise, LorentzianNoise, Mt19937
from .synth import SyntheticSpec, generate, nine_standard

__version__ = "0.1.0"

__all__ = [
    "CIMethod",
    "ConfidenceInterval",
    "McMode",
    "Relation",
    "fit_best",
    "marginal_ci",
    "monte_carlo_ci",
    "monte_carlo_ensemble",
    "profile_trace",
    "propagate_error",
    "propagate_third",
    "search_ci",
    "shortest_interval",
    "DenaturationDataset",
    "FullParams",
    "LemForm",
    "LemParams",
    "LemTriple",
    "ModelConstants",
    "convert",
    "initial_guess",
    "model_signal",
    "to_triple",
    "FitError",
    "FitResult",
    "LmOptions",
    "MaxIterationsError",
    "lm_fit",
    "GaussianNoise",
    "LorentzianNoise",
    "Mt19937",
    "SyntheticSpec",
    "generate",
    "nine_standard",
]
