"""Rank-one coupled Gaussian ensembles: sampling, exact eigen-updates and width statistics."""
from .ensembles import EnsembleParams, PerturbedSpectrum, UnperturbedSpectrum
from .harness import ExperimentConfig, Report, run_experiment

__all__ = ["EnsembleParams", "PerturbedSpectrum", "UnperturbedSpectrum",
           "ExperimentConfig", "Report", "run_experiment"]
