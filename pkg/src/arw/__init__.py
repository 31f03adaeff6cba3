"""Gaussian random Laplacian eigenfunctions on flat tori.

Sampling of the Gaussian eigenfunction ensemble, exact lattice-shell
arithmetic, nodal domain/component counting on periodic grids, exact
trigonometric-polynomial algebraization, and Monte-Carlo concentration
experiments for the scaled component count.
"""

from . import algebra, config, errors, experiments, field, gridio, lattice, nodal, rng
from .experiments import MPolicy, TrialRecord, proof_exponents, run_trials
from .field import FieldGrid, WaveSample, eval_grid, eval_point, sample_coefficients
from .lattice import LatticeShell, enumerate_shell, representation_count
from .nodal import NodalSummary, analyze

__version__ = "0.1.0"

__all__ = [
    "algebra",
    "analyze",
    "config",
    "enumerate_shell",
    "errors",
    "eval_grid",
    "eval_point",
    "experiments",
    "field",
    "FieldGrid",
    "gridio",
    "lattice",
    "LatticeShell",
    "MPolicy",
    "nodal",
    "NodalSummary",
    "proof_exponents",
    "representation_count",
    "rng",
    "run_trials",
    "sample_coefficients",
    "TrialRecord",
    "WaveSample",
    "__version__",
]
