"""Matrix linear discriminant analysis with a nuclear-norm penalty."""
from .dataset import Dataset
from .errors import (DataFileError, DegenerateDataError, DegenerateDirectionError,
                     DivergenceError, InvalidInputError, MatLDAError)
from .lda import (DiscriminantModel, classify, encode_responses, fit_matrix_lda,
                  optimal_intercept)
from .matcore import nuclear_norm, soft_threshold, spectral_norm, svt, vec
from .simgen import SignalSpec, StudySpec, bayes_error, make_signal, run_monte_carlo
from .solver import FitConfig, SolverResult, fit_penalized
from .tuning import PathResult, bic_score, fit_path, omega_grid, tune

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DiscriminantModel", "FitConfig", "SolverResult", "PathResult",
    "SignalSpec", "StudySpec",
    "MatLDAError", "InvalidInputError", "DegenerateDataError", "DegenerateDirectionError",
    "DivergenceError", "DataFileError",
    "vec", "nuclear_norm", "spectral_norm", "svt", "soft_threshold",
    "fit_penalized", "encode_responses", "optimal_intercept", "fit_matrix_lda", "classify",
    "omega_grid", "bic_score", "fit_path", "tune",
    "make_signal", "bayes_error", "run_monte_carlo",
]
