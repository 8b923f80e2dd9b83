"""Matrix LDA: response coding, penalised fit, intercept correction, classification."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .dataset import Dataset
from .errors import DegenerateDirectionError, InvalidInputError
from .solver import FitConfig, SolverResult, fit_penalized

#: projections ``(mu2 - mu1)^T vec(B)`` at or below this magnitude are degenerate
DIRECTION_TOL = 1e-12


def encode_responses(d: Dataset) -> np.ndarray:
    """``-n/n1`` for class 1 and ``+n/n2`` for class 2; sums to zero."""
    n1, n2 = d.require_both_classes()
    n = d.n
    return np.where(d.labels == 1, -n / n1, n / n2)


def class_means(d: Dataset):
    d.require_both_classes()
    lab = d.labels
    return d.X[lab == 1].mean(axis=0), d.X[lab == 2].mean(axis=0)


def pooled_quadratic_form(d: Dataset, B) -> float:
    """``vec(B)^T S vec(B)`` for the pooled within-class covariance ``S`` (denominator ``n - 2``).

    Computed from the projections ``<X_i - mu_g, B>`` without forming ``S``.
    """
    d.require_both_classes()
    if d.n <= 2:
        raise InvalidInputError("pooled covariance needs n > 2")
    B = d.check_matrix(B)
    mu1, mu2 = class_means(d)
    proj = d.scores(B)
    proj = proj - np.where(d.labels == 1, np.vdot(mu1, B), np.vdot(mu2, B))
    return float(proj @ proj) / (d.n - 2)


def optimal_intercept(d: Dataset, B):
    """Closed-form LDA intercept for direction ``B``.

    Returns ``(beta0_tilde, b_oriented)``. When ``B`` points from class 2
    towards class 1 the direction is flipped first, so the returned rule is
    always ``<X, b_oriented> + beta0_tilde > 0  =>  class 2``.
    """
    n1, n2 = d.require_both_classes()
    B = d.check_matrix(B)
    mu1, mu2 = class_means(d)
    gap = float(np.vdot(mu2 - mu1, B))
    if abs(gap) <= DIRECTION_TOL:
        raise DegenerateDirectionError(
            "direction is orthogonal to the class-mean difference; intercept undefined")
    if gap < 0:
        B, gap = -B, -gap
    quad = pooled_quadratic_form(d, B)
    beta0 = -float(np.vdot(mu1 + mu2, B)) / 2.0 + quad / gap * np.log(n2 / n1)
    return beta0, B


@dataclass(frozen=True)
class DiscriminantModel:
    b_hat: np.ndarray
    beta0_tilde: float
    omega: float
    rank: int
    singulars: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.b_hat.shape

    def decision_function(self, X) -> np.ndarray:
        """Scores ``<X_i, b_hat> + beta0_tilde`` for one matrix or a stack of them."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 2
        if single:
            X = X[None]
        if X.ndim != 3 or X.shape[1:] != self.b_hat.shape:
            raise InvalidInputError(
                f"samples of shape {X.shape[1:]} do not match model shape {self.b_hat.shape}")
        s = X.reshape(X.shape[0], -1) @ self.b_hat.ravel() + self.beta0_tilde
        return s[0] if single else s

    def predict(self, X) -> np.ndarray:
        return np.where(np.atleast_1d(self.decision_function(X)) > 0, 2, 1)


def classify(m: DiscriminantModel, X) -> int:
    """Class 2 iff ``<X, b_hat> + beta0_tilde > 0``; exact ties go to class 1."""
    X = matcore.as_mat(X, "sample")
    return 2 if m.decision_function(X) > 0 else 1


def _summary(res: SolverResult, cfg: FitConfig) -> dict:
    return {
        "loss": cfg.loss,
        "penalty": cfg.penalty,
        "iterations": res.iterations,
        "converged": res.converged,
        "objective": res.objective,
        "final_grad_map_norm": res.final_grad_map_norm,
        "beta0_hat": res.beta0_hat,
    }


def model_from_solution(d: Dataset, res: SolverResult, cfg: FitConfig) -> DiscriminantModel:
    """Attach the classification intercept to a solver result.

    For the squared loss the closed-form LDA intercept replaces the solver's;
    a null direction keeps ``B = 0`` and uses the prior log-odds, so every
    point goes to the larger class. The logistic loss keeps its own intercept.
    """
    n1, n2 = d.require_both_classes()
    B = res.b_hat
    s = np.linalg.svd(B, compute_uv=False)
    rank = matcore.numerical_rank(s)
    diag = _summary(res, cfg)
    if cfg.loss == "logistic":
        beta0 = res.beta0_hat
    elif rank == 0:
        B = np.zeros_like(B)
        beta0 = float(np.log(n2 / n1))
    else:
        beta0, B = optimal_intercept(d, B)
    return DiscriminantModel(B, float(beta0), float(cfg.omega), rank, s[:rank].copy(), diag)


def fit_matrix_lda(d: Dataset, cfg: FitConfig, init=None) -> DiscriminantModel:
    """Code the labels, solve the penalised problem and correct the intercept."""
    y = encode_responses(d)
    res = fit_penalized(d, y, cfg, init=init)
    return model_from_solution(d, res, cfg)


def lda_direction(d: Dataset) -> np.ndarray:
    """Classical LDA direction ``S^{-1}(mu2 - mu1)`` as a ``p x q`` matrix (needs ``n - 2 >= pq``)."""
    mu1, mu2 = class_means(d)
    Xc = d.X - np.where((d.labels == 1)[:, None, None], mu1, mu2)
    F = Xc.reshape(d.n, -1)
    S = F.T @ F / (d.n - 2)
    return np.linalg.solve(S, (mu2 - mu1).ravel()).reshape(d.shape)
