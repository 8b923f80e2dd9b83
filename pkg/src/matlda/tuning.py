"""Regularisation paths over ``omega`` and BIC model selection."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import matcore
from .dataset import Dataset
from .errors import DegenerateDataError, DegenerateDirectionError, DivergenceError, InvalidInputError
from .lda import DiscriminantModel, encode_responses, model_from_solution
from .solver import FitConfig, SolverResult, fit_penalized, lipschitz_estimate

log = logging.getLogger(__name__)

DF_RULES = ("divergence", "parameter_count")


def null_correlation(d: Dataset, loss: str = "squared") -> np.ndarray:
    """``(1/n) sum r_i X_i`` at the intercept-only fit (``r`` are the null residuals)."""
    y = encode_responses(d)
    if loss == "squared":
        r = y - y.mean()
    else:
        r = (y > 0) - np.mean(y > 0)
    return (d.design.T @ r).reshape(d.shape) / d.n


def omega_grid(d: Dataset, k: int = 20, span: float = 0.01, penalty: str = "nuclear",
               loss: str = "squared") -> np.ndarray:
    """``k`` log-spaced penalties from the null threshold down to ``span`` times it.

    The null threshold is the dual norm (spectral for the nuclear penalty,
    max-abs for the lasso) of the null residual correlation; at or above it
    the fitted coefficient matrix is exactly zero.
    """
    if k < 2:
        raise InvalidInputError("grid needs at least two points")
    if not 0 < span < 1:
        raise InvalidInputError("span must lie in (0, 1)")
    C = null_correlation(d, loss)
    if penalty == "nuclear":
        wmax = matcore.spectral_norm(C)
    else:
        wmax = float(np.abs(C).max())
    if wmax <= 0:
        raise DegenerateDataError("null residuals are uncorrelated with every sample; no path")
    # nudge up so the first grid point is null despite rounding in the SVD
    wmax *= 1 + 1e-9
    return wmax * np.logspace(0.0, np.log10(span), k)


def parameter_count(rank: int, p: int, q: int) -> int:
    """Free parameters of a rank-``rank`` ``p x q`` matrix plus the intercept."""
    return rank * (p + q - rank) + 1


def bic_score(rss: float, n: int, rank: int, p: int, q: int, df: float | None = None) -> float:
    """``n log(rss/n) + log(n) df``; ``df`` defaults to :func:`parameter_count`."""
    if not rss > 0:
        raise InvalidInputError(f"rss must be positive, got {rss}")
    if n <= 0:
        raise InvalidInputError("n must be positive")
    if not 0 <= rank <= min(p, q):
        raise InvalidInputError(f"rank {rank} outside [0, {min(p, q)}]")
    if df is None:
        df = parameter_count(rank, p, q)
    return n * np.log(rss / n) + np.log(n) * df


def _tangent_coordinates(Xc, U, V, r):
    """Coordinates of each sample in an orthonormal basis of the rank-``r`` tangent space.

    Blocks: ``U_r^T X V_r`` (r x r), ``U_perp^T X V_r`` and ``U_r^T X V_perp``.
    """
    n = Xc.shape[0]
    Ur, Up = U[:, :r], U[:, r:]
    Vr, Vp = V[:, :r], V[:, r:]
    XV = Xc @ Vr                                   # n, p, r
    M = np.einsum("pa,npb->nab", Ur, XV)
    N = np.einsum("pa,npb->nab", Up, XV)
    UX = np.einsum("pa,npq->naq", Ur, Xc)          # n, r, q
    P = UX @ Vp
    return np.concatenate([M.reshape(n, -1), N.reshape(n, -1), P.reshape(n, -1)], axis=1)


def _nuclear_curvature(s, Wn):
    """Second-order term of the nuclear norm on its tangent space, as a matrix.

    Matches the block order of :func:`_tangent_coordinates`. ``Wn`` is the
    normal-space part ``U_perp^T C V_perp / omega`` of the residual
    correlation ``C``; it couples the two off-diagonal blocks because the
    tangent space rotates as the fit moves.
    """
    r = s.size
    pr, qr = Wn.shape
    dM, dN, dP = r * r, pr * r, r * qr
    D = np.zeros((dM + dN + dP, dM + dN + dP))
    for i in range(r):
        for j in range(r):
            if i != j:
                c = 1.0 / (s[i] + s[j])
                D[i * r + j, i * r + j] += c
                D[i * r + j, j * r + i] -= c
    inv = 1.0 / s
    iN = dM + np.arange(dN)
    iP = dM + dN + np.arange(dP)
    D[iN, iN] = np.tile(inv, pr)
    D[iP, iP] = np.repeat(inv, qr)
    # N block entry (a, i) couples to P block entry (i, b) with weight -Wn[a, b] / s_i
    a, i, b = np.meshgrid(np.arange(pr), np.arange(r), np.arange(qr), indexing="ij")
    rows = dM + a * r + i
    cols = dM + dN + i * qr + b
    vals = -Wn[a, b] * inv[i]
    D[rows, cols] = vals
    D[cols, rows] = vals
    return D


def degrees_of_freedom(d: Dataset, res: SolverResult, cfg: FitConfig,
                       rule: str = "divergence") -> float:
    """Effective degrees of freedom of a penalised fit, intercept included.

    ``rule="parameter_count"`` gives ``r(p+q-r)+1``. ``rule="divergence"``
    gives the divergence of the fitted values with respect to the response:
    the Jacobian is obtained by linearising the optimality conditions
    ``U^T C = omega V^T`` and ``C V = omega U`` on the manifold of rank-``r``
    matrices, where the nuclear norm contributes its curvature ``1/s_i``
    (``1/(s_i+s_j)`` on the skew block) as extra shrinkage. For the lasso
    penalty the divergence is the number of active coefficients (capped at
    ``n - 1``) plus one.
    """
    if rule not in DF_RULES:
        raise InvalidInputError(f"df rule must be one of {DF_RULES}")
    B = res.b_hat
    p, q = d.shape
    n = d.n
    if cfg.penalty == "lasso":
        return float(min(np.count_nonzero(B), n - 1) + 1)
    U, s, Vt = np.linalg.svd(B)
    r = matcore.numerical_rank(s)
    if rule == "parameter_count" or r == 0:
        return float(parameter_count(r, p, q))
    y = encode_responses(d)
    f = res.beta0_hat + d.scores(B)
    if cfg.loss == "squared":
        w = np.ones(n)
        resid = y - f
    else:
        prob = expit(f)
        w = prob * (1 - prob)
        sg = np.sign(y)
        resid = sg * expit(-sg * f)
    C = np.tensordot(resid, d.X, axes=1) / n
    V = Vt.T
    Wn = U[:, r:].T @ C @ V[:, r:] / cfg.omega
    # intercept is unpenalised: project it out with the same weights
    Xc = d.X - np.tensordot(w, d.X, axes=1) / w.sum()
    A = _tangent_coordinates(Xc, U, V, r)
    G = (A * w[:, None]).T @ A
    H = G + n * cfg.omega * _nuclear_curvature(s[:r], Wn)
    return 1.0 + float(np.trace(np.linalg.solve(H, G)))


@dataclass(frozen=True)
class PathEntry:
    omega: float
    model: DiscriminantModel | None
    rss: float
    df: float
    bic: float
    rank: int
    valid: bool
    solution: SolverResult | None = None


@dataclass(frozen=True)
class PathResult:
    entries: tuple
    selected_index: int

    @property
    def selected(self) -> PathEntry:
        return self.entries[self.selected_index]

    @property
    def model(self) -> DiscriminantModel:
        return self.selected.model

    @property
    def omegas(self) -> np.ndarray:
        return np.array([e.omega for e in self.entries])


def _deviance(d, y, res, cfg):
    f = res.beta0_hat + d.scores(res.b_hat)
    if cfg.loss == "squared":
        e = y - f
        return float(e @ e)
    return 2.0 * float(np.logaddexp(0.0, -np.sign(y) * f).sum())


def fit_path(d: Dataset, base_cfg: FitConfig, grid, warm_start: bool = True,
             df_rule: str = "divergence", max_df_fraction: float = 0.5) -> PathResult:
    """Fit every ``omega`` in ``grid`` (strictly decreasing) and select by BIC.

    The BIC is ``n log(rss/n) + log(n) df`` for the squared loss, where
    ``rss`` uses the solver's own intercept, and ``deviance + log(n) df`` for
    the logistic loss. The path stops early once ``df`` reaches
    ``max_df_fraction * n``: beyond that the fit starts to interpolate and
    the likelihood term is meaningless. Entries whose solve diverged are
    kept but marked invalid and never selected.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidInputError("grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) >= 0):
        raise InvalidInputError("grid must be strictly decreasing")
    y = encode_responses(d)
    n = d.n
    p, q = d.shape
    L = lipschitz_estimate(d)
    entries = []
    init = None
    for omega in grid:
        cfg = base_cfg.replace(omega=float(omega))
        try:
            res = fit_penalized(d, y, cfg, init=init if warm_start else None, lipschitz=L)
        except DivergenceError as exc:
            log.warning("path entry omega=%g diverged: %s", omega, exc)
            entries.append(PathEntry(float(omega), None, np.nan, np.nan, np.inf, -1, False))
            continue
        init = (res.beta0_hat, res.b_hat)
        e = y - res.beta0_hat - d.scores(res.b_hat)
        rss = float(e @ e)
        df = degrees_of_freedom(d, res, cfg, df_rule)
        rank = matcore.numerical_rank(res.singulars)
        if cfg.penalty == "lasso":
            rank = min(rank, min(p, q))
        if cfg.loss == "squared":
            bic = bic_score(max(rss, np.finfo(float).tiny), n, rank, p, q, df=df)
        else:
            bic = _deviance(d, y, res, cfg) + np.log(n) * df
        try:
            model = model_from_solution(d, res, cfg)
            valid = True
        except DegenerateDirectionError:
            model, valid = None, False
        entries.append(PathEntry(float(omega), model, rss, df, float(bic), rank, valid, res))
        if df >= max_df_fraction * n:
            break
    bics = np.array([e.bic if e.valid else np.inf for e in entries])
    if not np.any(np.isfinite(bics)):
        raise DivergenceError(len(entries), "no valid entry on the path")
    return PathResult(tuple(entries), int(np.argmin(bics)))


def tune(d: Dataset, base_cfg: FitConfig, k: int = 20, span: float = 0.01, **kw) -> PathResult:
    """Build the default grid for ``d`` and run :func:`fit_path` on it."""
    grid = omega_grid(d, k, span, base_cfg.penalty, base_cfg.loss)
    return fit_path(d, base_cfg, grid, **kw)
