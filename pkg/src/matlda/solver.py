"""Accelerated proximal gradient for penalised least squares / logistic fits.

Minimises ``smooth(beta0, B) + omega * penalty(B)`` jointly over the
unpenalised intercept ``beta0`` and the coefficient matrix ``B``. The smooth
part is either ``(1/2n) sum (y_i - beta0 - <X_i, B>)^2`` or the mean logistic
loss on the signs of ``y``; the penalty is the nuclear norm or the entrywise
L1 norm.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import matcore
from .dataset import Dataset
from .errors import DivergenceError, InvalidInputError

log = logging.getLogger(__name__)

LOSSES = ("squared", "logistic")
PENALTIES = ("nuclear", "lasso")
STEP_RULES = ("fixed_lipschitz", "backtracking")


@dataclass(frozen=True)
class FitConfig:
    loss: str = "squared"
    penalty: str = "nuclear"
    omega: float = 1.0
    max_iter: int = 2000
    rel_tol: float = 1e-7
    step_rule: str = "fixed_lipschitz"
    backtrack_factor: float = 0.5
    restart: bool = True
    accelerated: bool = True

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise InvalidInputError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.penalty not in PENALTIES:
            raise InvalidInputError(f"penalty must be one of {PENALTIES}, got {self.penalty!r}")
        if self.step_rule not in STEP_RULES:
            raise InvalidInputError(f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}")
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise InvalidInputError(f"omega must be positive, got {self.omega}")
        if not self.rel_tol > 0:
            raise InvalidInputError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_iter) < 1:
            raise InvalidInputError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 0 < self.backtrack_factor < 1:
            raise InvalidInputError("backtrack_factor must lie in (0, 1)")

    def replace(self, **changes) -> "FitConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SolverResult:
    b_hat: np.ndarray
    beta0_hat: float
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    final_grad_map_norm: float
    lipschitz: float
    singulars: np.ndarray

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


# -- loss pieces ---------------------------------------------------------------

def _check_inputs(data: Dataset, y, B=None):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (data.n,):
        raise InvalidInputError(f"response has shape {y.shape}, expected ({data.n},)")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("response contains non-finite values")
    if B is not None:
        B = data.check_matrix(B)
    return y, B


def _signs(y):
    s = np.sign(y)
    if np.any(s == 0):
        raise InvalidInputError("logistic loss needs nonzero responses (their signs are the labels)")
    return s


def _smooth_value(y, f, loss):
    n = y.size
    if loss == "squared":
        r = y - f
        return 0.5 * float(r @ r) / n
    return float(np.logaddexp(0.0, -_signs(y) * f).sum()) / n


def _pseudo_residual(y, f, loss):
    """``r`` such that the smooth gradient is ``-(1/n) sum r_i [1, X_i]``."""
    if loss == "squared":
        return y - f
    s = _signs(y)
    return s * expit(-s * f)


def _penalty_value(B, penalty):
    if penalty == "nuclear":
        return matcore.nuclear_norm(B)
    return float(np.abs(B).sum())


def objective(data: Dataset, y, beta0: float, B, cfg: FitConfig) -> float:
    """Penalised empirical risk at ``(beta0, B)``."""
    y, B = _check_inputs(data, y, B)
    f = beta0 + data.scores(B)
    return _smooth_value(y, f, cfg.loss) + cfg.omega * _penalty_value(B, cfg.penalty)


def smooth_gradient(data: Dataset, y, beta0: float, B, loss: str = "squared"):
    """Gradient of the smooth part; returns ``(grad_B, grad_beta0)``."""
    if loss not in LOSSES:
        raise InvalidInputError(f"unknown loss {loss!r}")
    y, B = _check_inputs(data, y, B)
    r = _pseudo_residual(y, beta0 + data.scores(B), loss)
    n = data.n
    grad_B = -(data.design.T @ r).reshape(data.shape) / n
    return grad_B, -float(r.sum()) / n


def lipschitz_estimate(data: Dataset, intercept: bool = True, rtol: float = 1e-6,
                       max_iter: int = 10000) -> float:
    """Upper bound on the curvature of the squared loss in ``(beta0, vec B)``.

    Power iteration on ``A^T A / n`` with ``A = [1, vec(X_i)^T]`` applied
    matrix-free, inflated by 1%.
    """
    Xf = data.design
    n, d = Xf.shape
    v = np.random.default_rng(0xC0FFEE).standard_normal(d + 1)
    if not intercept:
        v[0] = 0.0
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        u = Xf @ v[1:]
        if intercept:
            u = u + v[0]
        w = np.empty_like(v)
        w[0] = u.sum() if intercept else 0.0
        w[1:] = Xf.T @ u
        w /= n
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            lam = 0.0
            break
        v = w / nw
        if abs(lam_new - lam) <= rtol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return 1.01 * lam


# -- the solver ------------------------------------------------------------------

class _Problem:
    """Cached quantities for one (data, y, cfg) triple."""

    def __init__(self, data, y, cfg):
        self.Xf = data.design
        self.shape = data.shape
        self.y = y
        self.cfg = cfg
        self.n = data.n
        if cfg.loss == "logistic":
            _signs(y)

    def smooth(self, b0, xb):
        return _smooth_value(self.y, b0 + xb, self.cfg.loss)

    def grad(self, b0, xb):
        r = _pseudo_residual(self.y, b0 + xb, self.cfg.loss)
        return -(self.Xf.T @ r) / self.n, -float(r.sum()) / self.n

    def prox(self, b0, b, g0, gb, L):
        """Gradient step of size ``1/L`` then the penalty's proximal map on ``B``."""
        tau = self.cfg.omega / L
        Z = (b - gb / L).reshape(self.shape)
        if self.cfg.penalty == "nuclear":
            B, s = matcore.svt_with_singulars(Z, tau)
            pen = float(s.sum())
        else:
            B = matcore.soft_threshold(Z, tau)
            pen = float(np.abs(B).sum())
        return b0 - g0 / L, B.ravel(), pen


def fit_penalized(data: Dataset, y, cfg: FitConfig, init=None,
                  lipschitz: float | None = None) -> SolverResult:
    """Run (monotone, restarted) FISTA on the penalised problem.

    Parameters
    ----------
    data, y
        Samples and real responses (for the logistic loss only their signs matter).
    cfg
        Loss, penalty, ``omega`` and iteration controls.
    init
        Optional warm start ``(beta0, B)``; defaults to ``(mean(y), 0)`` for
        the squared loss and to the class log-odds with ``B = 0`` for the
        logistic loss.
    lipschitz
        Precomputed :func:`lipschitz_estimate` to reuse along a path.
    """
    y, _ = _check_inputs(data, y)
    if data.n < 2:
        raise InvalidInputError("need at least two samples")
    prob = _Problem(data, y, cfg)
    Xf = prob.Xf
    if init is None:
        b = np.zeros(Xf.shape[1])
        if cfg.loss == "squared":
            b0 = float(y.mean())
        else:
            npos = np.count_nonzero(y > 0)
            b0 = float(np.log(max(npos, 0.5) / max(y.size - npos, 0.5)))
    else:
        b0 = float(init[0])
        b = data.check_matrix(init[1], "initial B").ravel().copy()

    curv = 1.0 if cfg.loss == "squared" else 0.25
    if cfg.step_rule == "fixed_lipschitz":
        L = curv * (lipschitz if lipschitz is not None else lipschitz_estimate(data))
        if L <= 0:
            L = curv
    else:
        # backtracking only ever increases L, so start from a cheap guess
        L = curv * (lipschitz if lipschitz is not None else 1.0)

    xb = Xf @ b
    sm = prob.smooth(b0, xb)
    F = sm + cfg.omega * _penalty_value(b.reshape(data.shape), cfg.penalty)
    if not np.isfinite(F):
        raise DivergenceError(0)
    trace = [F]
    b0_prev, b_prev, xb_prev = b0, b, xb
    t = 1.0
    hits = 0
    converged = False
    it = 0

    def step(yb0, yb, yxb, L):
        g, g0 = prob.grad(yb0, yxb)
        sm_y = prob.smooth(yb0, yxb)
        while True:
            nb0, nb, pen = prob.prox(yb0, yb, g0, g, L)
            nxb = Xf @ nb
            nsm = prob.smooth(nb0, nxb)
            if cfg.step_rule == "fixed_lipschitz":
                break
            d0, db = nb0 - yb0, nb - yb
            quad = sm_y + g0 * d0 + float(g @ db) + 0.5 * L * (d0 * d0 + float(db @ db))
            if nsm <= quad * (1 + 1e-12) + 1e-15:
                break
            L /= cfg.backtrack_factor
        return nb0, nb, nxb, nsm + cfg.omega * pen, L

    for it in range(1, int(cfg.max_iter) + 1):
        if cfg.accelerated:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            a = (t - 1.0) / t_next
        else:
            t_next, a = 1.0, 0.0
        yb0 = b0 + a * (b0 - b0_prev)
        yb = b + a * (b - b_prev)
        yxb = xb + a * (xb - xb_prev)
        nb0, nb, nxb, nF, L = step(yb0, yb, yxb, L)
        if not np.isfinite(nF):
            raise DivergenceError(it)
        if cfg.restart and nF > F:
            # momentum overshot: drop it and take a plain step from the current iterate
            t_next = 1.0
            if a != 0.0:
                nb0, nb, nxb, nF, L = step(b0, b, xb, L)
                if not np.isfinite(nF):
                    raise DivergenceError(it)
            if nF > F:
                # rounding-level increase; keep the current iterate
                nb0, nb, nxb, nF = b0, b, xb, F
        b0_prev, b_prev, xb_prev = b0, b, xb
        b0, b, xb = nb0, nb, nxb
        t = t_next
        rel = abs(F - nF) / max(abs(F), np.finfo(float).tiny)
        F = nF
        trace.append(F)
        hits = hits + 1 if rel < cfg.rel_tol else 0
        if hits >= 3:
            converged = True
            break

    B = b.reshape(data.shape)
    # prox-gradient mapping at the final iterate
    g, g0 = prob.grad(b0, xb)
    pb0, pb, _ = prob.prox(b0, b, g0, g, L)
    gm = L * np.sqrt((b0 - pb0) ** 2 + float((b - pb) @ (b - pb)))
    sv = np.linalg.svd(B, compute_uv=False)
    if not converged:
        log.debug("fit_penalized: no convergence after %d iterations (omega=%g)", it, cfg.omega)
    trace = np.asarray(trace)
    trace.setflags(write=False)
    return SolverResult(B.copy(), float(b0), trace, it, converged, float(gm), float(L), sv)
