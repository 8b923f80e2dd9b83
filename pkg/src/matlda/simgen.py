"""Synthetic two-class matrix data and Monte Carlo evaluation.

Samples follow ``vec(X) | class g ~ N(mu_g, Kq kron Kp)`` with AR(1) factors
``K[i, j] = rho^|i-j|``, class-1 mean zero and class-2 mean ``Kp B0 Kq``
(the matrix form of ``Sigma vec(B0)``), so ``B0`` is the population LDA
direction up to scale.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import matcore
from .dataset import Dataset
from .errors import InvalidInputError, MatLDAError
from .solver import FitConfig
from .tuning import tune

log = logging.getLogger(__name__)

SHAPES = ("cross", "triangle", "butterfly")

#: cross arms: width and length as fractions of the image side
CROSS_WIDTH = 0.15
CROSS_SPAN = 1.0


@dataclass(frozen=True)
class SignalSpec:
    shape: str = "cross"
    p: int = 64
    q: int = 64
    amplitude: float = 0.05

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InvalidInputError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.p < 8 or self.q < 8:
            raise InvalidInputError("signal images need p, q >= 8")


@dataclass(frozen=True)
class StudySpec:
    signal: SignalSpec = field(default_factory=SignalSpec)
    n: int = 200
    pi1: float = 0.5
    rho: float = 0.5
    test_size: int = 1000
    replicates: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.pi1 < 1:
            raise InvalidInputError(f"pi1 must lie in (0, 1), got {self.pi1}")
        if not -1 < self.rho < 1:
            raise InvalidInputError(f"rho must lie in (-1, 1), got {self.rho}")
        if self.n < 2 or self.test_size < 1 or self.replicates < 1:
            raise InvalidInputError("n >= 2, test_size >= 1 and replicates >= 1 are required")

    @property
    def pi2(self) -> float:
        return 1.0 - self.pi1

    def replace(self, **changes) -> "StudySpec":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _band(m, frac_lo, frac_hi):
    """Integer indices ``i`` with ``frac_lo * m <= i < frac_hi * m``."""
    return slice(math.ceil(frac_lo * m - 1e-9), math.ceil(frac_hi * m - 1e-9))


def make_signal(spec: SignalSpec) -> np.ndarray:
    """Binary mask image of the requested shape, scaled by ``spec.amplitude``."""
    p, q = spec.p, spec.q
    M = np.zeros((p, q))
    if spec.shape == "cross":
        lo, hi = 0.5 - CROSS_WIDTH / 2, 0.5 + CROSS_WIDTH / 2
        slo, shi = 0.5 - CROSS_SPAN / 2, 0.5 + CROSS_SPAN / 2
        M[_band(p, lo, hi), _band(q, slo, shi)] = 1.0
        M[_band(p, slo, shi), _band(q, lo, hi)] = 1.0
    else:
        # pixel centres in image fractions
        r = (np.arange(p) + 0.5)[:, None] / p
        c = (np.arange(q) + 0.5)[None, :] / q
        if spec.shape == "triangle":
            # apex (0.2, 0.5), base on row 0.8 spanning columns [0.2, 0.8)
            t = (r - 0.2) / 0.6
            M[((t >= 0) & (t <= 1) & (np.abs(c - 0.5) <= 0.3 * t))] = 1.0
        else:
            # two triangles meeting at the centre, outer edges rows [0.3, 0.7) at columns 0.2 / 0.8
            u = np.abs(c - 0.5) / 0.3
            M[((u <= 1) & (np.abs(r - 0.5) <= 0.2 * u))] = 1.0
    return spec.amplitude * M


def ar_cov(m: int, rho: float) -> np.ndarray:
    i = np.arange(m)
    return rho ** np.abs(i[:, None] - i[None, :])


def ar_chol(m: int, rho: float) -> np.ndarray:
    """Closed-form Cholesky factor of the AR(1) correlation matrix."""
    if not -1 < rho < 1:
        raise InvalidInputError(f"|rho| must be < 1, got {rho}")
    i = np.arange(m)
    lag = i[:, None] - i[None, :]
    L = np.where(lag >= 0, float(rho) ** np.maximum(lag, 0), 0.0)
    L[:, 1:] *= math.sqrt(1.0 - rho * rho)
    return L


def sample_class(count: int, mean, Lp, Lq, rng) -> np.ndarray:
    """``count`` draws of ``mean + Lp Z Lq^T`` with ``Z`` standard normal; shape ``(count, p, q)``."""
    mean = matcore.as_mat(mean, "mean")
    p, q = mean.shape
    Lp, Lq = np.asarray(Lp, float), np.asarray(Lq, float)
    if Lp.shape != (p, p) or Lq.shape != (q, q):
        raise InvalidInputError("Cholesky factors do not match the mean's shape")
    Z = rng.standard_normal((count, p, q))
    return mean + Lp @ Z @ Lq.T


def split_counts(n: int, pi1: float):
    n1 = int(math.floor(pi1 * n + 0.5))
    return n1, n - n1


@dataclass(frozen=True)
class _Law:
    B0: np.ndarray
    M2: np.ndarray
    Lp: np.ndarray
    Lq: np.ndarray


def mean_shift(B0, rho: float) -> np.ndarray:
    """Class-2 mean ``Kp B0 Kq``, the matrix form of ``(Kq kron Kp) vec(B0)``."""
    B0 = matcore.as_mat(B0, "B0")
    p, q = B0.shape
    return ar_cov(p, rho) @ B0 @ ar_cov(q, rho)


def _law(spec: StudySpec) -> _Law:
    sig = spec.signal
    B0 = make_signal(sig)
    return _Law(B0, mean_shift(B0, spec.rho), ar_chol(sig.p, spec.rho), ar_chol(sig.q, spec.rho))


def _draw(law, n, pi1, rng):
    n1, n2 = split_counts(n, pi1)
    if n1 == 0 or n2 == 0:
        raise InvalidInputError(f"class split ({n1}, {n2}) leaves a class empty")
    X1 = sample_class(n1, np.zeros_like(law.B0), law.Lp, law.Lq, rng)
    X2 = sample_class(n2, law.M2, law.Lp, law.Lq, rng)
    return Dataset(np.concatenate([X1, X2]), np.repeat([1, 2], [n1, n2]))


def simulate_dataset(spec: StudySpec, rng):
    """Training set of ``spec.n`` and test set of ``spec.test_size`` samples."""
    law = _law(spec)
    train = _draw(law, spec.n, spec.pi1, rng)
    test = _draw(law, spec.test_size, spec.pi1, rng)
    return train, test


def separation(spec: StudySpec) -> float:
    """Mahalanobis distance between the class means, ``sqrt(vec(B0)^T Sigma vec(B0))``."""
    law = _law(spec)
    return math.sqrt(max(float(np.vdot(law.B0, law.M2)), 0.0))


def bayes_error(spec: StudySpec) -> float:
    """Misclassification rate of the optimal rule for the study's two-Gaussian law."""
    delta = separation(spec)
    pi1, pi2 = spec.pi1, spec.pi2
    if delta == 0.0:
        return min(pi1, pi2)
    c = math.log(pi2 / pi1)
    # class 1 is misassigned when its discriminant N(-d^2/2 + c, d^2) exceeds zero
    return float(pi1 * norm.cdf(-delta / 2 + c / delta) + pi2 * norm.cdf(-delta / 2 - c / delta))


def oracle_rule(spec: StudySpec):
    """``(B0, beta0)`` of the Bayes rule ``<X, B0> + beta0 > 0 => class 2``."""
    law = _law(spec)
    beta0 = -float(np.vdot(law.M2, law.B0)) / 2 + math.log(spec.pi2 / spec.pi1)
    return law.B0, beta0


@dataclass(frozen=True)
class EvalReport:
    mean_rate: float
    std_error: float | None
    per_replicate_rates: tuple
    mean_rank: float
    mean_frob_error: float
    per_replicate_ranks: tuple = ()
    per_replicate_frob_sq: tuple = ()
    per_replicate_omegas: tuple = ()
    per_replicate_best_rates: tuple = ()
    failed: int = 0
    bayes_error: float = float("nan")

    @property
    def mean_best_rate(self) -> float:
        return float(np.mean(self.per_replicate_best_rates))

    @property
    def mean_frob_sq(self) -> float:
        return float(np.mean(self.per_replicate_frob_sq))

    def rank_fraction(self, rank: int) -> float:
        return float(np.mean(np.asarray(self.per_replicate_ranks) == rank))


def run_replicate(spec: StudySpec, cfg: FitConfig, index: int, k: int = 20, span: float = 0.01):
    """One Monte Carlo replicate: simulate, tune by BIC, score on the test set.

    Returns ``(rate, rank, frob_sq, omega, best_rate)`` where ``best_rate``
    is the lowest test rate of any valid path entry, a diagnostic of how
    much the selection rule leaves on the table.
    """
    rng = np.random.default_rng(spec.seed + index)
    train, test = simulate_dataset(spec, rng)
    path = tune(train, cfg, k=k, span=span)
    model = path.model
    rate = float(np.mean(model.predict(test.X) != test.labels))
    best = min(float(np.mean(e.model.predict(test.X) != test.labels))
               for e in path.entries if e.valid)
    B0 = make_signal(spec.signal)
    frob_sq = float(np.sum((model.b_hat - B0) ** 2))
    return rate, model.rank, frob_sq, path.selected.omega, best


def run_monte_carlo(spec: StudySpec, method_cfg: FitConfig, k: int = 20, span: float = 0.01,
                    n_jobs: int = 1, progress=None) -> EvalReport:
    """Repeat :func:`run_replicate` ``spec.replicates`` times and aggregate.

    Replicate ``i`` draws from its own generator seeded ``spec.seed + i``, so
    results do not depend on ``n_jobs``. Failed replicates are logged,
    counted and left out of the averages.
    """
    def one(i):
        try:
            return run_replicate(spec, method_cfg, i, k, span)
        except MatLDAError as exc:
            log.warning("replicate %d failed: %s", i, exc)
            return None

    idx = range(spec.replicates)
    if n_jobs == 1:
        results = []
        for i in idx:
            results.append(one(i))
            if progress is not None:
                progress(i, results[-1])
    else:
        from joblib import Parallel, delayed
        results = Parallel(n_jobs=n_jobs)(delayed(one)(i) for i in idx)
    return summarize(spec, results)


def summarize(spec: StudySpec, results) -> EvalReport:
    """Aggregate :func:`run_replicate` outputs; ``None`` marks a failed replicate."""
    ok = [r for r in results if r is not None]
    if not ok:
        raise MatLDAError("every replicate failed")
    rates = np.array([r[0] for r in ok])
    se = float(rates.std(ddof=1) / math.sqrt(rates.size)) if rates.size > 1 else None
    frob_sq = np.array([r[2] for r in ok])
    return EvalReport(
        mean_rate=float(rates.mean()),
        std_error=se,
        per_replicate_rates=tuple(rates.tolist()),
        mean_rank=float(np.mean([r[1] for r in ok])),
        mean_frob_error=float(np.mean(np.sqrt(frob_sq))),
        per_replicate_ranks=tuple(int(r[1]) for r in ok),
        per_replicate_frob_sq=tuple(frob_sq.tolist()),
        per_replicate_omegas=tuple(float(r[3]) for r in ok),
        per_replicate_best_rates=tuple(float(r[4]) for r in ok),
        failed=len(results) - len(ok),
        bayes_error=bayes_error(spec),
    )
