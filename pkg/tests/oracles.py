"""Independent reference implementations used only by the tests."""
import math

import numpy as np


def jacobi_singular_values(A, tol=1e-15, sweeps=100):
    """One-sided Jacobi SVD: rotate column pairs until all are orthogonal."""
    U = np.array(A, dtype=float, copy=True)
    if U.shape[0] < U.shape[1]:
        U = U.T.copy()
    m, k = U.shape
    for _ in range(sweeps):
        off = 0.0
        for i in range(k - 1):
            for j in range(i + 1, k):
                a = U[:, i] @ U[:, i]
                b = U[:, j] @ U[:, j]
                c = U[:, i] @ U[:, j]
                if abs(c) <= tol * math.sqrt(a * b):
                    continue
                off = max(off, abs(c) / math.sqrt(a * b))
                zeta = (b - a) / (2 * c)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1 + zeta * zeta))
                cs = 1 / math.sqrt(1 + t * t)
                sn = cs * t
                ui = U[:, i].copy()
                U[:, i] = cs * ui - sn * U[:, j]
                U[:, j] = sn * ui + cs * U[:, j]
        if off <= tol:
            break
    return np.sort(np.sqrt(np.sum(U * U, axis=0)))[::-1]


def loop_objective(X, y, beta0, B, omega, loss="squared", penalty="nuclear"):
    """Scalar-loop evaluation of the penalised risk."""
    n, p, q = X.shape
    total = 0.0
    for i in range(n):
        f = beta0
        for a in range(p):
            for b in range(q):
                f += X[i, a, b] * B[a, b]
        if loss == "squared":
            total += 0.5 * (y[i] - f) ** 2
        else:
            s = 1.0 if y[i] > 0 else -1.0
            total += math.log1p(math.exp(-s * f))
    if penalty == "nuclear":
        pen = float(jacobi_singular_values(B).sum())
    else:
        pen = sum(abs(B[a, b]) for a in range(p) for b in range(q))
    return total / n + omega * pen


def smooth_only(X, y, beta0, B, loss):
    return loop_objective(X, y, beta0, B, 0.0, loss, "lasso")


def fd_gradient(X, y, beta0, B, loss, h=1e-6):
    """Central finite differences of the smooth part in ``(B, beta0)``."""
    gB = np.zeros_like(B)
    for idx in np.ndindex(B.shape):
        E = np.zeros_like(B)
        E[idx] = h
        gB[idx] = (smooth_only(X, y, beta0, B + E, loss) - smooth_only(X, y, beta0, B - E, loss)) / (2 * h)
    g0 = (smooth_only(X, y, beta0 + h, B, loss) - smooth_only(X, y, beta0 - h, B, loss)) / (2 * h)
    return gB, g0


def explicit_pooled_cov(X, labels):
    """Pooled within-class covariance of column-major ``vec(X_i)``, denominator ``n - 2``."""
    n = X.shape[0]
    V = np.stack([x.ravel(order="F") for x in X])
    S = np.zeros((V.shape[1], V.shape[1]))
    for g in (1, 2):
        Vg = V[labels == g]
        C = Vg - Vg.mean(axis=0)
        S += C.T @ C
    return S / (n - 2)


def training_errors_on_grid(scores, labels, npts=2000):
    """Training error at each intercept of a grid spanning the score range."""
    grid = np.linspace(-scores.max(), -scores.min(), npts)
    pred = np.where(scores[None, :] + grid[:, None] > 0, 2, 1)
    return grid, np.mean(pred != labels[None, :], axis=1)


def random_lda_instance(seed, p, q, n, pi1, amp):
    """Gaussian two-class data with identity covariance and a random rank-1 mean shift."""
    from matlda import Dataset

    rng = np.random.default_rng(seed)
    u = rng.standard_normal((p, 1))
    v = rng.standard_normal((q, 1))
    B0 = amp * (u @ v.T) / (np.linalg.norm(u) * np.linalg.norm(v))
    n1 = int(round(pi1 * n))
    X = rng.standard_normal((n, p, q))
    X[n1:] += B0
    return Dataset(X, np.repeat([1, 2], [n1, n - n1]))
