"""Labelled collections of matrix-valued samples."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` samples of shape ``p x q`` with labels in ``{1, 2}``.

    ``X`` has shape ``(n, p, q)``. Labels may be omitted for unlabelled
    prediction sets, in which case ``labels`` is ``None``.
    """

    X: np.ndarray
    labels: np.ndarray | None = None
    names: tuple = field(default=(), compare=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3 or X.shape[0] < 1:
            raise InvalidInputError(f"samples must form an (n, p, q) array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("samples contain non-finite entries")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (X.shape[0],):
                raise InvalidInputError(f"expected {X.shape[0]} labels, got shape {lab.shape}")
            if not np.all((lab == 1) | (lab == 2)):
                raise InvalidInputError("labels must be 1 or 2")
            lab = lab.astype(np.int64)
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @classmethod
    def from_samples(cls, samples, labels=None, names=()):
        samples = [np.asarray(s, dtype=np.float64) for s in samples]
        if not samples:
            raise InvalidInputError("dataset needs at least one sample")
        shape = samples[0].shape
        for i, s in enumerate(samples):
            if s.ndim != 2 or s.shape != shape:
                raise InvalidInputError(f"sample {i} has shape {s.shape}, expected {shape}")
        return cls(np.stack(samples), labels, tuple(names))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape[1], self.X.shape[2]

    @property
    def n1(self) -> int:
        return int(np.count_nonzero(self.require_labels() == 1))

    @property
    def n2(self) -> int:
        return int(np.count_nonzero(self.require_labels() == 2))

    @cached_property
    def design(self) -> np.ndarray:
        """Flattened samples, one row per sample (row-major, matching ``B.ravel()``)."""
        D = self.X.reshape(self.n, -1)
        D.setflags(write=False)
        return D

    def require_labels(self) -> np.ndarray:
        if self.labels is None:
            raise InvalidInputError("dataset has no labels")
        return self.labels

    def require_both_classes(self):
        lab = self.require_labels()
        n1 = int(np.count_nonzero(lab == 1))
        if n1 == 0 or n1 == self.n:
            raise InvalidInputError(f"both classes must be present (n1={n1}, n2={self.n - n1})")
        return n1, self.n - n1

    def check_matrix(self, B, name="B") -> np.ndarray:
        B = np.asarray(B, dtype=np.float64)
        if B.shape != self.shape:
            raise InvalidInputError(f"{name} has shape {B.shape}, data are {self.shape}")
        return B

    def scores(self, B) -> np.ndarray:
        """Inner products ``<X_i, B>`` for every sample."""
        return self.design @ self.check_matrix(B).ravel()

    def subset(self, idx) -> "Dataset":
        lab = None if self.labels is None else self.labels[idx]
        names = tuple(np.asarray(self.names, dtype=object)[idx]) if self.names else ()
        return Dataset(self.X[idx], lab, names)
