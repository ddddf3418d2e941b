"""Convex domains and the Cartesian grids that cover them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``lo + h * index`` with ``shape`` nodes per axis."""

    h: float
    lo: tuple
    shape: tuple

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if len(self.lo) != len(self.shape):
            raise ValueError("lo and shape must have the same length")
        object.__setattr__(self, "lo", tuple(float(x) for x in self.lo))
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def hi(self) -> tuple:
        return tuple(l + self.h * (s - 1) for l, s in zip(self.lo, self.shape))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axes(self):
        return [l + self.h * np.arange(s) for l, s in zip(self.lo, self.shape)]

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, n)`` in row-major order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @classmethod
    def covering(cls, lo, hi, h, margin: int = 2):
        """Grid aligned on ``h * Z^n`` containing ``[lo, hi]`` plus ``margin`` cells."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        i0 = np.floor(lo / h).astype(int) - margin
        i1 = np.ceil(hi / h).astype(int) + margin
        return cls(h, tuple(i0 * h), tuple(i1 - i0 + 1))

    def contains_with_margin(self, lo, hi) -> bool:
        return bool(np.all(np.asarray(self.lo) <= np.asarray(lo) - 2 * self.h + 1e-12)
                    and np.all(np.asarray(self.hi) >= np.asarray(hi) + 2 * self.h - 1e-12))


class ConvexDomain:
    """Bounded uniformly convex domain ``{x : phi(x) < 0}``."""

    n: int

    def phi(self, X):
        raise NotImplementedError

    def bounding_box(self):
        raise NotImplementedError

    def inside(self, X) -> np.ndarray:
        return self.phi(X) < 0

    def segment_exit(self, X, D) -> np.ndarray:
        """For ``X`` inside and ``X + D`` outside, the ``t`` in ``(0, 1]`` where
        the segment ``X + t D`` leaves the domain.  Generic bisection."""
        X = np.asarray(X, dtype=float)
        D = np.asarray(D, dtype=float)
        lo = np.zeros(len(X))
        hi = np.ones(len(X))
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            ins = self.phi(X + mid[:, None] * D) < 0
            lo = np.where(ins, mid, lo)
            hi = np.where(ins, hi, mid)
        return hi

    def outward_normal(self, X) -> np.ndarray:
        raise NotImplementedError

    def inscribed(self):
        """Centre and radius of a ball inside the domain (approximate for level sets)."""
        raise NotImplementedError

    def grid(self, h: float, margin: int = 2) -> GridSpec:
        lo, hi = self.bounding_box()
        return GridSpec.covering(lo, hi, h, margin)


@dataclass(frozen=True)
class Ball(ConvexDomain):
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.ravel(self.center)))

    @property
    def n(self) -> int:
        return len(self.center)

    def phi(self, X):
        X = np.asarray(X, dtype=float)
        return np.linalg.norm(X - np.asarray(self.center), axis=-1) - self.radius

    def bounding_box(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def segment_exit(self, X, D):
        Y = np.asarray(X, dtype=float) - np.asarray(self.center)
        D = np.asarray(D, dtype=float)
        a = np.einsum("ij,ij->i", D, D)
        b = np.einsum("ij,ij->i", Y, D)
        c = np.einsum("ij,ij->i", Y, Y) - self.radius**2
        return np.clip((-b + np.sqrt(b * b - a * c)) / a, 0.0, 1.0)

    def outward_normal(self, X):
        Y = np.asarray(X, dtype=float) - np.asarray(self.center)
        return Y / np.linalg.norm(Y, axis=-1, keepdims=True)

    def inscribed(self):
        return np.asarray(self.center), self.radius


@dataclass(frozen=True)
class LevelSetDomain(ConvexDomain):
    """``{Phi < level}`` for a smooth uniformly convex ``Phi``.

    ``Phi`` maps ``(N, n)`` arrays to ``(N,)``; ``box`` bounds the sublevel set.
    ``grad_Phi`` is optional and falls back to central differences.
    """

    Phi: object
    level: float
    box: tuple
    grad_Phi: object = None
    n_checks: int = field(default=64, compare=False)

    def __post_init__(self):
        lo, hi = (np.asarray(b, dtype=float) for b in self.box)
        object.__setattr__(self, "box", (lo, hi))
        rng = np.random.default_rng(0)
        P = lo + (hi - lo) * rng.random((self.n_checks, lo.size))
        if np.any(self._hessian_min_eig(P) <= 0):
            raise ValueError("Phi is not uniformly convex on the working box")

    @property
    def n(self) -> int:
        return self.box[0].size

    def phi(self, X):
        X = np.asarray(X, dtype=float)
        return self.Phi(X.reshape(-1, self.n)).reshape(X.shape[:-1]) - self.level

    def bounding_box(self):
        return self.box

    def _grad(self, X, step=1e-6):
        if self.grad_Phi is not None:
            return np.asarray(self.grad_Phi(X))
        E = np.eye(self.n) * step
        return np.stack([(self.Phi(X + e) - self.Phi(X - e)) / (2 * step) for e in E], axis=-1)

    def _hessian_min_eig(self, X, step=1e-4):
        E = np.eye(self.n) * step
        H = np.empty((len(X), self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                H[:, i, j] = (self.Phi(X + E[i] + E[j]) - self.Phi(X + E[i] - E[j])
                              - self.Phi(X - E[i] + E[j]) + self.Phi(X - E[i] - E[j])) / (4 * step**2)
        return np.linalg.eigvalsh(0.5 * (H + np.swapaxes(H, 1, 2)))[:, 0]

    def outward_normal(self, X):
        g = self._grad(np.asarray(X, dtype=float))
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    def inscribed(self):
        lo, hi = self.box
        h = float(np.min(hi - lo)) / 40.0
        P = GridSpec.covering(lo, hi, h, 0).points()
        vals = self.phi(P)
        c = P[np.argmin(vals)]
        # heuristic radius: shortest axial exit distance from the minimiser, shrunk by sqrt(n)
        dirs = np.concatenate([np.eye(self.n), -np.eye(self.n)])
        span = float(np.max(hi - lo))
        X = np.repeat(c[None], len(dirs), axis=0)
        t = self.segment_exit(X, dirs * span)
        pts = X + t[:, None] * dirs * span
        return c, float(np.min(np.linalg.norm(pts - c, axis=1))) / np.sqrt(self.n)
