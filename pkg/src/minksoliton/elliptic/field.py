"""Grid fields, continuation schedules and their text serialisation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .discretization import MASK_NAMES
from .domain import GridSpec


@dataclass(frozen=True)
class FieldSolution:
    """Node values of ``u`` on a grid together with the node classification.

    ``u`` and ``mask`` have the grid's shape; exterior nodes hold NaN.
    ``diagnostics`` maps ``nu, H1, H2, lambda1, residual`` to full-grid
    arrays (NaN off the unknowns).  ``disc`` is the discretisation that
    produced the field and is needed to re-evaluate residuals.
    """

    grid: GridSpec
    u: np.ndarray
    mask: np.ndarray
    params: tuple
    diagnostics: dict = field(default_factory=dict, compare=False)
    disc: object = field(default=None, compare=False, repr=False)
    history: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        n, C, sigma = self.params
        object.__setattr__(self, "params", (int(n), float(C), float(sigma)))
        for name in ("u", "mask"):
            arr = np.array(getattr(self, name))
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.params[0]

    @property
    def C(self) -> float:
        return self.params[1]

    @property
    def sigma(self) -> float:
        return self.params[2]

    @property
    def unknown_values(self) -> np.ndarray:
        return self.u.reshape(-1)[self.disc.unknowns]

    def points(self) -> np.ndarray:
        return self.grid.points()

    def values_on(self, X) -> np.ndarray:
        """Multilinear interpolation of ``u`` at points inside the solved region."""
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(self.grid.axes(), self.u, bounds_error=True)
        return interp(np.atleast_2d(X))

    def to_text(self) -> str:
        header = {
            "n": self.n, "h": self.grid.h, "box": [list(self.grid.lo), list(self.grid.hi)],
            "shape": list(self.grid.shape), "C": self.C, "sigma": self.sigma,
            "mask_codes": {str(k): v for k, v in MASK_NAMES.items()},
        }
        lines = [json.dumps(header)]
        for val, m in zip(self.u.ravel(), self.mask.ravel()):
            lines.append(f"{val:.17g} {int(m)}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_text())


def load_field(path) -> FieldSolution:
    """Read a field written by :meth:`FieldSolution.save` (no discretisation attached)."""
    with open(path) as fh:
        header = json.loads(fh.readline())
        data = np.loadtxt(fh, ndmin=2)
    shape = tuple(header["shape"])
    grid = GridSpec(header["h"], tuple(header["box"][0]), shape)
    return FieldSolution(grid=grid, u=data[:, 0].reshape(shape),
                         mask=data[:, 1].astype(np.int8).reshape(shape),
                         params=(header["n"], header["C"], header["sigma"]))


@dataclass(frozen=True)
class ContinuationSchedule:
    sigma_steps: tuple = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.0)
    max_newton_iters: int = 30
    newton_tol: float = 1e-10
    relax_dt0: float = 0.5
    max_bisections: int = 4

    def __post_init__(self):
        s = tuple(float(x) for x in self.sigma_steps)
        object.__setattr__(self, "sigma_steps", s)
        if len(s) < 1 or s[0] != 0.0 or s[-1] != 1.0:
            raise ValueError("sigma steps must start at 0 and end at 1")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ValueError("sigma steps must be strictly increasing")
        if self.max_newton_iters < 1 or not self.newton_tol > 0 or not self.relax_dt0 > 0:
            raise ValueError("invalid solver settings")
