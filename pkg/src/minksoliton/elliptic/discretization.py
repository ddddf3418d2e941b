"""Finite-difference discretisation of the soliton operator on a convex domain.

Derivatives are taken along grid lines through each unknown node: the axes
``e_i`` and the diagonals ``e_i +- e_j``.  Along each line a three-point
formula is used; when a neighbour lies outside the domain it is replaced by
the exact boundary crossing of the segment, carrying the Dirichlet value
there (Shortley-Weller).  Mixed second derivatives come from the diagonals,
``A_ij = (D^2_{e_i+e_j} u - D^2_{e_i-e_j} u) / 4``, so central differences
reproduce quadratics exactly at every node.

Optionally, lines with two regular neighbours on each side switch to
fourth-order five-point formulas; the boundary treatment is unchanged.

A node whose nearest boundary crossing is closer than ``theta_min * h`` is
pinned to the boundary value at that crossing instead of being solved for;
otherwise its stencil weights grow like ``1/theta`` and rounding in the
residual swamps the Newton tolerance.

Each derivative is an affine map ``u -> W u + c`` of the unknown vector, so
residuals and exact Jacobians are sparse products.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from ..geometry import soliton_operator

EXTERIOR, INTERIOR, BOUNDARY_ADJACENT, PINNED = 0, 1, 2, 3
MASK_NAMES = {EXTERIOR: "exterior", INTERIOR: "interior",
              BOUNDARY_ADJACENT: "boundary-adjacent", PINNED: "pinned"}
THETA_MIN = 1e-3


def stencil_directions(n: int):
    """Axes first, then ``(e_i + e_j, e_i - e_j)`` for each pair ``i < j``."""
    eye = np.eye(n, dtype=int)
    dirs = [eye[i] for i in range(n)]
    pairs = list(combinations(range(n), 2))
    for i, j in pairs:
        dirs.append(eye[i] + eye[j])
        dirs.append(eye[i] - eye[j])
    return np.array(dirs), pairs


WIDE_FIRST = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
WIDE_SECOND = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _widen(w3, wide, w5):
    """Five-column weights: three-point rows padded, ``wide`` rows replaced."""
    out = np.zeros((len(w3), 5))
    out[:, 1:4] = w3
    out[wide] = w5
    return out


def _line_weights(a, b):
    """Three-point weights at offsets ``-a, 0, +b`` for ``f'`` and ``f''``."""
    s = a + b
    d1 = np.stack([-b / (a * s), (b - a) / (a * b), a / (b * s)], axis=1)
    d2 = 2.0 * np.stack([1.0 / (a * s), -1.0 / (a * b), 1.0 / (b * s)], axis=1)
    return d1, d2


@dataclass
class AffineMap:
    W: sp.csr_matrix
    c: np.ndarray

    def __call__(self, u):
        return self.W @ u + self.c


class Discretization:
    """Stencils, masks and boundary data for one (domain, grid, boundary) triple.

    Parameters
    ----------
    domain : ConvexDomain
    grid : GridSpec
    boundary : float or callable
        Dirichlet data; a callable receives boundary points of shape ``(N, n)``.
    theta_min : float
        Pinning threshold on the relative distance to the boundary.
    order : {2, 4}
        With 4, lines whose five points all lie inside the domain use
        fourth-order central differences; the rest keep the three-point rule.
    """

    def __init__(self, domain, grid, boundary, theta_min: float = THETA_MIN, order: int = 2):
        if order not in (2, 4):
            raise ValueError("order must be 2 or 4")
        self.order = order
        if domain.n != grid.n:
            raise ValueError("domain and grid dimensions differ")
        lo, hi = domain.bounding_box()
        if not grid.contains_with_margin(lo, hi):
            raise ValueError("grid box must contain the domain with a margin of 2h")
        self.domain = domain
        self.grid = grid
        self.n = grid.n
        self.h = grid.h
        self.theta_min = theta_min
        self.boundary = boundary
        self.constant_boundary = not callable(boundary)
        self.directions, self.pairs = stencil_directions(self.n)
        self._build()

    def g(self, X):
        X = np.asarray(X, dtype=float)
        if self.constant_boundary:
            return np.full(len(X), float(self.boundary))
        return np.asarray(self.boundary(X), dtype=float).reshape(len(X))

    # -- construction -------------------------------------------------------

    def _build(self):
        grid, h = self.grid, self.h
        shape = np.array(grid.shape)
        self.points = grid.points()
        inside = self.domain.inside(self.points)
        strides = np.array([int(np.prod(shape[k + 1:])) for k in range(self.n)])
        self.strides = strides
        idx_all = np.indices(grid.shape).reshape(self.n, -1).T
        cand = np.flatnonzero(inside)

        # crossings for each direction and sign
        crossings = {}
        theta = np.full(cand.size, np.inf)
        nearest = np.zeros((cand.size, self.n))
        for k, d in enumerate(self.directions):
            for sgn in (1, -1):
                nb = idx_all[cand] + sgn * d
                valid = np.all((nb >= 0) & (nb < shape), axis=1)
                flat = nb @ strides
                out = ~valid
                out[valid] = ~inside[flat[valid]]
                rows = np.flatnonzero(out)
                if rows.size:
                    X = self.points[cand[rows]]
                    D = np.broadcast_to(sgn * d * h, X.shape).astype(float)
                    t = self.domain.segment_exit(X, D)
                    crossings[(k, sgn)] = (rows, t, X + t[:, None] * D)
                    better = t < theta[rows]
                    theta[rows[better]] = t[better]
                    nearest[rows[better]] = (X + t[:, None] * D)[better]

        pin = theta < self.theta_min
        self.mask = np.zeros(grid.size, dtype=np.int8)
        self.mask[cand] = INTERIOR
        self.mask[cand[pin]] = PINNED
        self.pinned = cand[pin]
        self.pinned_values = self.g(nearest[pin]) if pin.any() else np.zeros(0)
        self.unknowns = cand[~pin]
        self.index = np.full(grid.size, -1)
        self.index[self.unknowns] = np.arange(self.unknowns.size)
        known = np.full(grid.size, np.nan)
        known[self.pinned] = self.pinned_values
        self.theta = np.full(grid.size, np.inf)
        self.theta[cand] = theta

        keep = np.full(cand.size, -1)
        keep[~pin] = np.arange(self.unknowns.size)
        N = self.unknowns.size
        idx_unk = idx_all[self.unknowns]
        centre = (np.arange(N), np.zeros(N))
        reach = (1, 2) if self.order == 4 else (1,)

        def neighbour(offset):
            nb = idx_unk + offset
            ok = np.all((nb >= 0) & (nb < shape), axis=1)
            flat = np.where(ok, nb @ strides, 0)
            ins = ok & inside[flat]
            column = np.where(ins, self.index[flat], -1)
            value = np.where(ins & (column < 0), known[flat], 0.0)
            return column, np.nan_to_num(value), ins

        adjacent = np.zeros(N, dtype=bool)
        self.first = []
        self.second = []
        for k, d in enumerate(self.directions):
            nbr, step = {}, {}
            for sgn in (1, -1):
                for m in reach:
                    nbr[sgn, m] = neighbour(sgn * m * d)
                s = np.ones(N)
                if (k, sgn) in crossings:
                    rows, t, Xb = crossings[(k, sgn)]
                    r = keep[rows]
                    sel = r >= 0
                    s[r[sel]] = t[sel]
                    nbr[sgn, 1][1][r[sel]] = self.g(Xb[sel])
                step[sgn] = s
                adjacent |= nbr[sgn, 1][0] < 0
            w1, w2 = _line_weights(step[-1], step[1])
            lines = [nbr[-1, 1][:2], centre, nbr[1, 1][:2]]
            if self.order == 4:
                wide = np.all([nbr[key][2] for key in nbr], axis=0)
                wide &= (step[-1] == 1.0) & (step[1] == 1.0)
                lines = [nbr[-1, 2][:2]] + lines + [nbr[1, 2][:2]]
                w1 = _widen(w1, wide, WIDE_FIRST)
                w2 = _widen(w2, wide, WIDE_SECOND)
            # offsets are in units of h*d, so these give Du.d and d^T D^2u d
            if k < self.n:
                self.first.append(self._affine(w1 / h, lines))
            self.second.append(self._affine(w2 / (h * h), lines))
        self.mask[self.unknowns[adjacent]] = BOUNDARY_ADJACENT
        self.adjacent = adjacent

    def _affine(self, w, lines):
        """Assemble ``sum_j w[:, j] * u(line j)``; column ``-1`` means a known value."""
        N = self.unknowns.size
        rows = np.arange(N)
        r_list, c_list, v_list = [], [], []
        c = np.zeros(N)
        for j, (column, value) in enumerate(lines):
            inner = column >= 0
            nz = inner & (w[:, j] != 0)
            r_list.append(rows[nz])
            c_list.append(column[nz])
            v_list.append(w[nz, j])
            c[~inner] += w[~inner, j] * value[~inner]
        W = sp.csr_matrix((np.concatenate(v_list), (np.concatenate(r_list), np.concatenate(c_list))),
                          shape=(N, N))
        return AffineMap(W, c)

    # -- evaluation ---------------------------------------------------------

    @property
    def size(self) -> int:
        return int(self.unknowns.size)

    def restrict(self, u_full):
        return np.asarray(u_full, dtype=float).reshape(-1)[self.unknowns]

    def extend(self, u):
        """Full-grid array: unknowns, pinned values, NaN outside."""
        full = np.full(self.grid.size, np.nan)
        full[self.unknowns] = u
        full[self.pinned] = self.pinned_values
        return full.reshape(self.grid.shape)

    def jets(self, u):
        """Discrete gradient ``(N, n)`` and Hessian ``(N, n, n)`` at the unknowns."""
        n = self.n
        grad = np.stack([m(u) for m in self.first], axis=1)
        sec = [m(u) for m in self.second]
        hess = np.empty((u.size, n, n))
        for i in range(n):
            hess[:, i, i] = sec[i]
        for p, (i, j) in enumerate(self.pairs):
            mixed = 0.25 * (sec[n + 2 * p] - sec[n + 2 * p + 1])
            hess[:, i, j] = mixed
            hess[:, j, i] = mixed
        return grad, hess

    def operator(self, u, C, sigma, derivatives=False):
        grad, hess = self.jets(u)
        return soliton_operator(grad, hess, C, sigma, derivatives=derivatives)

    def jacobian(self, ev) -> sp.csr_matrix:
        """Exact Jacobian of the discrete residual from an ``OperatorEval``."""
        n = self.n
        J = sp.csr_matrix((self.size, self.size))
        for i in range(n):
            J = J + sp.diags(ev.dF_dp[:, i]) @ self.first[i].W
            J = J + sp.diags(ev.dF_dA[:, i, i]) @ self.second[i].W
        for p, (i, j) in enumerate(self.pairs):
            coef = 0.25 * (ev.dF_dA[:, i, j] + ev.dF_dA[:, j, i])
            J = J + sp.diags(coef) @ (self.second[n + 2 * p].W - self.second[n + 2 * p + 1].W)
        return J.tocsr()
