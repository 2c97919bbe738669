"""Cartesian node grids masked to dual-norm balls and the discrete Finsler Laplacian.

Fields are stored compactly as 1-D arrays over the interior (masked) nodes;
:meth:`Grid.to_full` expands them onto the bounding box with zeros elsewhere.

The discrete operator is built from a linear face-gradient map ``G``: on each
face between two neighbouring nodes the normal derivative is a two-point
difference and, in 2-D, the tangential derivative averages the central
differences at both endpoints.  With the face energy ``1/2 H(Gu)^2`` over a
diamond cell of measure ``h^N / N``, the Laplacian is defined as
``L(u) = -(1/h^N) dE/du = -(1/N) G^T a(Gu)``, which gives exact
summation-by-parts and monotonicity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .norms import FinslerEvaluator, NonpositiveRadius

__all__ = [
    "Grid",
    "BadPadding",
    "NonpositiveSpacing",
    "ShapeMismatch",
    "build_grid",
    "face_gradients",
    "finsler_laplacian",
    "laplacian_jacobian",
    "discrete_energy",
    "beta",
    "beta_inverse",
    "beta_prime",
    "write_field_csv",
]


class BadPadding(ValueError):
    pass


class NonpositiveSpacing(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


@dataclass(eq=False)
class Grid:
    N: int
    h: float
    L: float
    R: float
    ev: FinslerEvaluator
    axes: list[np.ndarray]
    mask: np.ndarray  # bool, shape = box shape
    interior: np.ndarray  # flat indices of masked nodes into the box
    coords: np.ndarray  # (n_int, N)
    radius: np.ndarray  # H0 of interior nodes
    G: list[sp.csr_matrix] = field(repr=False)  # one (n_faces, n_int) matrix per gradient component
    face_centers: np.ndarray = field(repr=False)
    face_axis: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mask.shape

    @property
    def n_interior(self) -> int:
        return self.interior.size

    @property
    def n_faces(self) -> int:
        return self.face_centers.shape[0]

    @property
    def node_volume(self) -> float:
        return self.h**self.N

    @property
    def face_volume(self) -> float:
        return self.h**self.N / self.N

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_interior)

    def as_interior(self, field) -> np.ndarray:
        """Accept a compact or box-shaped field and return the compact form."""
        f = np.asarray(field, dtype=float)
        if f.shape == (self.n_interior,):
            return f
        if f.shape == self.shape:
            return f.ravel()[self.interior]
        raise ShapeMismatch(f"field of shape {f.shape} matches neither {(self.n_interior,)} nor {self.shape}")

    def to_full(self, field) -> np.ndarray:
        out = np.zeros(self.mask.size)
        out[self.interior] = self.as_interior(field)
        return out.reshape(self.shape)

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(coords)`` on interior nodes."""
        return np.asarray(func(self.coords), dtype=float)

    def integrate(self, values, radius: float | None = None) -> float:
        """Midpoint sum of a nodal field, optionally over ``{H0 < radius}`` only."""
        values = self.as_interior(values)
        if radius is not None:
            values = values[self.radius < radius]
        return float(np.sum(values) * self.node_volume)

    def face_radius(self) -> np.ndarray:
        return self.ev.dual_eval(self.face_centers)

    def lattice_keys(self, sel=None) -> np.ndarray:
        """Integer lattice coordinates (``round(2x/h)``) for matching nodes across grids."""
        c = self.coords if sel is None else self.coords[sel]
        return np.rint(2.0 * c / self.h).astype(np.int64)


def build_grid(R: float, h: float, L: float | None, ev: FinslerEvaluator) -> Grid:
    """Node lattice ``-L + i h`` on ``[-L, L]^N`` with interior mask ``H0(x) < R``.

    ``L=None`` picks the smallest multiple of ``h`` leaving a two-cell collar
    around the ball.
    """
    if R <= 0:
        raise NonpositiveRadius(f"radius must be positive, got {R}")
    if h <= 0:
        raise NonpositiveSpacing(f"spacing must be positive, got {h}")
    N = ev.dim
    extent = float(np.max(ev.axis_extent())) * R
    if L is None:
        L = math.ceil((extent + 2 * h) / h - 1e-9) * h
    if L < extent + 2 * h - 1e-12:
        raise BadPadding(f"box half-width {L} must be at least ball extent + 2h = {extent + 2 * h}")
    n_cells = 2 * L / h
    if abs(n_cells - round(n_cells)) > 1e-8 * max(1.0, n_cells):
        raise BadPadding(f"h={h} does not divide 2L={2 * L}")
    n = int(round(n_cells)) + 1
    ax = -L + h * np.arange(n)
    axes = [ax] * N
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    mask = ev.dual_eval(mesh) < R
    if not mask.any():
        raise BadPadding("ball contains no grid nodes")
    interior = np.flatnonzero(mask)
    coords = mesh.reshape(-1, N)[interior]
    radius = ev.dual_eval(coords)

    shape = mask.shape
    index = -np.ones(mask.size, dtype=np.int64)
    index[interior] = np.arange(interior.size)
    index = index.reshape(shape)

    rows: list[list[np.ndarray]] = [[] for _ in range(N)]
    cols: list[list[np.ndarray]] = [[] for _ in range(N)]
    vals: list[list[np.ndarray]] = [[] for _ in range(N)]
    centers, face_axis = [], []
    offset = 0
    for d in range(N):
        lo = [slice(None)] * N
        hi = [slice(None)] * N
        lo[d] = slice(0, n - 1)
        hi[d] = slice(1, n)
        keep = mask[tuple(lo)] | mask[tuple(hi)]
        pos = np.argwhere(keep)  # multi-index of the lower endpoint
        nf = pos.shape[0]
        fid = offset + np.arange(nf)
        centers.append(mesh[tuple(pos.T)] + 0.5 * h * np.eye(N)[d])
        face_axis.append(np.full(nf, d))

        def add(comp, p, w):
            # drop stencil nodes outside the box or the mask (zero Dirichlet ghosts)
            inside = np.all((p >= 0) & (p < n), axis=1)
            j = np.full(p.shape[0], -1)
            j[inside] = index[tuple(p[inside].T)]
            ok = j >= 0
            rows[comp].append(fid[ok])
            cols[comp].append(j[ok])
            vals[comp].append(np.full(ok.sum(), w))

        e_d = np.eye(N, dtype=np.int64)[d]
        add(d, pos, -1.0 / h)
        add(d, pos + e_d, 1.0 / h)
        if N == 2:
            t = 1 - d
            e_t = np.eye(N, dtype=np.int64)[t]
            w = 1.0 / (4.0 * h)
            add(t, pos + e_t, w)
            add(t, pos - e_t, -w)
            add(t, pos + e_d + e_t, w)
            add(t, pos + e_d - e_t, -w)
        offset += nf

    n_faces = offset
    G = []
    for c in range(N):
        r = np.concatenate(rows[c]) if rows[c] else np.zeros(0, dtype=np.int64)
        cc = np.concatenate(cols[c]) if cols[c] else np.zeros(0, dtype=np.int64)
        v = np.concatenate(vals[c]) if vals[c] else np.zeros(0)
        G.append(sp.csr_matrix((v, (r, cc)), shape=(n_faces, interior.size)))
    return Grid(
        N=N,
        h=float(h),
        L=float(L),
        R=float(R),
        ev=ev,
        axes=axes,
        mask=mask,
        interior=interior,
        coords=coords,
        radius=radius,
        G=G,
        face_centers=np.concatenate(centers),
        face_axis=np.concatenate(face_axis),
    )


def face_gradients(grid: Grid, field) -> np.ndarray:
    """Reconstructed gradient on every face, shape ``(n_faces, N)``."""
    u = grid.as_interior(field)
    return np.stack([Gc @ u for Gc in grid.G], axis=-1)


def _check_ev(grid: Grid, ev: FinslerEvaluator):
    if ev.dim != grid.N:
        raise ShapeMismatch(f"evaluator dimension {ev.dim} != grid dimension {grid.N}")


def finsler_laplacian(grid: Grid, ev: FinslerEvaluator, field) -> np.ndarray:
    """Discrete ``div(H(grad u) grad_xi H(grad u))`` on interior nodes."""
    _check_ev(grid, ev)
    a = ev.flux(face_gradients(grid, field))
    out = grid.G[0].T @ a[:, 0]
    for c in range(1, grid.N):
        out += grid.G[c].T @ a[:, c]
    return -out / grid.N


def laplacian_jacobian(grid: Grid, ev: FinslerEvaluator, field, eps: float = 1e-8) -> sp.csr_matrix:
    """Derivative of :func:`finsler_laplacian` (negative semidefinite, symmetric)."""
    _check_ev(grid, ev)
    J = ev.flux_jacobian(face_gradients(grid, field), eps=eps)
    acc = None
    for c in range(grid.N):
        for c2 in range(grid.N):
            w = J[:, c, c2]
            if not np.any(w):
                continue
            term = grid.G[c].T @ sp.diags(w) @ grid.G[c2]
            acc = term if acc is None else acc + term
    if acc is None:
        acc = sp.csr_matrix((grid.n_interior, grid.n_interior))
    return (-acc / grid.N).tocsr()


def discrete_energy(grid: Grid, ev: FinslerEvaluator, field) -> float:
    """``sum_faces 1/2 H(grad u)^2 * face_volume``."""
    _check_ev(grid, ev)
    H = ev.eval(face_gradients(grid, field))
    return float(0.5 * np.sum(H * H) * grid.face_volume)


def beta(q: float, u):
    """``|u|^{q-2} u``."""
    if q <= 1:
        raise ValueError(f"q must exceed 1, got {q}")
    u = np.asarray(u, dtype=float)
    return (np.sign(u) * np.abs(u) ** (q - 1.0))[()]


def beta_inverse(q: float, v):
    if q <= 1:
        raise ValueError(f"q must exceed 1, got {q}")
    v = np.asarray(v, dtype=float)
    return (np.sign(v) * np.abs(v) ** (1.0 / (q - 1.0)))[()]


def beta_prime(q: float, u, eps: float = 0.0):
    """Regularised derivative ``(q-1)(|u| + eps)^{q-2}``."""
    u = np.asarray(u, dtype=float)
    return (q - 1.0) * (np.abs(u) + eps) ** (q - 2.0)


def write_field_csv(path, grid: Grid, field) -> None:
    """Row-major dump over the bounding box: ``x[,y],value``."""
    full = grid.to_full(field)
    mesh = np.stack(np.meshgrid(*grid.axes, indexing="ij"), axis=-1).reshape(-1, grid.N)
    header = "x,value" if grid.N == 1 else "x,y,value"
    data = np.column_stack([mesh, full.ravel()])
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
