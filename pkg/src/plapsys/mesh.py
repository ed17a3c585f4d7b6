"""Structured simplicial meshes of intervals and rectangles.

Nodes are numbered with the first axis varying fastest.  In 2D every grid
square ``(i, j)`` with corners ``a=(i,j), b=(i+1,j), c=(i+1,j+1), d=(i,j+1)``
is split along the ``a-c`` diagonal into triangles ``(a, b, c)`` and
``(a, c, d)``.  Fields are plain ``numpy`` arrays with one value per node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import MeshError

BOUNDARY_TOL = 1e-12

# Quadrature rules in barycentric coordinates; weights sum to one.
_QUAD_1D = (np.array([[0.5, 0.5]]), np.array([1.0]))
_QUAD_2D = (
    np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
    np.full(3, 1 / 3),
)


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned domain plus the padding used to build the enlarged domain.

    ``padding=None`` means a quarter of the shortest axis length.
    """

    dimension: int
    bounds: tuple[tuple[float, float], ...]
    padding: float | None = None

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise MeshError(f"dimension must be 1 or 2, got {self.dimension}")
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) != self.dimension:
            raise MeshError("need one (lower, upper) pair per axis")
        for lo, hi in bounds:
            if not lo < hi:
                raise MeshError(f"degenerate axis bounds ({lo}, {hi})")
        object.__setattr__(self, "bounds", bounds)
        if self.padding is not None and self.padding < 0:
            raise MeshError("padding must be nonnegative")

    @classmethod
    def interval(cls, lo: float, hi: float, padding: float | None = None) -> "DomainSpec":
        return cls(1, ((lo, hi),), padding)

    @classmethod
    def rectangle(cls, xb, yb, padding: float | None = None) -> "DomainSpec":
        return cls(2, (tuple(xb), tuple(yb)), padding)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.bounds])

    @property
    def pad(self) -> float:
        if self.padding is None:
            return 0.25 * float(self.lengths.min())
        return float(self.padding)

    @property
    def inradius(self) -> float:
        return 0.5 * float(self.lengths.min())


@dataclass(frozen=True, eq=False)
class Mesh:
    points: np.ndarray  # (n_nodes, dim)
    cells: np.ndarray  # (n_cells, dim + 1)
    boundary: np.ndarray  # bool (n_nodes,)
    bounds: tuple[tuple[float, float], ...]
    shape: tuple[int, ...]  # subdivisions per axis
    h: float = field(default=0.0)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.points.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    @property
    def x(self) -> np.ndarray:
        """First coordinate of every node (convenient in 1D)."""
        return self.points[:, 0]

    @cached_property
    def measures(self) -> np.ndarray:
        p = self.points[self.cells]
        if self.dim == 1:
            return p[:, 1, 0] - p[:, 0, 0]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Constant gradients of the hat functions, shape (n_cells, dim+1, dim)."""
        p = self.points[self.cells]
        if self.dim == 1:
            inv = 1.0 / (p[:, 1, 0] - p[:, 0, 0])
            return np.stack([-inv, inv], axis=1)[:, :, None]
        # rows of the inverse Jacobian give grads of barycentric coords 1, 2
        jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        inv = np.linalg.inv(jac)
        g12 = inv  # (n, 2, 2): row k = grad lambda_{k+1}
        g0 = -g12.sum(axis=1, keepdims=True)
        return np.concatenate([g0, g12], axis=1)

    @cached_property
    def active_cells(self) -> np.ndarray:
        """Cells with at least one interior vertex; only these meet an interior test function."""
        return np.any(~self.boundary[self.cells], axis=1)

    @property
    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Barycentric quadrature points and weights of the element rule."""
        return _QUAD_1D if self.dim == 1 else _QUAD_2D

    @cached_property
    def quad_points(self) -> np.ndarray:
        """Physical quadrature points, shape (n_cells, n_q, dim)."""
        bary, _ = self.quadrature
        return np.einsum("qk,ekd->eqd", bary, self.points[self.cells])

    def at_quadrature(self, values: np.ndarray) -> np.ndarray:
        """Interpolate a nodal field to the quadrature points, shape (n_cells, n_q)."""
        bary, _ = self.quadrature
        return values[self.cells] @ bary.T

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Elementwise constant gradient, shape (n_cells, dim)."""
        return np.einsum("ekd,ek->ed", self.basis_gradients, values[self.cells])

    def recovered_gradient(self, values: np.ndarray) -> np.ndarray:
        """Nodal gradients as measure-weighted averages over adjacent cells."""
        g = self.gradient(values)
        out = np.zeros((self.n_nodes, self.dim))
        wsum = np.zeros(self.n_nodes)
        for k in range(self.cells.shape[1]):
            np.add.at(out, self.cells[:, k], g * self.measures[:, None])
            np.add.at(wsum, self.cells[:, k], self.measures)
        return out / wsum[:, None]

    def integrate(self, qvalues: np.ndarray) -> float:
        """Integrate values given at quadrature points."""
        _, w = self.quadrature
        return float(np.sum(self.measures[:, None] * w[None, :] * qvalues))

    def contains(self, pts: np.ndarray, tol: float = BOUNDARY_TOL) -> np.ndarray:
        pts = np.atleast_2d(pts)
        inside = np.ones(len(pts), dtype=bool)
        for d, (lo, hi) in enumerate(self.bounds):
            inside &= (pts[:, d] >= lo - tol) & (pts[:, d] <= hi + tol)
        return inside


@dataclass(frozen=True, eq=False)
class RegionMask:
    mask: np.ndarray
    strip_width: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mask", np.asarray(self.mask, dtype=bool))

    def __invert__(self) -> "RegionMask":
        return RegionMask(~self.mask)

    def __and__(self, other: "RegionMask") -> "RegionMask":
        return RegionMask(self.mask & np.asarray(getattr(other, "mask", other)))

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def _structured(bounds, shape) -> Mesh:
    axes = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(bounds, shape)]
    if len(shape) == 1:
        pts = axes[0][:, None]
        idx = np.arange(shape[0])
        cells = np.stack([idx, idx + 1], axis=1)
    else:
        nx, ny = shape
        X, Y = np.meshgrid(axes[0], axes[1], indexing="xy")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        i, j = i.ravel(), j.ravel()
        a = j * (nx + 1) + i
        b = a + 1
        c = a + nx + 2
        d = a + nx + 1
        cells = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    boundary = np.zeros(len(pts), dtype=bool)
    for dim, (lo, hi) in enumerate(bounds):
        boundary |= np.abs(pts[:, dim] - lo) <= BOUNDARY_TOL
        boundary |= np.abs(pts[:, dim] - hi) <= BOUNDARY_TOL
    h = max((hi - lo) / n for (lo, hi), n in zip(bounds, shape))
    return Mesh(pts, cells.astype(np.intp), boundary, tuple(bounds), tuple(shape), h)


def build_mesh(spec: DomainSpec, n: int) -> Mesh:
    """Uniform mesh of the domain with ``n`` subdivisions per axis."""
    if int(n) != n or n < 2:
        raise MeshError(f"need at least 2 subdivisions per axis, got {n}")
    return _structured(spec.bounds, (int(n),) * spec.dimension)


def enlarged_bounds(spec: DomainSpec, padding: float | None = None):
    pad = spec.pad if padding is None else padding
    if not pad > 0:
        raise MeshError("enlarged domain needs padding > 0")
    return tuple((lo - pad, hi + pad) for lo, hi in spec.bounds)


def enlarged_mesh(spec: DomainSpec, n: int | None = None, match: Mesh | None = None) -> Mesh:
    """Mesh of the padded domain containing the closure of ``spec``.

    Either ``n`` subdivisions per axis over the enlarged domain, or ``match``:
    a mesh of ``spec`` whose spacing is reproduced exactly, the padding being
    rounded to a whole number of cells so that every node of ``match`` is
    also a node of the result.
    """
    if (n is None) == (match is None):
        raise MeshError("give exactly one of n or match")
    if n is not None:
        if n < 2:
            raise MeshError(f"need at least 2 subdivisions per axis, got {n}")
        bounds = enlarged_bounds(spec)
        return _structured(bounds, (int(n),) * spec.dimension)
    if not spec.pad > 0:
        raise MeshError("enlarged domain needs padding > 0")
    bounds, shape = [], []
    for (lo, hi), m in zip(spec.bounds, match.shape):
        step = (hi - lo) / m
        cells_pad = max(1, int(round(spec.pad / step)))
        bounds.append((lo - cells_pad * step, hi + cells_pad * step))
        shape.append(m + 2 * cells_pad)
    return _structured(tuple(bounds), tuple(shape))


def distance_to_boundary(mesh: Mesh) -> np.ndarray:
    d = np.full(mesh.n_nodes, np.inf)
    for k, (lo, hi) in enumerate(mesh.bounds):
        d = np.minimum(d, np.minimum(mesh.points[:, k] - lo, hi - mesh.points[:, k]))
    d = np.maximum(d, 0.0)
    d[mesh.boundary] = 0.0
    return d


def inradius(mesh: Mesh) -> float:
    return 0.5 * min(hi - lo for lo, hi in mesh.bounds)


def boundary_strip(mesh: Mesh, strip_width: float) -> RegionMask:
    """Nodes closer to the boundary than ``strip_width``."""
    limit = 0.5 * inradius(mesh)
    if not 0 < strip_width < limit:
        raise MeshError(f"strip_width must lie in (0, {limit}), got {strip_width}")
    # the coordinate tolerance keeps nodes at distance exactly strip_width out
    return RegionMask(distance_to_boundary(mesh) < strip_width - BOUNDARY_TOL, strip_width)


def transfer(values: np.ndarray, source: Mesh, target: Mesh) -> np.ndarray:
    """Piecewise-linear interpolation of a nodal field onto another mesh's nodes."""
    pts = target.points
    if not np.all(source.contains(pts)):
        bad = pts[~source.contains(pts)][0]
        raise MeshError(f"target node {bad} lies outside the source mesh")
    locals_, index = [], []
    for d, ((lo, hi), n) in enumerate(zip(source.bounds, source.shape)):
        step = (hi - lo) / n
        s = (pts[:, d] - lo) / step
        i = np.clip(np.floor(s).astype(np.intp), 0, n - 1)
        index.append(i)
        locals_.append(np.clip(s - i, 0.0, 1.0))
    if source.dim == 1:
        (i,), (t,) = index, locals_
        return (1 - t) * values[i] + t * values[i + 1]
    (i, j), (xi, eta) = index, locals_
    nx = source.shape[0]
    a = j * (nx + 1) + i
    ua, ub, uc, ud = values[a], values[a + 1], values[a + nx + 2], values[a + nx + 1]
    lower = xi >= eta
    return np.where(
        lower,
        ua + xi * (ub - ua) + eta * (uc - ub),
        ua + xi * (uc - ud) + eta * (ud - ua),
    )


def field_extrema(values: np.ndarray, mask: RegionMask | np.ndarray | None = None):
    """Nodal (min, max) over the masked nodes, or the whole mesh."""
    values = np.asarray(values)
    if mask is not None:
        m = np.asarray(getattr(mask, "mask", mask), dtype=bool)
        if not m.any():
            raise MeshError("empty region mask")
        values = values[m]
    return float(values.min()), float(values.max())
