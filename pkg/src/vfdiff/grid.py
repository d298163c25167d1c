"""Uniform cell-centered grids, Neumann-closed stencils and midpoint quadrature.

All discrete operators use mirror ghost cells: the ghost value across a
boundary face equals the adjacent interior value, so every boundary face
carries zero flux.  This makes the integral of the discrete Laplacian vanish
exactly (up to round-off), which the conservation checks rely on.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

Number = Union[int, float]


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box ``[0, L_0] x ... x [0, L_{N-1}]`` split into equal cells.

    Parameters
    ----------
    extents : tuple of float
        Box side lengths, one per axis.
    resolutions : tuple of int
        Cell count per axis.
    """

    extents: tuple
    resolutions: tuple

    def __post_init__(self):
        if len(self.extents) != len(self.resolutions):
            raise ValueError("extents and resolutions must have the same length")
        if len(self.extents) not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(self.extents)}")
        for L in self.extents:
            if not (np.isfinite(L) and L > 0):
                raise ValueError(f"extent must be positive, got {L}")
        for n in self.resolutions:
            if int(n) != n or n <= 0:
                raise ValueError(f"resolution must be a positive integer, got {n}")

    @property
    def ndim(self) -> int:
        return len(self.extents)

    @property
    def shape(self) -> tuple:
        return tuple(int(n) for n in self.resolutions)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple:
        return tuple(float(L) / int(n) for L, n in zip(self.extents, self.resolutions))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def centers(self, axis: int) -> np.ndarray:
        """1D array of cell-center coordinates along ``axis``."""
        h = self.spacing[axis]
        return (np.arange(self.shape[axis]) + 0.5) * h

    def mesh(self) -> list:
        """Cell-center coordinate arrays broadcast to the full grid shape."""
        axes = [self.centers(a) for a in range(self.ndim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def field(self, values, positive: bool = False) -> "Field":
        return Field(self, values, positive=positive)

    def constant(self, value: float) -> "Field":
        return Field(self, np.full(self.shape, float(value)))

    def sample(self, func) -> "Field":
        """Evaluate ``func(x[, y[, z]])`` at cell centers."""
        return Field(self, np.asarray(func(*self.mesh()), dtype=float) * np.ones(self.shape))


def make_grid(ndim: int, extents: Sequence[Number], resolutions: Sequence[int]) -> Grid:
    """Build a :class:`Grid`; raises ``ValueError`` on bad sizes."""
    if ndim not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {ndim}")
    if len(extents) != ndim or len(resolutions) != ndim:
        raise ValueError("need one extent and one resolution per axis")
    return Grid(tuple(float(L) for L in extents), tuple(resolutions))


class Field:
    """Cell values bound to a grid.  Immutable once constructed.

    Values are stored as an array of shape ``grid.shape``; flattening in C
    order gives the axis-major cell ordering used in every file format.
    """

    __slots__ = ("grid", "values")
    __array_priority__ = 1000

    def __init__(self, grid: Grid, values, positive: bool = False):
        arr = np.array(values, dtype=float)
        if arr.size != grid.size:
            raise ValueError(f"field has {arr.size} values but grid has {grid.size} cells")
        arr = arr.reshape(grid.shape)
        if positive:
            bad = np.flatnonzero(~(arr > 0))
            if bad.size:
                i = int(bad[0])
                raise ValueError(f"field must be positive; cell {i} has value {arr.flat[i]!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    def __repr__(self):
        return f"Field(shape={self.grid.shape}, min={self.values.min():.6g}, max={self.values.max():.6g})"

    def __len__(self):
        return self.grid.size

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def map(self, func) -> "Field":
        return Field(self.grid, func(self.values))

    def _other(self, other):
        if isinstance(other, Field):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other))

    def __rtruediv__(self, other):
        return Field(self.grid, self._other(other) / self.values)

    def __pow__(self, p):
        return Field(self.grid, self.values ** p)

    def __neg__(self):
        return Field(self.grid, -self.values)


def check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=float)


def integrate(field: Field) -> float:
    """Midpoint rule: sum of cell values times the cell volume."""
    # C-order flat sum keeps the reduction order fixed
    return float(np.sum(field.values.reshape(-1)) * field.grid.cell_volume)


def _face_differences(values: np.ndarray, grid: Grid):
    return [np.diff(values, axis=a) / h for a, h in enumerate(grid.spacing)]


def laplacian(field: Field) -> Field:
    """Second-order Laplacian with homogeneous Neumann closure."""
    grid = field.grid
    out = np.zeros(grid.shape)
    for a, (h, flux) in enumerate(zip(grid.spacing, _face_differences(field.values, grid))):
        pad = [(0, 0)] * grid.ndim
        pad[a] = (1, 1)
        out += np.diff(np.pad(flux, pad), axis=a) / h
    return Field(grid, out)


def face_inner(a: Field, b: Field) -> float:
    """Face inner product of discrete gradients, weighted by the cell volume.

    Boundary faces carry no gradient.  ``face_inner(a, a)`` equals
    :func:`grad_sq_integral`, and ``integrate(a * laplacian(b)) == -face_inner(a, b)``.
    """
    check_same_grid(a, b)
    grid = a.grid
    total = 0.0
    for da, db in zip(_face_differences(a.values, grid), _face_differences(b.values, grid)):
        total += float(np.sum((da * db).reshape(-1)))
    return total * grid.cell_volume


def grad_sq_integral(field: Field) -> float:
    """Discrete ``int |grad v|^2`` on interior faces."""
    return face_inner(field, field)


def h1_distance(a: Field, b: Field) -> float:
    check_same_grid(a, b)
    w = a - b
    return float(np.sqrt(integrate(w * w) + grad_sq_integral(w)))


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse matrix of :func:`laplacian` acting on C-order flattened values."""
    mats = []
    for n, h in zip(grid.shape, grid.spacing):
        main = -2.0 * np.ones(n)
        if n > 1:
            main[0] = main[-1] = -1.0
        else:
            main[0] = 0.0
        off = np.ones(n - 1)
        mats.append(sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2)
    eye = [sp.identity(n, format="csr") for n in grid.shape]
    total = None
    for a in range(grid.ndim):
        factors = [mats[i] if i == a else eye[i] for i in range(grid.ndim)]
        term = factors[0]
        for fct in factors[1:]:
            term = sp.kron(term, fct, format="csr")
        total = term if total is None else total + term
    return total.tocsr()


def divergence_matrix(grid: Grid, face_coeffs: Sequence[np.ndarray]) -> sp.csr_matrix:
    """Sparse matrix of ``v -> div_h(a grad_h v)`` with per-face coefficients.

    ``face_coeffs[axis]`` has the grid shape with one fewer entry along
    ``axis`` (interior faces only; boundary faces carry zero flux).
    """
    size = grid.size
    idx = np.arange(size).reshape(grid.shape)
    rows, cols, vals = [], [], []
    for a, h in enumerate(grid.spacing):
        coeff = np.asarray(face_coeffs[a], dtype=float) / h**2
        lo = np.take(idx, np.arange(grid.shape[a] - 1), axis=a).reshape(-1)
        hi = np.take(idx, np.arange(1, grid.shape[a]), axis=a).reshape(-1)
        c = coeff.reshape(-1)
        rows += [lo, lo, hi, hi]
        cols += [hi, lo, lo, hi]
        vals += [c, -c, c, -c]
    if not rows:
        return sp.csr_matrix((size, size))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    )
