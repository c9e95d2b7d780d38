"""Uniform periodic Cartesian grids, finite-difference stencils and norms.

Arrays live on a lattice of ``n**d`` points with spacing ``h = L / n`` and
coordinates ``x = -L/2 + h * j`` along each axis.  Index arithmetic wraps,
so every stencil is a sum of shifted copies (``np.roll``) of its input.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

# centred first-derivative weights, offsets 1..r (antisymmetric)
_FIRST = {2: (0.5,), 4: (2.0 / 3.0, -1.0 / 12.0)}
# centred second-derivative weights: centre, then offsets 1..r (symmetric)
_SECOND = {2: (-2.0, (1.0,)), 4: (-5.0 / 2.0, (4.0 / 3.0, -1.0 / 12.0))}

_MAGIC = b"WSFD"
_HEADER = struct.Struct("<4sIId")


class FieldError(ValueError):
    pass


class NonFiniteFieldError(FieldError, ArithmeticError):
    pass


def stencil_radius(order: int) -> int:
    if order not in _FIRST:
        raise FieldError(f"accuracy order must be 2 or 4, got {order}")
    return order // 2


@dataclass(frozen=True)
class Grid:
    dimension: int
    points_per_axis: int
    domain_length: float

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise FieldError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if self.points_per_axis < 4:
            raise FieldError("need at least 4 points per axis")
        if not self.domain_length > 0:
            raise FieldError("domain_length must be positive")

    @property
    def spacing(self) -> float:
        return self.domain_length / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dimension

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dimension

    @cached_property
    def axis_coordinates(self) -> np.ndarray:
        return -0.5 * self.domain_length + self.spacing * np.arange(self.points_per_axis)

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, ...]:
        x = self.axis_coordinates
        return tuple(np.meshgrid(*([x] * self.dimension), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.coordinates))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    # -- stencils on raw arrays ---------------------------------------------

    def diff(self, values: np.ndarray, axis: int, order: int = 2) -> np.ndarray:
        """Centred periodic first derivative along ``axis``."""
        if not 0 <= axis < self.dimension:
            raise FieldError(f"axis {axis} invalid for dimension {self.dimension}")
        ax = values.ndim - self.dimension + axis
        coeffs = _FIRST[order] if order in _FIRST else _FIRST[stencil_radius(order) * 2]
        out = np.zeros_like(values)
        for k, c in enumerate(coeffs, start=1):
            out += c * (np.roll(values, -k, axis=ax) - np.roll(values, k, axis=ax))
        return out / self.spacing

    def diff2(self, values: np.ndarray, axis: int, order: int = 2) -> np.ndarray:
        """Centred periodic second derivative along ``axis``."""
        if not 0 <= axis < self.dimension:
            raise FieldError(f"axis {axis} invalid for dimension {self.dimension}")
        stencil_radius(order)
        ax = values.ndim - self.dimension + axis
        centre, coeffs = _SECOND[order]
        out = centre * values
        for k, c in enumerate(coeffs, start=1):
            out = out + c * (np.roll(values, -k, axis=ax) + np.roll(values, k, axis=ax))
        return out / self.spacing**2

    def lap(self, values: np.ndarray, order: int = 2) -> np.ndarray:
        out = self.diff2(values, 0, order)
        for axis in range(1, self.dimension):
            out = out + self.diff2(values, axis, order)
        return out

    def grad(self, values: np.ndarray, order: int = 2) -> np.ndarray:
        return np.stack([self.diff(values, a, order) for a in range(self.dimension)])

    def div(self, vector: np.ndarray, order: int = 2) -> np.ndarray:
        out = self.diff(vector[0], 0, order)
        for a in range(1, self.dimension):
            out = out + self.diff(vector[a], a, order)
        return out

    def spectral_diff(self, values: np.ndarray, axis: int) -> np.ndarray:
        """FFT derivative along ``axis``; the Nyquist mode is dropped."""
        n = self.points_per_axis
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing)
        if n % 2 == 0:
            k[n // 2] = 0.0
        ax = values.ndim - self.dimension + axis
        shape = [1] * values.ndim
        shape[ax] = n
        vhat = np.fft.fft(values, axis=ax)
        return np.real(np.fft.ifft(1j * k.reshape(shape) * vhat, axis=ax))

    # -- norms ----------------------------------------------------------------

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_volume)

    def l2(self, values: np.ndarray) -> float:
        return math.sqrt(self.integrate(values * values))

    def check_derivative_order(self, k: int, order: int):
        if k < 0 or k > 5:
            raise FieldError(f"derivative order {k} outside 0..5")
        if k * stencil_radius(order) >= self.points_per_axis / 2:
            raise FieldError(f"{k} iterated derivatives need a wider grid than n={self.points_per_axis}")

    def derivative_tensor(self, values: np.ndarray, k: int, order: int = 2):
        """Yield ``(multiplicity, derivative)`` over the distinct k-th derivatives.

        Mixed partials are enumerated once per multiset of axes; the
        multiplicity counts the ordered index tuples that give the same
        derivative, so that summing ``multiplicity * derivative**2`` equals the
        squared Euclidean norm of the full array of k-th derivatives.
        """
        self.check_derivative_order(k, order)
        cache = {(): values}
        for combo in itertools.combinations_with_replacement(range(self.dimension), k):
            for j in range(1, k + 1):
                key = combo[:j]
                if key not in cache:
                    cache[key] = self.diff(cache[key[:-1]], key[-1], order)
            counts = [combo.count(a) for a in range(self.dimension)]
            mult = math.factorial(k)
            for c in counts:
                mult //= math.factorial(c)
            yield mult, cache[combo]

    def derivative_norm_squared(self, values: np.ndarray, k: int, order: int = 2) -> np.ndarray:
        """Pointwise |nabla^k f|^2 (summed over all ordered index tuples)."""
        out = np.zeros(values.shape)
        for mult, d in self.derivative_tensor(values, k, order):
            out += mult * d * d
        return out

    def seminorm(self, values: np.ndarray, k: int, order: int = 2) -> float:
        return math.sqrt(self.integrate(self.derivative_norm_squared(values, k, order)))

    def sup_derivative(self, values: np.ndarray, k: int, order: int = 2) -> float:
        """Sup over the lattice of the pointwise Euclidean norm of nabla^k f."""
        return float(np.sqrt(np.max(self.derivative_norm_squared(values, k, order))))


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise FieldError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteFieldError("field contains NaN or Inf")
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _vals(other))

    __rmul__ = __mul__


def _vals(x):
    return x.values if isinstance(x, ScalarField) else x


def from_function(grid: Grid, fn) -> ScalarField:
    return ScalarField(grid, fn(*grid.coordinates))


def partial_derivative(f: ScalarField, axis: int, order: int = 2) -> ScalarField:
    return ScalarField(f.grid, f.grid.diff(f.values, axis, order))


def laplacian(f: ScalarField, order: int = 2) -> ScalarField:
    return ScalarField(f.grid, f.grid.lap(f.values, order))


def sup_norm(f: ScalarField) -> float:
    return float(np.max(np.abs(f.values)))


def l2_norm(f: ScalarField) -> float:
    return f.grid.l2(f.values)


def seminorm_k(f: ScalarField, k: int, order: int = 2) -> float:
    return f.grid.seminorm(f.values, k, order)


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------


def write_snapshot(path, f: ScalarField) -> Path:
    """Write ``f`` as binary (``.bin``) or CSV (anything else).

    Both layouts carry the header (dimension, points_per_axis, domain_length)
    followed by the values in row-major (C) order.
    """
    path = Path(path)
    g = f.grid
    if path.suffix == ".bin":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(_MAGIC, g.dimension, g.points_per_axis, g.domain_length))
            fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    else:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dimension", "points_per_axis", "domain_length"])
            writer.writerow([g.dimension, g.points_per_axis, format(g.domain_length, ".17g")])
            for v in f.values.ravel(order="C"):
                fh.write(format(float(v), ".17g") + "\n")
    return path


def read_snapshot(path) -> ScalarField:
    path = Path(path)
    if path.suffix == ".bin":
        raw = path.read_bytes()
        magic, dim, n, length = _HEADER.unpack_from(raw)
        if magic != _MAGIC:
            raise FieldError(f"{path} is not a field snapshot")
        grid = Grid(dim, n, length)
        vals = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
        return ScalarField(grid, vals.reshape(grid.shape).copy())
    text = path.read_text()
    reader = csv.reader(io.StringIO(text))
    next(reader)
    dim, n, length = next(reader)
    grid = Grid(int(dim), int(n), float(length))
    vals = np.array([float(row[0]) for row in reader if row], dtype=float)
    if vals.size != grid.size:
        raise FieldError(f"{path}: expected {grid.size} values, found {vals.size}")
    return ScalarField(grid, vals.reshape(grid.shape))
