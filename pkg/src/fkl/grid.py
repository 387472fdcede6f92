"""Uniform periodic grids, immutable fields, quadrature and the field file format."""

from __future__ import annotations

import os
import re
import tempfile
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, FieldFormatError

_HEADER_RE = re.compile(
    rb"^FRACFIELD v1 dim=(?P<dim>-?\d+) n=(?P<n>\d+) L=(?P<L>[-+0-9.eE]+)$"
)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Tensor grid on [-L, L)^N with n points per axis.

    Axis points are x_j = -L + j*h, j = 0..n-1, so the origin sits at index n/2
    and x -> -x maps index j to (n - j) mod n.
    """

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"unsupported dimension {self.dim} (dim must be 1 or 2)")
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise ConfigError("half_width must be positive and finite")
        n = self.points_per_axis
        if int(n) != n or not _is_pow2(int(n)) or n < 16:
            raise ConfigError(f"points_per_axis must be a power of two >= 16, got {n}")
        object.__setattr__(self, "points_per_axis", int(n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def n(self) -> int:
        return self.points_per_axis

    @property
    def L(self) -> float:
        return self.half_width

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def total_points(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def origin_index(self) -> tuple:
        return (self.points_per_axis // 2,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        x = -self.half_width + self.spacing * np.arange(self.points_per_axis)
        x.flags.writeable = False
        return x

    @cached_property
    def mesh(self) -> tuple:
        """Coordinate arrays of shape `grid.shape`, one per axis (ij indexing)."""
        if self.dim == 1:
            out = (self.axis,)
        else:
            out = tuple(np.meshgrid(self.axis, self.axis, indexing="ij"))
        for a in out:
            a.flags.writeable = False
        return out

    @cached_property
    def radius(self) -> np.ndarray:
        r = np.sqrt(sum(c * c for c in self.mesh))
        r.flags.writeable = False
        return r

    @cached_property
    def wavenumber_axis(self) -> np.ndarray:
        """Angular wavenumbers (pi/L)*{0..n/2-1, -n/2..-1} in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)

    @cached_property
    def rwavenumbers(self) -> tuple:
        """Wavenumber arrays broadcast over the rfftn layout (last axis halved)."""
        n, h = self.points_per_axis, self.spacing
        kr = 2.0 * np.pi * np.fft.rfftfreq(n, d=h)
        if self.dim == 1:
            return (kr,)
        k0 = self.wavenumber_axis
        return (k0[:, None] + 0.0 * kr[None, :], kr[None, :] + 0.0 * k0[:, None])

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Parseval multiplicities for the rfftn layout."""
        n = self.points_per_axis
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        if self.dim == 2:
            w = np.broadcast_to(w[None, :], (n, n // 2 + 1)).copy()
        return w

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "half_width": self.half_width,
            "points_per_axis": self.points_per_axis,
            "spacing": self.spacing,
        }


def make_grid(dim: int, half_width: float, points_per_axis: int) -> Grid:
    return Grid(int(dim), float(half_width), points_per_axis)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples on a grid; the array is read-only once wrapped."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.size != self.grid.total_points:
            raise ValueError(
                f"sample count {v.size} does not match grid total_points {self.grid.total_points}"
            )
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field samples must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def samples(self) -> np.ndarray:
        """Flat row-major view of the samples."""
        return self.values.reshape(-1)

    def like(self, values) -> "Field":
        return Field(self.grid, values)

    def __neg__(self):
        return self.like(-self.values)

    def __add__(self, other):
        _check_same_grid(self, other)
        return self.like(self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return self.like(self.values - other.values)

    def __mul__(self, c):
        if isinstance(c, Field):
            _check_same_grid(self, c)
            return self.like(self.values * c.values)
        return self.like(self.values * float(c))

    __rmul__ = __mul__


def _check_same_grid(f: Field, g: Field):
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


def field_from_function(grid: Grid, fn) -> Field:
    """Sample fn(*mesh) on the grid."""
    return Field(grid, fn(*grid.mesh))


def integrate(f: Field) -> float:
    """Rectangle rule h^N * sum(samples)."""
    return float(f.grid.cell_volume * np.sum(f.values))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(f.grid.cell_volume * np.sum(f.values * f.values)))


def reflect(values: np.ndarray, axis: int) -> np.ndarray:
    """Samples of u(..., -x_axis, ...) on the same grid."""
    return np.roll(np.flip(values, axis=axis), 1, axis=axis)


def symmetrize(values: np.ndarray, swap: bool = True) -> np.ndarray:
    """Project onto functions even in every axis (and symmetric under x1<->x2 in 2-D)."""
    out = values
    for ax in range(values.ndim):
        out = 0.5 * (out + reflect(out, ax))
    if swap and values.ndim == 2:
        out = 0.5 * (out + out.T)
    return out


def _atomic_write_bytes(path, payload: bytes):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def field_header(grid: Grid) -> bytes:
    return f"FRACFIELD v1 dim={grid.dim} n={grid.n} L={grid.L:.16e}\n".encode("ascii")


def write_field(f: Field, path) -> None:
    data = np.ascontiguousarray(f.values, dtype="<f8").tobytes(order="C")
    _atomic_write_bytes(path, field_header(f.grid) + data)


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise FieldFormatError("malformed header: no newline")
    m = _HEADER_RE.match(raw[:nl])
    if m is None:
        raise FieldFormatError("malformed header")
    dim, n, L = int(m["dim"]), int(m["n"]), float(m["L"])
    if dim not in (1, 2):
        raise FieldFormatError(f"unsupported dimension {dim}")
    try:
        grid = Grid(dim, L, n)
    except ConfigError as exc:
        raise FieldFormatError(f"malformed header: {exc}") from None
    body = raw[nl + 1:]
    if len(body) != 8 * grid.total_points:
        raise FieldFormatError(
            f"length mismatch: expected {8 * grid.total_points} bytes, found {len(body)}"
        )
    vals = np.frombuffer(body, dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(vals)):
        raise FieldFormatError("non-finite values in field file")
    return Field(grid, vals)
