"""Fourier-multiplier fractional Laplacian, seminorms, the GNS quotient and the eps inner product."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError
from .grid import Field, Grid


class FracOperator:
    """(-Delta)^s on a periodic grid as the multiplier |k|^{2s}.

    Transforms use the real FFT, so outputs are real by construction.  The
    operator is immutable; every call allocates its own workspace.
    """

    def __init__(self, grid: Grid, s: float):
        if not (0.0 < s <= 1.0):
            raise ConfigError(f"fractional order s must lie in (0, 1], got {s}")
        self.grid = grid
        self.s = float(s)
        self._ksq = sum(k * k for k in grid.rwavenumbers)
        self._kabs = np.sqrt(self._ksq)
        self.multiplier = self._kabs ** (2.0 * self.s)
        self.multiplier.flags.writeable = False
        self._half = self._kabs ** self.s

    # -- raw-array kernels -------------------------------------------------
    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values)

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(coeffs, s=self.grid.shape, axes=tuple(range(self.grid.dim)))

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.ifft(self.multiplier * self.fft(values))

    def apply_half(self, values: np.ndarray) -> np.ndarray:
        return self.ifft(self._half * self.fft(values))

    def apply_symbol(self, values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
        return self.ifft(symbol * self.fft(values))

    def solve_shifted(self, values: np.ndarray, c: float, shift: float) -> np.ndarray:
        """(c (-Delta)^s + shift)^{-1} applied to values."""
        return self.ifft(self.fft(values) / (c * self.multiplier + shift))

    def full_multiplier(self) -> np.ndarray:
        """The multiplier over the full (complex FFT) frequency lattice."""
        k = self.grid.wavenumber_axis
        if self.grid.dim == 1:
            return np.abs(k) ** (2 * self.s)
        kk = np.sqrt(k[:, None] ** 2 + k[None, :] ** 2)
        return kk ** (2 * self.s)

    def pair(self, u: np.ndarray, v: np.ndarray) -> float:
        """Integral of (-Delta)^{s/2}u * (-Delta)^{s/2}v via Parseval."""
        return self.pair_hat(self.fft(u), self.fft(v))

    def pair_hat(self, uh: np.ndarray, vh: np.ndarray) -> float:
        g = self.grid
        w = g.rfft_weights * self.multiplier
        tot = np.sum(w * (uh.real * vh.real + uh.imag * vh.imag))
        return float(tot * g.cell_volume / g.total_points)

    def derivative(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Spectral first derivative along an axis (Nyquist mode dropped)."""
        g = self.grid
        k = np.array(g.rwavenumbers[axis], copy=True)
        n = g.n
        if g.dim == 1 or axis == 1:
            nyq = (slice(None),) * (g.dim - 1) + (n // 2,)
        else:
            nyq = (n // 2, slice(None))
        k[nyq] = 0.0
        return self.ifft(1j * k * self.fft(values))


def _check_grid(op: FracOperator, *fields: Field):
    for f in fields:
        if f.grid != op.grid:
            raise ValueError("grid mismatch between operator and field")


def apply_frac_laplacian(op: FracOperator, f: Field) -> Field:
    _check_grid(op, f)
    return f.like(op.apply(f.values))


def gagliardo_energy(op: FracOperator, f: Field) -> float:
    """||(-Delta)^{s/2} f||_2^2 computed in frequency space."""
    _check_grid(op, f)
    fh = op.fft(f.values)
    return op.pair_hat(fh, fh)


def gns_exponents(dim: int, s: float, p: float) -> tuple:
    e1 = dim * (p - 1.0) / (4.0 * s)
    e2 = (p - 1.0) * (2.0 * s - dim) / (4.0 * s) + 1.0
    return e1, e2


def gns_quotient_values(op: FracOperator, u: np.ndarray, p: float) -> float:
    g = op.grid
    den = g.cell_volume * np.sum(np.abs(u) ** (p + 1.0))
    if not den > 0.0:
        raise ValueError("zero denominator in GNS quotient")
    fh = op.fft(u)
    G = op.pair_hat(fh, fh)
    M = g.cell_volume * np.sum(u * u)
    e1, e2 = gns_exponents(g.dim, op.s, p)
    return float(G ** e1 * M ** e2 / den)


def gns_quotient(op: FracOperator, f: Field, p: float) -> float:
    """Raw Gagliardo-Nirenberg quotient J(f), without the sharp constant."""
    _check_grid(op, f)
    return gns_quotient_values(op, f.values, p)


Potential = Callable[..., np.ndarray]


@dataclass(frozen=True)
class EpsInnerProduct:
    """<u,v>_eps = eps^{2s} a int D^s u D^s v + int V u v.

    With `center=None` fields are read as functions of x on their own grid.
    With a center y they are profiles in z = (x - y)/eps, and the integrals
    carry the Jacobian eps^N, so the value is the same x-space quantity.
    """

    eps: float
    a: float
    s: float
    potential: Potential
    center: Optional[Sequence[float]] = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if not self.a > 0:
            raise ConfigError("a must be positive")

    def potential_on(self, grid: Grid) -> np.ndarray:
        if self.center is None:
            coords = grid.mesh
        else:
            y = np.atleast_1d(np.asarray(self.center, dtype=float))
            coords = tuple(y[i] + self.eps * grid.mesh[i] for i in range(grid.dim))
        V = np.asarray(self.potential(*coords), dtype=float)
        V = np.broadcast_to(V, grid.shape)
        if np.any(~np.isfinite(V)) or np.any(V <= 0):
            raise ValueError("nonpositive potential sample: hypothesis (V1) violated")
        return V

    def _raw(self, op: FracOperator, u: np.ndarray, v: np.ndarray, V: np.ndarray) -> float:
        g = op.grid
        if self.center is None:
            return self.eps ** (2 * self.s) * self.a * op.pair(u, v) + g.cell_volume * float(
                np.sum(V * u * v)
            )
        zform = self.a * op.pair(u, v) + g.cell_volume * float(np.sum(V * u * v))
        return self.eps ** g.dim * zform


def eps_inner(ip: EpsInnerProduct, u: Field, v: Field) -> float:
    if u.grid != v.grid:
        raise ValueError("u and v live on different grids")
    op = FracOperator(u.grid, ip.s)
    V = ip.potential_on(u.grid)
    return ip._raw(op, u.values, v.values, V)


def eps_norm(ip: EpsInnerProduct, u: Field) -> float:
    return float(np.sqrt(max(eps_inner(ip, u, u), 0.0)))


def _axis_basis(n: int, L: float, pts: np.ndarray) -> np.ndarray:
    """Rows e^{i k_j (pts + L)} for FFT-ordered modes; the Nyquist row uses cos."""
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=2.0 * L / n)
    t = np.asarray(pts, dtype=float) + L
    E = np.exp(1j * np.outer(k, t))
    E[n // 2] = np.cos(k[n // 2] * t)
    return E


def fourier_interpolate(f: Field, points: Sequence[np.ndarray], chunk: int = 1024) -> np.ndarray:
    """Evaluate the trigonometric interpolant of f off-grid.

    For dim 1, `points` holds one array of abscissae.  For dim 2 it holds the
    two axis arrays of a tensor product and the result has shape
    (len(points[0]), len(points[1])).
    """
    g = f.grid
    c = np.fft.fftn(f.values) / g.total_points
    if g.dim == 1:
        xs = np.asarray(points[0], dtype=float).ravel()
        out = np.empty(xs.size)
        for i in range(0, xs.size, chunk):
            E = _axis_basis(g.n, g.L, xs[i:i + chunk])
            out[i:i + chunk] = (c @ E).real
        return out
    E1 = _axis_basis(g.n, g.L, points[0])
    E2 = _axis_basis(g.n, g.L, points[1])
    return (E1.T @ c @ E2).real
