"""Potentials V with a strict local minimum at x0, evaluated in closed form."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

KINDS = ("quadratic_well", "quartic_well", "cosine_well", "power_well", "custom_table")

# nominal local order of V - V(x0) near x0 for the analytic kinds
_NOMINAL_ALPHA = {"quadratic_well": 2.0, "quartic_well": 4.0, "cosine_well": 2.0}


def alpha_bound(dim: int, s: float) -> float:
    """Upper end (N+4s)/2 of the admissible Holder range."""
    return 0.5 * (dim + 4.0 * s)


@dataclass(frozen=True)
class PotentialSpec:
    """Bounded positive potential with minimum value `base` at x0.

    quadratic_well  base + height*min(|d|^2/w^2, 1)*(1 + tilt*tanh(d_1/w))
    quartic_well    base + height*min(|d|^4/w^4, 1)
    cosine_well     base + height*mean_i (1 - cos(pi d_i/w))/2
    power_well      base + height*min(|d|^e/w^e, 1)      (e = exponent)
    custom_table    linear interpolation of (table_x, table_v), 1-D only

    with d = x - x0 and w = width.  A nonzero tilt (|tilt| < 1) breaks the
    reflection symmetry about x0 while keeping x0 the strict minimum.
    """

    kind: str = "quadratic_well"
    x0: tuple = (0.0,)
    base: float = 1.0
    height: float = 1.0
    width: float = 1.0
    tilt: float = 0.0
    exponent: float = 1.5
    alpha: Optional[float] = None
    r0: Optional[float] = None
    table_x: Optional[tuple] = None
    table_v: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"potential kind must be one of {KINDS}, got {self.kind!r}")
        object.__setattr__(self, "x0", tuple(float(c) for c in np.atleast_1d(self.x0)))
        if not self.base > 0:
            raise ConfigError("potential base V(x0) must be positive (V1)")
        if self.kind != "custom_table":
            if not (self.height > 0 and self.width > 0):
                raise ConfigError("potential height and width must be positive")
            if not abs(self.tilt) < 1:
                raise ConfigError("|tilt| must be < 1")
            if self.kind == "power_well" and not self.exponent > 0:
                raise ConfigError("power_well exponent must be positive")
        else:
            if self.table_x is None or self.table_v is None:
                raise ConfigError("custom_table requires table_x and table_v")
            tx = np.asarray(self.table_x, float)
            tv = np.asarray(self.table_v, float)
            if tx.ndim != 1 or tx.shape != tv.shape or tx.size < 2 or np.any(np.diff(tx) <= 0):
                raise ConfigError("custom_table needs increasing table_x with matching table_v")
            if self.alpha is None:
                raise ConfigError("custom_table requires a user-supplied alpha")
            if len(self.x0) != 1:
                raise ConfigError("custom_table is one-dimensional")
            object.__setattr__(self, "table_x", tuple(tx))
            object.__setattr__(self, "table_v", tuple(tv))

    @property
    def dim(self) -> int:
        return len(self.x0)

    @property
    def floor(self) -> float:
        if self.kind == "custom_table":
            return float(min(self.table_v))
        return self.base

    @property
    def ceiling(self) -> float:
        if self.kind == "custom_table":
            return float(max(self.table_v))
        return self.base + self.height * (1.0 + abs(self.tilt))

    @property
    def radius(self) -> float:
        """Radius r0 of the strict-minimum neighbourhood."""
        if self.r0 is not None:
            return float(self.r0)
        if self.kind == "custom_table":
            tx = np.asarray(self.table_x)
            return float(min(self.x0[0] - tx[0], tx[-1] - self.x0[0]))
        return self.width

    @property
    def value_at_x0(self) -> float:
        return float(self(*[np.array(c) for c in self.x0]))

    def holder_order(self, dim: int, s: float) -> float:
        """Effective alpha: the nominal local order capped below (N+4s)/2."""
        cap = alpha_bound(dim, s)
        if self.kind == "custom_table":
            a = float(self.alpha)
            if not (0 < a < cap):
                raise ConfigError(f"alpha={a} must lie in (0, (N+4s)/2) = (0, {cap:.6g})")
            return a
        nominal = self.exponent if self.kind == "power_well" else _NOMINAL_ALPHA[self.kind]
        if self.alpha is not None:
            nominal = min(nominal, float(self.alpha))
        return min(nominal, cap * (1.0 - 1e-3))

    def __call__(self, *coords) -> np.ndarray:
        if len(coords) != self.dim:
            raise ValueError(f"potential expects {self.dim} coordinate arrays")
        d = [np.asarray(c, float) - x0 for c, x0 in zip(coords, self.x0)]
        w = self.width
        if self.kind == "custom_table":
            return np.interp(d[0] + self.x0[0], self.table_x, self.table_v)
        r2 = sum(di * di for di in d) / (w * w)
        if self.kind == "quadratic_well":
            shape = np.minimum(r2, 1.0)
            if self.tilt:
                shape = shape * (1.0 + self.tilt * np.tanh(d[0] / w))
        elif self.kind == "quartic_well":
            shape = np.minimum(r2 * r2, 1.0)
        elif self.kind == "power_well":
            shape = np.minimum(r2 ** (0.5 * self.exponent), 1.0)
        else:
            shape = sum(0.5 * (1.0 - np.cos(np.pi * di / w)) for di in d) / len(d)
        return self.base + self.height * shape


def check_potential(V: PotentialSpec, dim: int, s: float, samples: int = 2001) -> float:
    """Validate (V1), (V2) and the alpha range on a sample mesh; returns alpha."""
    if V.dim != dim:
        raise ConfigError(f"potential x0 has dimension {V.dim}, model has N={dim}")
    alpha = V.holder_order(dim, s)
    r0 = V.radius
    if not r0 > 0:
        raise ConfigError("r0 must be positive")
    # integer offsets keep the centre sample exactly at x0
    half = samples // 2 if dim == 1 else int(np.sqrt(samples)) // 2
    t = r0 * np.arange(-half, half + 1) / half
    if dim == 1:
        pts = (V.x0[0] + t,)
        dist = np.abs(t)
    else:
        A, B = np.meshgrid(t, t, indexing="ij")
        pts = (V.x0[0] + A, V.x0[1] + B)
        dist = np.sqrt(A * A + B * B)
    vals = V(*pts)
    if np.any(vals <= 0) or V.floor <= 0:
        raise ConfigError("potential must be positive everywhere (V1)")
    v0 = V.value_at_x0
    inside = (dist > 0) & (dist < r0)
    if np.any(vals[inside] <= v0):
        raise ConfigError("V(x0) is not a strict local minimum on B(x0, r0) (V2)")
    return alpha
