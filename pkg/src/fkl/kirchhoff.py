"""Scalar rescaling that turns the base ground state Q into the Kirchhoff ground state U."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import CertificateError, ConfigError, SolverError
from .grid import Field, Grid
from .ground_state import BaseParams
from .spectral import FracOperator, fourier_interpolate, gagliardo_energy


@dataclass(frozen=True)
class KirchhoffParams:
    a: float
    b: float
    m: float
    base: BaseParams

    def __post_init__(self):
        if not self.a > 0:
            raise ConfigError(f"requires a > 0 (got a={self.a})")
        if not self.b >= 0:
            raise ConfigError(f"requires b >= 0 (got b={self.b})")
        if not self.m > 0:
            raise ConfigError(f"requires m > 0 (got m={self.m})")

    @property
    def s(self):
        return self.base.s

    @property
    def p(self):
        return self.base.p

    @property
    def dim(self):
        return self.base.dim

    def with_m(self, m: float) -> "KirchhoffParams":
        return KirchhoffParams(self.a, self.b, float(m), self.base)


@dataclass
class ScalingResult:
    E0: float
    gradQ_sq: float
    U: Field
    kirchhoff_residual: tuple
    uniqueness_certificate: bool
    roots: list = field(default_factory=list)
    self_consistency: float = 0.0


def _exponents(kp: KirchhoffParams):
    N, s, p = kp.dim, kp.s, kp.p
    return 2.0 / (p - 1.0) + (2.0 * s - N) / (2.0 * s), (N - 2.0 * s) / (2.0 * s)


def _coef(kp, gradQ_sq):
    em, _ = _exponents(kp)
    return kp.b * kp.m ** em * gradQ_sq


def f_of_E(E: float, kp: KirchhoffParams, gradQ_sq: float) -> float:
    """f(E) = E - a - b m^{2/(p-1)+(2s-N)/(2s)} ||(-Delta)^{s/2}Q||^2 E^{(N-2s)/(2s)}."""
    if not E > 0:
        raise ValueError("f_of_E requires E > 0")
    _, q = _exponents(kp)
    return E - kp.a - _coef(kp, gradQ_sq) * E ** q


def df_of_E(E: float, kp: KirchhoffParams, gradQ_sq: float) -> float:
    _, q = _exponents(kp)
    return 1.0 - _coef(kp, gradQ_sq) * q * E ** (q - 1.0)


def scan_roots(kp: KirchhoffParams, gradQ_sq: float, E_hi: float, points: int = 20001):
    """Sign changes of f on a log-spaced mesh over [a, E_hi] (f(a) < 0 when b > 0)."""
    a = kp.a
    E = a * np.exp(np.linspace(0.0, np.log(E_hi / a), points))
    _, q = _exponents(kp)
    fv = E - a - _coef(kp, gradQ_sq) * E ** q
    sgn = np.sign(fv)
    out = [(float(E[i]), float(E[i])) for i in np.nonzero(sgn == 0)[0]]
    out += [(float(E[i]), float(E[i + 1])) for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]]
    return sorted(out)


def solve_E0(kp: KirchhoffParams, gradQ_sq: float, return_roots: bool = False):
    """Admissible root E0 > a of f, with a computational uniqueness certificate."""
    a = kp.a
    if kp.b == 0:
        return (a, True, [(a, a)]) if return_roots else (a, True)
    if not gradQ_sq > 0:
        raise ValueError("gradQ_sq must be positive")
    f = lambda E: f_of_E(E, kp, gradQ_sq)
    lo, hi = a, 2.0 * a
    while f(hi) <= 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise SolverError("no sign change of f found below the overflow guard")
    E_hi = hi
    for _ in range(400):
        if hi - lo <= 1e-14 * a:
            break
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    E = 0.5 * (lo + hi)
    for _ in range(8):
        d = df_of_E(E, kp, gradQ_sq)
        En = E - f(E) / d
        if not (lo - 1e-12 * a <= En <= hi + 1e-12 * a) or En == E:
            break
        E = En
    roots = scan_roots(kp, gradQ_sq, E_hi)
    if len(roots) > 1:
        raise CertificateError(
            f"multiple roots of f detected on (a, {E_hi:.3g}]: {roots}; contradicts uniqueness"
        )
    cert = bool(df_of_E(E, kp, gradQ_sq) > 0 and len(roots) == 1)
    return (E, cert, roots) if return_roots else (E, cert)


def dilation_factor(kp: KirchhoffParams, E0: float) -> float:
    return (kp.m / E0) ** (1.0 / (2.0 * kp.s))


def natural_grid(Q: Field, kp: KirchhoffParams, E0: float) -> Grid:
    """Grid on which U's samples are exactly m^{1/(p-1)} times Q's samples."""
    lam = dilation_factor(kp, E0)
    return Grid(Q.grid.dim, Q.grid.L / lam, Q.grid.n)


def rescale_to_U(Q: Field, kp: KirchhoffParams, E0: float, grid: Optional[Grid] = None) -> Field:
    """U(x) = m^{1/(p-1)} Q(lambda x), lambda = (m/E0)^{1/(2s)}.

    Without a target grid U lives on Q's grid dilated by 1/lambda, where the
    resampling is exact.  On any other grid the trigonometric interpolant of Q
    is evaluated at the dilated points.
    """
    amp = kp.m ** (1.0 / (kp.p - 1.0))
    lam = dilation_factor(kp, E0)
    nat = natural_grid(Q, kp, E0)
    if grid is None or grid == nat:
        return Field(nat, amp * Q.values)
    if grid.dim != Q.grid.dim:
        raise ValueError("target grid dimension differs from Q's")
    if lam * grid.L > Q.grid.L * (1 + 1e-12):
        raise ValueError(
            "dilation pushes significant mass outside the box: "
            f"lambda*L_target = {lam * grid.L:.6g} > L_Q = {Q.grid.L:.6g}"
        )
    pts = [lam * grid.axis] * grid.dim
    return Field(grid, amp * fourier_interpolate(Q, pts))


def kirchhoff_residual(U: Field, kp: KirchhoffParams) -> tuple:
    """(L2, Linf) of (a + b G(U)) (-Delta)^s U + m U - U_+^p."""
    op = FracOperator(U.grid, kp.s)
    c = kp.a + kp.b * gagliardo_energy(op, U)
    u = U.values
    r = c * op.apply(u) + kp.m * u - np.maximum(u, 0.0) ** kp.p
    return float(np.sqrt(U.grid.cell_volume * np.sum(r * r))), float(np.max(np.abs(r)))


def build_U(Q: Field, kp: KirchhoffParams, grid: Optional[Grid] = None) -> ScalingResult:
    """Q -> E0 -> U with every certificate recomputed on U's own grid."""
    op = FracOperator(Q.grid, kp.s)
    gq = gagliardo_energy(op, Q)
    E0, cert, roots = solve_E0(kp, gq, return_roots=True)
    U = rescale_to_U(Q, kp, E0, grid)
    gu = gagliardo_energy(FracOperator(U.grid, kp.s), U)
    sc = abs(E0 - (kp.a + kp.b * gu)) / E0
    return ScalingResult(
        E0=E0,
        gradQ_sq=gq,
        U=U,
        kirchhoff_residual=kirchhoff_residual(U, kp),
        uniqueness_certificate=cert,
        roots=roots,
        self_consistency=sc,
    )
