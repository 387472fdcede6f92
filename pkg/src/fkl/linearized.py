"""Linearized operators T+ and L+ around a ground state, their spectra, and scaling identities."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import SolverError
from .grid import Field, l2_norm, reflect, symmetrize
from .ground_state import BaseParams
from .kirchhoff import KirchhoffParams
from .spectral import FracOperator

KINDS = ("Tplus", "Lplus")
SECTORS = ("full", "even", "odd")


class LinearizedOp:
    """Matrix-free c(-Delta)^s + m_coef - p U^{p-1} [+ 2b sigma(.) (-Delta)^s U]."""

    def __init__(self, kind: str, profile: Field, c: float, m_coef: float,
                 b: float, p: float, s: float):
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        self.kind = kind
        self.profile = profile
        self.c = float(c)
        self.m_coef = float(m_coef)
        self.b = float(b)
        self.p = float(p)
        self.s = float(s)
        self.grid = profile.grid
        self.op = FracOperator(self.grid, s)
        u = profile.values
        self._uhat = self.op.fft(u)
        self.frac_U = self.op.ifft(self.op.multiplier * self._uhat)
        self.frac_U.flags.writeable = False
        self.grad_sq = self.op.pair_hat(self._uhat, self._uhat)
        self.potential = self.p * np.maximum(u, 0.0) ** (self.p - 1.0)
        self.potential.flags.writeable = False

    @property
    def rank_one(self) -> bool:
        return self.kind == "Lplus" and self.b != 0.0

    def sigma_values(self, phi: np.ndarray, phih: Optional[np.ndarray] = None) -> float:
        if phih is None:
            phih = self.op.fft(phi)
        return self.op.pair_hat(self._uhat, phih)

    def apply_values(self, phi: np.ndarray) -> np.ndarray:
        ph = self.op.fft(phi)
        out = self.c * self.op.ifft(self.op.multiplier * ph) + (self.m_coef - self.potential) * phi
        if self.rank_one:
            out = out + 2.0 * self.b * self.sigma_values(phi, ph) * self.frac_U
        return out

    def upper_bound(self) -> float:
        top = float(np.max(self.op.multiplier))
        extra = 2.0 * self.b * self.grad_sq if self.rank_one else 0.0
        return (self.c + extra) * top + self.m_coef

    def kernel_tol(self) -> float:
        return 1e-6 * self.c * (np.pi / self.grid.spacing) ** (2.0 * self.s)

    def with_kind(self, kind: str) -> "LinearizedOp":
        return LinearizedOp(kind, self.profile, self.c, self.m_coef, self.b, self.p, self.s)


def linearized_from_kirchhoff(U: Field, kp: KirchhoffParams, kind: str = "Lplus") -> LinearizedOp:
    op = FracOperator(U.grid, kp.s)
    uh = op.fft(U.values)
    c = kp.a + kp.b * op.pair_hat(uh, uh)
    return LinearizedOp(kind, U, c, kp.m, kp.b, kp.p, kp.s)


def tplus_for_base(Q: Field, params: BaseParams) -> LinearizedOp:
    """T+ = (-Delta)^s + 1 - p Q^{p-1} for the base equation."""
    return LinearizedOp("Tplus", Q, 1.0, 1.0, 0.0, params.p, params.s)


def apply_linearized(op: LinearizedOp, phi: Field) -> Field:
    if phi.grid != op.grid:
        raise ValueError("grid mismatch between operator profile and phi")
    return phi.like(op.apply_values(phi.values))


def sigma_v(U: Field, v: Field, s: float, rtol: float = 1e-9) -> float:
    """Dirichlet pairing of U and v, computed spectrally and via int v (-Delta)^s U."""
    if U.grid != v.grid:
        raise ValueError("grid mismatch")
    op = FracOperator(U.grid, s)
    uh, vh = op.fft(U.values), op.fft(v.values)
    s1 = op.pair_hat(uh, vh)
    s2 = float(U.grid.cell_volume * np.sum(v.values * op.ifft(op.multiplier * uh)))
    scale = np.sqrt(op.pair_hat(uh, uh) * op.pair_hat(vh, vh))
    if abs(s1 - s2) > rtol * scale + 1e-300:
        raise SolverError(f"sigma_v cross-check diverged: {s1!r} vs {s2!r}")
    return s1


# -- sectors -----------------------------------------------------------------

def sector_projector(sector: str, dim: int):
    if sector == "full":
        return lambda v: v
    if sector == "even":
        if dim == 1:
            return lambda v: 0.5 * (v + reflect(v, 0))
        return lambda v: symmetrize(v, swap=True)
    if sector == "odd":
        return lambda v: 0.5 * (v - reflect(v, 0))
    raise ValueError(f"sector must be one of {SECTORS}")


@dataclass
class SpectrumReport:
    sector: str
    eigenvalues: np.ndarray
    eigenfields: list
    kernel_dim: int
    gap: float
    kernel_tol: float
    negative_count: int = 0
    method: str = "lanczos"
    extra: dict = field(default_factory=dict)

    def kernel_fields(self) -> list:
        return [f for lam, f in zip(self.eigenvalues, self.eigenfields) if abs(lam) < self.kernel_tol]


def _dense_matrix(op: LinearizedOp, P, shift: float) -> np.ndarray:
    n = op.grid.total_points
    shape = op.grid.shape
    A = np.empty((n, n))
    eye = np.zeros(n)
    for j in range(n):
        eye[:] = 0.0
        eye[j] = 1.0
        v = eye.reshape(shape)
        Pv = P(v)
        A[:, j] = (P(op.apply_values(Pv)) + shift * (v - Pv)).ravel()
    return 0.5 * (A + A.T)


def spectrum(op: LinearizedOp, sector: str = "full", k: int = 6,
             method: str = "lanczos", seed: int = 0) -> SpectrumReport:
    """Lowest k eigenpairs of the operator restricted to a symmetry sector.

    The sector is enforced by replacing A with P A P + sigma (I - P), where
    sigma exceeds the top of A's spectrum, so that the complement is pushed
    above every eigenvalue of interest.
    """
    if not (1 <= k <= 40):
        raise ValueError("k must lie in [1, 40]")
    g = op.grid
    P = sector_projector(sector, g.dim)
    shift = 2.0 * op.upper_bound()
    n = g.total_points
    shape = g.shape
    if method == "dense":
        if n > 4096:
            raise ValueError("dense oracle limited to 4096 unknowns")
        w, V = eigh(_dense_matrix(op, P, shift), subset_by_index=[0, k - 1])
    elif method == "lanczos":
        def mv(x):
            v = x.reshape(shape)
            Pv = P(v)
            return (P(op.apply_values(Pv)) + shift * (v - Pv)).ravel()

        A = LinearOperator((n, n), matvec=mv, dtype=float)
        v0 = P(np.random.default_rng(seed).standard_normal(shape)).ravel()
        try:
            w, V = eigsh(A, k=k, which="SA", v0=v0, tol=0.0,
                         ncv=min(n, max(4 * k + 1, 40)), maxiter=20000)
        except ArpackNoConvergence as exc:
            raise SolverError(f"eigensolver did not converge: {exc}") from None
    else:
        raise ValueError("method must be 'lanczos' or 'dense'")
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    scale = 1.0 / np.sqrt(g.cell_volume)
    fields = []
    for j in range(V.shape[1]):
        vec = V[:, j] * scale
        # deterministic sign: largest-magnitude sample positive
        i = int(np.argmax(np.abs(vec)))
        if vec[i] < 0:
            vec = -vec
        fields.append(Field(g, vec))
    tol = op.kernel_tol()
    ker = int(np.sum(np.abs(w) < tol))
    nonzero = np.abs(w)[np.abs(w) >= tol]
    gap = float(np.min(nonzero)) if nonzero.size else float("nan")
    return SpectrumReport(sector, w, fields, ker, gap, tol, int(np.sum(w <= -tol)), method)


def translation_mode(U: Field, s: float, axis: int = 0) -> Field:
    return U.like(FracOperator(U.grid, s).derivative(U.values, axis))


def subspace_distance(basis: list, targets: list) -> float:
    """Largest L2 residual of the normalized targets after projection on span(basis)."""
    if not basis:
        return float("inf")
    g = basis[0].grid
    w = g.cell_volume
    B = np.stack([b.values.ravel() for b in basis], axis=1) * np.sqrt(w)
    Qb, _ = np.linalg.qr(B)
    worst = 0.0
    for t in targets:
        v = t.values.ravel() * np.sqrt(w)
        v = v / np.linalg.norm(v)
        r = v - Qb @ (Qb.T @ v)
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


# -- identities -------------------------------------------------------------

def taper_weight(x: np.ndarray, L: float, radius: float = 0.9) -> np.ndarray:
    """x for |x| <= radius L, rolled off smoothly to 0 at |x| = L."""
    a = np.abs(x)
    t = np.clip((a - radius * L) / ((1.0 - radius) * L), 0.0, 1.0)

    def bump(u):
        pos = u > 0
        out = np.zeros_like(u)
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    f0, f1 = bump(t), bump(1.0 - t)
    return x * (1.0 - f0 / (f0 + f1))


def moment_field(U: Field, s: float, radius: float = 0.9) -> np.ndarray:
    """Tapered x . grad U."""
    op = FracOperator(U.grid, s)
    g = U.grid
    out = np.zeros(g.shape)
    for i in range(g.dim):
        out += taper_weight(g.mesh[i], g.L, radius) * op.derivative(U.values, i)
    return out


def _check_decay(U: Field, frac: float = 0.05):
    g = U.grid
    v = np.abs(U.values)
    shell = np.max(np.abs(np.stack(g.mesh)), axis=0) > 0.9 * g.L
    if np.max(v[shell]) > frac * np.max(v):
        raise ValueError("invalid input: profile does not decay inside the box")


class PohozaevResult(NamedTuple):
    lhs: float
    rhs: float

    @property
    def mismatch(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def relative_mismatch(self) -> float:
        return self.mismatch / abs(self.rhs) if self.rhs != 0 else float("inf")


def pohozaev_check(U: Field, s: float, radius: float = 0.9) -> PohozaevResult:
    """Both sides of int (x.grad U)(-Delta)^s U = ((2s-N)/2) ||(-Delta)^{s/2} U||^2."""
    _check_decay(U)
    op = FracOperator(U.grid, s)
    psi = moment_field(U, s, radius)
    lhs = float(U.grid.cell_volume * np.sum(psi * op.apply(U.values)))
    rhs = 0.5 * (2.0 * s - U.grid.dim) * op.pair(U.values, U.values)
    return PohozaevResult(lhs, rhs)


def hs_norm_sq(U: Field, s: float) -> float:
    op = FracOperator(U.grid, s)
    return op.pair(U.values, U.values) + float(U.grid.cell_volume * np.sum(U.values ** 2))


def tplus_identities(Q: Field, params: BaseParams, radius: float = 0.9) -> tuple:
    """(||T+Q + (p-1)Q^p||, ||T+R + 2sQ||) with R = (2s/(p-1))Q + x.grad Q."""
    T = tplus_for_base(Q, params)
    q = Q.values
    p, s = params.p, params.s
    R = (2.0 * s / (p - 1.0)) * q + moment_field(Q, s, radius)
    r1 = T.apply_values(q) + (p - 1.0) * np.maximum(q, 0.0) ** p
    r2 = T.apply_values(R) + 2.0 * s * q
    w = Q.grid.cell_volume
    return float(np.sqrt(w * np.sum(r1 * r1))), float(np.sqrt(w * np.sum(r2 * r2)))


def dilation_derivative(U: Field, s: float, delta: float = 1e-3) -> float:
    """Half the mu-derivative at 1 of ||(-Delta)^{s/2} U(mu .)||^2, by central differences.

    The dilated profiles are evaluated through the trigonometric interpolant of U.
    """
    from .spectral import fourier_interpolate

    op = FracOperator(U.grid, s)
    g = U.grid
    vals = []
    for mu in (1.0 + delta, 1.0 - delta):
        pts = [mu * g.axis] * g.dim
        Um = fourier_interpolate(U, pts).reshape(g.shape)
        vals.append(op.pair(Um, Um))
    return (vals[0] - vals[1]) / (4.0 * delta)


def lemma_coefficient(c: float, a: float, s: float, dim: int) -> float:
    """-(c-a)(2s-N)/(2sc); must differ from 1 for the radial kernel argument."""
    return -(c - a) * (2.0 * s - dim) / (2.0 * s * c)
