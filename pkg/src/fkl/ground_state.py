"""Ground state Q of (-Delta)^s Q + Q = Q^p and its qualitative certificates."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import ConfigError, SolverError
from .grid import Field, Grid, symmetrize
from .spectral import FracOperator, gns_quotient_values

log = logging.getLogger(__name__)


def critical_exponent(dim: int, s: float) -> float:
    """2*_s - 1 = (N+2s)/(N-2s), or +inf when s >= N/2."""
    if s >= dim / 2.0:
        return math.inf
    return (dim + 2.0 * s) / (dim - 2.0 * s)


@dataclass(frozen=True)
class BaseParams:
    s: float
    p: float
    dim: int = 1

    def __post_init__(self):
        N, s, p = self.dim, self.s, self.p
        if N not in (1, 2):
            raise ConfigError(f"unsupported dimension {N}")
        if not (s > N / 4.0):
            raise ConfigError(f"requires s > N/4 (got s={s}, N={N})")
        if not (s < 1.0):
            raise ConfigError(f"requires s < 1 (got s={s})")
        if not (p > 1.0):
            raise ConfigError(f"requires p > 1 (got p={p})")
        pc = critical_exponent(N, s)
        if not (p < pc):
            raise ConfigError(
                f"p={p} is not subcritical: requires p < (N+2s)/(N-2s) = {pc:.6g}"
            )


@dataclass
class SolverOptions:
    tol: float = 1e-10
    petviashvili_tol: float = 1e-8
    petviashvili_max_iter: int = 3000
    newton_tol: float = 1e-12
    newton_max_iter: int = 20
    gmres_rtol: float = 1e-10
    collapse_threshold: float = 1e-6


@dataclass(frozen=True)
class DecayCertificate:
    C1: float
    C2: float
    window: tuple
    ratio_bound: float
    passed: bool

    def __iter__(self):
        return iter((self.C1, self.C2, self.window))


@dataclass
class GroundStateResult:
    Q: Field
    residual_l2: float
    residual_linf: float
    j_value: float
    decay_certificate: DecayCertificate
    iterations: int
    petviashvili_iterations: int = 0
    newton_iterations: int = 0
    monotone: bool = True
    history: list = field(default_factory=list)


def initial_guess(grid: Grid, s: float) -> np.ndarray:
    return (1.0 + grid.radius ** 2) ** (-(grid.dim + 2.0 * s) / 2.0)


def _pos_pow(u: np.ndarray, p: float) -> np.ndarray:
    return np.maximum(u, 0.0) ** p


def residual_values(op: FracOperator, Q: np.ndarray, p: float, c: float = 1.0, m: float = 1.0):
    return c * op.apply(Q) + m * Q - _pos_pow(Q, p)


def residual(params: BaseParams, Q: Field) -> tuple:
    """(L2, Linf) norms of (-Delta)^s Q + Q - Q_+^p."""
    op = FracOperator(Q.grid, params.s)
    r = residual_values(op, Q.values, params.p)
    return (
        float(np.sqrt(Q.grid.cell_volume * np.sum(r * r))),
        float(np.max(np.abs(r))) if r.size else 0.0,
    )


def _petviashvili(op, Q, p, opts, sym):
    sym_mult = op.multiplier + 1.0
    g = op.grid
    step = np.inf
    for it in range(1, opts.petviashvili_max_iter + 1):
        Qh = op.fft(Q)
        Qp = _pos_pow(Q, p)
        num = op.pair_hat(Qh, Qh) + g.cell_volume * np.sum(Q * Q)
        den = g.cell_volume * np.sum(Qp * Q)
        if not den > 0:
            raise SolverError("Petviashvili iterate collapsed to zero")
        gamma = (num / den) ** (p / (p - 1.0))
        Qn = sym(gamma * op.ifft(op.fft(Qp) / sym_mult))
        step = float(np.max(np.abs(Qn - Q)))
        Q = Qn
        if np.max(np.abs(Q)) < opts.collapse_threshold:
            raise SolverError("Petviashvili iterate collapsed to zero (bad initialization)")
        if not np.all(np.isfinite(Q)):
            raise SolverError("Petviashvili iterate is not finite")
        if step <= opts.petviashvili_tol:
            return Q, it, step
    log.warning("Petviashvili reached %d iterations (step %.3e)", it, step)
    return Q, it, step


def newton_polish(op: FracOperator, Q: np.ndarray, p: float, opts: SolverOptions,
                  c: float = 1.0, m: float = 1.0, sym=symmetrize):
    """Newton on c(-Delta)^sQ + mQ - Q^p = 0 inside the symmetric sector."""
    g = op.grid
    w = g.cell_volume
    shape = g.shape
    precond = c * op.multiplier + m
    its = 0
    r = residual_values(op, Q, p, c, m)
    rn = float(np.sqrt(w * np.sum(r * r)))
    history = [rn]
    for its in range(1, opts.newton_max_iter + 1):
        if rn <= opts.newton_tol:
            its -= 1
            break
        pot = p * _pos_pow(Q, p - 1.0)

        def mv(v, pot=pot):
            v = v.reshape(shape)
            return sym(c * op.apply(v) + m * v - pot * v).ravel()

        def pc(v):
            return sym(op.ifft(op.fft(v.reshape(shape)) / precond)).ravel()

        n = g.total_points
        A = LinearOperator((n, n), matvec=mv, dtype=float)
        M = LinearOperator((n, n), matvec=pc, dtype=float)
        # absolute floor: no point solving far below the Newton target
        atol = 0.1 * opts.newton_tol / np.sqrt(w)
        dq, info = gmres(A, -r.ravel(), rtol=opts.gmres_rtol, atol=atol,
                         restart=60, maxiter=5, M=M)
        Qn = sym(Q + dq.reshape(shape))
        rnew = residual_values(op, Qn, p, c, m)
        rnn = float(np.sqrt(w * np.sum(rnew * rnew)))
        history.append(rnn)
        if not rnn < rn:
            # roundoff floor reached; keep the better iterate
            break
        Q, r, rn = Qn, rnew, rnn
    return Q, its, rn, history


def solve_Q(params: BaseParams, grid: Grid, opts: Optional[SolverOptions] = None,
            initial: Optional[np.ndarray] = None) -> GroundStateResult:
    """Petviashvili iteration followed by Newton polish in the even sector."""
    opts = opts or SolverOptions()
    if grid.dim != params.dim:
        raise ConfigError("grid dimension does not match params.dim")
    op = FracOperator(grid, params.s)
    p = params.p
    Q0 = initial_guess(grid, params.s) if initial is None else np.asarray(initial, float).reshape(grid.shape)
    Q0 = symmetrize(Q0)
    Q, pit, _ = _petviashvili(op, Q0, p, opts, symmetrize)
    Q, nit, rn, hist = newton_polish(op, Q, p, opts)
    if not np.all(np.isfinite(Q)):
        raise SolverError("ground state iterate is not finite")
    if rn > opts.tol:
        raise SolverError(f"ground state did not converge: residual {rn:.3e} > tol {opts.tol:.1e}")
    if np.min(Q) <= 0:
        raise SolverError("positivity violated after polish: grid under-resolved (enlarge L or n)")
    Qf = Field(grid, Q)
    r2, rinf = residual(params, Qf)
    cert = certify_decay(Qf, params)
    return GroundStateResult(
        Q=Qf,
        residual_l2=r2,
        residual_linf=rinf,
        j_value=gns_quotient_values(op, Q, p),
        decay_certificate=cert,
        iterations=pit + nit,
        petviashvili_iterations=pit,
        newton_iterations=nit,
        monotone=certify_monotone_radial(Qf),
        history=hist,
    )


def certify_decay(Q: Field, params: BaseParams, inner: float = 5.0,
                  ratio_bound: float = 10.0) -> DecayCertificate:
    """Bounds C1 <= Q(x)(1+|x|^{N+2s}) <= C2 over the window |x| in [inner, L/2].

    A genuine polynomial tail keeps C2/C1 of order one; super-polynomial decay
    sends C1 to zero and a non-decaying field makes C2 grow with the window, so
    the certificate also requires C2/C1 <= ratio_bound.
    """
    g = Q.grid
    r = g.radius
    window = (float(inner), g.L / 2.0)
    mask = (r >= window[0]) & (r <= window[1])
    if not np.any(mask):
        raise ValueError("decay window is empty; the box is too small")
    prod = Q.values[mask] * (1.0 + r[mask] ** (g.dim + 2.0 * params.s))
    C1, C2 = float(np.min(prod)), float(np.max(prod))
    ok = bool(C1 > 0 and np.isfinite(C2) and C1 <= C2 and C2 <= ratio_bound * C1)
    return DecayCertificate(C1, C2, window, ratio_bound, ok)


def _rays(values: np.ndarray):
    n = values.shape[0]
    c = n // 2
    if values.ndim == 1:
        yield values[c:]
        yield values[c::-1]
        return
    idx = np.arange(n // 2)
    for sx, sy in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)):
        i = c + sx * idx
        j = c + sy * idx
        ok = (i >= 0) & (i < n) & (j >= 0) & (j < n)
        yield values[i[ok], j[ok]]


def certify_monotone_radial(Q: Field, slack: float = 1e-9) -> bool:
    """True iff Q peaks at the origin and is nonincreasing along every ray."""
    v = Q.values
    if v[Q.grid.origin_index] < np.max(v) - slack:
        return False
    for ray in _rays(v):
        if np.any(np.diff(ray) > slack):
            return False
    return True
