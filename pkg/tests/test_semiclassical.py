import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fkl.errors import SolverError
from fkl.grid import Field, make_grid
from fkl.ground_state import BaseParams, solve_Q
from fkl.kirchhoff import KirchhoffParams, build_U
from fkl.potentials import PotentialSpec
from fkl.semiclassical import (Semiclassical, apply_L_eps, energy_I_eps, energy_residuals,
                               expansion_constants, fit_expansion, gradient_I_eps, l_eps, log_slope,
                               minimize_j, project_to_E, reduced_functional_j, remainder_R_eps,
                               resolution_ok, sobolev_scaling_check, solve_corrector)
from fkl.spectral import fourier_interpolate
from fkl.linearized import linearized_from_kirchhoff

X0 = 0.3


def random_z_field(grid, rng, width=4.0):
    """Smooth random profile localized on the core, sampled on the z grid."""
    z = grid.axis
    c = rng.standard_normal(6)
    poly = sum(ci * (z / width) ** i for i, ci in enumerate(c))
    return poly * np.exp(-(z / width) ** 2)


def gauss_legendre(f, edges, order=40):
    xg, wg = np.polynomial.legendre.leggauss(order)
    tot = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        z = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
        tot += 0.5 * (hi - lo) * np.sum(wg * f(z))
    return tot


@pytest.fixture(scope="module")
def cosine_setup(well_setup):
    V = PotentialSpec("cosine_well", x0=(X0,), base=1.0, height=1.0, width=1.0)
    return Semiclassical(well_setup.U, well_setup.kp, V)


def test_energy_of_zero_is_zero(well_setup):
    g = make_grid(1, 4.0, 4096)
    assert energy_I_eps(Field(g, np.zeros(4096)), 0.1, well_setup.kp, well_setup.V) == 0.0


def test_energy_guard_rejects_under_resolved_fields(well_setup):
    g = make_grid(1, 4.0, 256)
    with pytest.raises(ValueError, match="under-resolved"):
        energy_I_eps(Field(g, np.zeros(256)), 0.1, well_setup.kp, well_setup.V)
    assert resolution_ok(32 * 0.01, 0.01) and not resolution_ok(31 * 0.01, 0.01)


@pytest.mark.parametrize("eps", [0.2, 0.05])
def test_flat_potential_energy_is_A_eps_N(well_setup, eps):
    flat = well_setup.flat()
    prob = flat.problem(eps)
    A = expansion_constants(well_setup.U, well_setup.kp).A
    assert prob.energy(prob.u) == pytest.approx(A * eps, rel=1e-8)


def test_energy_of_x_sampled_profile_matches_problem(well_setup):
    # U_{eps,0} sampled on the x grid is U on the z grid with L_x = eps L_z
    eps = 0.25
    U = well_setup.U
    xg = make_grid(1, eps * U.grid.L, U.grid.n)
    V0 = well_setup.flat().V
    A = expansion_constants(U, well_setup.kp).A
    # the profile grid carries about 15 points per unit z, so relax the guard here
    assert energy_I_eps(Field(xg, U.values), eps, well_setup.kp, V0, cells=8) == pytest.approx(
        A * eps, rel=1e-8)


def test_energy_residual_slope(well_setup):
    eps = [0.2, 0.1, 0.05, 0.025]
    res = energy_residuals(well_setup, eps)
    assert all(r > 0 for r in res)
    assert log_slope(eps, res) >= 1 + 1.9


def test_gateaux_derivative_matches_finite_differences(well_setup):
    kp, V = well_setup.kp, well_setup.V
    g = make_grid(1, 4.0, 4096)
    x, h = g.axis, g.spacing
    eps = 0.1
    rng = np.random.default_rng(11)
    for _ in range(10):
        c, w, amp = rng.uniform(-0.5, 0.8), rng.uniform(0.05, 0.3), rng.uniform(0.5, 3.0)
        u = Field(g, amp * np.exp(-((x - c) / w) ** 2) - 0.3 * np.exp(-((x + 1) / 0.2) ** 2))
        psi = Field(g, rng.standard_normal() * np.exp(-((x - rng.uniform(-1, 1)) / 0.3) ** 2)
                    + rng.standard_normal() * np.sin(3 * x) * np.exp(-x * x))
        t = 1e-4
        fd = (energy_I_eps(u + psi * t, eps, kp, V) - energy_I_eps(u - psi * t, eps, kp, V)) / (2 * t)
        exact = h * float(np.sum(gradient_I_eps(u, eps, kp, V).values * psi.values))
        assert fd == pytest.approx(exact, rel=1e-6)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_l_eps_against_quadrature_smooth_well(cosine_setup, eps):
    # smooth V: the grid sum is spectrally accurate, so an independent quadrature must agree
    U = cosine_setup.U
    Lz = U.grid.L
    V = cosine_setup.V
    f = lambda z: (V(X0 + eps * z) - 1.0) * fourier_interpolate(U, [z]) ** 2
    edges = np.concatenate([np.linspace(-Lz, -20, 60), np.linspace(-20, 20, 41)[1:],
                            np.linspace(20, Lz, 60)[1:]])
    want = eps * gauss_legendre(f, edges)
    assert l_eps(cosine_setup, U, (X0,), eps) == pytest.approx(want, rel=1e-10)


def test_l_eps_against_quadrature_kinked_well(well_setup):
    # the kink of min(|x-x0|^2, 1) at |z| = 1/eps limits the grid sum to second order;
    # the error falls with the tail of U^2 there
    U = well_setup.U
    Lz = U.grid.L
    errs = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        k = 1 / eps
        f = lambda z: np.minimum((eps * z) ** 2, 1.0) * fourier_interpolate(U, [z]) ** 2
        want = eps * (gauss_legendre(f, np.linspace(-Lz, -k, 200))
                      + gauss_legendre(f, np.linspace(-k, k, 41))
                      + gauss_legendre(f, np.linspace(k, Lz, 200)))
        errs.append(abs(l_eps(well_setup, U, (X0,), eps) / want - 1))
    assert errs[0] <= 1e-5 and errs[-1] <= 1e-9
    assert all(b < a for a, b in zip(errs, errs[1:]))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.03, 0.2), st.floats(-0.2, 0.2))
def test_l_eps_dual_forms_agree(well_setup, seed, eps, dy):
    prob = well_setup.problem(eps, (X0 + dy,))
    phi = random_z_field(prob.g, np.random.default_rng(seed))
    a, b = prob.l_lemma(phi), prob.l_definitional(phi)
    scale = prob.l2x((prob.Vz - prob.V0) * prob.u) * prob.l2x(phi)
    assert abs(a - b) <= 1e-8 * scale


def test_flat_potential_collapses(well_setup):
    flat = well_setup.flat()
    rng = np.random.default_rng(5)
    eps = 0.1
    prob = flat.problem(eps)
    for _ in range(5):
        phi = Field(prob.g, random_z_field(prob.g, rng))
        assert l_eps(flat, phi, (X0,), eps) == 0.0
        assert abs(prob.l_definitional(phi.values)) <= 1e-10 * eps ** 0.5 * prob.norm(phi.values)
    run = solve_corrector(flat, (X0,), eps)
    assert run.diagnostics["phi_norm_eps"] <= 1e-10 * eps ** 0.5
    js = [reduced_functional_j(flat, (X0 + d,), eps) for d in (-0.2, 0.0, 0.15)]
    assert max(js) - min(js) <= 1e-9 * abs(js[0])


def test_linearized_collapses_to_Lplus_at_flat_potential(well_setup):
    flat = well_setup.flat()
    eps = 0.1
    op = linearized_from_kirchhoff(well_setup.U, well_setup.kp, "Lplus")
    rng = np.random.default_rng(2)
    prob = flat.problem(eps)
    for _ in range(4):
        phi = Field(prob.g, random_z_field(prob.g, rng))
        psi = random_z_field(prob.g, rng)
        Lz = op.apply_values(phi.values)
        rep = apply_L_eps(flat, phi, (X0,), eps).values
        assert np.max(np.abs(rep - Lz)) <= 1e-10 * np.max(np.abs(Lz))
        z_form = prob.g.cell_volume * float(np.sum(Lz * psi))
        assert prob.L_form(phi.values, psi) == pytest.approx(eps * z_form, rel=1e-10, abs=1e-14)
    c = prob.constraints()[0][0]
    assert abs(prob.L_form(c, c)) <= 1e-6 * prob.inner(c, c)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.05, 0.2))
def test_projection_onto_E(well_setup, seed, eps):
    prob = well_setup.problem(eps, (X0 + 0.1,))
    rng = np.random.default_rng(seed)
    f, h = random_z_field(prob.g, rng), random_z_field(prob.g, rng)
    Pf = prob.project_E(f)
    scale = prob.norm(f)
    assert prob.norm(prob.project_E(Pf) - Pf) <= 1e-12 * scale
    assert prob.orthogonality_residual(Pf) <= 1e-12
    # orthogonal projections are self-adjoint in <.,.>_eps
    lhs, rhs = prob.inner(Pf, h), prob.inner(f, prob.project_E(h))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12 * scale * prob.norm(h))


def test_translation_direction_is_removed(well_setup):
    eps = 0.1
    prob = well_setup.problem(eps, (X0,))
    c = Field(prob.g, prob.constraints()[0][0])
    Pc = project_to_E(well_setup, c, (X0,), eps)
    assert prob.norm(Pc.values) <= 1e-11 * prob.norm(c.values)


def test_linear_solve_is_uniformly_bounded(well_setup):
    # ||phi||_eps / ||Pi L phi|| stays bounded as eps shrinks
    rng = np.random.default_rng(8)
    ratios = []
    for eps in (0.2, 0.1, 0.05):
        prob = well_setup.problem(eps, (X0 + 0.05,))
        rhs = random_z_field(prob.g, rng)
        phi, _ = prob.solve_L(rhs)
        res = prob.pi_L2(prob.apply_L(phi) - rhs)
        assert prob.l2x(res) <= 1e-9 * prob.l2x(prob.pi_L2(rhs))
        assert prob.orthogonality_residual(phi) <= 1e-10
        ratios.append(prob.norm(phi) / prob.l2x(prob.pi_L2(rhs)))
    assert max(ratios) / min(ratios) < 5


def test_remainder_vanishes_to_second_order(well_setup):
    eps = 0.1
    prob = well_setup.problem(eps, (X0,))
    zero = np.zeros(prob.g.shape)
    r0, dr0 = remainder_R_eps(well_setup, Field(prob.g, zero), (X0,), eps)
    assert r0 == 0.0 and np.all(dr0.values == 0.0)
    phi = 0.01 * random_z_field(prob.g, np.random.default_rng(4))
    # R(t phi) = O(t^3)
    r = [prob.remainder(t * phi) for t in (1.0, 0.5)]
    assert r[0] / r[1] == pytest.approx(8.0, rel=0.1)


def test_remainder_cubic_term_for_cubic_nonlinearity(cubic_setup):
    eps = 0.1
    prob = cubic_setup.problem(eps)
    phi = 0.1 * random_z_field(prob.g, np.random.default_rng(9))
    ts = np.array([0.4, 0.2, 0.1, 0.05])
    q = np.array([prob.remainder(t * phi) / t ** 3 for t in ts])
    # the next term is linear in t, so Richardson removes it
    rich = 2 * q[1:] - q[:-1]
    assert abs(rich[-1] - rich[-2]) <= 1e-2 * abs(rich[-1])
    assert abs(rich[-1]) > 0
    assert np.all(np.abs(np.diff(q))[1:] < np.abs(np.diff(q))[:-1])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_remainder_gradient_matches_finite_differences(well_setup, seed):
    prob = well_setup.problem(0.1, (X0 + 0.05,))
    rng = np.random.default_rng(seed)
    phi = 0.05 * random_z_field(prob.g, rng)
    psi = random_z_field(prob.g, rng)
    t = 1e-5
    fd = (prob.remainder(phi + t * psi) - prob.remainder(phi - t * psi)) / (2 * t)
    exact = prob.ix(prob.remainder_grad(phi) * psi)
    assert fd == pytest.approx(exact, rel=1e-5, abs=1e-12 * prob.norm(psi))


def test_remainder_bound_scaling(well_setup):
    # |R(phi)| <= C eps^{-N/2} ||phi||_eps^3 uniformly in eps for fixed z-profiles
    rng = np.random.default_rng(12)
    profiles = [0.05 * random_z_field(well_setup.U.grid, rng) for _ in range(3)]
    ratios = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        prob = well_setup.problem(eps, (X0,))
        ratios.append([abs(prob.remainder(phi)) / (eps ** -0.5 * prob.norm(phi) ** 3)
                       for phi in profiles])
    # the ratio rises to its flat-potential limit as V(y + eps z) -> V(x0); increments shrink
    inc = np.diff(np.array(ratios), axis=0)
    assert np.all(inc > 0) and np.all(inc[-1] < 0.5 * inc[-2])


def test_l_bound_scaling(well_setup):
    # |l(phi)| <= C eps^{N/2} (eps^alpha + |V(y) - V(x0)|) ||phi||_eps
    alpha = well_setup.alpha
    profiles = [well_setup.U.values, random_z_field(well_setup.U.grid, np.random.default_rng(13))]
    ratios = {}
    for eps in (0.2, 0.1, 0.05, 0.025):
        for dy in (0.0, 0.1, 0.3):
            prob = well_setup.problem(eps, (X0 + dy,))
            vy = float(well_setup.V(np.array(X0 + dy)))
            for i, phi in enumerate(profiles):
                ratios[eps, dy, i] = abs(prob.l_lemma(phi)) / (
                    eps ** 0.5 * (eps ** alpha + abs(vy - 1.0)) * prob.norm(phi))
    for dy in (0.0, 0.1, 0.3):
        for i in range(2):
            assert ratios[0.025, dy, i] <= 1.5 * max(ratios[e, dy, i] for e in (0.2, 0.1))


def test_corrector_bound_scaling(well_setup):
    alpha = well_setup.alpha
    kappa = alpha / 4
    out = {}
    for dy in (0.0, 0.2):
        vy = float(well_setup.V(np.array(X0 + dy))) - 1.0
        for eps in (0.2, 0.1, 0.05):
            d = solve_corrector(well_setup, (X0 + dy,), eps).diagnostics
            bound = eps ** (0.5 + alpha - kappa) + eps ** 0.5 * abs(vy) ** (1 - kappa)
            out[dy, eps] = d["phi_norm_eps"] / bound
            assert d["projected_gradient"] <= 1e-9 * eps ** 0.5
            assert d["orthogonality"] <= 1e-9
    for dy in (0.0, 0.2):
        assert out[dy, 0.05] <= 1.5 * out[dy, 0.2]


def test_corrector_matches_full_newton(well_setup):
    # symmetric well: the critical point sits at y = x0, so U + phi solves the full equation
    eps = 0.1
    run = solve_corrector(well_setup, (X0,), eps)
    prob = well_setup.problem(eps, (X0,))
    w, _, rn = prob.full_newton(prob.u)
    sol = prob.u + run.phi.values
    assert rn <= 1e-11
    assert prob.l2x(w - sol) <= 1e-6 * prob.l2x(sol)


def test_minimize_symmetric_well(well_setup):
    mr = minimize_j(well_setup, 0.1)
    assert mr.interior
    assert mr.y_eps[0] == pytest.approx(X0, abs=1e-8)
    assert all(mr.j_value <= j + 1e-15 for _, j in mr.scan)


def test_minimize_rejects_large_delta(well_setup):
    with pytest.raises(ValueError, match="delta"):
        minimize_j(well_setup, 0.1, delta=1.5)


def test_expansion_fit(well_setup):
    const = expansion_constants(well_setup.U, well_setup.kp)
    ys = np.linspace(X0 - 0.05, X0 + 0.05, 9)
    A_fit, B_fit = fit_expansion(well_setup, 0.025, ys)
    assert B_fit == pytest.approx(const.B, rel=0.02)
    assert A_fit == pytest.approx(const.A, rel=0.02)


def test_expansion_constants_benjamin_ono(bo_result):
    # b = 0, m = 1: U = Q = 2/(1+x^2) up to images, so B = (1/2) int Q^2 = pi
    kp = KirchhoffParams(1.0, 0.0, 1.0, BaseParams(0.5, 2.0, 1))
    c = expansion_constants(bo_result.Q, kp)
    assert c.B == pytest.approx(math.pi, rel=1e-3)
    assert c.A > 0


@pytest.mark.parametrize("s,p,b", [(0.6, 2.0, 1.0), (0.8, 3.0, 0.0), (0.9, 2.5, 2.0)])
def test_expansion_A_positive(s, p, b):
    base = BaseParams(s, p, 1)
    Q = solve_Q(base, make_grid(1, 100.0, 4096)).Q
    kp = KirchhoffParams(1.0, b, 1.5, base)
    c = expansion_constants(build_U(Q, kp).U, kp)
    assert c.A > 0 and c.B > 0


def test_sobolev_scaling(well_setup):
    eps = [0.2, 0.1, 0.05, 0.025]
    U, kp = well_setup.U, well_setup.kp
    flat_one = PotentialSpec("cosine_well", x0=(0.0,), base=1.0, height=1e-12)
    two = sobolev_scaling_check(eps, 2.0, flat_one, kp, U)
    assert max(two["ratios"]) <= 1.0
    top = sobolev_scaling_check(eps, kp.p + 1, well_setup.V, kp, U)
    assert abs(top["slope"]) <= 0.1 and top["bounded"]


def test_sobolev_scaling_rejects_supercritical_q():
    base = BaseParams(0.4, 2.0, 1)
    kp = KirchhoffParams(1.0, 1.0, 1.0, base)
    g = make_grid(1, 20.0, 256)
    prof = Field(g, np.exp(-g.axis ** 2))
    with pytest.raises(ValueError, match="outside"):
        sobolev_scaling_check([0.1], 11.0, PotentialSpec("quadratic_well"), kp, prof)


def test_contraction_failure_is_reported(well_setup):
    sc = Semiclassical(well_setup.U, well_setup.kp, well_setup.V)
    sc.opts.max_iter = 1
    with pytest.raises(SolverError):
        solve_corrector(sc, (X0 + 0.2,), 0.2)
