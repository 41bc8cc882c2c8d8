"""Barriers, paraboloids, inf-convolutions, contact sets, touch test."""

import numpy as np
import pytest

from fracext.barriers import (BarrierCase1, BarrierCase2, MAParaboloid,
                              MAPolynomial, barrier_case2, cell_measures,
                              inf_convolution, polynomial_to_MA, pucci,
                              search_case2_parameters, slide_paraboloids,
                              touch_test)
from fracext.benchmarks import eigen_extension_problem, sliding_fixture, vertex_lattice
from fracext.extension import ExtensionMesh, solve_extension
from fracext.geometry import MAGeometry
from fracext.semigroup import ds_constant


# -- polynomial models -------------------------------------------------------------


def test_paraboloid_vertex_is_max():
    g = MAGeometry(0.6)
    P = MAParaboloid(g, opening=2.0, vertex_x=0.3, vertex_z=0.7, c=1.5)
    assert P(0.3, 0.7) == 1.5
    rng = np.random.default_rng(0)
    xs, zs = rng.uniform(-2, 2, 200), rng.uniform(-2, 2, 200)
    assert np.all(P(xs, zs) <= 1.5 + 1e-14)
    with pytest.raises(ValueError):
        MAParaboloid(g, opening=-1.0, vertex_x=0.0, vertex_z=0.0)


def test_ma_polynomial_weighted_second_derivative_constant():
    # z^{2-1/s} d_zz (d h(z)) = d: membership in the admissible test class
    poly = MAPolynomial(s=0.75, order=2, A=0.5, bxz=0.2, d=-0.7, px=0.1, qz=0.3, c=1.0)
    zs = np.geomspace(1e-6, 2.0, 50)
    assert np.allclose(poly.weighted_zz(zs), -0.7)
    # numeric check of the identity via second differences
    for z in (0.3, 1.1):
        h = 1e-5
        dzz = (poly(0.0, z + h) - 2 * poly(0.0, z) + poly(0.0, z - h)) / h**2
        assert z ** (2 - 1 / 0.75) * dzz == pytest.approx(-0.7, rel=1e-4)
    with pytest.raises(ValueError):
        MAPolynomial(s=0.5, order=1, A=1.0)


def test_polynomial_to_MA_identity_at_half():
    # s = 1/2: h''(z0) = 1, so the transformation leaves the z-part unchanged
    g = MAGeometry(0.5)
    P, coeffs = polynomial_to_MA(g, [[0.0, 0.0], [0.0, 2.0]], [0.0, 0.0], 0.0, 1.0, 0.0)
    zs = np.linspace(0.2, 1.8, 30)
    assert np.allclose(P(0.0, zs), 0.5 * 2.0 * (zs - 1.0) ** 2, atol=1e-13)
    assert coeffs["d"] == pytest.approx(2.0)


def test_polynomial_to_MA_zero_and_window_ratios():
    g = MAGeometry(1.0 / 3.0)
    # m = 0: the z-quadratic part vanishes
    P0, c0 = polynomial_to_MA(g, [[0.3, 0.0], [0.0, 0.0]], [0.1, 0.2], 0.0, 1.0, 0.0)
    assert c0["d"] == 0.0
    # shrinking-window ratio sup |P - Pc| / delta_h -> 0
    P, _ = polynomial_to_MA(g, [[0.0, 0.0], [0.0, 2.0]], [0.0, 0.0], 0.0, 1.0, 0.0)
    ratios = []
    for w in (1e-1, 1e-2, 1e-3):
        zq = 1.0 + np.linspace(-w, w, 301)
        Pc = 0.5 * 2.0 * (zq - 1.0) ** 2
        ratios.append(np.max(np.abs(P(0.0, zq) - Pc)
                             / np.maximum(g.delta_h(1.0, zq), 1e-300)))
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] < 1e-3
    with pytest.raises(ValueError):
        polynomial_to_MA(g, np.eye(2), [0.0, 0.0], 0.0, 0.0, 0.0)


def test_pucci():
    assert pucci(np.diag([1.0, -1.0]), 1.0, 2.0) == pytest.approx((-1.0, 1.0))
    assert pucci(np.zeros((2, 2)), 1.0, 2.0) == (0.0, 0.0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        M = rng.normal(size=(3, 3))
        M = 0.5 * (M + M.T)
        pm, pp = pucci(M, 0.5, 2.5)
        pm2, pp2 = pucci(-M, 0.5, 2.5)
        assert pm == pytest.approx(-pp2, rel=1e-12, abs=1e-12)
        assert pm <= pp + 1e-14
        # positive homogeneity
        pm3, pp3 = pucci(3.0 * M, 0.5, 2.5)
        assert pm3 == pytest.approx(3.0 * pm, rel=1e-12)


# -- barriers -----------------------------------------------------------------------


def test_barrier_case1_fixture():
    # s = 1/2, z0 = 1 forces R = delta_h(z0, 0) = 1/2; alpha = 9 > (n+1)/rho = 8
    g = MAGeometry(0.5)
    bar = BarrierCase1(g, 0.0, 1.0, 0.5, 0.25, 9.0)
    assert bar(0.0, 0.0) == pytest.approx(0.0, abs=1e-15)
    rep = bar.verify(samples=10_000, seed=0)
    assert rep["passes"] and rep["operator_min"] > 0.0
    assert rep["dz_trace"] > 0.0
    # boundary values: 0 on the outer section boundary, positive on the inner
    zlo, zhi = g.section_interval(1.0, 0.5)
    assert bar(0.0, zhi) == pytest.approx(0.0, abs=1e-15)
    zin = g.section_interval(1.0, 0.25)[1]
    assert bar(0.0, zin) == pytest.approx(np.exp(-9 * 0.25) - np.exp(-9 * 0.5))


def test_barrier_case1_other_s_and_validation():
    g = MAGeometry(0.25)
    z0 = (0.5 / 0.25) ** 0.25  # delta_h(z0, 0) = s z0^{1/s} = 0.5
    bar = BarrierCase1(g, 0.0, z0, 0.5, 0.2, 11.0)
    assert bar.verify(samples=4000)["passes"]
    with pytest.raises(ValueError):
        BarrierCase1(g, 0.0, z0, 0.5, 0.2, 5.0)   # alpha too small
    with pytest.raises(ValueError):
        BarrierCase1(g, 0.0, z0, 0.4, 0.2, 11.0)  # R inconsistent with z0
    with pytest.raises(ValueError):
        BarrierCase1(MAGeometry(0.75), 0.0, 1.0, 0.75 * 1.0, 0.2, 11.0)  # wrong regime


def test_barrier_case2_fixture():
    s = 0.75
    g = MAGeometry(s)
    R, rho = 0.5, 1.0 / 8.0
    z0 = (R / s) ** s
    bar = search_case2_parameters(g, 0.0, z0, R, rho)
    rep = bar.verify(samples=10_000, seed=1)
    assert rep["passes"]
    assert rep["operator_min"] > 0 and rep["bracket_scan_min"] > 0
    assert rep["dz_trace"] > 0 and rep["inner_bound_low"] > 0
    # profile structure
    p = bar.profile
    assert p.psi_mass <= 3.0 * p.eps * p.mu_S
    zg = np.linspace(0.0, p.z_hi, 2000)
    he = bar.h_eps(zg)
    assert he[0] == pytest.approx(0.0, abs=1e-12)
    assert he[-1] == pytest.approx(0.0, abs=1e-10)
    assert np.all(he <= 1e-12)
    psi = bar.psi(zg)
    assert np.all((psi >= p.eps - 1e-12) & (psi <= 1.0 + 1e-12))
    # |h_eps'(0)| <= 6 (n+1) eps mu_h(S), the derivative-at-trace bound
    assert abs(bar.h_eps_prime(0.0)) <= 6.0 * (g.n + 1) * p.eps * p.mu_S


def test_barrier_case2_bvp_oracle():
    # h_eps'' = 2(n+1) psi h'' checked by second differences off the endpoints
    s = 0.75
    g = MAGeometry(s)
    z0 = (0.5 / s) ** s
    bar = BarrierCase2(g, 0.0, z0, 0.5, 0.125, 0.1, 40.0)
    zs = np.linspace(0.05 * bar.profile.z_hi, 0.95 * bar.profile.z_hi, 40)
    h = 1e-6
    dzz = (bar.h_eps(zs + h) - 2 * bar.h_eps(zs) + bar.h_eps(zs - h)) / h**2
    target = 2.0 * (g.n + 1) * bar.psi(zs) * g.hpp(zs)
    rel = np.abs(dzz - target) / np.abs(target)
    assert np.max(rel) < 2e-2 and np.median(rel) < 1e-3


def test_barrier_case2_eps_too_large():
    s = 0.75
    g = MAGeometry(s)
    z0 = (0.5 / s) ** s
    with pytest.raises(ValueError, match="reduce eps"):
        barrier_case2(g, 0.0, z0, 0.5, 0.125, 0.9, 40.0, samples=500)


# -- inf-convolution ------------------------------------------------------------------


def _rect_grid(nx=31, nz=25):
    xs = np.linspace(-1.0, 1.0, nx)
    zs = np.linspace(0.1, 1.1, nz)
    return xs, zs


def test_infconv_constant_fixed_point():
    xs, zs = _rect_grid()
    U = np.full((len(xs), len(zs)), 2.7)
    ic = inf_convolution(xs, zs, U, 0.1)
    assert np.allclose(ic.values, 2.7)


def test_infconv_brute_force_oracle():
    rng = np.random.default_rng(4)
    xs, zs = _rect_grid(13, 11)
    U = rng.normal(size=(13, 11))
    eps = 0.3
    ic = inf_convolution(xs, zs, U, eps)
    # brute force over all nodes
    X, Z = np.meshgrid(xs, zs, indexing="ij")
    P = np.stack([X.ravel(), Z.ravel()], axis=1)
    D = ((P[:, None, :] - P[None, :, :]) ** 2).sum(-1) / eps
    brute = (U.ravel()[None, :] + D).min(axis=1).reshape(U.shape)
    assert np.allclose(ic.values, brute, atol=1e-12)
    # recorded argmin reconstructs the minimum exactly
    i, j = 5, 7
    ai, aj = ic.argmin_x[i, j], ic.argmin_z[i, j]
    val = U[ai, aj] + ((xs[i] - xs[ai]) ** 2 + (zs[j] - zs[aj]) ** 2) / eps
    assert val == pytest.approx(ic.values[i, j], abs=1e-12)


def test_infconv_ordering_monotonicity_lipschitz():
    xs, zs = _rect_grid(41, 31)
    U = np.abs(xs)[:, None] + 0.0 * zs[None, :]   # Lipschitz constant 1
    e1, e2 = 0.05, 0.2
    ic1 = inf_convolution(xs, zs, U, e1)
    ic2 = inf_convolution(xs, zs, U, e2)
    assert np.all(ic1.values <= U + 1e-13)
    assert np.all(ic2.values <= ic1.values + 1e-13)
    assert np.max(np.abs(ic1.values - U)) <= 1.0**2 * e1 / 4.0 + 1e-12
    assert np.max(np.abs(ic2.values - U)) <= 1.0**2 * e2 / 4.0 + 1e-12
    with pytest.raises(ValueError):
        inf_convolution(xs, zs, U, 0.0)


def test_infconv_semiconcavity():
    rng = np.random.default_rng(5)
    xs, zs = _rect_grid(33, 27)
    U = np.cos(3 * xs)[:, None] * (1 + zs)[None, :] + 0.1 * rng.normal(size=(33, 27))
    eps = 0.15
    ic = inf_convolution(xs, zs, U, eps)
    hx = xs[1] - xs[0]
    d2x = (ic.values[2:, :] - 2 * ic.values[1:-1, :] + ic.values[:-2, :]) / hx**2
    hz = zs[1] - zs[0]
    d2z = (ic.values[:, 2:] - 2 * ic.values[:, 1:-1] + ic.values[:, :-2]) / hz**2
    assert np.max(d2x) <= 2.0 / eps + 1e-8
    assert np.max(d2z) <= 2.0 / eps + 1e-8


def test_infconv_equality_at_argmin_self():
    xs, zs = _rect_grid(21, 17)
    U = 0.5 * xs[:, None] ** 2 + 0.5 * zs[None, :] ** 2  # convex, slowly varying
    ic = inf_convolution(xs, zs, U, 1e-4)
    self_nodes = (ic.argmin_x == np.arange(len(xs))[:, None]) & \
        (ic.argmin_z == np.arange(len(zs))[None, :])
    assert np.all(np.abs(ic.values[self_nodes] - U[self_nodes]) < 1e-14)


# -- sliding paraboloids -----------------------------------------------------------------


def test_slide_on_own_paraboloid():
    g = MAGeometry(0.6)
    xs, zs, U = sliding_fixture(g, "paraboloid", nx=31, nz=31, opening=1.0)
    rep = slide_paraboloids(g, xs, zs, U, [(0.1, 0.6)], 1.0)
    # U is itself a paraboloid of the same opening: P_v - U is constant, so the
    # touching value is exact wherever the contact lands
    (v, nodes, c) = rep.contact_map[0]
    P = -1.0 * (g.delta_phi(v[0], xs)[:, None] + g.delta_h(v[1], zs)[None, :]) + c
    assert np.min(U - P) >= -1e-12
    for (i, j) in nodes:
        assert U[i, j] - P[i, j] == pytest.approx(0.0, abs=1e-11)


def test_slide_convex_brute_force_and_measures():
    g = MAGeometry(0.4)
    xs, zs, U = sliding_fixture(g, "convex", nx=41, nz=41, opening=1.0)
    verts = vertex_lattice(xs, zs, 8)
    rep = slide_paraboloids(g, xs, zs, U, verts, 1.0)
    assert rep.mu_A > 0 and rep.mu_B > 0
    for (v, nodes, c) in rep.contact_map:
        shifted = U + 1.0 * (g.delta_phi(v[0], xs)[:, None] + g.delta_h(v[1], zs)[None, :])
        i, j = np.unravel_index(np.argmin(shifted), shifted.shape)
        assert (i, j) in [tuple(nn) for nn in nodes]
        assert c == pytest.approx(shifted[i, j], abs=1e-12)


def test_slide_measure_ratio_stability():
    g = MAGeometry(0.6)
    xs, zs, U = sliding_fixture(g, "harmonic", nx=41, nz=41, opening=0.5, seed=2)
    rep1 = slide_paraboloids(g, xs, zs, U, vertex_lattice(xs, zs, 6), 0.5)
    xs2, zs2, U2 = sliding_fixture(g, "harmonic", nx=81, nz=81, opening=0.5, seed=2)
    rep2 = slide_paraboloids(g, xs2, zs2, U2, vertex_lattice(xs2, zs2, 12), 0.5)
    assert rep1.mu_A > 0 and rep2.mu_A > 0
    assert abs(rep2.measure_ratio - rep1.measure_ratio) <= 0.25 * rep1.measure_ratio


def test_cell_measures_partition():
    g = MAGeometry(0.7)
    xs = np.linspace(-1, 1, 21)
    zs = np.linspace(0.05, 1.0, 17)
    cells = cell_measures(g, xs, zs)
    total = (xs[-1] - xs[0]) * g.mu_h_interval(zs[0], zs[-1])
    assert cells.sum() == pytest.approx(total, rel=1e-12)


def test_contact_csv(tmp_path):
    g = MAGeometry(0.5)
    xs, zs, U = sliding_fixture(g, "convex", nx=21, nz=21)
    rep = slide_paraboloids(g, xs, zs, U, [(0.0, 0.5)], 1.0)
    p = tmp_path / "contacts.csv"
    rep.to_csv(p, xs, zs)
    lines = p.read_text().strip().split("\n")
    assert lines[0] == "vertex_x,vertex_z,contact_x,contact_z,touching_value"
    assert len(lines) >= 2


# -- touch test ----------------------------------------------------------------------------


def _touch_grid(s, fn, nx=41, nz=40):
    g = MAGeometry(s)
    xs = np.linspace(-1.0, 1.0, nx)
    zs = np.concatenate([[0.0], np.geomspace(1e-3, 1.0, nz)])
    U = np.asarray(fn(xs[:, None], zs[None, :]), dtype=float)
    return g, xs, zs, np.broadcast_to(U, (nx, nz + 1)).copy()


def test_touch_linear_in_z():
    g, xs, zs, U = _touch_grid(0.5, lambda x, z: z + 0.0 * x)
    rep = touch_test(g, xs, zs, U, len(xs) // 2, 0.3)
    assert rep.feasible
    assert rep.exact_min_slope == pytest.approx(1.0, abs=1e-10)


def test_touch_concave_h_profile():
    # U = -h(z): h'(0) = 0, so the minimal slope tends to 0 from below as the
    # grid's first z-level shrinks (the lattice floor is -h(z_min)/z_min)
    g = MAGeometry(0.75)
    xs = np.linspace(-1.0, 1.0, 41)
    slopes = []
    for zmin in (1e-3, 1e-5):
        zs = np.concatenate([[0.0], np.geomspace(zmin, 1.0, 40)])
        U = np.broadcast_to(-g.h(zs)[None, :] + 0.0 * xs[:, None], (41, 41)).copy()
        rep = touch_test(g, xs, zs, U, 20, 0.3)
        assert rep.feasible and rep.exact_min_slope <= 0.0
        assert abs(rep.exact_min_slope) <= g.h(zmin) / zmin + 1e-12
        slopes.append(rep.exact_min_slope)
    assert abs(slopes[1]) < abs(slopes[0])


def test_touch_solved_extension_slope_bound():
    # on a solved Neumann problem, the minimal touching slope approximates the
    # prescribed datum at the touching point within 5%
    s, k = 0.5, 1
    problem, _ = eigen_extension_problem(s, k, Z=1.0)
    st = solve_extension(problem, ExtensionMesh(nx=257, my=128, grading=2.0))
    xs = st.x_axes[0]
    zs = st.z_nodes
    U = st.values.T.copy()
    ix0 = int(np.argmin(np.abs(xs - np.pi / 2)))  # sin(kx) = 1 there
    rep = touch_test(MAGeometry(s), xs, zs, U, ix0, 0.002)
    target = -ds_constant(s) * k ** (2 * s) * np.sin(k * xs[ix0])
    assert rep.feasible
    assert abs(rep.exact_min_slope - target) <= 0.05 * abs(target)


def test_touch_requires_trace_row():
    g = MAGeometry(0.5)
    xs = np.linspace(-1, 1, 11)
    zs = np.linspace(0.1, 1.0, 9)
    with pytest.raises(ValueError):
        touch_test(g, xs, zs, np.zeros((11, 9)), 5, 0.2)
