"""Geometry module: closed-form identities, section machinery, empirical checks."""

import numpy as np
import pytest
from scipy.integrate import quad

from fracext.geometry import (FractionalSetup, MAGeometry, SectionDescriptor,
                              a_infinity_check, doubling_check, engulfing_check,
                              quasi_triangle_check, quotient_check,
                              scaling_identity_check)


def test_setup_validation():
    with pytest.raises(ValueError):
        FractionalSetup(s=1.2)
    with pytest.raises(ValueError):
        FractionalSetup(s=0.5, lam=2.0, Lam=1.0)
    with pytest.raises(ValueError):
        FractionalSetup(s=0.5, alpha=1.0)


def test_setup_constants_half():
    st = FractionalSetup(s=0.5)
    assert st.q_s == np.sqrt(2.0)
    assert st.c_s == 1.0


def test_delta_phi_examples():
    g = MAGeometry(0.5)
    g2 = MAGeometry(0.5, n=2)
    assert g.delta_phi(0.0, 0.0) == 0.0
    assert g2.delta_phi(np.array([0.0, 0.0]), np.array([2.0, 0.0])) == 2.0
    assert g2.delta_phi(np.array([1.0, 1.0]), np.array([2.0, 3.0])) == 2.5
    # symmetry and elementwise broadcasting in the scalar-coordinate case
    xs = np.linspace(-2, 2, 11)
    assert np.allclose(g.delta_phi(0.3, xs), g.delta_phi(xs, 0.3))


def test_delta_h_examples():
    g = MAGeometry(0.5)
    assert g.delta_h(1.0, 3.0) == pytest.approx(2.0, abs=1e-14)
    # z0 = 0: delta_h reduces to h for any s
    for s in (0.25, 0.4, 0.75):
        gs = MAGeometry(s)
        zs = np.linspace(-2, 2, 9)
        assert np.allclose(gs.delta_h(0.0, zs), gs.h(zs), atol=1e-14)
    # s = 1/3: h(z) = z^3/6 for z > 0; exact rational value 2/3
    g3 = MAGeometry(1.0 / 3.0)
    assert g3.delta_h(1.0, 2.0) == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_delta_h_nonnegative_and_definite():
    rng = np.random.default_rng(7)
    for s in (0.25, 0.5, 0.75):
        g = MAGeometry(s)
        z0 = rng.uniform(-3, 3, 300)
        z = rng.uniform(-3, 3, 300)
        d = g.delta_h(z0, z)
        assert np.all(d >= -1e-14)
        assert np.all(g.delta_h(z0, z0) <= 1e-14)
        assert np.all(d[np.abs(z - z0) > 1e-3] > 0)


def test_mu_h_examples_and_additivity():
    g = MAGeometry(0.5)
    assert g.mu_h_interval(0.0, 2.0) == pytest.approx(2.0, abs=1e-14)
    for s in (0.25, 0.6):
        gs = MAGeometry(s)
        b = 1.7
        expected = 2.0 * s / (1.0 - s) * b ** ((1.0 - s) / s)
        assert gs.mu_h_interval(-b, b) == pytest.approx(expected, rel=1e-13)
        # additivity across adjacent intervals through 0
        total = gs.mu_h_interval(-1.0, 0.25) + gs.mu_h_interval(0.25, 2.0)
        assert total == pytest.approx(gs.mu_h_interval(-1.0, 2.0), rel=1e-13)
    g3 = MAGeometry(1.0 / 3.0)
    assert g3.mu_h_interval(1.0, 2.0) == pytest.approx(1.5, abs=1e-13)


def test_mu_h_vs_adaptive_quadrature():
    for s in (0.25, 0.5, 0.75):
        g = MAGeometry(s)
        w = lambda z: np.abs(z) ** (1.0 / s - 2.0)
        # away from 0: relative 1e-8
        val, _ = quad(w, 0.3, 1.9)
        assert abs(g.mu_h_interval(0.3, 1.9) - val) <= 1e-8 * abs(val)
        # across 0: absolute 1e-8 (integrable singularity or degeneracy)
        val0 = quad(w, -0.7, 0.0)[0] + quad(w, 0.0, 1.1)[0]
        assert abs(g.mu_h_interval(-0.7, 1.1) - val0) <= 1e-8


def test_hpp_rejected_at_zero():
    g = MAGeometry(0.75)
    with pytest.raises(ValueError):
        g.hpp(np.array([0.5, 0.0]))


def test_section_interval():
    g = MAGeometry(0.5)
    lo, hi = g.section_interval(0.0, 1.0)
    assert (lo, hi) == pytest.approx((-np.sqrt(2), np.sqrt(2)), abs=1e-14)
    lo, hi = g.section_interval(1.0, 2.0)
    assert (lo, hi) == pytest.approx((-1.0, 3.0), abs=1e-9)
    for s in (0.3, 0.8):
        gs = MAGeometry(s)
        R = 0.37
        half = gs.setup.q_s * R**s
        assert gs.section_interval(0.0, R) == pytest.approx((-half, half))
        # off-center endpoints solve delta_h = R to high accuracy
        lo, hi = gs.section_interval(0.9, R)
        assert gs.delta_h(0.9, lo) == pytest.approx(R, rel=1e-9)
        assert gs.delta_h(0.9, hi) == pytest.approx(R, rel=1e-9)
    with pytest.raises(ValueError):
        g.section_interval(0.0, -1.0)


def test_scale_point_membership_property():
    # membership before iff membership after, against the raw delta definitions
    rng = np.random.default_rng(11)
    for s in (0.25, 0.5, 0.75):
        g = MAGeometry(s)
        for _ in range(200):
            rho = np.exp(rng.uniform(np.log(0.1), np.log(10.0)))
            R, r = rng.uniform(0.05, 2.0, 2)
            x0, z0 = rng.uniform(-1, 1, 2)
            x, z = rng.uniform(-2, 2, 2)
            before = (g.delta_phi(x0, x) < R) and (g.delta_h(z0, z) < r)
            xs, zs = g.scale_point(x, z, rho)
            x0s, z0s = g.scale_point(x0, z0, rho)
            after = (g.delta_phi(x0s, xs) < rho**2 * R) and \
                (g.delta_h(z0s, zs) < rho**2 * r)
            assert before == after
    # rho = 1 identity, quadratic homogeneity at s = 1/2
    g = MAGeometry(0.5)
    assert g.scale_point(1.0, 1.0, 1.0) == (1.0, 1.0)
    x2, z2 = g.scale_point(1.0, 1.0, 2.0)
    assert g.delta_phi(0, x2) + g.delta_h(0, z2) == pytest.approx(4.0, abs=1e-13)


def test_exact_scaling_identity():
    for s in (0.25, 0.5, 0.75):
        rep = scaling_identity_check(MAGeometry(s), seed=1)
        assert rep.data["max_rel_err_h"] < 1e-12
        assert rep.data["max_rel_err_hp"] < 1e-12


def test_quasi_triangle_finite():
    for s in (0.25, 0.5, 0.75):
        rep = quasi_triangle_check(MAGeometry(s), samples=20_000, seed=2)
        K = rep.data["K_hat"]
        assert np.isfinite(K) and K >= 1.0


def test_doubling_origin_closed_form():
    # at z0 = 0 the ratio |S| mu_h(S) / R equals 4/s for every R
    for s in (0.25, 0.5, 0.75):
        g = MAGeometry(s)
        rep = doubling_check(g, [(0.0, R) for R in (1e-3, 1e-1, 1.0, 10.0)])
        assert rep.data["min_ratio"] == pytest.approx(4.0 / s, rel=1e-10)
        assert rep.data["max_ratio"] == pytest.approx(4.0 / s, rel=1e-10)


def test_doubling_off_center_bounded():
    g = MAGeometry(0.75)
    rep = doubling_check(g, [(2.0, R) for R in np.geomspace(1e-3, 1.0, 7)])
    assert rep.data["min_ratio"] > 0
    assert np.isfinite(rep.data["max_ratio"])


def test_a_infinity_trend():
    for s in (0.25, 0.75):
        rep = a_infinity_check(MAGeometry(s), z0=0.3, R=1.0, levels=8)
        w = rep.data["weight_ratios"]
        assert all(a > b for a, b in zip(w[:-1], w[1:]))
        assert w[-1] < 0.05


def test_quotient_bound_nondegenerate_regime():
    for s in (0.25, 0.4, 0.5):
        rep = quotient_check(MAGeometry(s), samples=20_000, seed=3)
        assert rep.data["min_Q"] >= 1.0 - 1e-10
    # degenerate regime: the quotient drops below 1 near z = 0, which is why
    # the second barrier construction exists
    g = MAGeometry(0.75)
    assert g.quotient(1.0, 0.01) < 1.0


def test_engulfing_no_violations():
    for s in (0.25, 0.5):
        rep = engulfing_check(MAGeometry(s), samples=3000, seed=4)
        assert rep.data["violations"] == 0
        assert rep.data["C0_hat"] > 0 and rep.data["C1_hat"] > 0
        assert rep.data["p0_hat"] >= 1.0 and rep.data["p1_hat"] >= 1.0


def test_engulfing_quadratic_exact_constants():
    # for the quadratic x-geometry, C0 = 1/4 and p0 = 2 engulf for all samples
    rng = np.random.default_rng(5)
    for _ in range(500):
        r2 = rng.uniform(0.05, 1.0)
        r1 = r2 * rng.uniform(0.05, 0.95)
        t = np.exp(rng.uniform(np.log(1e-3), np.log(10.0)))
        x1 = rng.uniform(-1, 1) * np.sqrt(2 * r1 * t)
        tau = 0.25 * (r2 - r1) ** 2 * t
        assert np.sqrt(2 * r1 * t) + np.sqrt(2 * tau) <= np.sqrt(2 * r2 * t) + 1e-12


def test_section_descriptor_membership_and_chain():
    rng = np.random.default_rng(6)
    center_x, center_z = (0.2, 0.4), -0.1
    for s in (0.3, 0.7):
        g = MAGeometry(s, n=2)
        sec = SectionDescriptor(center_x, center_z, 0.8, kind="section")
        cube = SectionDescriptor(center_x, center_z, 0.8, kind="cube")
        cyl = SectionDescriptor(center_x, center_z, 0.8, kind="cylinder")
        x = rng.uniform(-2, 2, size=(4000, 2))
        z = rng.uniform(-2, 2, 4000)
        in_sec = sec.contains(g, x, z)
        in_cyl = cyl.contains(g, x, z)
        in_cube = cube.contains(g, x, z)
        # membership agrees with the raw delta definition
        raw = g.delta_phi(np.asarray(center_x), x) + g.delta_h(center_z, z) < 0.8
        assert np.array_equal(in_sec, raw)
        # containment chain S subset S x S subset Q
        assert np.all(~in_sec | in_cyl)
        assert np.all(~in_cyl | in_cube)
    with pytest.raises(ValueError):
        SectionDescriptor((0.0,), 0.0, 0.5, kind="blob")
