"""Monge-Ampere geometry of the product convex function Phi(x, z) = |x|^2/2 + h(z).

Everything here is closed form for fixed s in (0, 1):

    h(z)   = s^2/(1-s) |z|^(1/s)
    h'(z)  = s/(1-s) |z|^(1/s - 1) sign(z)
    h''(z) = |z|^(1/s - 2)          (z != 0)

Quasi-distances, sections, cubes and cylinders are built from the Bregman
deltas of phi(x) = |x|^2/2 and h.  Measures of h-intervals always use the
exact antiderivative h', never pointwise h'' (which is singular or degenerate
at z = 0 depending on s).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
import json

import numpy as np
from scipy.optimize import brentq


@dataclass(frozen=True)
class FractionalSetup:
    """Global parameters of an experiment: fractional order, ellipticity, Hoelder exponent."""

    s: float
    lam: float = 1.0
    Lam: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must be in (0,1), got {self.s}")
        if not 0.0 < self.lam <= self.Lam:
            raise ValueError(f"need 0 < lambda <= Lambda, got ({self.lam}, {self.Lam})")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")

    @property
    def q_s(self) -> float:
        """Radius constant of sections at the origin: S_R(0) = (-q_s R^s, q_s R^s)."""
        return ((1.0 - self.s) / self.s**2) ** self.s

    @property
    def c_s(self) -> float:
        """Constant with h(z) = c_s y^2 / 2 under the change of variables y = 2s z^(1/2s)."""
        return 1.0 / (2.0 * (1.0 - self.s))


class MAGeometry:
    """Closed-form quasi-metric machinery for fixed s and x-dimension n.

    Immutable after construction; every method is pure and safe to share
    between threads.
    """

    def __init__(self, setup, n=1):
        if not isinstance(setup, FractionalSetup):
            setup = FractionalSetup(s=float(setup))
        if n not in (1, 2):
            raise ValueError("x-dimension must be 1 or 2")
        self.setup = setup
        self.s = setup.s
        self.n = n
        self._hcoef = setup.s**2 / (1.0 - setup.s)
        self._inv_s = 1.0 / setup.s
        self._weight_exp = 1.0 / setup.s - 2.0

    # -- the convex profile and its derivatives -------------------------------

    def h(self, z):
        return self._hcoef * np.abs(z) ** self._inv_s

    def hp(self, z):
        z = np.asarray(z, dtype=float)
        return (self.s / (1.0 - self.s)) * np.abs(z) ** (self._inv_s - 1.0) * np.sign(z)

    def hpp(self, z):
        """Weight h''(z) = |z|^(1/s-2); defined only off {z = 0}."""
        z = np.asarray(z, dtype=float)
        if np.any(z == 0.0):
            raise ValueError("h'' is evaluated only off {z=0}; use mu_h_interval for measures")
        return np.abs(z) ** self._weight_exp

    # -- quasi-distances -------------------------------------------------------

    def delta_phi(self, x0, x):
        """delta_phi(x0, x) = |x - x0|^2 / 2.

        For n = 1 scalar coordinates broadcast elementwise; for n = 2 points
        carry a trailing coordinate axis of length n.
        """
        x0 = np.asarray(x0, dtype=float)
        x = np.asarray(x, dtype=float)
        d = x - x0
        if self.n == 1:
            return 0.5 * d * d
        if d.shape[-1] != self.n:
            raise ValueError(f"points must have a trailing axis of length {self.n}")
        return 0.5 * np.sum(d * d, axis=-1)

    def delta_h(self, z0, z):
        z0 = np.asarray(z0, dtype=float)
        z = np.asarray(z, dtype=float)
        return self.h(z) - self.h(z0) - self.hp(z0) * (z - z0)

    def delta_Phi(self, p0, p):
        """delta_Phi((x0,z0),(x,z)); points are (x, z) pairs."""
        x0, z0 = p0
        x, z = p
        return self.delta_phi(x0, x) + self.delta_h(z0, z)

    # -- measures --------------------------------------------------------------

    def mu_h_interval(self, a, b):
        """mu_h([a,b]) = h'(b) - h'(a), exact for any interval (h' is continuous at 0)."""
        if np.any(np.asarray(a) > np.asarray(b)):
            raise ValueError("interval endpoints must satisfy a <= b")
        return self.hp(b) - self.hp(a)

    # -- sections ----------------------------------------------------------------

    def section_x_radius(self, R):
        """Euclidean radius of the x-section: S_R(x0) = B_{sqrt(2R)}(x0)."""
        return np.sqrt(2.0 * R)

    def section_interval(self, z0, R):
        """Open interval {z : delta_h(z0, z) < R}.

        Centered at 0 the endpoints are +-q_s R^s exactly; otherwise each
        endpoint is found by bracketed root-finding on delta_h(z0,.) - R,
        relative tolerance 1e-12.
        """
        if R <= 0:
            raise ValueError("section radius must be positive")
        z0 = float(z0)
        if z0 == 0.0:
            half = self.setup.q_s * R**self.s
            return (-half, half)
        reach = self.setup.q_s * (R + abs(self.delta_h(z0, 0.0))) ** self.s + abs(z0)
        zhi = self._section_endpoint(z0, R, +reach)
        zlo = self._section_endpoint(z0, R, -reach)
        return (zlo, zhi)

    def _section_endpoint(self, z0, R, offset):
        f = lambda z: self.delta_h(z0, z) - R
        b = z0 + offset
        for _ in range(200):
            if f(b) >= 0.0:
                break
            b = z0 + 2.0 * (b - z0)
        else:
            raise RuntimeError("section endpoint bracket did not close")
        lo, hi = (z0, b) if offset > 0 else (b, z0)
        return brentq(f, lo, hi, rtol=1e-12)

    # -- anisotropic scaling ----------------------------------------------------

    def scale_point(self, x, z, rho):
        """(x, z) -> (rho x, rho^{2s} z); maps S_R x S_r cylinders to S_{rho^2 R} x S_{rho^2 r}."""
        if rho <= 0:
            raise ValueError("scaling factor must be positive")
        return np.asarray(x, dtype=float) * rho, np.asarray(z, dtype=float) * rho ** (2.0 * self.s)

    # -- the barrier quotient -----------------------------------------------------

    def quotient(self, z0, z):
        """Q(z) = (h'(z)-h'(z0))^2 / (h''(z) delta_h(z0,z)).

        Q >= 1 on {z > 0} holds for s <= 1/2; for s > 1/2 the quotient
        degenerates near z = 0 (Q(0) = 0), which is why the two barrier
        constructions differ.
        """
        num = (self.hp(z) - self.hp(z0)) ** 2
        den = self.hpp(z) * self.delta_h(z0, z)
        return num / den


@dataclass(frozen=True)
class SectionDescriptor:
    """A section / cube / cylinder / rectangle in the (x, z) product geometry.

    kind: "section" (delta_Phi ball), "cube" (Q_R = per-coordinate x-sections
    times z-section), "cylinder" (S_R(x) x S_r(z)), "rectangle"
    (Q_R(x) x S_r(z)).  half=True restricts to z > 0.
    """

    center_x: tuple
    center_z: float
    R: float
    kind: str = "section"
    r: float | None = None
    half: bool = False

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("section radius must be positive")
        if self.kind not in ("section", "cube", "cylinder", "rectangle"):
            raise ValueError(f"unknown section kind {self.kind!r}")

    def contains(self, geom: MAGeometry, x, z):
        """Vectorized membership; x has shape (..., n) (or plain (...) for n = 1)."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        cx = np.asarray(self.center_x, dtype=float)
        if geom.n == 1:
            cx = cx.reshape(()) if cx.size == 1 else cx
        r_z = self.R if self.r is None else self.r
        if self.kind == "section":
            inside = geom.delta_Phi((cx, self.center_z), (x, z)) < self.R
        else:
            dz = geom.delta_h(self.center_z, z) < r_z
            if self.kind == "cylinder":
                dx = geom.delta_phi(cx, x) < self.R
            else:  # cube / rectangle: per-coordinate sections
                diff = x - cx
                if geom.n == 1:
                    dx = 0.5 * diff * diff < self.R
                else:
                    dx = np.all(0.5 * diff * diff < self.R, axis=-1)
            inside = dx & dz
        if self.half:
            inside = inside & (z > 0)
        return inside


# -- empirical property reports -------------------------------------------------


@dataclass
class GeometryReport:
    kind: str
    s: float
    data: dict = field(default_factory=dict)

    def to_json(self, path=None):
        payload = {"kind": self.kind, "s": self.s, **self.data}
        text = json.dumps(payload, sort_keys=True, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def quasi_triangle_check(geom: MAGeometry, samples=100_000, seed=0,
                         box=2.0, radius_floor=1e-12):
    """Empirical quasi-triangle constant over sampled triples.

    Returns the largest ratio delta(p1,p2) / (min-sym delta(p1,p3) +
    min-sym delta(p2,p3)); the constant is existential so only finiteness
    and K >= 1 are asserted downstream.
    """
    n = geom.n
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-box, box, size=(3, samples, n))
    zs = rng.uniform(-box, box, size=(3, samples))

    def d(i, j):
        dphi = 0.5 * np.sum((xs[j] - xs[i]) ** 2, axis=-1)
        return dphi + geom.delta_h(zs[i], zs[j])

    num = d(0, 1)
    den = np.minimum(d(0, 2), d(2, 0)) + np.minimum(d(1, 2), d(2, 1))
    ok = den > radius_floor
    ratios = num[ok] / den[ok]
    return GeometryReport("quasi-triangle", geom.s, {
        "samples": int(ok.sum()),
        "K_hat": float(np.max(ratios)),
        "median_ratio": float(np.median(ratios)),
    })


def scaling_identity_check(geom: MAGeometry, samples=2048, seed=0):
    """Max relative error of rho^2 h(z) = h(rho^{2s} z) and the h' analogue."""
    rng = np.random.default_rng(seed)
    rho = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), samples))
    z = rng.uniform(-5.0, 5.0, samples)
    z[z == 0.0] = 0.5
    lhs_h = rho**2 * geom.h(z)
    rhs_h = geom.h(rho ** (2 * geom.s) * z)
    lhs_hp = rho ** (2 - 2 * geom.s) * geom.hp(z)
    rhs_hp = geom.hp(rho ** (2 * geom.s) * z)
    err_h = np.max(np.abs(lhs_h - rhs_h) / np.maximum(np.abs(lhs_h), 1e-300))
    err_hp = np.max(np.abs(lhs_hp - rhs_hp) / np.maximum(np.abs(lhs_hp), 1e-300))
    return GeometryReport("exact-scaling", geom.s, {
        "max_rel_err_h": float(err_h),
        "max_rel_err_hp": float(err_hp),
    })


def doubling_check(geom: MAGeometry, sections):
    """Ratios |S_R(z0)| mu_h(S_R(z0)) / R over a list of (z0, R) pairs."""
    ratios = []
    for z0, R in sections:
        zlo, zhi = geom.section_interval(z0, R)
        ratios.append((zhi - zlo) * geom.mu_h_interval(zlo, zhi) / R)
    ratios = np.asarray(ratios)
    return GeometryReport("doubling", geom.s, {
        "sections": len(ratios),
        "min_ratio": float(ratios.min()),
        "max_ratio": float(ratios.max()),
        "ratios": [float(r) for r in ratios],
    })


def a_infinity_check(geom: MAGeometry, z0=0.3, R=1.0, levels=8):
    """Lebesgue-ratio vs weight-ratio trend for shrinking subsets of a section.

    E_k is an interval of length |S| 2^-k anchored at the endpoint where the
    weight is largest, the adversarial placement.  Both ratios must decrease
    to 0; the implication |E|/|S| small => mu_h(E)/mu_h(S) small is the
    A_infinity behaviour being probed.
    """
    zlo, zhi = geom.section_interval(z0, R)
    length = zhi - zlo
    mu_S = geom.mu_h_interval(zlo, zhi)
    # h'' is monotone in |z|: largest near 0 for s > 1/2, away from 0 otherwise
    anchor_lo = (geom.s > 0.5) == (abs(zlo) < abs(zhi))
    leb, wgt = [], []
    for k in range(1, levels + 1):
        ell = length * 2.0**-k
        a, b = (zlo, zlo + ell) if anchor_lo else (zhi - ell, zhi)
        leb.append(ell / length)
        wgt.append(geom.mu_h_interval(a, b) / mu_S)
    return GeometryReport("a-infinity", geom.s, {
        "z0": z0, "R": R,
        "lebesgue_ratios": [float(v) for v in leb],
        "weight_ratios": [float(v) for v in wgt],
    })


def quotient_check(geom: MAGeometry, samples=20_000, seed=0, tol=1e-10):
    """Minimum of Q(z) over sampled z0 > 0, z > 0.

    The lower bound Q >= 1 is a property of the s <= 1/2 regime (the
    quotient vanishes at z = 0 when s > 1/2); callers should gate on s.
    """
    rng = np.random.default_rng(seed)
    z0 = np.exp(rng.uniform(np.log(1e-2), np.log(1e1), samples))
    z = np.exp(rng.uniform(np.log(1e-4), np.log(1e1), samples))
    keep = np.abs(z - z0) > 1e-12
    q = geom.quotient(z0[keep], z[keep])
    return GeometryReport("quotient", geom.s, {
        "samples": int(keep.sum()),
        "min_Q": float(q.min()),
        "passes": bool(q.min() >= 1.0 - tol),
    })


def engulfing_check(geom: MAGeometry, samples=10_000, seed=0,
                    t_range=(1e-3, 10.0), center_box=2.0):
    """Monte-Carlo engulfing constants for cubes in x and sections in z.

    For sampled (r1 < r2 <= 1, t, inner point) the largest radius tau such
    that the inner cube/section of radius tau still fits inside the outer one
    is computed exactly; the report gives the lower-envelope constants
    (C, p) with C (r2-r1)^p t <= tau over every sample, so violations at the
    reported constants are zero by construction.
    """
    n = geom.n
    rng = np.random.default_rng(seed)
    r2 = rng.uniform(0.05, 1.0, samples)
    r1 = r2 * rng.uniform(0.05, 0.95, samples)
    t = np.exp(rng.uniform(np.log(t_range[0]), np.log(t_range[1]), samples))

    # x component: cubes are products of per-coordinate intervals
    half_outer = np.sqrt(2.0 * r2 * t)
    x1 = rng.uniform(-1.0, 1.0, size=(samples, n)) * np.sqrt(2.0 * r1 * t)[:, None]
    tau_x = 0.5 * np.min((half_outer[:, None] - np.abs(x1)) ** 2, axis=1)

    # z component: sections of h
    z0 = rng.uniform(-center_box, center_box, samples)
    tau_z = np.empty(samples)
    for i in range(samples):
        zlo, zhi = geom.section_interval(z0[i], r2[i] * t[i])
        # inner center z1 sampled inside S_{r1 t}(z0)
        ilo, ihi = geom.section_interval(z0[i], r1[i] * t[i])
        z1 = ilo + (ihi - ilo) * rng.uniform(0.02, 0.98)
        tau_z[i] = min(geom.delta_h(z1, zlo), geom.delta_h(z1, zhi))

    def envelope(tau):
        u = np.log(r2 - r1)
        v = np.log(tau / t)
        p = max(1.0, float(np.polyfit(u, v, 1)[0]))
        logC = float(np.min(v - p * u))
        C = float(np.exp(logC))
        viol = int(np.sum(C * (r2 - r1) ** p * t > tau * (1.0 + 1e-12)))
        return C, p, viol

    C0, p0, v0 = envelope(tau_x)
    C1, p1, v1 = envelope(tau_z)
    return GeometryReport("engulfing", geom.s, {
        "samples": samples, "n": n,
        "C0_hat": C0, "p0_hat": p0,
        "C1_hat": C1, "p1_hat": p1,
        "violations": v0 + v1,
    })
