"""Quantitative regularity measurements: geometry-adapted Hoelder seminorms,
Harnack quotients over sections, harmonic-approximation distance, dyadic decay
of best polynomial fits at the trace, the inductive rescaling iteration, and
the end-to-end fractional estimate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .extension import (ExtensionMesh, ExtensionProblem, ExtensionState,
                        HarmonicCombo, rescale_solution, solve_extension)
from .fitting import sup_fit
from .geometry import MAGeometry
from .semigroup import CoefficientField


# -- Hoelder seminorm in the quasi-metric ---------------------------------------------------


def holder_seminorm(geom: MAGeometry, x_pts, z_pts, vals, beta, pair_cap=2_000_000):
    """max over ordered pairs of |U(p) - U(q)| / delta_Phi(p, q)^(beta/2).

    Above the pair cap the node set is subsampled with a fixed stride
    (deterministic); on the graded grids used here that keeps pairs in every
    delta_Phi decade.
    """
    if not 0.0 < beta < 2.0:
        raise ValueError("exponent must be in (0, 2)")
    x_pts = np.asarray(x_pts, dtype=float)
    z_pts = np.asarray(z_pts, dtype=float)
    vals = np.asarray(vals, dtype=float)
    N = len(vals)
    max_pts = int(np.sqrt(pair_cap))
    if N > max_pts:
        stride = int(np.ceil(N / max_pts))
        sel = slice(0, None, stride)
        x_pts, z_pts, vals = x_pts[sel], z_pts[sel], vals[sel]
    if x_pts.ndim == 1:
        dphi = 0.5 * (x_pts[:, None] - x_pts[None, :]) ** 2
    else:
        diff = x_pts[:, None, :] - x_pts[None, :, :]
        dphi = 0.5 * np.sum(diff * diff, axis=-1)
    dh = (geom.h(z_pts)[None, :] - geom.h(z_pts)[:, None]
          - geom.hp(z_pts)[:, None] * (z_pts[None, :] - z_pts[:, None]))
    delta = dphi + dh
    num = np.abs(vals[None, :] - vals[:, None])
    mask = delta > 1e-300
    return float(np.max(num[mask] / delta[mask] ** (beta / 2.0)))


def holder_seminorm_state(geom, state: ExtensionState, center, R, beta, pair_cap=2_000_000):
    """Seminorm of a solved state restricted to the section S_R(center)."""
    xs, z, v = state.node_points()
    x = xs[0] if len(xs) == 1 else np.stack(xs, axis=-1)
    member = geom.delta_Phi((center[0], center[1]), (x, z)) < R
    return holder_seminorm(geom, x[member], z[member], v[member], beta, pair_cap)


# -- Harnack quotient -------------------------------------------------------------------------


@dataclass
class HarnackReport:
    center_x: float
    center_z: float
    R: float
    kappa: float
    sup: float
    inf: float
    f_term: float
    F_term: float
    quotient: float

    def to_json(self, path=None):
        text = json.dumps(self.__dict__, sort_keys=True, indent=2)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def harnack_quotient(geom: MAGeometry, state: ExtensionState, center, R, kappa=0.5,
                     f_fn=None, F_fn=None) -> HarnackReport:
    """sup / (inf + ||f|| R^s + ||F|| R) over the shrunken section S_{kappa R}.

    The state must be nonnegative on S_R (use the even reflection for
    symmetric solutions); f_fn / F_fn are the problem data used for the
    inhomogeneous terms, omitted means zero.
    """
    xs, z, v = state.node_points()
    x = xs[0] if len(xs) == 1 else np.stack(xs, axis=-1)
    cx, cz = center
    delta = geom.delta_Phi((cx, cz), (x, z))
    in_R = delta < R
    if not np.any(in_R):
        raise ValueError("section S_R contains no grid nodes")
    if np.min(v[in_R]) < -1e-10 * max(1.0, np.max(np.abs(v[in_R]))):
        raise ValueError("Harnack quotient requires a nonnegative solution on S_R")
    in_kR = delta < kappa * R
    if not np.any(in_kR):
        raise ValueError("section S_{kappa R} contains no grid nodes")
    sup = float(np.max(v[in_kR]))
    inf = float(max(np.min(v[in_kR]), 0.0))
    f_term = 0.0
    if f_fn is not None:
        trace = in_R & (np.abs(z) < 1e-300)
        if np.any(trace):
            fx = x[trace] if np.ndim(x) == 1 else x[trace]
            f_term = float(np.max(np.abs(f_fn(fx)))) * R**geom.s
    F_term = 0.0
    if F_fn is not None:
        F_term = float(np.max(np.abs(F_fn(x[in_R], z[in_R])))) * R
    den = inf + f_term + F_term
    Q = 1.0 if sup == 0.0 else (np.inf if den == 0.0 else sup / den)
    return HarnackReport(float(np.atleast_1d(cx)[0]), float(cz), float(R), float(kappa),
                         sup, inf, f_term, F_term, float(Q))


def harnack_family_report(s, family, mesh=None, kappa=0.5, R=0.5, refine=1):
    """Max quotient over a family of exact nonnegative harmonic combinations.

    family: list of HarmonicCombo (f = F = 0, so the data terms vanish).  Each
    is sampled on the solver grid at `refine` times the base resolution; the
    sampling-grid sweep is what the stability check varies.
    """
    geom = MAGeometry(s)
    mesh = mesh or ExtensionMesh(nx=97, my=48)
    nx = (mesh.nx - 1) * refine + 1
    my = mesh.my * refine
    xlim = np.sqrt(2.0 * R) * 1.05
    zcap = geom.setup.q_s * R**geom.s * 1.05
    xs = np.linspace(-xlim, xlim, nx)
    zs = np.concatenate([[0.0], np.geomspace(zcap * 1e-3, zcap, my)])
    reports = []
    for combo in family:
        vals = np.broadcast_to(combo(xs[None, :], zs[:, None] * np.ones_like(xs)[None, :]),
                               (len(zs), len(xs)))
        state = ExtensionState(s, [xs], 2.0 * s * zs ** (1.0 / (2 * s)), vals, 0.0, 0.0,
                               meta={"synthetic": True}, reflected=True)
        reports.append(harnack_quotient(geom, state, (0.0, 0.0), R, kappa))
    quotients = np.array([r.quotient for r in reports])
    return {"C_H_hat": float(np.max(quotients)),
            "min_quotient": float(np.min(quotients)),
            "reports": reports}


# -- approximation by harmonic solutions ------------------------------------------------------


def approximation_distance(s, eps0, mesh=None, boundary=None):
    """||U - H||_inf on S_{3/4} x S_{3/4}^+ u T_{3/4} for a perturbed problem.

    U solves coefficients 1 + 0.45 eps0 cos(2x), Neumann 0.3 eps0 sin(3x) and
    right-hand side 0.25 eps0 cos(x); H solves the harmonic problem (a = 1,
    f = F = 0); both use the same lateral/top data and mesh, so the distance
    tends to 0 with eps0.
    """
    geom = MAGeometry(s)
    mesh = mesh or ExtensionMesh(nx=129, my=48)
    domain = (-np.sqrt(2.0), np.sqrt(2.0))
    Z = geom.setup.q_s  # h(Z) = 1
    boundary = boundary or HarmonicCombo(s, const=1.0, modes=[(0.4, 1.0, 0.2)])

    def g_lat(x, z):
        return boundary(x, z)

    def g_top(x):
        return boundary(x, Z)

    lam = max(1e-6, 1.0 - 0.45 * eps0)
    coeff_p = CoefficientField.scalar_1d(lambda x: 1.0 + 0.45 * eps0 * np.cos(2.0 * x),
                                         lam, 1.0 + 0.45 * eps0)
    prob_p = ExtensionProblem(
        s=s, coeff=coeff_p, domain=domain, Z=Z,
        bottom=("neumann", lambda x: 0.3 * eps0 * np.sin(3.0 * x)),
        F=lambda x, z: 0.25 * eps0 * np.cos(x) * np.ones_like(np.asarray(x, float)),
        g_lateral=g_lat, g_top=g_top)
    prob_h = ExtensionProblem(
        s=s, coeff=CoefficientField.identity(1), domain=domain, Z=Z,
        bottom=("neumann", 0.0), F=0.0, g_lateral=g_lat, g_top=g_top)
    U = solve_extension(prob_p, mesh)
    H = solve_extension(prob_h, mesh)
    Zq, Xq = np.meshgrid(U.z_nodes, U.x_axes[0], indexing="ij")
    member = (0.5 * Xq**2 < 0.75) & (geom.h(Zq) < 0.75)
    return float(np.max(np.abs(U.values - H.values)[member]))


# -- dyadic polynomial decay at the trace -------------------------------------------------------


def _case_basis(case, X, Z, s):
    ones = np.ones_like(X)
    if case == 1:
        return np.stack([ones], axis=1)
    if case == 2:
        return np.stack([ones, X], axis=1)
    hz = s * s / (1.0 - s) * np.abs(Z) ** (1.0 / s)
    return np.stack([ones, X, 0.5 * X**2, hz], axis=1)


def _region(state: ExtensionState, r, case, node_cap=6000):
    """Nodes of S_{r^2} x S_{zcap}^+ (zcap = r^2, or r^3 in the degenerate case)."""
    s = state.s
    geom_qs = ((1.0 - s) / s**2) ** s
    xw = np.sqrt(2.0) * r
    zcap = r**2 if case in (1, 2) else r**3
    zlim = geom_qs * zcap**s
    xs = state.x_axes[0]
    selx = np.abs(xs) < xw
    selz = state.z_nodes < zlim
    if selx.sum() < 7 or selz.sum() < 4:
        return None
    sub = state.values[np.ix_(selz, selx)]
    Z, X = np.meshgrid(state.z_nodes[selz], xs[selx], indexing="ij")
    X, Z, V = X.ravel(), Z.ravel(), sub.ravel()
    if len(V) > node_cap:
        stride = int(np.ceil(len(V) / node_cap))
        X, Z, V = X[::stride], Z[::stride], V[::stride]
    return X, Z, V


@dataclass
class DecayReport:
    case: int
    rho: float
    scales: list
    fitted_exponent: float | None
    noise_floor: float
    fit_window: int | None
    kept: list
    increments: dict = field(default_factory=dict)
    truncated: bool = False

    def to_json(self, path=None):
        payload = {
            "case": self.case, "rho": self.rho,
            "fitted_exponent": self.fitted_exponent,
            "noise_floor": self.noise_floor,
            "fit_window": self.fit_window,
            "truncated": self.truncated,
            "scales": self.scales,
            "kept": self.kept,
            "increments": self.increments,
        }
        text = json.dumps(payload, sort_keys=True, indent=2)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("j,r,nodes,sup_error\n")
            for row in self.scales:
                fh.write(f"{row['j']},{row['r']!r},{row['nodes']},{row['E']!r}\n")


def schauder_decay(state: ExtensionState, case, rho=0.5, depth=9, noise_floor=0.0,
                   fit_window=None) -> DecayReport:
    """Best sup-fit of the case polynomial over S_{r^2} x S_{r^2}^+ ladders.

    case 1: constants; case 2: affine in x; case 3: 1/2 A x^2 + b x + c +
    d h(z) over the anisotropic region S_{r^2} x S_{r^3}^+ (the degenerate
    scaling).  Scales with sup error below 10x the noise floor are excluded
    from the exponent fit; fit_window keeps only the last k surviving scales
    ("r sufficiently small").
    """
    if case not in (1, 2, 3):
        raise ValueError("case must be 1, 2 or 3")
    if state.n != 1:
        raise ValueError("decay fitting implemented for 1-D x")
    s = state.s
    scales = []
    truncated = False
    for j in range(depth + 1):
        r = rho**j
        nodes = _region(state, r, case)
        if nodes is None:
            truncated = True
            break
        X, Z, V = nodes
        basis = _case_basis(case, X, Z, s)
        coeffs, E = sup_fit(basis, V)
        names = ["c"] if case == 1 else (["c", "b"] if case == 2 else ["c", "b", "A", "d"])
        scales.append({"j": j, "r": float(r), "nodes": int(len(V)), "E": float(E),
                       "coeffs": {k: float(v) for k, v in zip(names, coeffs)}})
    kept = [row for row in scales if row["E"] > 10.0 * noise_floor]
    if fit_window:
        kept = kept[-fit_window:]
    fitted = None
    if len(kept) >= 2:
        lr = np.log([row["r"] for row in kept])
        lE = np.log([row["E"] for row in kept])
        fitted = float(np.polyfit(lr, lE, 1)[0])
    increments = {"dc": [], "db": [], "dA": [], "dd": []}
    for a, b in zip(scales[:-1], scales[1:]):
        ca, cb = a["coeffs"], b["coeffs"]
        rj = a["r"]
        increments["dc"].append(abs(ca["c"] - cb["c"]))
        if case >= 2:
            increments["db"].append(rj * abs(ca["b"] - cb["b"]))
        if case == 3:
            increments["dA"].append(rj**2 * abs(ca["A"] - cb["A"]))
            increments["dd"].append(rj**2 * abs(ca["d"] - cb["d"]))
    return DecayReport(case, float(rho), scales, fitted, float(noise_floor),
                       fit_window, [row["j"] for row in kept], increments, truncated)


# -- inductive rescaling iteration ---------------------------------------------------------------


@dataclass
class CampanatoReport:
    case: int
    rho: float
    alpha: float
    steps: int
    coefficients: list           # accumulated (c, b, A, d) after each step
    step_errors: list            # sup error of the corrector fit per step
    increments: dict
    limit: dict
    truncated: bool = False

    def to_json(self, path=None):
        text = json.dumps(self.__dict__, sort_keys=True, indent=2, default=list)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def campanato_iterate(state: ExtensionState, case, alpha, rho=0.5, depth=8,
                      fit_mesh: ExtensionMesh | None = None) -> CampanatoReport:
    """Inductive zoom: rescale, fit a unit-scale corrector, accumulate.

    At step k the rescaled function rho^{-k(alpha+2s)} (U(rho^k x, rho^{2sk} z)
    - P_k(...)) is built with rescale_solution onto a fixed fit mesh, the
    order-k corrector is sup-fitted at the fixed scale (region of radius
    rho^2), and the accumulated polynomial is updated by
    P_{k+1} = P_k + rho^{k(alpha+2s)} P(rho^{-k} x, rho^{-2ks} z), i.e.

        c += rho^{k(alpha+2s)} c_step      b += rho^{k(alpha+2s-1)} b_step
        A += rho^{k(alpha+2s-2)} A_step    d += rho^{k(alpha+2s-2)} d_step.

    The loop stops early (truncated report) once the zoomed fit region falls
    below a few source-grid cells.
    """
    if state.n != 1:
        raise ValueError("iteration implemented for 1-D x")
    s = state.s
    gam = alpha + 2.0 * s
    geom_qs = ((1.0 - s) / s**2) ** s
    fit_mesh = fit_mesh or ExtensionMesh(nx=97, my=40, grading=3.0)
    xw = np.sqrt(2.0) * rho * 1.02
    zcap = rho**2 if case in (1, 2) else rho**3
    Zfit = geom_qs * zcap**s * 1.02
    xs_src = state.x_axes[0]
    dx0 = float(np.min(np.diff(xs_src)))

    c = b = A = d = 0.0
    coefficients, step_errors = [], []
    inc = {"dc": [], "db": [], "dA": [], "dd": []}
    truncated = False
    for k in range(depth):
        if rho**k * xw < 4.0 * dx0 / np.sqrt(2.0):
            truncated = True
            break
        V = rescale_solution(state, rho**k, target_mesh=fit_mesh,
                             target_domain=(-xw, xw, Zfit))
        Zg, Xg = np.meshgrid(V.z_nodes, V.x_axes[0], indexing="ij")
        X, Z = Xg.ravel(), Zg.ravel()
        hz = s * s / (1.0 - s) * np.abs(Z) ** (1.0 / s)
        member = (0.5 * X**2 < rho**2) & (hz < zcap)
        X, Z, W = X[member], Z[member], V.values.ravel()[member]
        # subtract the accumulated polynomial in original coordinates
        Xo, Zo = rho**k * X, rho ** (2 * s * k) * Z
        hz_o = s * s / (1.0 - s) * np.abs(Zo) ** (1.0 / s)
        Pk = c + b * Xo + 0.5 * A * Xo**2 + d * hz_o
        vals = (W - Pk) / rho ** (k * gam)
        basis = _case_basis(case, X, Z, s)
        theta, err = sup_fit(basis, vals)
        step_errors.append(float(err))
        cs = theta[0]
        bs = theta[1] if case >= 2 else 0.0
        As = theta[2] if case == 3 else 0.0
        ds = theta[3] if case == 3 else 0.0
        inc["dc"].append(abs(rho ** (k * gam) * cs))
        inc["db"].append(abs(rho ** (k * gam) * bs))
        inc["dA"].append(abs(rho ** (k * gam) * As))
        inc["dd"].append(abs(rho ** (k * gam) * ds))
        c += rho ** (k * gam) * cs
        b += rho ** (k * (gam - 1.0)) * bs
        A += rho ** (k * (gam - 2.0)) * As
        d += rho ** (k * (gam - 2.0)) * ds
        coefficients.append({"c": float(c), "b": float(b), "A": float(A), "d": float(d)})
    limit = coefficients[-1] if coefficients else {"c": 0.0, "b": 0.0, "A": 0.0, "d": 0.0}
    return CampanatoReport(case, float(rho), float(alpha), len(coefficients),
                           coefficients, step_errors, inc, limit, truncated)


# -- end-to-end fractional regularity --------------------------------------------------------------


@dataclass
class NormReport:
    order: int
    holder_exponent: float
    sup_u: float
    sup_derivatives: list
    holder_seminorm: float
    data_norm: float
    ratio: float

    def to_json(self, path=None):
        text = json.dumps(self.__dict__, sort_keys=True, indent=2)
        if path:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def interior_norm_report(xs, u, gamma_total, sub_mask, data_norm) -> NormReport:
    """C^{m, gamma} norms by divided differences on a 1-D grid.

    m = floor(gamma_total), gamma = gamma_total - m; derivatives use centered
    second-order stencils, one-sided at the subdomain edges.  The ratio is
    (sup |u| + sup |D^m u| + [D^m u]_gamma) / data_norm.
    """
    xs = np.asarray(xs, dtype=float)
    u = np.asarray(u, dtype=float)
    m = int(np.floor(gamma_total))
    gam = gamma_total - m
    if not 0.0 < gam < 1.0:
        raise ValueError("gamma_total must have fractional part in (0,1)")
    h = xs[1] - xs[0]
    derivs = [u]
    cur = u
    for _ in range(m):
        nxt = np.empty_like(cur)
        nxt[1:-1] = (cur[2:] - cur[:-2]) / (2 * h)
        nxt[0] = (-3 * cur[0] + 4 * cur[1] - cur[2]) / (2 * h)
        nxt[-1] = (3 * cur[-1] - 4 * cur[-2] + cur[-3]) / (2 * h)
        derivs.append(nxt)
        cur = nxt
    xs_s = xs[sub_mask]
    dm = cur[sub_mask]
    diff = np.abs(dm[:, None] - dm[None, :])
    dist = np.abs(xs_s[:, None] - xs_s[None, :])
    mask = dist > 1e-300
    semi = float(np.max(diff[mask] / dist[mask] ** gam))
    sup_u = float(np.max(np.abs(u[sub_mask])))
    sups = [float(np.max(np.abs(dv[sub_mask]))) for dv in derivs[1:]]
    total = sup_u + sum(sups) + semi
    ratio = total / data_norm if data_norm > 0 else np.inf
    return NormReport(m, float(gam), sup_u, sups, semi, float(data_norm), float(ratio))
