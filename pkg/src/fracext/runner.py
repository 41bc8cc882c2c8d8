"""Experiment orchestration: dispatch a validated config to the module
pipelines, persist reports/plots, and assemble a run manifest.

Reports never contain timestamps, so a fixed config+seed reproduces them
byte-for-byte; the manifest carries the only timestamps of a run.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .barriers import BarrierCase1, inf_convolution, search_case2_parameters, slide_paraboloids
from .benchmarks import (eigen_extension_problem, harmonic_combo_problem,
                         kinked_trace_problem, positive_harmonic_family,
                         sliding_fixture, vertex_lattice)
from .config import ExperimentConfig
from .extension import ExtensionMesh, ExtensionState, HarmonicCombo, solve_extension, transform_to_y
from .geometry import (MAGeometry, a_infinity_check, doubling_check, engulfing_check,
                       quasi_triangle_check, quotient_check, scaling_identity_check)
from .gridfn import BoxGrid, GridFunction
from .plots import svg_heatmap, svg_loglog
from .regularity import (campanato_iterate, harnack_family_report,
                         interior_norm_report, schauder_decay)
from .semigroup import (CoefficientField, QuadratureSpec, SemigroupStepper,
                        balakrishnan_scalar, fractional_apply, fractional_inverse)


@dataclass
class RunManifest:
    config: dict
    config_hash: str
    version: str
    started: str
    finished: str = ""
    stages: list = field(default_factory=list)
    exit_status: int = 0

    def add_stage(self, name, status, details, outputs):
        self.stages.append({"name": name, "status": status, "details": details,
                            "outputs": sorted(outputs)})
        if status != "pass":
            self.exit_status = 1

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.__dict__, fh, sort_keys=True, indent=2, default=str)
            fh.write("\n")


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def run(cfg: ExperimentConfig, out_dir=None) -> RunManifest:
    outdir = out_dir or cfg.output_dir
    os.makedirs(outdir, exist_ok=True)
    manifest = RunManifest(config=cfg.data, config_hash=cfg.config_hash(),
                           version=__version__,
                           started=time.strftime("%Y-%m-%dT%H:%M:%S"))
    runner = _DISPATCH[cfg.experiment]
    try:
        ok, details, outputs = runner(cfg, outdir)
        manifest.add_stage(cfg.experiment, "pass" if ok else "fail", details,
                           [os.path.relpath(o, outdir) for o in outputs])
    except Exception as exc:  # noqa: BLE001 - stage failures land in the manifest
        manifest.add_stage(cfg.experiment, "error", {"exception": repr(exc)}, [])
    manifest.finished = time.strftime("%Y-%m-%dT%H:%M:%S")
    manifest.save(os.path.join(outdir, "manifest.json"))
    return manifest


# -- stages ---------------------------------------------------------------------------


def _run_geometry(cfg, outdir):
    setup = cfg.setup()
    prob = cfg.problem
    geom = MAGeometry(setup, n=prob["dimension"])
    seed = cfg.seed
    qt = quasi_triangle_check(geom, prob["samples"], seed=seed)
    sc = scaling_identity_check(geom, seed=seed)
    radii = [10.0**e for e in (-3, -2, -1, 0, 1)]
    sections = [(z0, R) for z0 in (0.0, 0.5, 2.0) for R in radii]
    db = doubling_check(geom, sections)
    ai = a_infinity_check(geom, z0=0.3, R=1.0)
    en = engulfing_check(geom, prob["engulfing_samples"], seed=seed)
    details = {
        "quasi_triangle": json.loads(qt.to_json()),
        "exact_scaling": json.loads(sc.to_json()),
        "doubling": json.loads(db.to_json()),
        "a_infinity": json.loads(ai.to_json()),
        "engulfing": json.loads(en.to_json()),
    }
    ok = (np.isfinite(qt.data["K_hat"]) and qt.data["K_hat"] >= 1.0
          and sc.data["max_rel_err_h"] < 1e-12 and sc.data["max_rel_err_hp"] < 1e-12
          and db.data["min_ratio"] > 0.0 and np.isfinite(db.data["max_ratio"])
          and all(a > b for a, b in zip(ai.data["weight_ratios"][:-1],
                                        ai.data["weight_ratios"][1:]))
          and en.data["violations"] == 0)
    if setup.s <= 0.5:
        q = quotient_check(geom, seed=seed)
        details["quotient"] = json.loads(q.to_json())
        ok = ok and q.data["passes"]
    path = os.path.join(outdir, "geometry_report.json")
    _write_json(path, details)
    return ok, details, [path]


def _run_fractional(cfg, outdir):
    setup = cfg.setup()
    s = setup.s
    prob = cfg.problem
    q = prob["quadrature"]
    quad = QuadratureSpec(t_min=q["t_min"], t_max=q["t_max"], nodes=int(q["nodes"]),
                          substeps=int(q["substeps"]), threads=cfg.threads)
    scalar_errs = {str(lam): abs(balakrishnan_scalar(lam, s, quad) - lam**s) / lam**s
                   for lam in (1.0, 4.0, 9.0)}
    N = int(prob["grid_points"])
    k = int(prob["k"])
    grid = BoxGrid.interval(0.0, np.pi, N + 1)
    stepper = SemigroupStepper(CoefficientField.identity(1), grid)
    u = GridFunction.from_callable(grid, lambda x: np.sin(k * x))
    Lsu, info = fractional_apply(stepper, u, s, quad)
    target = k ** (2.0 * s) * u.values
    rel = float(np.max(np.abs(Lsu.values - target)) / np.max(np.abs(target)))
    details = {"scalar_rel_errors": {kk: float(v) for kk, v in scalar_errs.items()},
               "eigen_rel_error": rel, "k": k, "tail_info": info}
    ok = max(scalar_errs.values()) < 1e-6 and rel < 1e-3
    if prob["inverse"]:
        inv, _ = fractional_inverse(stepper, u, s, quad)
        back, _ = fractional_apply(stepper, inv, s, quad)
        rt = float(np.max(np.abs(back.values - u.values)) / np.max(np.abs(u.values)))
        details["roundtrip_rel_error"] = rt
        ok = ok and rt < 1e-3
    path = os.path.join(outdir, "fractional_report.json")
    _write_json(path, details)
    return ok, details, [path]


def _run_solve_extension(cfg, outdir):
    setup = cfg.setup()
    s = setup.s
    prob = cfg.problem
    problem, oracle = eigen_extension_problem(s, int(prob["k"]), Z=prob["Z"])
    mesh = ExtensionMesh(nx=int(prob["nx"]), my=int(prob["my"]))
    state = solve_extension(problem, mesh)
    Zq, Xq = np.meshgrid(state.z_nodes, state.x_axes[0], indexing="ij")
    field_err = float(np.max(np.abs(state.values - oracle(Xq, Zq))))
    trace_err = float(np.max(np.abs(state.trace() - np.sin(prob["k"] * state.x_axes[0]))))
    details = {"field_error": field_err, "trace_error": trace_err,
               "residual_interior": state.residual_interior,
               "residual_bottom": state.residual_bottom,
               "m_matrix": state.meta["m_matrix"],
               "coarse_weight_flag": state.meta["coarse_weight_flag"]}
    outputs = []
    base = os.path.join(outdir, "extension_state")
    state.save(base)
    outputs += [base + ".bin", base + ".json"]
    if cfg.emit_plots:
        svg = os.path.join(outdir, "extension_state.svg")
        svg_heatmap(svg, state.x_axes[0], state.z_nodes, state.values,
                    title="extension state", meta_comment=f"config {cfg.config_hash()}")
        outputs.append(svg)
    ok = field_err < 1e-2 and state.residual_interior < 1e-8
    path = os.path.join(outdir, "extension_report.json")
    _write_json(path, details)
    return ok, details, outputs + [path]


def _run_barrier(cfg, outdir):
    setup = cfg.setup()
    s = setup.s
    prob = cfg.problem
    geom = MAGeometry(setup)
    R = float(prob["R"])
    rho = R * float(prob["rho_fraction"])
    z0 = (R / s) ** s  # delta_h(z0, 0) = s z0^{1/s} = R
    if prob["case"] == 1:
        if s > 0.5:
            raise ValueError("barrier case 1 requires s <= 1/2")
        bar = BarrierCase1(geom, 0.0, z0, R, rho, float(prob["alpha"]))
        rep = bar.verify(samples=int(prob["samples"]), seed=cfg.seed)
        details = {"case": 1, "z0": z0, "R": R, "rho": rho,
                   "alpha": float(prob["alpha"]), **rep}
    else:
        if s <= 0.5:
            raise ValueError("barrier case 2 requires s > 1/2")
        bar = search_case2_parameters(geom, 0.0, z0, R, rho)
        rep = bar.verify(samples=int(prob["samples"]), seed=cfg.seed)
        details = {"case": 2, "z0": z0, "R": R, "rho": rho,
                   "eps": bar.profile.eps, "eps0": bar.profile.eps0,
                   "alpha": bar.profile.alpha, **rep}
    path = os.path.join(outdir, "barrier_report.json")
    _write_json(path, details)
    return bool(rep["passes"]), details, [path]


def _run_sliding(cfg, outdir):
    setup = cfg.setup()
    geom = MAGeometry(setup)
    prob = cfg.problem
    a = float(prob["opening"])
    nx, nz = int(prob["nx"]), int(prob["nz"])
    xs, zs, U = sliding_fixture(geom, prob["fixture"], nx, nz, a, seed=cfg.seed)
    verts = vertex_lattice(xs, zs, int(prob["vertex_stride"]))
    rep = slide_paraboloids(geom, xs, zs, U, verts, a)
    touch_ok = True
    for (vx, vz), nodes, c in rep.contact_map:
        P = -a * (geom.delta_phi(vx, xs)[:, None] + geom.delta_h(vz, zs)[None, :]) + c
        gap = U - P
        touch_ok &= bool(np.min(gap) >= -1e-10)
        touch_ok &= all(abs(gap[i, j]) <= 1e-9 for (i, j) in nodes)
    details = {"fixture": prob["fixture"], "opening": a,
               "mu_A": rep.mu_A, "mu_B": rep.mu_B, "ratio": rep.measure_ratio,
               "touching_exact": touch_ok}
    ok = touch_ok and rep.mu_A > 0.0
    if prob["check_refinement"]:
        xs2, zs2, U2 = sliding_fixture(geom, prob["fixture"], 2 * nx - 1, 2 * nz - 1,
                                       a, seed=cfg.seed)
        rep2 = slide_paraboloids(geom, xs2, zs2, U2,
                                 vertex_lattice(xs2, zs2, 2 * int(prob["vertex_stride"])), a)
        drift = abs(rep2.measure_ratio - rep.measure_ratio) / rep.measure_ratio
        details["ratio_refined"] = rep2.measure_ratio
        details["ratio_drift"] = drift
        ok = ok and drift <= 0.25
    # inf-convolution ride-along on the same fixture
    eps = float(prob["eps_infconv"])
    ic1 = inf_convolution(xs, zs, U, eps)
    ic2 = inf_convolution(xs, zs, U, 2 * eps)
    below = bool(np.all(ic1.values <= U + 1e-12))
    monotone = bool(np.all(ic2.values <= ic1.values + 1e-12))
    details["infconv_below"] = below
    details["infconv_monotone"] = monotone
    ok = ok and below and monotone
    csv = os.path.join(outdir, "contacts.csv")
    rep.to_csv(csv, xs, zs)
    path = os.path.join(outdir, "sliding_report.json")
    _write_json(path, details)
    return ok, details, [path, csv]


def _run_harnack(cfg, outdir):
    setup = cfg.setup()
    s = setup.s
    prob = cfg.problem
    family = positive_harmonic_family(s, int(prob["family_size"]), seed=cfg.seed)
    mesh = ExtensionMesh(nx=int(prob["nx"]), my=int(prob["my"]))
    rep = harnack_family_report(s, family, mesh, kappa=prob["kappa"], R=prob["R"])
    quotients = [r.quotient for r in rep["reports"]]
    details = {"C_H_hat": rep["C_H_hat"], "min_quotient": rep["min_quotient"],
               "quotients": quotients}
    ok = rep["min_quotient"] >= 1.0 - 1e-9
    if prob["check_refinement"]:
        rep2 = harnack_family_report(s, family, mesh, kappa=prob["kappa"], R=prob["R"],
                                     refine=2)
        drift = abs(rep2["C_H_hat"] - rep["C_H_hat"]) / rep["C_H_hat"]
        details["C_H_hat_refined"] = rep2["C_H_hat"]
        details["C_H_drift"] = drift
        ok = ok and drift <= 0.20
    path = os.path.join(outdir, "harnack_report.json")
    _write_json(path, details)
    csv = os.path.join(outdir, "harnack_quotients.csv")
    with open(csv, "w") as fh:
        fh.write("index,quotient\n")
        for i, qv in enumerate(quotients):
            fh.write(f"{i},{qv!r}\n")
    return ok, details, [path, csv]


def _decay_case_bounds(case):
    return {1: (0.0, 1.0), 2: (1.0, 2.0), 3: (2.0, 3.0)}[case]


def _run_schauder(cfg, outdir):
    setup = cfg.setup()
    s, alpha = setup.s, setup.alpha
    prob = cfg.problem
    case = int(prob["case"])
    lo, hi = _decay_case_bounds(case)
    target = alpha + 2.0 * s
    if prob["benchmark"] == "kinked" and not lo < target < hi:
        raise ValueError(f"case {case} requires {lo} < alpha + 2s < {hi}, "
                         f"got {target}")
    rho, depth = float(prob["rho"]), int(prob["depth"])
    if prob["benchmark"] == "kinked":
        problem, mesh = kinked_trace_problem(s, alpha, mx=int(prob["mx"]),
                                             my=int(prob["my"]))
        state = solve_extension(problem, mesh)
        noise = max(state.residual_interior, 1e-14)
        report = schauder_decay(state, case, rho, depth, noise_floor=noise,
                                fit_window=int(prob["fit_window"]))
        ok = report.fitted_exponent is not None and \
            abs(report.fitted_exponent - target) <= 0.15
        reference = target
    elif prob["benchmark"] == "harmonic":
        combo = HarmonicCombo(s, const=0.3, modes=[(0.5, 1.0, 0.4), (0.2, 2.0, 1.1)])
        state = _synthetic_state(s, combo, mx=int(prob["mx"]), my=int(prob["my"]))
        report = schauder_decay(state, case, rho, depth, noise_floor=1e-13,
                                fit_window=int(prob["fit_window"]))
        ok = report.fitted_exponent is not None and \
            report.fitted_exponent >= case - 0.25
        reference = float(case)
    else:  # polynomial: exact representability
        state = _polynomial_state(s, case, mx=int(prob["mx"]), my=int(prob["my"]))
        report = schauder_decay(state, case, rho, depth, noise_floor=0.0)
        errs = [row["E"] for row in report.scales]
        ok = max(errs) < 1e-9
        reference = None
    details = json.loads(report.to_json())
    details["target"] = reference
    outputs = []
    jsonp = os.path.join(outdir, "decay_report.json")
    report.to_json(jsonp)
    csvp = os.path.join(outdir, "decay_report.csv")
    report.to_csv(csvp)
    outputs += [jsonp, csvp]
    if cfg.emit_plots:
        svg = os.path.join(outdir, "decay.svg")
        svg_loglog(svg, [row["r"] for row in report.scales],
                   [max(row["E"], 1e-300) for row in report.scales],
                   ref_slope=reference, title=f"decay case {case}",
                   meta_comment=f"config {cfg.config_hash()}")
        outputs.append(svg)
    return ok, details, outputs


def _synthetic_state(s, fn, mx=200, my=96):
    """Exact-valued state on the standard graded grid (noise floor ~ machine)."""
    xs = np.concatenate([-np.sqrt(2.0) * (np.arange(mx, 0, -1) / mx) ** 2.0, [0.0],
                         np.sqrt(2.0) * (np.arange(1, mx + 1) / mx) ** 2.0])
    geom = MAGeometry(s)
    Y = np.sqrt(2.0 / geom.setup.c_s)
    y = Y * (np.arange(my + 1) / my) ** 3.0
    from .extension import transform_to_z
    zg = transform_to_z(y, s)
    vals = np.asarray(fn(xs[None, :], zg[:, None] * np.ones_like(xs)[None, :]), float)
    vals = np.broadcast_to(vals, (my + 1, len(xs))).copy()
    return ExtensionState(s, [xs], y, vals, 0.0, 0.0, meta={"synthetic": True})


def _polynomial_state(s, case, mx=200, my=96):
    geom = MAGeometry(s)

    def fn(x, z):
        hz = geom.h(z)
        if case == 1:
            return 0.37 + 0.0 * x
        if case == 2:
            return 0.37 + 0.21 * x + 0.0 * hz
        return 0.37 + 0.21 * x + 0.5 * 0.4 * x**2 - 0.15 * hz

    return _synthetic_state(s, fn, mx, my)


def _run_end_to_end(cfg, outdir):
    setup = cfg.setup()
    s, alpha = setup.s, setup.alpha
    prob = cfg.problem
    N = int(prob["grid_points"])
    k = int(prob["k"])
    grid = BoxGrid.interval(0.0, np.pi, N + 1)
    stepper = SemigroupStepper(CoefficientField.identity(1), grid)
    quad = QuadratureSpec(threads=cfg.threads)
    x = grid.axes()[0]
    f = GridFunction.from_callable(grid, lambda xx: np.sin(k * xx))
    u, _ = fractional_inverse(stepper, f, s, quad)
    rel = float(np.max(np.abs(u.values - k ** (-2.0 * s) * f.values))
                / k ** (-2.0 * s))
    gamma_total = alpha + 2.0 * s
    if not 0.0 < gamma_total - np.floor(gamma_total) < 1.0:
        gamma_total += 1e-6
    frac = float(prob["subdomain_fraction"])
    lo, hi = 0.5 * (1 - frac) * np.pi, (0.5 + 0.5 * frac) * np.pi
    sub = (x >= lo) & (x <= hi)
    # data norm: sup|f| plus its Hoelder-alpha constant measured densely
    diff = np.abs(f.values[:, None] - f.values[None, :])
    dist = np.abs(x[:, None] - x[None, :])
    m = dist > 1e-300
    f_holder = float(np.max(diff[m] / dist[m] ** alpha))
    data_norm = float(np.max(np.abs(f.values))) + f_holder
    rep = interior_norm_report(x, u.values, gamma_total, sub, data_norm)
    details = {"eigen_rel_error": rel, "norm_report": json.loads(rep.to_json()),
               "f_holder_const": f_holder}
    ok = rel < 1e-3 and np.isfinite(rep.ratio)
    path = os.path.join(outdir, "endtoend_report.json")
    _write_json(path, details)
    return ok, details, [path]


_DISPATCH = {
    "geometry-check": _run_geometry,
    "fractional-apply": _run_fractional,
    "solve-extension": _run_solve_extension,
    "barrier-check": _run_barrier,
    "slide-paraboloids": _run_sliding,
    "harnack": _run_harnack,
    "schauder-decay": _run_schauder,
    "end-to-end": _run_end_to_end,
}
