"""Experiment kinds: verification suites, Monte Carlo runs, and scans.

Each kind consumes a validated config dict and writes ResultRecords plus a
pass/fail summary through a ResultSink; scan kinds also render SVG figures
next to the CSV output.
"""

from __future__ import annotations

import math
import time
from pathlib import Path

import numpy as np

from .. import currents, diagrams, gs_blocks, pfaffian
from ..exact import ExactGibbs, ThermoParams, ursell4_from
from ..graphs import CouplingGraph, LatticeSpec, build_lattice, load_graph
from ..mc import RunConfig, wolff_lattice_tables, wolff_run
from ..mc.betac import CrossingError, locate_beta_c
from ..mc.intersect import intersection_stats
from ..mc.stats import binned_estimate, jackknife
from ..mc.worm import worm_run
from . import plots
from .corpus import DEFAULT_CORPUS_SEED, corpus
from .records import ResultSink


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


def rel_residual(lhs: float, rhs: float, *scales: float) -> float:
    scale = max(abs(lhs), abs(rhs), *(abs(s) for s in scales), 1e-300)
    return abs(lhs - rhs) / scale


def _resolve_graph(config: dict) -> CouplingGraph:
    if config.get("graph_file"):
        return load_graph(config["graph_file"])
    lat = config.get("lattice")
    if not lat:
        raise ConfigError("experiment needs either 'lattice' or 'graph_file'")
    spec = LatticeSpec(d=int(lat["d"]), L=int(lat["L"]),
                       J=float(lat.get("J", 1.0)), bc=lat.get("bc", "periodic"))
    return build_lattice(spec)


# ---------------------------------------------------------------- identities


def run_verify_identities(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    """Exact identity residuals on the fixed corpus; the diagrammatic
    inequality suite runs alongside unless disabled.
    """
    tol = float(config["tolerance"])
    instances = corpus(int(config["graphs"]), int(config["corpus_seed"]))
    worst: dict[str, float] = {}
    violations: list[str] = []

    def note(name: str, residual: float, inst_index: int) -> None:
        residual = float(residual)
        if residual > worst.get(name, -1.0):
            worst[name] = residual
        if residual > tol:
            violations.append(f"{name}@{inst_index}: {residual:.3e}")

    for inst in instances:
        g, beta = inst.graph, inst.beta
        nv = g.n_vertices
        rng = np.random.default_rng(inst.index + 1)
        gibbs = ExactGibbs(g, ThermoParams(beta))
        ens = currents.CurrentEnsemble(g, beta)
        s2m = gibbs.s2_table()

        z_exact = gibbs.partition_function()
        note("partition", rel_residual(2.0**nv * ens.constrained_sum(()), z_exact,
                                       z_exact), inst.index)

        source_sets = [(0, nv - 1)] if nv >= 2 else []
        if nv >= 4:
            source_sets.append((0, 1, 2, 3))
        for srcs in source_sets:
            note("correlation",
                 rel_residual(ens.correlation(srcs), gibbs.correlation(srcs), 1.0),
                 inst.index)

        x, y = 0, nv - 1
        p_xy = currents.replica_probability_in(
            ens, [(), ()], currents.Connected(x, y, groups=((0, 1),)))
        note("percolation", rel_residual(s2m[x, y] ** 2, p_xy, 1.0), inst.index)

        if nv >= 3:
            xs = [int(v) for v in rng.choice(nv, size=3, replace=False)]
            a, b, c = xs
            lhs = s2m[a, b] * s2m[b, c] / s2m[a, c]
            rhs = currents.replica_probability_in(
                ens, [(a, c), ()], currents.Connected(a, b, groups=((0, 1),)))
            note("hitting", rel_residual(lhs, rhs, 1.0), inst.index)

        if nv >= 4:
            pts = [int(v) for v in rng.choice(nv, size=4, replace=False)]
            x1, x2, x3, x4 = pts
            s4 = gibbs.correlation(pts)
            trunc = s4 - s2m[x1, x2] * s2m[x3, x4]
            t1 = s2m[x1, x3] * s2m[x2, x4] * currents.replica_probability_in(
                ens, [(x1, x3), (x2, x4)],
                currents.NotConnected(x3, x4, groups=((0, 1),)))
            t2 = s2m[x1, x4] * s2m[x2, x3] * currents.replica_probability_in(
                ens, [(x1, x4), (x2, x3)],
                currents.NotConnected(x3, x4, groups=((0, 1),)))
            note("truncated",
                 rel_residual(trunc, t1 + t2, s4, abs(t1), abs(t2)), inst.index)

            u4 = ursell4_from(gibbs, *pts)
            scale = max(abs(s4), s2m[x1, x2] * s2m[x3, x4],
                        s2m[x1, x3] * s2m[x2, x4], s2m[x1, x4] * s2m[x2, x3])
            line1 = -2.0 * s4 * currents.replica_probability_in(
                ens, [tuple(pts), ()],
                currents.AllConnected(points=tuple(pts), groups=((0, 1),)))
            line2 = -2.0 * s2m[x1, x2] * s2m[x3, x4] * currents.replica_probability_in(
                ens, [(x1, x2), (x3, x4)],
                currents.SetsLinked(xs=(x1, x2), ys=(x3, x4), groups=((0, 1),)))
            note("u4-sources", rel_residual(u4, line1, scale), inst.index)
            note("u4-pairs", rel_residual(u4, line2, scale), inst.index)
            note("u4-cross", rel_residual(line1, line2, scale), inst.index)
            if u4 > 1e-12:
                violations.append(f"u4-sign@{inst.index}: {u4:.3e}")
            worst["u4-sign"] = max(worst.get("u4-sign", -1.0), u4)

    for name, value in sorted(worst.items()):
        sink.add(f"worst:{name}", value)
    passed = not violations
    summary = {"worst_residuals": worst, "violations": violations[:20],
               "instances": len(instances), "passed": passed}
    if config.get("inequalities", True):
        ok, ineq = _run_inequalities(config, sink)
        passed = passed and ok
        summary["inequalities"] = ineq
        summary["passed"] = passed
    return passed, summary


def _run_inequalities(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    atol = float(config["tolerance"])
    instances = corpus(int(config["graphs"]), int(config["corpus_seed"]))
    z_grid = np.linspace(-2.0, 2.0, 9)
    worst: dict[str, float] = {}
    violations: list[str] = []

    def check(name: str, excess: float, inst_index: int) -> None:
        # excess = lhs - rhs; positive beyond tolerance is a violation
        excess = float(excess)
        if excess > worst.get(name, -math.inf):
            worst[name] = excess
        if excess > atol:
            violations.append(f"{name}@{inst_index}: excess {excess:.3e}")

    for inst in instances:
        g, beta = inst.graph, inst.beta
        nv = g.n_vertices
        rng = np.random.default_rng(10_000 + inst.index)
        gibbs = ExactGibbs(g, ThermoParams(beta))
        ens = currents.CurrentEnsemble(g, beta)
        s2m = gibbs.s2_table()
        s2t = diagrams.S2Table.from_matrix(s2m)

        pts = [int(v) for v in rng.integers(0, nv, size=4)]
        x1, x2, x3, x4 = pts
        u4 = ursell4_from(gibbs, *pts)

        srcs = [frozenset((x1,)) ^ frozenset((x2,)),
                frozenset((x3,)) ^ frozenset((x4,)), frozenset(), frozenset()]
        p_q = currents.replica_probability_in(
            ens, srcs, currents.ClustersIntersect(x1, x3, groups=((0, 2), (1, 3))))
        check("four-replica", abs(u4) - 2.0 * s2m[x1, x2] * s2m[x3, x4] * p_q,
              inst.index)
        check("tree", abs(u4) - diagrams.tree_rhs(s2t, *pts), inst.index)

        if nv >= 4:
            dpts = [int(v) for v in rng.choice(nv, size=4, replace=False)]
            u4d = ursell4_from(gibbs, *dpts)
            check("tree-balanced",
                  abs(u4d) - diagrams.tree_rhs_balanced(s2t, g, beta, *dpts),
                  inst.index)

        if nv >= 3:
            x, y = (int(v) for v in rng.choice(nv, size=2, replace=False))
            others = [v for v in range(nv) if v not in (x, y)]
            box = [int(v) for v in
                   rng.choice(others, size=int(rng.integers(1, len(others) + 1)),
                              replace=False)]
            p_hit = currents.replica_probability_in(
                ens, [(x, y), ()],
                currents.ClusterHits(x, tuple(box), groups=((0, 1),)))
            bj = beta * g.coupling_matrix()
            rhs = sum(s2m[x, u] * bj[u, v] * s2m[v, y]
                      for u in box for v in range(nv) if v not in box)
            check("box-hitting", s2m[x, y] * p_hit - rhs, inst.index)

        gap, bound, _ = diagrams.wick_gap_check(g, beta, pts)
        check("wick-gap-lower", -gap, inst.index)
        check("wick-gap-upper", gap - bound, inst.index)
        if nv >= 6:
            spts = [int(v) for v in rng.choice(nv, size=6, replace=False)]
            gap6, bound6, _ = diagrams.wick_gap_check(g, beta, spts)
            check("wick-gap6-lower", -gap6, inst.index)
            check("wick-gap6-upper", gap6 - bound6, inst.index)

        ones = np.ones(nv)
        mom = gibbs.weighted_moments(ones, (2, 4))
        sig = mom[2]
        r_tilde = -(mom[4] - 3.0 * sig**2) / sig**2
        mgf = gibbs.mgf(ones / math.sqrt(sig), z_grid)
        viol = diagrams.mgf_gap_check(z_grid, mgf, 1.0, 1.0, r_tilde)
        check("mgf-gap", viol / math.exp(2.0), inst.index)
        check("r-upper", r_tilde - 2.0, inst.index)
        check("r-lower", -r_tilde, inst.index)

    for name, value in sorted(worst.items()):
        sink.add(f"worst_excess:{name}", value)
    passed = not violations
    return passed, {"worst_excess": worst, "violations": violations[:20],
                    "instances": len(instances), "passed": passed}


# ---------------------------------------------------------------- switching


def run_verify_switching(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    tol = float(config["tolerance"])
    count = int(config["instances"])
    instances = corpus(count, int(config["corpus_seed"]) + 1)
    worst = 0.0
    violations = []
    for inst in instances:
        g1, beta = inst.graph, inst.beta
        nv = g1.n_vertices
        rng = np.random.default_rng(20_000 + inst.index)
        keep = [k for k in range(g1.n_edges)
                if rng.random() < 0.6 or g1.n_edges <= 2]
        if not keep:
            keep = [0]
        g2 = CouplingGraph(
            n_vertices=nv, edges=tuple(g1.edges[k] for k in keep))

        def rand_even_subset():
            size = 2 * int(rng.integers(0, nv // 2 + 1))
            return tuple(int(v) for v in rng.choice(nv, size=size, replace=False))

        a_set = rand_even_subset()
        b_set = rand_even_subset()
        funcs = [None, currents.Connected(0, nv - 1, groups=((0, 1),))]
        func = funcs[inst.index % 2]
        lhs, rhs, _ = currents.switching_check(g1, g2, beta, a_set, b_set, func)
        res = rel_residual(lhs, rhs) if (lhs or rhs) else 0.0
        worst = max(worst, res)
        if res > tol:
            violations.append(f"instance {inst.index}: {res:.3e}")
    sink.add("worst:switching", worst)
    passed = not violations
    return passed, {"worst_residual": worst, "violations": violations,
                    "instances": count, "passed": passed}


# ----------------------------------------------------------------- pfaffian


def run_verify_pfaffian(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    tol = float(config["tolerance"])
    worst = 0.0
    violations = []
    for L in config["sizes"]:
        g = build_lattice(LatticeSpec(d=2, L=int(L), J=1.0, bc="free"))
        face = g.boundary_face
        for beta in config["betas"]:
            for n_pts in config["n_points"]:
                if n_pts > len(face):
                    continue
                step = len(face) / n_pts
                pts = [face[int(i * step)] for i in range(n_pts)]
                res = pfaffian.boundary_pfaffian_residual(g, float(beta), pts)
                sink.add(f"residual:{n_pts}pt", res, L=int(L), beta=float(beta))
                worst = max(worst, res)
                if res > tol:
                    violations.append(f"L={L} beta={beta} {n_pts}pt: {res:.3e}")

    # crossing-sign reference: two crossing chord pairs give +1
    sign = pfaffian.crossing_sign([0, 1, 2, 3, 4, 5], [(0, 2), (1, 4), (3, 5)])
    sink.add("crossing_sign:double_cross", float(sign))
    if sign != 1:
        violations.append("double-crossing sign is not +1")

    # intertwined boundary sources are always linked on planar graphs
    g3 = build_lattice(LatticeSpec(d=2, L=3, J=1.0, bc="free"))
    face = g3.boundary_face
    q = [face[0], face[2], face[4], face[6]]
    p_link = currents.replica_probability(
        g3, 0.55, [(q[0], q[2]), (q[1], q[3])],
        currents.SetsLinked(xs=(q[0], q[2]), ys=(q[1], q[3]), groups=((0, 1),)))
    sink.add("intertwined_link_probability", p_link)
    if abs(p_link - 1.0) > tol:
        violations.append(f"intertwined link probability {p_link} != 1")

    passed = not violations
    return passed, {"worst_residual": worst, "violations": violations,
                    "passed": passed}


# ----------------------------------------------------------------- gs-match


def run_gs_match(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    target = gs_blocks.TargetMeasure(float(config["lam"]), float(config["b"]))
    match_tol = float(config["match_tolerance"])
    m6_target = gs_blocks.target_moments(target, 6)[5]
    sizes = [int(n) for n in config["block_sizes"]]
    errors6 = []
    residuals = {}
    for n in sizes:
        params, residual = gs_blocks.tune(n, target)
        m6 = gs_blocks.block_moments(params, (6,))[6]
        err6 = abs(m6 - m6_target)
        errors6.append(err6)
        residuals[n] = residual
        sink.add("tuned_g", params.g, L=n)
        sink.add("tuned_alpha", params.alpha, L=n)
        sink.add("match_residual", residual, L=n)
        sink.add("sixth_moment_error", err6, L=n)
    plots.line_chart(
        sink.figure_path("sixth_moment_error.svg"),
        {"sixth-moment error": (sizes, errors6)},
        "block size N", "|<phi^6> - target|", logx=True, logy=True)
    violations = []
    tune_n = int(config["tune_n"])
    if tune_n in residuals and residuals[tune_n] > match_tol:
        violations.append(f"residual at N={tune_n}: {residuals[tune_n]:.2e}")
    if errors6[-1] >= errors6[0]:
        violations.append("sixth-moment error did not decrease")
    passed = not violations
    return passed, {"residuals": residuals, "sixth_moment_errors": errors6,
                    "violations": violations, "passed": passed}


# ------------------------------------------------------------------- mc-run


def run_mc_run(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    graph = _resolve_graph(config)
    betas = config["betas"]
    seeds = config["seeds"]
    engine = config["engine"]
    L = config.get("lattice", {}).get("L")
    for beta in betas:
        for seed in seeds:
            run_cfg = RunConfig(
                graph=graph, beta=float(beta), sweeps=int(config["sweeps"]),
                thermalization=int(config["thermalization"]),
                seed=int(seed), estimators=tuple(config["estimators"]),
                bins=int(config["bins"]),
                measure_every=int(config.get("measure_every", 1)),
            )
            if engine == "wolff":
                estimates = wolff_run(run_cfg)
            elif engine == "worm":
                _, estimates = worm_run(run_cfg, tuple(config["sources"]))
            else:
                raise ConfigError(f"unknown engine {engine!r}")
            for name in sorted(estimates):
                est = estimates[name]
                sink.add(name, est.mean, est.error, L=L, beta=float(beta),
                         seed=int(seed))
    return True, {"runs": len(betas) * len(seeds), "passed": True}


# ------------------------------------------------------------------ scan-rl


def _auto_beta(config: dict, sink: ResultSink) -> float:
    if config["beta"] != "auto":
        return float(config["beta"])
    est = locate_beta_c(
        d=int(config["d"]), sizes=config["betac_sizes"],
        bracket=tuple(config["bracket"]), sweeps=int(config["betac_sweeps"]),
        seed=int(config["seed"]), bins=int(config["bins"]),
    )
    sink.add("beta_c_estimate", est.beta_c, est.half_width)
    return est.beta_c


def run_scan_rl(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    beta = _auto_beta(config, sink)
    d = int(config["d"])
    sizes = [int(L) for L in config["sizes"]]
    seed = int(config["seed"])
    rl_means, rl_errs = [], []
    biggest_tables = None
    for L in sizes:
        g = build_lattice(LatticeSpec(d=d, L=L, J=1.0, bc="periodic"))
        cfg = RunConfig(graph=g, beta=beta, sweeps=int(config["sweeps"]),
                        thermalization=int(config["thermalization"]),
                        seed=seed, bins=int(config["bins"]))
        tables = wolff_lattice_tables(cfg, block_sides=(L,))
        b2, b4 = tables.block_bins[L]
        est = jackknife(lambda x2, x4: 3.0 - x4 / (x2 * x2), b2, b4,
                        seed=tables.seed, samples=cfg.n_measurements)
        sink.add("rl", est.mean, est.error, L=L, beta=beta, seed=seed)
        rl_means.append(est.mean)
        rl_errs.append(est.error)
        biggest_tables = tables
    bubbles, bubble_errs, scales = [], [], []
    for ell in config["bubble_scales"]:
        per_bin = np.array([
            diagrams.bubble(diagrams.S2Table.from_offsets(t), 0, float(ell))
            for t in biggest_tables.s2_bins
        ])
        est = binned_estimate(per_bin, len(per_bin))
        sink.add("bubble", est.mean, est.error, L=sizes[-1], beta=beta, seed=seed)
        scales.append(float(ell))
        bubbles.append(est.mean)
        bubble_errs.append(est.error)
    plots.line_chart(sink.figure_path("rl_vs_L.svg"),
                     {"R_L": (sizes, rl_means, rl_errs)},
                     "L", "R_L", title=f"d={d}, beta={beta:.5f}")
    plots.line_chart(sink.figure_path("bubble_vs_scale.svg"),
                     {"B_ell": (scales, bubbles, bubble_errs)},
                     "ell", "B_ell", title=f"d={d}, L={sizes[-1]}", logx=True)
    in_range = all(-4 * e <= m <= 2.0 + 4 * e
                   for m, e in zip(rl_means, rl_errs))
    bubble_increasing = all(bubbles[i + 1] >= bubbles[i]
                            for i in range(len(bubbles) - 1))
    passed = in_range
    return passed, {"beta": beta, "rl": rl_means, "rl_err": rl_errs,
                    "bubbles": bubbles, "bubble_increasing": bubble_increasing,
                    "rl_in_range": in_range, "passed": passed}


# ------------------------------------------------------------- locate-betac


def run_locate_betac(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    try:
        est = locate_beta_c(
            d=int(config["d"]), sizes=config["sizes"],
            bracket=tuple(config["bracket"]), sweeps=int(config["sweeps"]),
            thermalization=config.get("thermalization"),
            seed=int(config["seed"]), bins=int(config["bins"]),
            target_width=float(config["target_width"]),
        )
    except CrossingError as exc:
        sink.add("crossing_found", 0.0)
        return False, {"error": str(exc), "passed": False}
    sink.add("beta_c", est.beta_c, est.half_width, seed=int(config["seed"]))
    by_size: dict[int, list] = {}
    for beta, L, mean, err in est.evaluations:
        sink.add("binder", mean, err, L=L, beta=beta, seed=int(config["seed"]))
        by_size.setdefault(L, []).append((beta, mean, err))
    series = {}
    for L, rows in sorted(by_size.items()):
        rows.sort()
        series[f"L={L}"] = ([r[0] for r in rows], [r[1] for r in rows],
                            [r[2] for r in rows])
    plots.line_chart(sink.figure_path("binder_crossing.svg"), series,
                     "beta", "Binder cumulant",
                     title=f"crossing at {est.beta_c:.5f}")
    return True, {"beta_c": est.beta_c, "half_width": est.half_width,
                  "passed": True}


# ---------------------------------------------------------- s2-diagnostics


def run_s2_diagnostics(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    """Distance-resolved two-point diagnostics.

    The headline decay exponent comes from the scaling of the antipodal
    correlation across box sizes (the scaling function at fixed x/L cancels
    in the ratios); the in-table dyadic fit and the scaled-average trend are
    reported for the largest box.
    """
    beta = _auto_beta(config, sink)
    d = int(config["d"])
    sizes = sorted(int(L) for L in config["sizes"])
    seed = int(config["seed"])
    anti_means, anti_errs = [], []
    tables = None
    for L in sizes:
        g = build_lattice(LatticeSpec(d=d, L=L, J=1.0, bc="periodic"))
        cfg = RunConfig(graph=g, beta=beta, sweeps=int(config["sweeps"]),
                        thermalization=int(config["thermalization"]),
                        seed=seed, bins=int(config["bins"]))
        tables = wolff_lattice_tables(cfg)
        anti = tables.s2_bins[(slice(None),) + (L // 2,) * d]
        est = binned_estimate(anti, int(config["bins"]))
        anti_means.append(est.mean)
        anti_errs.append(est.error)
        sink.add("antipodal_s2", est.mean, est.error, L=L, beta=beta, seed=seed)

    if max(anti_means) <= 1e-12:
        sink.add("degenerate", 1.0, beta=beta)
        return False, {"degenerate": True, "passed": False}
    log_l = np.log(sizes)
    log_s = np.log(anti_means)
    w = 1.0 / np.array([max(e / m, 1e-12) for m, e in zip(anti_means, anti_errs)]) ** 2
    design = np.vstack([log_l, np.ones_like(log_l)]).T
    cov = np.linalg.inv(design.T @ (design * w[:, None]))
    coef = cov @ design.T @ (w * log_s)
    exponent = -float(coef[0])
    exponent_err = float(np.sqrt(cov[0, 0]))
    sink.add("decay_exponent", exponent, exponent_err, L=sizes[-1], beta=beta,
             seed=seed)

    L = sizes[-1]
    r_max = float(config.get("r_max") or L / 4)
    report = diagrams.s2_diagnostics(tables.s2_bins, d=d, beta_j=beta, r_max=r_max)
    sink.add("decay_exponent_within_table", report.exponent,
             report.exponent_error, L=L, beta=beta, seed=seed)
    sink.add("envelope_constant", report.c2, L=L, beta=beta)
    for r, m, e in zip(report.dyadic_radii, report.dyadic_scaled_means,
                       report.dyadic_scaled_errors):
        sink.add(f"scaled_s2:r={r:.3g}", m, e, L=L, beta=beta)
    norms, values = diagrams.S2Table.from_offsets(tables.s2).distance_values()
    sel = (norms >= 1) & (norms <= r_max)
    order = np.argsort(norms[sel])
    plots.decay_fit_chart(sink.figure_path("s2_decay.svg"),
                          norms[sel][order].tolist(), values[sel][order].tolist(),
                          report.exponent, title=f"d={d} L={L} beta={beta:.5f}")
    plots.line_chart(sink.figure_path("antipodal_scaling.svg"),
                     {"S2(L/2,...)": (sizes, anti_means, anti_errs)},
                     "L", "antipodal S2", logx=True, logy=True,
                     title=f"cross-size exponent {exponent:.3f}")
    plots.line_chart(sink.figure_path("scaled_s2_trend.svg"),
                     {"S2 * r^(d-2)": (report.dyadic_radii,
                                       report.dyadic_scaled_means,
                                       report.dyadic_scaled_errors)},
                     "r (dyadic class)", "scaled S2", logx=True)
    return True, {"exponent": exponent, "exponent_error": exponent_err,
                  "within_table_exponent": report.exponent,
                  "c2": report.c2,
                  "scaled_nonincreasing": report.scaled_nonincreasing,
                  "passed": True}


# ------------------------------------------------------- intersection-scan


def run_intersection_scan(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    graph = _resolve_graph(config)
    pts = [int(p) for p in config["points"]]
    if len(pts) != 4:
        raise ConfigError("intersection scan needs exactly 4 points")
    beta = float(config["beta"])
    cfg = RunConfig(graph=graph, beta=beta, sweeps=int(config["sweeps"]),
                    thermalization=int(config["thermalization"]),
                    seed=int(config["seed"]), bins=int(config["bins"]),
                    measure_every=int(config.get("measure_every", 4)),
                    estimators=())
    stats = intersection_stats(cfg, *pts)
    seed = int(config["seed"])
    sink.add("p_nonempty", stats.p_nonempty.mean, stats.p_nonempty.error,
             beta=beta, seed=seed)
    sink.add("mean_size", stats.mean_size.mean, stats.mean_size.error,
             beta=beta, seed=seed)
    sink.add("mean_size_given_nonempty", stats.mean_size_given_nonempty.mean,
             stats.mean_size_given_nonempty.error, beta=beta, seed=seed)
    sink.add("ratio_identity_residual", stats.ratio_residual, beta=beta)
    summary = {"joint_samples": stats.joint_samples,
               "ratio_residual": stats.ratio_residual}
    passed = stats.ratio_residual <= 1e-10
    if graph.n_edges <= 13:
        x1, x2, x3, x4 = pts
        srcs = [frozenset((x1,)) ^ frozenset((x2,)),
                frozenset((x3,)) ^ frozenset((x4,)), frozenset(), frozenset()]
        exact = currents.replica_probability(
            graph, beta, srcs,
            currents.ClustersIntersect(x1, x3, groups=((0, 2), (1, 3))))
        sink.add("p_nonempty_exact", exact, beta=beta)
        # absolute floor keeps exactly-determined events (p = 0 or 1) passing
        pull = abs(stats.p_nonempty.mean - exact) / max(stats.p_nonempty.error,
                                                        1e-9)
        summary["exact_pull"] = pull
        passed = passed and pull <= 4.0
    summary["passed"] = passed
    return passed, summary


# ------------------------------------------------------ emergent-planarity


def nnn_strip(width: int, height: int, j1: float, j2: float) -> CouplingGraph:
    """Free-boundary strip with nearest and diagonal next-nearest couplings;
    the bottom row is the marked boundary line.
    """
    def site(i, j):
        return i * height + j

    edges = []
    for i in range(width):
        for j in range(height):
            if i + 1 < width:
                edges.append((site(i, j), site(i + 1, j), j1))
            if j + 1 < height:
                edges.append((site(i, j), site(i, j + 1), j1))
            if j2 > 0 and i + 1 < width:
                if j + 1 < height:
                    edges.append((site(i, j), site(i + 1, j + 1), j2))
                if j - 1 >= 0:
                    edges.append((site(i, j), site(i + 1, j - 1), j2))
    edges = tuple(sorted((min(u, v), max(u, v), j) for u, v, j in edges))
    boundary = tuple(site(i, 0) for i in range(width))
    embedding = tuple((i, j) for i in range(width) for j in range(height))
    return CouplingGraph(n_vertices=width * height, edges=edges,
                         embedding=embedding, boundary_face=boundary)


def run_emergent_planarity(config: dict, sink: ResultSink) -> tuple[bool, dict]:
    width, height = int(config["width"]), int(config["height"])
    graph = nnn_strip(width, height, float(config["j1"]), float(config["j2"]))
    beta = float(config["beta"])
    seps, residuals, errors = [], [], []
    for sep in config["separations"]:
        sep = int(sep)
        span = 3 * sep
        i0 = (width - span) // 2
        if i0 < 0:
            continue
        pts = [i0 * height, (i0 + sep) * height,
               (i0 + 2 * sep) * height, (i0 + 3 * sep) * height]
        est_tokens = ["prod:" + ",".join(str(p) for p in pts)]
        for a in range(4):
            for b in range(a + 1, 4):
                est_tokens.append(f"s2pair:{pts[a]},{pts[b]}")
        cfg = RunConfig(graph=graph, beta=beta, sweeps=int(config["sweeps"]),
                        thermalization=int(config["thermalization"]),
                        seed=int(config["seed"]), bins=int(config["bins"]),
                        estimators=tuple(est_tokens))
        out = wolff_run(cfg)
        s4 = out["prod:" + ",".join(str(p) for p in pts)]
        s = {(a, b): out[f"s2pair:{pts[a]},{pts[b]}"].mean
             for a in range(4) for b in range(a + 1, 4)}
        pf = (s[(0, 1)] * s[(2, 3)] - s[(0, 2)] * s[(1, 3)]
              + s[(0, 3)] * s[(1, 2)])
        resid = abs(s4.mean - pf) / max(abs(s4.mean), 1e-300)
        sink.add("normalized_residual", resid, s4.error / max(abs(s4.mean), 1e-300),
                 L=sep, beta=beta, seed=int(config["seed"]))
        seps.append(sep)
        residuals.append(resid)
        errors.append(s4.error / max(abs(s4.mean), 1e-300))
    plots.line_chart(sink.figure_path("pfaffian_residual.svg"),
                     {"normalized residual": (seps, residuals, errors)},
                     "minimum point separation", "|S4 - Pf| / |S4|",
                     title=f"strip {width}x{height}, beta={beta}")
    decreasing = len(residuals) >= 2 and residuals[-1] <= residuals[0]
    return True, {"separations": seps, "residuals": residuals,
                  "decreasing_trend": decreasing, "passed": True}


# ---------------------------------------------------------------- registry


KINDS: dict[str, dict] = {
    "verify-identities": {
        "runner": run_verify_identities,
        "defaults": {"graphs": 200, "corpus_seed": DEFAULT_CORPUS_SEED,
                     "tolerance": 1e-10, "inequalities": True},
    },
    "verify-switching": {
        "runner": run_verify_switching,
        "defaults": {"instances": 100, "corpus_seed": DEFAULT_CORPUS_SEED,
                     "tolerance": 1e-10},
    },
    "verify-pfaffian": {
        "runner": run_verify_pfaffian,
        "defaults": {"sizes": [2, 3, 4], "betas": [0.2, 0.4, 0.7],
                     "n_points": [4, 6], "tolerance": 1e-9},
    },
    "gs-match": {
        "runner": run_gs_match,
        "defaults": {"block_sizes": [64, 256, 1024, 4096], "lam": 1.0,
                     "b": 0.0, "tune_n": 1024, "match_tolerance": 1e-6},
    },
    "mc-run": {
        "runner": run_mc_run,
        "defaults": {"betas": [0.4], "seeds": [0], "sweeps": 20000,
                     "thermalization": 2000, "bins": 32, "engine": "wolff",
                     "estimators": ["m2", "m4", "binder"], "sources": [],
                     "lattice": {"d": 2, "L": 4, "bc": "periodic"}},
        "mc": True,
    },
    "scan-rl": {
        "runner": run_scan_rl,
        "defaults": {"d": 2, "sizes": [8, 16, 32], "beta": "auto",
                     "bracket": [0.40, 0.48], "betac_sizes": [8, 16],
                     "betac_sweeps": 40000, "sweeps": 40000,
                     "thermalization": 4000, "bins": 32, "seed": 0,
                     "bubble_scales": [2, 4, 8]},
        "mc": True,
    },
    "locate-betac": {
        "runner": run_locate_betac,
        "defaults": {"d": 2, "sizes": [8, 16], "bracket": [0.40, 0.48],
                     "sweeps": 40000, "bins": 32, "seed": 0,
                     "target_width": 1e-3},
        "mc": True,
    },
    "s2-diagnostics": {
        "runner": run_s2_diagnostics,
        "defaults": {"d": 2, "sizes": [8, 16, 32], "beta": "auto",
                     "bracket": [0.40, 0.48], "betac_sizes": [8, 16],
                     "betac_sweeps": 40000, "sweeps": 30000,
                     "thermalization": 3000, "bins": 24, "seed": 0,
                     "r_max": None},
        "mc": True,
    },
    "intersection-scan": {
        "runner": run_intersection_scan,
        "defaults": {"lattice": {"d": 2, "L": 3, "bc": "free"},
                     "points": [0, 2, 6, 8], "beta": 0.5, "sweeps": 400000,
                     "thermalization": 10000, "bins": 32, "seed": 0,
                     "measure_every": 4},
        "mc": True,
    },
    "emergent-planarity": {
        "runner": run_emergent_planarity,
        "defaults": {"width": 24, "height": 8, "j1": 1.0, "j2": 0.5,
                     "beta": 0.28, "separations": [2, 4, 6], "sweeps": 60000,
                     "thermalization": 6000, "bins": 32, "seed": 0},
        "mc": True,
    },
}


def resolve_config(kind: str, overrides: dict) -> dict:
    if kind not in KINDS:
        raise ConfigError(
            f"unknown experiment kind {kind!r}; known: {', '.join(sorted(KINDS))}")
    spec = KINDS[kind]
    config = dict(spec["defaults"])
    unknown = set(overrides) - set(config) - {"budget", "out"}
    if unknown:
        raise ConfigError(f"unknown config keys for {kind}: {sorted(unknown)}")
    config.update({k: v for k, v in overrides.items() if k not in ("out",)})
    config["kind"] = kind
    if spec.get("mc"):
        seeds = config.get("seeds", [config.get("seed")])
        if not seeds or seeds == [None]:
            raise ConfigError(f"{kind} needs at least one seed")
    return config


def run_experiment(kind: str, overrides: dict, out_dir: str | Path) -> tuple[int, dict]:
    """Execute one experiment; returns (exit status, summary).

    Status 0: success; 1: completed but verification failed or a mid-run
    error occurred (partial records are persisted with a failure marker).
    Config errors raise ConfigError before anything is written.
    """
    config = resolve_config(kind, overrides)
    budget = config.pop("budget", None)
    sink = ResultSink(out_dir, kind, config)
    start = time.time()
    try:
        passed, summary = KINDS[kind]["runner"](config, sink)
    except Exception as exc:  # persist partial results with a failure marker
        sink.flush("failed", {"error": f"{type(exc).__name__}: {exc}"},
                   elapsed=time.time() - start)
        raise
    elapsed = time.time() - start
    if budget is not None:
        summary["within_budget"] = elapsed <= float(budget)
    status = "ok" if passed else "failed-verification"
    sink.flush(status, summary, elapsed=elapsed)
    return (0 if passed else 1), summary


def rerun_for_replay(config: dict, out_dir: str | Path) -> None:
    config = dict(config)
    kind = config.pop("kind")
    run_experiment(kind, config, out_dir)
