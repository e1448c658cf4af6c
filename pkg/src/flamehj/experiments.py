"""
Batch commands behind the CLI.

Each ``cmd_*`` function takes a validated ``RunConfig`` and returns an
``OutputSet`` holding results.csv, results.json and plots; nothing is
written until the caller decides to.  Batch commands record solver
failures per row; fail-fast commands let ``NonConvergenceError`` propagate.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .burnvel import (AlphaSolver, alpha_level_curve, detect_flat_pieces, flat_families,
                      resonant_directions)
from .cell_solver import (HbarEvaluator, hbar, hbar_discounted, hbar_level_curve, hbar_time_marching,
                          plateau_width, shear_oracle_for_flow)
from .config import RunConfig
from .errors import NonConvergenceError, ResonanceError
from .flow import flow_to_config, make_cellular
from .front import AlphaModel, front_consistency, front_trace
from .geometry import LevelCurve
from .output import OutputSet
from .parallel import chunked_map
from .perturb import (GOLDEN_DIRECTION, SQRT2_DIRECTION, a2, diophantine_quality, expansion_residual,
                      residual_ratios)

log = logging.getLogger(__name__)

_FAILURES = (NonConvergenceError, ResonanceError, ValueError)


def _status(exc: Exception | None) -> str:
    if exc is None:
        return "ok"
    kind = "nonconvergence" if isinstance(exc, NonConvergenceError) else type(exc).__name__
    return f"{kind}: {exc}"


def _header(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "flow": flow_to_config(cfg.flow),
        "solver": cfg.solver.to_dict(),
        "experiment": cfg.experiment,
        "seed": cfg.seed,
    }


def _curve_rows(curve: LevelCurve, **extra) -> list:
    rows = []
    for j, (th, pt, val, err) in enumerate(zip(curve.thetas, curve.points, curve.values, curve.errors)):
        flat = any(j in arc.indices(len(curve)) for arc in curve.flat_arcs)
        rows.append(dict(extra, theta=th, x=pt[0], y=pt[1], value=val, alpha_err=err, on_flat_arc=flat,
                         alpha_rel_tol=curve.meta.get("alpha_rel_tol")))
    return rows


def _closed(points):
    pts = np.asarray(points)
    return np.vstack([pts, pts[:1]])


def _normal_marks(curve: LevelCurve, normals, length: float = 0.25) -> list:
    """Short segments along predicted normals, anchored at the curve's support point."""
    marks = []
    for nrm in normals:
        for sgn in (1.0, -1.0):
            nu = sgn * np.asarray(nrm, dtype=float)
            j = int(np.argmax(curve.points @ nu))
            base = curve.points[j]
            marks.append((np.array([base, base + length * float(np.max(curve.radii)) * nu]),
                          {"stroke": "#7f7f7f", "dash": True}))
    return marks


# -- hbar / alpha ----------------------------------------------------------------


def cmd_hbar(cfg: RunConfig) -> OutputSet:
    """Batch Hbar over p_list; shear flows also get oracle / time-marching / discounted columns."""
    ps = cfg.p_list()
    compare = cfg.flow.is_shear and not cfg.flow.is_zero and cfg.param("oracle", True)

    def work(chunk):
        ev = HbarEvaluator(cfg.flow, cfg.solver)
        rows = []
        for p in chunk:
            row = {"p1": p[0], "p2": p[1], "p_norm2": p[0] ** 2 + p[1] ** 2, "tol": cfg.solver.tol}
            try:
                r = ev(p)
                row.update(r.to_dict())
                row.pop("p")
                row["status"] = "ok"
            except _FAILURES as exc:
                row.update(value=getattr(exc, "best_estimate", float("nan")), status=_status(exc))
            if compare:
                for name, fn in (("oracle", lambda q: shear_oracle_for_flow(q, cfg.flow, cfg.solver.quad_n)),
                                 ("time_marching", lambda q: hbar_time_marching(q, cfg.flow, cfg.solver)),
                                 ("discounted", lambda q: hbar_discounted(q, cfg.flow, cfg.solver))):
                    try:
                        rr = fn(p)
                        row[f"{name}_value"] = rr.value
                        row[f"{name}_err"] = rr.error_estimate
                    except _FAILURES as exc:
                        row[f"{name}_value"] = float("nan")
                        row[f"{name}_err"] = float("nan")
                        row[f"{name}_status"] = _status(exc)
                ref = row["oracle_value"]
                for name in ("time_marching", "discounted"):
                    row[f"{name}_rel_diff"] = abs(row[f"{name}_value"] - ref) / max(abs(ref), 1e-300)
            rows.append(row)
        return rows

    rows = chunked_map(work, ps, cfg.threads)
    out = OutputSet(cfg.formats)
    out.csv("results.csv", rows)
    out.json("results.json", dict(_header(cfg, "hbar"), rows=rows))
    return out


def cmd_alpha(cfg: RunConfig) -> OutputSet:
    ps = cfg.p_list()

    def work(chunk):
        solver = AlphaSolver(cfg.flow, cfg.solver)
        rows = []
        for p in chunk:
            row = {"p1": p[0], "p2": p[1], "two_norm_p": 2 * math.hypot(*p), "alpha_rel_tol": cfg.solver.alpha_rel_tol}
            try:
                r = solver(p)
                d = r.to_dict()
                d.pop("p")
                lo, hi = d.pop("bracket")
                row.update(d, bracket_lo=lo, bracket_hi=hi, status="ok")
            except _FAILURES as exc:
                row.update(alpha=float("nan"), status=_status(exc))
            rows.append(row)
        return rows

    rows = chunked_map(work, ps, cfg.threads)
    out = OutputSet(cfg.formats)
    out.csv("results.csv", rows)
    out.json("results.json", dict(_header(cfg, "alpha"), rows=rows))
    return out


# -- level curves / flat pieces ----------------------------------------------------------


def _level_curve(cfg: RunConfig) -> LevelCurve:
    n_angles = int(cfg.param("n_angles", 64))
    if cfg.param("curve", "alpha") == "hbar":
        c = float(cfg.param("c", cfg.param("level", 1.0)))
        return hbar_level_curve(c, cfg.flow, cfg.solver, n_angles)
    return alpha_level_curve(cfg.flow, cfg.solver, n_angles, cfg.threads)


def cmd_level_curve(cfg: RunConfig) -> OutputSet:
    curve = _level_curve(cfg)
    out = OutputSet(cfg.formats)
    out.csv("results.csv", _curve_rows(curve))
    out.json("results.json", dict(_header(cfg, "level-curve"), meta=curve.meta,
                                  roundness_defect=curve.roundness_defect(), flat_arcs=[]))
    out.svg("level_curve.svg", [_closed(curve.points)], title=f"level curve, {cfg.flow.label}")
    return out


def cmd_flat_pieces(cfg: RunConfig) -> OutputSet:
    curve = _level_curve(cfg)
    res = resonant_directions(cfg.flow)
    curve = detect_flat_pieces(curve, cfg.param("kappa_tol"), res)
    out = OutputSet(cfg.formats)
    out.csv("results.csv", _curve_rows(curve))
    out.json("results.json", dict(
        _header(cfg, "flat-pieces"), meta=curve.meta, roundness_defect=curve.roundness_defect(),
        flat_arcs=[a.to_dict() for a in curve.flat_arcs], resonant_directions=res,
        flat_families=[list(n) for n in flat_families(curve)]))
    arcs = [(curve.points[a.indices(len(curve))], {"stroke": "#d62728", "width": 0.015}) for a in curve.flat_arcs]
    out.svg("flat_pieces.svg", [_closed(curve.points)] + arcs + _normal_marks(curve, [r["normal"] for r in res]),
            title=f"flat pieces, {cfg.flow.label}")
    return out


# -- perturbation -----------------------------------------------------------------------


def cmd_perturb(cfg: RunConfig) -> OutputSet:
    ps = cfg.p_list([list(GOLDEN_DIRECTION), list(SQRT2_DIRECTION)])
    k_max = int(cfg.param("k_max", 50))
    rows = []
    for p in ps:
        row = {"p1": p[0], "p2": p[1]}
        q = diophantine_quality(p, k_max)
        row.update(dioph_q1=q[1]["quality"], dioph_q2=q[2]["quality"], k_max=k_max)
        try:
            r = a2(p, cfg.flow)
            row.update(a2=r.a2, truncated=r.truncated, min_divisor=r.min_divisor)
            if not cfg.flow.is_zero:
                row["residual_ratio_order1"] = residual_ratios(p, cfg.flow, order=1)[-1]
                row["residual_ratio_order2"] = residual_ratios(p, cfg.flow, order=2)[-1]
            row["status"] = "ok"
        except _FAILURES as exc:
            row.update(a2=float("nan"), status=_status(exc))
        rows.append(row)
    out = OutputSet(cfg.formats)
    out.csv("results.csv", rows)
    doc = dict(_header(cfg, "perturb"), rows=rows)
    if cfg.param("eps_list"):
        table = []
        for p in ps:
            try:
                for r in expansion_residual(p, cfg.flow, cfg.param("eps_list"), cfg.solver):
                    table.append(dict(p1=p[0], p2=p[1], **r))
            except _FAILURES as exc:
                table.append(dict(p1=p[0], p2=p[1], status=_status(exc)))
        out.csv("expansion.csv", table)
        doc["expansion"] = table
    out.json("results.json", doc)
    return out


# -- fronts --------------------------------------------------------------------------------


def _alpha_model(cfg: RunConfig) -> AlphaModel:
    entry = cfg.param("model", {"kind": "ell1"})
    if isinstance(entry, str):
        entry = {"kind": entry}
    kind = entry.get("kind", "ell1")
    if kind == "sampled":
        curve = alpha_level_curve(cfg.flow, cfg.solver, int(cfg.param("n_angles", 64)), cfg.threads)
        curve = detect_flat_pieces(curve, cfg.param("kappa_tol"), resonant_directions(cfg.flow))
        return AlphaModel.from_level_curve(curve)
    return AlphaModel(kind, float(entry.get("scale", 1.0)))


def cmd_front(cfg: RunConfig) -> OutputSet:
    model = _alpha_model(cfg)
    t_list = cfg.param("t_list", [1.0])
    n_angles = int(cfg.param("n_angles", 256))
    rows, reports, curves = [], [], []
    curves.append((_closed(front_trace(model, 0.0, n_angles).points), {"stroke": "#7f7f7f", "dash": True}))
    for t in t_list:
        snap = front_trace(model, t, n_angles)
        rep = front_consistency(model, t, snap)
        reports.append(rep)
        for (tt, x, y, tag) in snap.rows():
            rows.append({"t": tt, "x": x, "y": y, "provenance": tag, "max_abs_u": rep["max_abs_u"]})
        curves.append(_closed(snap.points))
    out = OutputSet(cfg.formats)
    out.csv("results.csv", rows)
    out.json("results.json", dict(_header(cfg, "front"), model=model.describe(), consistency=reports))
    out.svg("front.svg", curves, title=f"fronts, {model.kind}")
    return out


# -- experiments ---------------------------------------------------------------------------


def experiment_weak_flow(cfg: RunConfig) -> OutputSet:
    """Non-roundness and flat pieces of {alpha_eps = 1} against resonance predictions."""
    eps_list = cfg.param("eps_list", [0.2, 0.1])
    n_angles = int(cfg.param("n_angles", 64))
    base = cfg.flow.with_amplitude(1.0)
    predicted = resonant_directions(base)
    rows, curves, doc_curves = [], [], []
    for eps in eps_list:
        f = base.with_amplitude(eps)
        row = {"eps": eps, "n_predicted": len(predicted)}
        try:
            curve = alpha_level_curve(f, cfg.solver, n_angles, cfg.threads)
            curve = detect_flat_pieces(curve, cfg.param("kappa_tol"), predicted)
            fams = flat_families(curve)
            row.update(
                non_roundness=curve.roundness_defect(),
                max_alpha_rel_err=float(curve.errors.max()),
                kappa_tol=curve.meta["kappa_tol"],
                n_flat_arcs=len(curve.flat_arcs),
                detected_normals=[f"{n[0]:.6f}:{n[1]:.6f}" for n in fams],
                matches=sum(1 for a in curve.flat_arcs if a.resonant_match),
                status="ok",
            )
            curves.append(_closed(curve.points))
            doc_curves.append({"eps": eps, "meta": curve.meta, "flat_arcs": [a.to_dict() for a in curve.flat_arcs],
                               "points": curve.points})
        except _FAILURES as exc:
            row.update(non_roundness=float("nan"), status=_status(exc))
        rows.append(row)
    p = cfg.param("p", list(GOLDEN_DIRECTION))
    try:
        table = expansion_residual(p, base, sorted(eps_list, reverse=True), cfg.solver)
    except _FAILURES as exc:
        table = [{"status": _status(exc)}]
    out = OutputSet(cfg.formats)
    out.csv("results.csv", rows)
    out.csv("expansion.csv", table)
    out.json("results.json", dict(_header(cfg, "experiment weak-flow"), rows=rows, predicted_normals=predicted,
                                  curves=doc_curves, expansion=table))
    marks = _normal_marks(LevelCurve(np.arange(len(curves[-1]) - 1), curves[-1][:-1], np.ones(len(curves[-1]) - 1)),
                          [r["normal"] for r in predicted]) if curves else []
    out.svg("weak_flow.svg", curves + marks, title=f"weak flow, {base.label}")
    return out


def strong_flow_diagnostics(f, solver_cfg, n_probe: int = 3) -> dict:
    """alpha at probe angles in [0, pi/4], lambda_p / A, anisotropy and the large-amplitude column alpha log(A) / A."""
    A = abs(f.amplitude)
    solver = AlphaSolver(f, solver_cfg)
    probes = []
    for th in np.linspace(0.0, math.pi / 4, n_probe):
        r = solver((math.cos(th), math.sin(th)))
        probes.append({"theta": th, "alpha": r.alpha, "alpha_err": r.error_estimate, "lambda_p": r.lambda_p,
                       "lambda_over_A": r.lambda_p / A, "ell1": abs(math.cos(th)) + abs(math.sin(th)),
                       "alpha_logA_over_A": math.log(A) * r.alpha / A if A > 1 else float("nan")})
    return {
        "A": A,
        "probes": probes,
        "max_lambda_over_A": max(q["lambda_over_A"] for q in probes),
        "anisotropy": probes[-1]["alpha"] / probes[0]["alpha"],
        "anisotropy_err": (probes[-1]["alpha_err"] / probes[-1]["alpha"] + probes[0]["alpha_err"] / probes[0]["alpha"])
        * probes[-1]["alpha"] / probes[0]["alpha"],
    }


def experiment_strong_flow(cfg: RunConfig) -> OutputSet:
    """Sweep the cellular amplitude: lambda_p/A, anisotropy, alpha log(A) / A column and the (1,0) flat arc."""
    A_list = cfg.param("A_list", [1.0, 2.0, 4.0, 8.0, 16.0])
    n_angles = int(cfg.param("n_angles", 64))
    base = cfg.flow if not cfg.flow.is_zero else make_cellular()
    rows, curves, doc = [], [], []
    for A in A_list:
        f = base.with_amplitude(A)
        row = {"A": A}
        try:
            diag = strong_flow_diagnostics(f, cfg.solver)
            row.update(max_lambda_over_A=diag["max_lambda_over_A"], anisotropy=diag["anisotropy"],
                       anisotropy_err=diag["anisotropy_err"])
            for q in diag["probes"]:
                row[f"alpha_logA_over_A_theta_{q['theta']:.4f}"] = q["alpha_logA_over_A"]
            entry = {"A": A, "diagnostics": diag}
            if n_angles:
                curve = detect_flat_pieces(alpha_level_curve(f, cfg.solver, n_angles, cfg.threads),
                                           cfg.param("kappa_tol"), resonant_directions(f))
                fams = flat_families(curve)
                row["flat_normal_1_0"] = any(abs(n[0]) > math.cos(0.1) for n in fams)
                row["n_flat_arcs"] = len(curve.flat_arcs)
                entry["flat_arcs"] = [a.to_dict() for a in curve.flat_arcs]
                curves.append(_closed(curve.points / np.max(curve.radii)))
            row["status"] = "ok"
            doc.append(entry)
        except _FAILURES as exc:
            row["status"] = _status(exc)
        rows.append(row)
    lam = [r.get("max_lambda_over_A", float("nan")) for r in rows]
    ani = [r.get("anisotropy", float("nan")) for r in rows]
    trends = {
        "lambda_over_A_strictly_decreasing": bool(all(b < a for a, b in zip(lam, lam[1:]))),
        "anisotropy_strictly_increasing": bool(all(b > a for a, b in zip(ani, ani[1:]))),
        "anisotropy_limit_note": "the l1 limit sqrt(2) is asymptotic in A and not expected at these amplitudes",
    }
    out = OutputSet(cfg.formats)
    out.csv("results.csv", rows)
    out.json("results.json", dict(_header(cfg, "experiment strong-flow"), rows=rows, sweep=doc, trends=trends))
    if curves:
        out.svg("strong_flow.svg", curves, title="normalized {alpha_A = 1}")
    return out


def experiment_shear(cfg: RunConfig) -> OutputSet:
    """Both grid solvers against the oracle, and the flat arc of {alpha = 1} against the plateau."""
    base = cfg.flow if (cfg.flow.is_shear and not cfg.flow.is_zero) else None
    if base is None:
        from .flow import make_shear_sin
        base = make_shear_sin()
    A_list = cfg.param("A_list", [1.0])
    ps = cfg.p_list({"random": 8, "r_min": 0.25, "r_max": 2.0})
    rows = []
    for A in A_list:
        f = base.with_amplitude(A)
        for p in ps:
            row = {"A": A, "p1": p[0], "p2": p[1]}
            o = shear_oracle_for_flow(p, f, cfg.solver.quad_n)
            row.update(oracle=o.value, oracle_err=o.error_estimate)
            for name, fn in (("time_marching", hbar_time_marching), ("discounted", hbar_discounted)):
                try:
                    r = fn(p, f, cfg.solver)
                    row[name] = r.value
                    row[f"{name}_err"] = r.error_estimate
                    row[f"{name}_rel_diff"] = abs(r.value - o.value) / o.value
                except _FAILURES as exc:
                    row[name] = float("nan")
                    row[f"{name}_status"] = _status(exc)
            rows.append(row)
    oracle_cfg = cfg.solver.with_(method="shear_oracle")
    curve = detect_flat_pieces(alpha_level_curve(base, oracle_cfg, int(cfg.param("n_angles", 64))),
                               cfg.param("kappa_tol"), resonant_directions(base))
    arcs = []
    for arc in curve.flat_arcs:
        idx = arc.indices(len(curve))
        lam = curve.extras["lambda_p"][idx]
        pts = curve.points[idx] * lam[:, None]
        widths = [plateau_width(abs(q[0]), base, cfg.solver.quad_n) for q in pts]
        arcs.append(dict(arc.to_dict(), max_scaled_p2=float(np.abs(pts[:, 1]).max()),
                         plateau_width=float(min(widths)),
                         inside_plateau=bool(all(abs(q[1]) <= w + 1e-9 for q, w in zip(pts, widths)))))
    out = OutputSet(cfg.formats)
    out.csv("results.csv", rows)
    out.json("results.json", dict(_header(cfg, "experiment shear"), rows=rows, flat_arcs=arcs,
                                  flat_families=[list(n) for n in flat_families(curve)]))
    out.svg("shear_alpha.svg", [_closed(curve.points)] +
            [(curve.points[a.indices(len(curve))], {"stroke": "#d62728", "width": 0.015}) for a in curve.flat_arcs],
            title="shear {alpha = 1}")
    return out


def flatness_scan(f, solver_cfg, p2_max: float = 0.16, p2_step: float = 0.02, p1: float = 1.0) -> dict:
    """Hbar(p1, p2) on a symmetric p2 grid and the widest window around 0 where it is constant.

    The window is the largest symmetric set |p2| <= w of samples whose
    spread (max - min) is within twice the largest error estimate inside it;
    width and curvature diagnostics are reported for comparison.
    """
    k = int(round(p2_max / p2_step))
    p2s = p2_step * np.arange(-k, k + 1)
    ev = HbarEvaluator(f, solver_cfg)
    res = [ev((p1, float(q))) for q in p2s]
    vals = np.array([r.value for r in res])
    errs = np.array([r.error_estimate for r in res])
    fine = np.array([r.diagnostics.get("levels", {}).get(solver_cfg.n, r.value) for r in res])
    half = 0
    for j in range(1, k + 1):
        sel = slice(k - j, k + j + 1)
        spread = vals[sel].max() - vals[sel].min()
        if spread <= 2.0 * errs[sel].max():
            half = j
        else:
            break
    sel = slice(k - half, k + half + 1)
    second = np.diff(fine, 2) / p2_step ** 2
    return {
        "p1": p1,
        "p2": p2s,
        "hbar": vals,
        "err": errs,
        "hbar_finest_grid": fine,
        "window_half_width": half * p2_step,
        "window_width": 2 * half * p2_step,
        "variation": float(vals[sel].max() - vals[sel].min()),
        "combined_error": float(2.0 * errs[sel].max()),
        "second_difference_finest": second,
        "step": p2_step,
    }


def experiment_cellular(cfg: RunConfig) -> OutputSet:
    """Flatness of Hbar_A(1, p2) near p2 = 0 for cellular flow."""
    A = float((cfg.param("A_list") or [2.0])[0])
    f = make_cellular(A) if cfg.flow.is_zero else cfg.flow.with_amplitude(A)
    scan = flatness_scan(f, cfg.solver, float(cfg.param("p2_max", 0.16)), float(cfg.param("p2_step", 0.02)))
    half = scan["window_half_width"]
    rows = [{"A": A, "p1": scan["p1"], "p2": q, "hbar": v, "err": e, "hbar_finest_grid": h,
             "in_window": abs(q) <= half + 1e-12}
            for q, v, e, h in zip(scan["p2"], scan["hbar"], scan["err"], scan["hbar_finest_grid"])]
    out = OutputSet(cfg.formats)
    out.csv("results.csv", rows)
    summary = {k: v for k, v in scan.items() if k not in ("p2", "hbar", "err", "hbar_finest_grid")}
    summary["window_exceeds_4_steps"] = scan["window_width"] > 4 * scan["step"]
    out.json("results.json", dict(_header(cfg, "experiment cellular"), A=A, rows=rows, summary=summary))
    scale = float(np.max(np.abs(scan["hbar"])))
    out.svg("cellular_flatness.svg", [np.column_stack([scan["p2"] / scan["p2"].max(), scan["hbar"] / scale])],
            title=f"Hbar_A(1, p2), A={A}")
    return out


EXPERIMENT_COMMANDS = {
    "weak-flow": experiment_weak_flow,
    "strong-flow": experiment_strong_flow,
    "shear": experiment_shear,
    "cellular": experiment_cellular,
}
