"""Named experiment recipes and the manifest-driven runner."""

import configparser
import difflib
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analysis as an
from .algebraic import (RationalTime, algebraic_solution, best_axis_rotation, build_frames,
                        com_speed, com_speed_tanh, dirac_comb_at, estimate_difference_quotient)
from .errors import HelipolyError, UnknownExperiment
from .io import write_columns, write_csv, write_json
from .onecorner import amplitude_for_angle, match_to_polygon, solve_one_corner
from .polygon import PolygonKind, PolygonSpec, sample_initial
from .solvers import SolverConfig, measure_angle_numeric, rk4_evolve

TABLE1_TIMES = [(1, 12), (1, 10), (1, 6), (1, 5), (3, 10), (1, 3), (2, 5), (5, 12), (1, 2), (3, 4)]
TABLE2_Q = [1000 * 2 ** r for r in range(8)]


@dataclass
class ExperimentManifest:
    """Everything needed to reproduce one run; written before any output."""

    experiment: str
    params: dict
    out_dir: str
    outputs: list
    full: bool = False
    jobs: int = 1
    deterministic: bool = True
    specs: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


@dataclass
class Experiment:
    id: str
    description: str
    target: str
    desk: dict
    full: dict
    outputs: list
    runner: object = None

    def params(self, full=False, overrides=None):
        p = dict(self.desk)
        if full:
            p.update(self.full)
        for key, raw in (overrides or {}).items():
            if key not in p:
                raise HelipolyError(f"{self.id}: unknown parameter {key!r}; "
                                    f"known: {', '.join(sorted(p))}")
            p[key] = _coerce(raw, p[key])
        return p


def _coerce(raw, like):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if isinstance(like, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(raw)
    if isinstance(like, float):
        return float(raw)
    if isinstance(like, list):
        items = [x for x in raw.replace(";", ",").split(",") if x.strip()]
        proto = like[0] if like else 0.0
        if isinstance(proto, (tuple, list)):
            return [tuple(int(v) for v in x.strip().split("/")) for x in items]
        return [_coerce(x, proto) for x in items]
    return raw


def _spec_dict(spec):
    return {"kind": spec.kind.value, "M": spec.M, "b": spec.b, "l": spec.l}


def _pmap(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# ------------------------------------------------------------------ recipes

def _table1(kind, p, ctx):
    if kind is PolygonKind.CHP:
        spec = PolygonSpec.chp(p["M"], p["b"])
    else:
        spec = PolygonSpec.hhp(p["M"], p["b"], p["l"])
    times = [RationalTime(a, b) for a, b in p["pq"]]
    stops = [rt.time(spec) for rt in times]
    N = spec.M * p["NM"]
    ev = rk4_evolve(sample_initial(spec, N), spec, SolverConfig(N=N, t_end=max(stops)), stops)
    P0 = an.initial_product(spec)
    rows = []
    for rt, t in zip(times, stops):
        angles, _ = measure_angle_numeric(ev.snapshots[t], spec, rt)
        P = an.conserved_product(angles)
        rows.append((rt.p, rt.q, t, P, abs(P - P0)))
    name = ctx.outputs[0]
    write_csv(ctx.path(name), ["p", "q", "t", "P", "abs_deviation"], rows)
    return {"spec": _spec_dict(spec), "P0": P0, "steps": ev.steps,
            "max_abs_deviation": max(r[4] for r in rows)}


def run_table1_chp(p, ctx):
    return _table1(PolygonKind.CHP, p, ctx)


def run_table1_hhp(p, ctx):
    return _table1(PolygonKind.HHP, p, ctx)


def run_table2(p, ctx):
    specs = [PolygonSpec.chp(p["chp_M"], p["chp_b"]),
             PolygonSpec.hhp(p["hhp_M"], p["hhp_b"], p["hhp_l"])]
    rows = []
    for spec in specs:
        for q in p["q"]:
            est = estimate_difference_quotient(spec, q)
            rows.append((spec.kind.value, q, est, spec.c_theta0, abs(est - spec.c_theta0)))
    write_csv(ctx.path(ctx.outputs[0]), ["kind", "q", "estimate", "c_theta0", "abs_error"], rows)
    return {"rows": len(rows)}


def _speed_point(args):
    spec, n_per_side, fraction = args
    N = spec.M * n_per_side
    t_end = fraction * spec.T_f
    ev = rk4_evolve(sample_initial(spec, N), spec, SolverConfig(N=N, t_end=t_end))
    track = an.com_track(ev.trace_t, ev.com, spec.kind)
    return track.speed


def _speed_sweep(specs, p, ctx, label, value_of):
    points = [(spec, n, p["window"]) for spec in specs for n in p["NM"]]
    speeds = _pmap(_speed_point, points, ctx.jobs)
    rows = []
    for (spec, n, _), c in zip(points, speeds):
        exact = com_speed(spec)
        rows.append((value_of(spec), n, c, exact, abs(c - exact) / exact))
    write_csv(ctx.path(ctx.outputs[0]), [label, "N_per_side", "c_num", "c_exact", "rel_error"], rows)
    limit = specs[0].b ** 2 - 1 if specs[0].is_chp else specs[0].b ** 2 + 1
    write_csv(ctx.path(ctx.outputs[1]), [label, "c_exact", "c_tanh_form", "conjectured_limit"],
              [(value_of(s), com_speed(s), com_speed_tanh(s), limit) for s in specs])
    return {"points": len(rows)}


def run_fig3(p, ctx):
    specs = [PolygonSpec.chp(M, p["b"]) for M in p["M"]]
    return _speed_sweep(specs, p, ctx, "M", lambda s: s.M)


def run_fig4(p, ctx):
    specs = [PolygonSpec.hhp(p["M"], p["b"], l) for l in p["l"]]
    return _speed_sweep(specs, p, ctx, "l", lambda s: s.l)


def _trajectory_case(spec, c, d, n_per_side, n_max, prefix, ctx, record_every=1):
    T_cd = an.period_cd(c, d, spec.T_f)
    N = spec.M * n_per_side
    ev = rk4_evolve(sample_initial(spec, N), spec,
                    SolverConfig(N=N, t_end=T_cd, record_every=record_every))
    t, X = ev.trace_t, ev.trace_X
    tr = an.trajectory_transforms(t, X, spec)
    write_columns(ctx.path(f"{prefix}_trajectory.csv"),
                  {"t": t, "x1": X[:, 0], "x2": X[:, 1], "x3": X[:, 2],
                   "R": tr.R, "nu": tr.nu, "axial": tr.axial})
    series = tr.axial[:-1] - tr.axial[:-1].mean()
    span = 0.5 if (c * d) % 2 else 1.0
    scale = an.scale_to_reference(
        series, lambda tau: np.imag(an.riemann_variant_cd(c, d, span * tau)))
    fp = an.fingerprint(series, n_max, scale=scale)
    members = an.dominating_set_cd(c, d, n_max)
    write_csv(ctx.path(f"{prefix}_fingerprint.csv"),
              ["n", "re_b", "im_b", "n_abs_b", "in_dominating_set"], fp.rows(members))
    slope, intercept = an.nu_linear_fit(t, tr.nu)
    return {"spec": _spec_dict(spec), "T_cd": T_cd, "scale": fp.scale,
            "detected": fp.dominating, "dominating_set": members,
            "detected_outside_set": sorted(set(fp.dominating) - set(members)),
            "member_weights": [float(fp.weighted[k - 1]) for k in members],
            "nu_slope": slope, "nu_intercept": intercept,
            "periodicity_defect": {"R": float(tr.R[-1] - tr.R[0]),
                                   "axial": float(tr.axial[-1] - tr.axial[0])}}


def run_fig5_7(p, ctx):
    spec = PolygonSpec.from_torsion_angle(PolygonKind.CHP, p["M"], math.pi * p["c"] / p["d"])
    return _trajectory_case(spec, p["c"], p["d"], p["NM"], p["n_max"], "chp", ctx)


def run_fig8_10(p, ctx):
    chp = PolygonSpec.from_torsion_angle(PolygonKind.CHP, p["chp_M"], math.pi * p["chp_c"] / p["chp_d"])
    hhp = PolygonSpec.from_torsion_angle(PolygonKind.HHP, p["hhp_M"], math.pi * p["hhp_c"] / p["hhp_d"],
                                         l=p["hhp_l"])
    return {
        "chp": _trajectory_case(chp, p["chp_c"], p["chp_d"], p["NM"], p["n_max"], "chp", ctx),
        "hhp": _trajectory_case(hhp, p["hhp_c"], p["hhp_d"], p["NM"], p["n_max"], "hhp", ctx),
    }


def run_fig11(p, ctx):
    spec = PolygonSpec.chp(p["M"], p["b"])
    rt = RationalTime(p["p"], p["q"])
    comb = dirac_comb_at(spec, rt)
    _, frames = build_frames(spec, rt, comb)
    # the last frame closes the period and repeats the first
    T = frames[:len(comb), 0, :]
    distinct = np.unique(np.round(T, 12), axis=0)
    u, v = an.stereographic(T)
    write_columns(ctx.path(ctx.outputs[0]), {"s": comb.positions, "u": u, "v": v})
    return {"corners": len(comb), "distinct_tangents": int(len(distinct)),
            "expected": spec.M * rt.q // (1 if rt.q % 2 else 2)}


def _z_point(args):
    M, b, n_per_side, record_every, K = args
    spec = PolygonSpec.chp(M, b)
    N = M * n_per_side
    ev = rk4_evolve(sample_initial(spec, N), spec,
                    SolverConfig(N=N, t_end=2 * math.pi, record_every=record_every))
    fit = an.z_projection_and_fit(ev.trace_t, ev.trace_X, spec, K=K)
    return M, fit


def run_fig12_13(p, ctx):
    points = [(M, p["b"], p["NM"], p["record_every"], p["K"]) for M in p["M"]]
    fits = _pmap(_z_point, points, ctx.jobs)
    rows = []
    out = {}
    for M, fit in fits:
        rows.append((M, fit.lam.real, fit.lam.imag, fit.mu.real, fit.mu.imag,
                     fit.abs_error, fit.rel_error))
        write_columns(ctx.path(f"z_M{M}.csv"),
                      {"t": fit.times, "z_re": fit.z.real, "z_im": fit.z.imag,
                       "phi_re": fit.phi.real, "phi_im": fit.phi.imag})
        out[M] = {"abs_error": fit.abs_error, "rel_error": fit.rel_error}
    write_csv(ctx.path("fit_errors.csv"),
              ["M", "lam_re", "lam_im", "mu_re", "mu_im", "abs_error", "rel_error"], rows)
    M0, fit0 = fits[0]
    z = fit0.lam * fit0.z[:-1] + fit0.mu
    n_max = p["n_max"]
    fp = an.fingerprint(z - z.mean(), n_max)
    members = [k * k for k in an.dominating_set_M(M0, int(math.isqrt(n_max)))]
    write_csv(ctx.path("z_fingerprint.csv"), ["n", "re_b", "im_b", "n_abs_b", "in_dominating_set"],
              fp.rows(members))
    return {"errors": out}


def run_fig14_15(p, ctx):
    cases = {"chp": PolygonSpec.chp(p["chp_M"], p["chp_b"]),
             "hhp": PolygonSpec.hhp(p["hhp_M"], p["hhp_b"], p["hhp_l"])}
    out = {}
    for name, spec in cases.items():
        rt = RationalTime(1, p["q"])
        t = rt.time(spec)
        ds = math.pi / (spec.M * rt.q) if spec.is_chp else spec.l / (2 * rt.q)
        c0 = amplitude_for_angle(spec.rho0)
        sol = solve_one_corner(c0, t, ds=ds, s_max=p["half_width"] * spec.l)
        matched = match_to_polygon(sol, spec)
        alg = algebraic_solution(spec, rt, extra=0 if spec.is_chp else None)
        s = matched.s
        T_alg = alg.tangent(s % (2 * math.pi) if spec.is_chp else s)
        # the algebraic curve is fixed only up to a rotation about the axis
        T_alg = T_alg @ best_axis_rotation(T_alg, matched.T, spec.kind).T
        u1, v1 = an.stereographic(matched.T)
        u2, v2 = an.stereographic(T_alg)
        write_columns(ctx.path(f"{name}_overlay.csv"),
                      {"s": s, "u_one_corner": u1, "v_one_corner": v1, "u_polygon": u2, "v_polygon": v2})
        out[name] = {"c0": c0, "t": t, "asymptote_mismatch": matched.mismatch,
                     "c_theta0_estimate": estimate_difference_quotient(spec, rt.q)}
    return out


CATALOG = {e.id: e for e in [
    Experiment("table1-chp", "conserved product at rational times, circular polygon",
               "Table 1", {"M": 6, "b": 1.2, "NM": 512, "pq": TABLE1_TIMES}, {"NM": 7680},
               ["table1_chp.csv"], run_table1_chp),
    Experiment("table1-hhp", "conserved product at rational times, hyperbolic polygon",
               "Table 1", {"M": 48, "b": 0.4, "l": 0.2, "NM": 240, "pq": TABLE1_TIMES},
               {"NM": 1920}, ["table1_hhp.csv"], run_table1_hhp),
    Experiment("table2", "difference-quotient estimate of the corner amplitude",
               "Table 2", {"chp_M": 6, "chp_b": 1.2, "hhp_M": 8, "hhp_b": 0.4, "hhp_l": 0.6,
                           "q": TABLE2_Q}, {}, ["table2.csv"], run_table2),
    Experiment("fig3-cm", "centre-of-mass speed of circular polygons",
               "Figure 3", {"M": [6, 8, 10, 12, 14, 16, 18, 20], "b": 1.2, "NM": [120, 240, 480],
                            "window": 0.5},
               {"NM": [480, 960, 1920, 3840, 7680]}, ["speed_errors.csv", "speed_limit.csv"],
               run_fig3),
    Experiment("fig4-cl", "centre-of-mass speed of hyperbolic polygons",
               "Figure 4", {"M": 48, "b": 0.4, "l": [0.08, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2],
                            "NM": [60, 120, 240], "window": 0.2},
               {"NM": [240, 480, 960, 1920]}, ["speed_errors.csv", "speed_limit.csv"], run_fig4),
    Experiment("fig5-7", "trajectory of X(0,t) and its fingerprint, torsion 2 pi/5",
               "Figures 5-7", {"M": 6, "c": 2, "d": 5, "NM": 512, "n_max": 60}, {"NM": 7680},
               ["chp_trajectory.csv", "chp_fingerprint.csv"], run_fig5_7),
    Experiment("fig8-10", "fingerprints toward the limit values and the angular drift",
               "Figures 8-10", {"chp_M": 20, "chp_c": 1, "chp_d": 9, "hhp_M": 96, "hhp_c": 1,
                                "hhp_d": 16, "hhp_l": 0.05, "NM": 128, "n_max": 60},
               {"NM": 1024},
               ["chp_trajectory.csv", "chp_fingerprint.csv", "hhp_trajectory.csv",
                "hhp_fingerprint.csv"], run_fig8_10),
    Experiment("fig11-triskelion", "algebraic tangent at a rational time with large denominator",
               "Figure 11", {"M": 3, "b": 1.2, "p": 18209, "q": 65764}, {},
               ["tangent_stereographic.csv"], run_fig11),
    Experiment("fig12-13", "b -> 1 trajectories compared with phi_M",
               "Figures 12-13", {"M": [4, 6, 8, 10], "b": 1 + 1e-5, "NM": 64, "record_every": 4,
                                 "K": 1024, "n_max": 400},
               {"M": list(range(3, 16)), "NM": 1024, "record_every": 16},
               ["fit_errors.csv", "z_fingerprint.csv"], run_fig12_13),
    Experiment("fig14-15", "one-corner solution rotated onto a polygon corner",
               "Figures 14-15", {"chp_M": 6, "chp_b": 1.2, "hhp_M": 8, "hhp_b": 0.4, "hhp_l": 0.6,
                                 "q": 4000, "half_width": 0.5}, {},
               ["chp_overlay.csv", "hhp_overlay.csv"], run_fig14_15),
]}


def list_experiments():
    return [(e.id, e.description, e.target) for e in CATALOG.values()]


def get_experiment(name):
    try:
        return CATALOG[name]
    except KeyError:
        near = difflib.get_close_matches(name, list(CATALOG), n=3, cutoff=0.3)
        hint = f"; did you mean {', '.join(near)}?" if near else ""
        raise UnknownExperiment(f"unknown experiment {name!r}{hint}") from None


class RunContext:
    def __init__(self, out_dir, outputs, jobs=1):
        self.out_dir = Path(out_dir)
        self.outputs = outputs
        self.jobs = jobs
        self.written = []

    def path(self, name):
        self.written.append(name)
        return self.out_dir / name


def config_overrides(path):
    """``[experiment]`` section of a flat config file as raw strings."""
    cfg = configparser.ConfigParser()
    cfg.optionxform = str
    if not cfg.read(Path(path), encoding="utf-8"):
        raise FileNotFoundError(path)
    name = cfg.get("experiment", "id", fallback=None)
    values = dict(cfg["params"]) if "params" in cfg else {}
    return name, values


def run(experiment_id, out_dir, full=False, jobs=1, overrides=None, log=sys.stderr):
    """Run one experiment; the manifest is written before anything else."""
    exp = get_experiment(experiment_id)
    params = exp.params(full, overrides)
    out_dir = Path(out_dir)
    if full:
        print(f"warning: {exp.id} at full resolution can take hours", file=log)
    manifest = ExperimentManifest(experiment=exp.id, params=params, out_dir=str(out_dir),
                                  outputs=["manifest.json", "report.json", *_declared(exp, params)],
                                  full=full, jobs=jobs)
    write_json(out_dir / "manifest.json", manifest.to_dict())
    ctx = RunContext(out_dir, exp.outputs, jobs)
    started = time.perf_counter()
    results = exp.runner(params, ctx)
    undeclared = sorted(set(ctx.written) - set(manifest.outputs))
    if undeclared:
        raise HelipolyError(f"{exp.id} wrote undeclared files {undeclared}")
    write_json(out_dir / "report.json", {"experiment": exp.id, "results": results})
    print(f"{exp.id}: done in {time.perf_counter() - started:.1f} s", file=log)
    return results


def _declared(exp, params):
    names = list(exp.outputs)
    if exp.id == "fig12-13":
        names += [f"z_M{M}.csv" for M in params["M"]]
    return names
