"""Command-line front end.

    cslbounds <command> <scenario.toml | bundled-name> [options]

Each run prints one ``key=value`` summary line to stdout and writes its
outputs atomically. Exit codes: 0 ok, 2 scenario/schema error, 3 numerical
failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import scenario as scn
from .budgets import cloud_energy_rate, cloud_rate_per_nucleon, cloud_temperature_drift
from .budgets import force_noise_psd, heating_power
from .diffusion import DPParams, eta_dp, eta_hat_csl
from .exclusion import ExclusionCurve, ExclusionError, echo, envelope, exclusion_curve
from .quadrature import QuadratureError
from .simulator import SimConfig, SimulationError, TimeSeries, infer_force_psd, psd_welch, simulate
from .stack_opt import optimize_thickness

log = logging.getLogger("cslbounds")

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
COMMANDS = ("eta", "dp", "noise", "heat", "exclude", "envelope", "optimize-stack", "simulate", "psd")


def write_atomic(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6e}"
    if isinstance(v, bool):
        return str(v).lower()
    return str(v)


def summary(**kv):
    return " ".join(f"{k}={_fmt(v)}" for k, v in kv.items())


def _slug(s):
    return re.sub(r"[^A-Za-z0-9]+", "_", s).strip("_").lower() or "curve"


def _out(args, sc, command, ext):
    if args.out:
        return Path(args.out)
    t = sc.table("output")
    if t and "path" in t:
        return Path(t["path"])
    stem = sc.path.stem if sc.path else "scenario"
    return Path(f"{stem}_{command.replace('-', '_')}{ext}")


def _sidecar(p: Path):
    return p.with_suffix(".json")


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- commands -----------------------------------------------------------------

def cmd_eta(args, sc):
    const = scn.physical_constants(sc)
    d = scn.build_distribution(sc.table("distribution"))
    if "grid" in sc.data or any(v is not None for v in (args.grid_min, args.grid_max, args.grid_points)):
        grid = scn.build_grid(sc, args.grid_min, args.grid_max, args.grid_points)
    elif "r_C" in sc.table("collapse", {}):
        grid = [sc.table("collapse")["r_C"]]
    else:
        grid = scn.build_grid(sc)
    rows = ["r_C_m,eta_hat_per_m2,quad_rel_error,method"]
    results = []
    for r in grid:
        res = eta_hat_csl(d, r, rtol=scn.rtol(sc), const=const)
        results.append(res)
        rows.append(f"{r!r},{res.eta_hat!r},{res.quad_error!r},{res.method}")
    out = _out(args, sc, "eta", ".csv")
    write_atomic(out, "\n".join(rows) + "\n")
    first = results[0]
    return summary(command="eta", points=len(grid), r_C=first.r_C, eta_hat=first.eta_hat,
                   mass=geo.total_mass(d), out=out)


def cmd_dp(args, sc):
    const = scn.physical_constants(sc)
    d = scn.build_distribution(sc.table("distribution"))
    t = sc.table("dp")
    try:
        p = DPParams(t["r_DP"], t["a"], t.get("rho"))
        val = eta_dp(d, p, const=const)
    except ValueError as exc:
        raise scn.ScenarioError(f"dp: {exc}") from exc
    m = geo.total_mass(d)
    out = _out(args, sc, "dp", ".json")
    write_atomic(out, _json({"eta_dp_per_m2_s": val, "eta_dp_per_mass": val / m, "mass_kg": m,
                             "distribution": echo(d), "dp": echo(p)}))
    return summary(command="dp", eta_dp=val, eta_dp_per_kg=val / m, out=out)


def _eta_for(sc, const, mass=None):
    """Collapse diffusion eta (m^-2 s^-1) from [noise].eta or [collapse] x [distribution]."""
    noise = sc.table("noise", {})
    if "eta" in noise:
        return noise["eta"]
    col = sc.table("collapse", {})
    if "distribution" in sc.data and "lambda" in col and "r_C" in col:
        d = scn.build_distribution(sc.table("distribution"))
        return col["lambda"] * eta_hat_csl(d, col["r_C"], rtol=scn.rtol(sc), const=const).eta_hat
    return 0.0


def cmd_noise(args, sc):
    const = scn.physical_constants(sc)
    mass = None
    if "distribution" in sc.data:
        mass = geo.total_mass(scn.build_distribution(sc.table("distribution")))
    res = scn.build_resonator(sc.table("resonator"), mass=mass)
    eta = _eta_for(sc, const)
    b = force_noise_psd(res, eta, const=const)
    out = _out(args, sc, "noise", ".json")
    write_atomic(out, _json({"thermal_N2_per_Hz": b.thermal, "collapse_N2_per_Hz": b.collapse,
                             "total_N2_per_Hz": b.total, "eta_per_m2_s": eta,
                             "resonator": echo(res)}))
    return summary(command="noise", thermal=b.thermal, collapse=b.collapse, total=b.total,
                   eta=eta, out=out)


def cmd_heat(args, sc):
    const = scn.physical_constants(sc)
    col = sc.table("collapse")
    if "lambda" not in col or "r_C" not in col:
        raise scn.ScenarioError("heat needs collapse.lambda and collapse.r_C")
    lam, r = col["lambda"], col["r_C"]
    doc = {"lambda_eff_Hz": lam, "r_C_m": r,
           "note": "white-noise heating; for solids lambda is an effective (phonon-averaged) rate"}
    kv = {"command": "heat"}
    if "calorimeter" in sc.data:
        c = scn.build_calorimeter(sc.table("calorimeter"))
        p = heating_power(c, lam, r, const=const)
        doc["calorimeter"] = {"power_W": p, "power_per_kg_W": p / c.mass,
                              "heat_leak_ceiling_W_per_kg": c.heat_leak_ceiling}
        kv.update(heating_W=p, heating_per_kg=p / c.mass)
    if "cloud" in sc.data:
        c = scn.build_cloud(sc.table("cloud"), const)
        e = cloud_energy_rate(c, lam, r, const=const)
        doc["cloud"] = {"energy_rate_per_atom_W": e,
                        "energy_rate_per_nucleon_W": cloud_rate_per_nucleon(c, lam, r, const=const),
                        "temperature_drift_K_per_s": cloud_temperature_drift(c, lam, r, const=const)}
        kv.update(cloud_rate_per_atom=e)
    if len(doc) == 3:
        raise scn.ScenarioError("heat needs a [calorimeter] or [cloud] table")
    out = _out(args, sc, "heat", ".json")
    write_atomic(out, _json(doc))
    kv["out"] = out
    return summary(**kv)


def _curves(args, sc):
    const = scn.physical_constants(sc)
    grid = scn.build_grid(sc, args.grid_min, args.grid_max, args.grid_points)
    labels = {t.get("label", t["kind"]) for t in sc.table("experiment", [])}
    for o in sc.table("overlay", []):
        if "experiment" in o and o["experiment"] not in labels:
            raise scn.ScenarioError(f"overlay {o['label']!r} names unknown experiment {o['experiment']!r}")
    curves = []
    for t in sc.table("experiment", []):
        spec = scn.build_experiment(t, const)
        c = exclusion_curve(spec, grid, rtol=scn.rtol(sc), workers=scn.workers(sc), const=const)
        if t.get("note"):
            c.metadata["note"] = t["note"]
        c.metadata["reference_overlays"] = scn.overlays_for(sc, c.label)
        if sc.table("meta"):
            c.metadata["scenario"] = sc.table("meta")
        curves.append(c)
    return curves


def _write_curve(path: Path, c: ExclusionCurve):
    write_atomic(path, c.to_csv())
    write_atomic(_sidecar(path), c.to_json())


def _at(c: ExclusionCurve, r):
    i = int(np.argmin(np.abs(np.log(c.r_C / r))))
    return c.r_C[i], c.lambda_upper[i]


def cmd_exclude(args, sc):
    curves = _curves(args, sc)
    out = _out(args, sc, "exclude", ".csv")
    paths = []
    for c in curves:
        p = out if len(curves) == 1 else out.with_name(f"{out.stem}_{_slug(c.label)}{out.suffix}")
        _write_curve(p, c)
        paths.append(str(p))
    c0 = curves[0]
    r_ref, lam_ref = _at(c0, 1e-7)
    i = int(np.argmin(c0.lambda_upper))
    return summary(command="exclude", curves=len(curves), points=c0.r_C.size,
                   r_C_ref=float(r_ref), lambda_upper_ref=float(lam_ref),
                   best_r_C=float(c0.r_C[i]), best_lambda_upper=float(c0.lambda_upper[i]),
                   out=",".join(paths))


def cmd_envelope(args, sc):
    curves = _curves(args, sc) if "experiment" in sc.data else []
    for name in sc.table("envelope", {}).get("curves", []):
        p = Path(name)
        if not p.is_absolute():
            p = sc.base_dir / p
        try:
            curves.append(ExclusionCurve.from_json(p.read_text()))
        except (KeyError, json.JSONDecodeError) as exc:
            raise scn.ScenarioError(f"envelope input {p}: not a curve document ({exc})") from exc
    if not curves:
        raise scn.ScenarioError("envelope needs [[experiment]] tables or envelope.curves")
    env = envelope(curves)
    out = _out(args, sc, "envelope", ".csv")
    _write_curve(out, env)
    i = int(np.argmin(env.lambda_upper))
    return summary(command="envelope", curves=len(curves), points=env.r_C.size,
                   best_r_C=float(env.r_C[i]), best_lambda_upper=float(env.lambda_upper[i]), out=out)


def cmd_optimize_stack(args, sc):
    t = sc.table("stack")
    try:
        res = optimize_thickness((t["density_a"], t["density_b"]), (t["lx"], t["ly"]), t["n_pairs"],
                                 t["r_C"], (t["d_min"], t["d_max"]),
                                 kind=t.get("objective", "eta_hat_per_mass"),
                                 rel_tol=t.get("rel_tol", 1e-3), max_evals=t.get("max_evals", 200),
                                 rtol=scn.rtol(sc))
    except ValueError as exc:
        if isinstance(exc, ArithmeticError):
            raise
        raise scn.ScenarioError(f"stack: {exc}") from exc
    doc = res.to_dict()
    out = _out(args, sc, "optimize-stack", ".json")
    write_atomic(out, _json(doc))
    base = doc["metadata"]["baselines"]
    return summary(command="optimize-stack", d_star=res.best.d, objective=res.objective_value,
                   converged=res.converged, evaluations=len(res.trace),
                   enhancement=base["same_mass_dense"], out=out)


def _sim_config(args, sc):
    const = scn.physical_constants(sc)
    t = sc.table("simulation")
    res = scn.build_resonator(sc.table("resonator"))
    if "S_ff_total" in t:
        s_ff = t["S_ff_total"]
    else:
        s_ff = force_noise_psd(res, t.get("eta", 0.0), const=const).total
    seed = args.seed if args.seed is not None else t.get("seed", 0)
    try:
        return SimConfig(res, s_ff, t["dt"], t["duration"], seed, t.get("x0", 0.0), t.get("v0", 0.0))
    except ValueError as exc:
        raise scn.ScenarioError(f"simulation: {exc}") from exc


def cmd_simulate(args, sc):
    cfg = _sim_config(args, sc)
    ts = simulate(cfg)
    out = _out(args, sc, "simulate", ".csv")
    write_atomic(out, ts.to_csv())
    write_atomic(_sidecar(out), ts.metadata_json())
    var = float(np.var(ts.samples))
    return summary(command="simulate", samples=ts.samples.size, dt=cfg.dt, variance=var,
                   expected_variance=cfg.S_ff_total * cfg.resonator.Q /
                   (4 * cfg.resonator.mass**2 * cfg.resonator.omega**3),
                   seed=cfg.seed, out=out)


def cmd_psd(args, sc):
    t = sc.table("psd")
    res = None
    if "input" in t:
        p = Path(t["input"])
        if not p.is_absolute():
            p = sc.base_dir / p
        try:
            ts = TimeSeries.from_csv(p.read_text())
        except ValueError as exc:
            raise scn.ScenarioError(f"psd input {p}: {exc}") from exc
        if "resonator" in sc.data:
            res = scn.build_resonator(sc.table("resonator"))
    elif "simulation" in sc.data:
        cfg = _sim_config(args, sc)
        res = cfg.resonator
        ts = simulate(cfg)
    else:
        raise scn.ScenarioError("psd needs psd.input or a [simulation] table")
    try:
        f, p_xx = psd_welch(ts, t["segment_length"], t.get("overlap", 0.5))
    except ValueError as exc:
        raise scn.ScenarioError(f"psd: {exc}") from exc
    rows = ["f_Hz,S_xx_m2_per_Hz"] + [f"{a!r},{b!r}" for a, b in zip(f.tolist(), p_xx.tolist())]
    out = _out(args, sc, "psd", ".csv")
    write_atomic(out, "\n".join(rows) + "\n")
    kv = dict(command="psd", bins=f.size, df=float(f[1] - f[0]), variance=float(np.var(ts.samples)),
              integrated_psd=float(np.sum(p_xx) * (f[1] - f[0])))
    if res is not None:
        f0 = res.omega / (2 * math.pi)
        lo, hi = t.get("f_min", 0.5 * f0), t.get("f_max", 1.5 * f0)
        band = (f >= lo) & (f <= hi)
        if band.any():
            kv["S_ff_inferred"] = float(np.mean(infer_force_psd(res, f[band], p_xx[band])))
    kv["out"] = out
    return summary(**kv)


HANDLERS = {
    "eta": cmd_eta, "dp": cmd_dp, "noise": cmd_noise, "heat": cmd_heat,
    "exclude": cmd_exclude, "envelope": cmd_envelope, "optimize-stack": cmd_optimize_stack,
    "simulate": cmd_simulate, "psd": cmd_psd,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="cslbounds",
                                 description="Collapse-model diffusion, budgets and exclusion curves.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("scenario", help="scenario TOML file, or the name of a bundled scenario")
    ap.add_argument("--grid-min", type=float)
    ap.add_argument("--grid-max", type=float)
    ap.add_argument("--grid-points", type=int)
    ap.add_argument("--out", help="output path (CSV/JSON by command)")
    ap.add_argument("--seed", type=int)
    mode = ap.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=True,
                      help="reject unknown keys (default)")
    mode.add_argument("--lenient", dest="strict", action="store_false",
                      help="downgrade unknown keys to warnings")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        sc = scn.load(args.scenario, strict=args.strict, command=args.command)
        line = HANDLERS[args.command](args, sc)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
    except (QuadratureError, SimulationError, ExclusionError) as exc:
        print(f"error: numerical: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except scn.ScenarioError as exc:
        print(f"error: scenario: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
    print("status=ok " + line)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
