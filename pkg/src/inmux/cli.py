"""Command-line interface and configuration handling.

One YAML configuration file drives every subcommand; CLI flags override
individual entries.  Unknown keys are rejected (strict mode) so typos in
scientific parameters fail loudly.  Every artifact written embeds the full
resolved configuration as '#' header comments and prints numbers with 9
significant digits, so identical configurations give byte-identical files.

Subcommands: instances, gains, table1, iloop-sim, iloop-eigs, mpc-sim,
basins, continue.  Exit codes: 0 success, 1 computational failure,
2 configuration error.
"""

import argparse
import copy
import os
import sys

import numpy as np
import yaml

from ._kernels import BACKEND
from . import basins as basins_mod
from . import iloop as iloop_mod
from .linear import (PairingConfig, analyze_instance, feasible_sign_sets,
                     ic_classify, sequential_signs, uniqueness_report)
from .model import PlantParams
from .mpc import TRAJ_COLUMNS, MpcConfig, simulate_mpc
from .ode import IntegrationError
from .steady import SolverError, branch_crossings, continue_branch, find_input_instances


class ConfigError(Exception):
    """Configuration file or flag problem (exit code 2)."""


DEFAULTS = {
    "plant": {},
    "setpoint": [0.49, 0.37],
    "instances": {
        "u1_range": [0.85, 1.15],
        "u2_range": [0.2, 0.8],
        "grid": [20, 20],
        "merge_radius": 1.0e-4,
        "tol": 1.0e-12,
    },
    "pairing": {
        "order": "direct",
        "signs": "++",
        "magnitudes": "witness",
    },
    "iloop": {
        "k": 0.01,
        "t_final": 1.0e4,
        "x0": [0.49, 0.37],
        "u0": [0.914, 0.580],
        "samples": 400,
    },
    "mpc": {
        "horizon": 2,
        "dt": 0.5,
        "ky": 1.0,
        "ku": 2.0,
        "gtol": 1.0e-8,
        "max_iter": 200,
        "substeps": 10,
        "steps": 600,
        "x0": [0.3, 0.5],
        "u0": [0.96, 0.5],
    },
    "continuation": {
        "from_instance": 1,
        "fix": "both",          # y1 | y2 | both
        "ds": 0.01,
        "ds_min": 1.0e-4,
        "ds_max": 0.05,
        "max_points": 4000,
        "s_max": 6.0,
    },
    "basins": {
        "slice": "u",
        "y0": [0.3, 0.5],
        "u0": [0.96, 0.5],
        "res": 64,
        "u1_range": [0.85, 1.15],
        "u2_range": [0.2, 0.8],
        "y1_range": [0.05, 0.75],
        "y2_range": [0.05, 0.75],
        "max_steps": 2000,
        "refine": 2,
        "threads": 1,
    },
    "output": {
        "dir": "out",
        "deterministic": True,   # everything is seedless; recorded for headers
    },
}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{dotted}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key '{dotted}' must be a mapping")
            out[key] = _merge(base[key], val, dotted + ".")
        else:
            out[key] = val
    return out


def load_config(path=None):
    """Defaults merged with an optional YAML file; strict unknown-key check."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except yaml.MarkedYAMLError as err:
        mark = err.problem_mark
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"YAML parse error in {path}{where}: {err.problem}") from err
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root in {path} must be a mapping")
    cfg = _merge(DEFAULTS, data)
    if "plant" in data:
        # plant params validated separately (its keys are not in DEFAULTS)
        cfg["plant"] = dict(data["plant"] or {})
    return cfg


def _flatten(cfg, prefix=""):
    items = []
    for key in sorted(cfg):
        val = cfg[key]
        if isinstance(val, dict):
            items.extend(_flatten(val, f"{prefix}{key}."))
        else:
            items.append((f"{prefix}{key}", val))
    return items


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in np.asarray(x).ravel()) + "]"
    return str(x)


def _header_lines(subcommand, cfg):
    lines = [f"# inmux {subcommand}", f"# backend = {BACKEND}"]
    lines += [f"# {key} = {_fmt(val)}" for key, val in _flatten(cfg)]
    return lines


def write_csv(path, subcommand, cfg, columns, rows):
    with open(path, "w") as fh:
        for line in _header_lines(subcommand, cfg):
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _pair(text, name):
    try:
        a, b = (float(v) for v in str(text).split(","))
    except ValueError as err:
        raise ConfigError(f"{name} must be two comma-separated numbers, got {text!r}") from err
    return [a, b]


def _parse_signs(text):
    s = str(text).strip()
    if isinstance(text, (list, tuple)):
        s = "".join("+" if v > 0 else "-" for v in text)
    if len(s) != 2 or any(c not in "+-" for c in s):
        raise ConfigError(f"signs must be two of '+'/'-', got {text!r}")
    return tuple(1 if c == "+" else -1 for c in s)


def _fmt_signs(signs):
    return "".join("+" if s > 0 else "-" for s in signs)


def _plant(cfg):
    try:
        return PlantParams.from_dict(cfg["plant"])
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad plant parameters: {err}") from err


def _mpc_config(cfg):
    m = cfg["mpc"]
    return MpcConfig(horizon=int(m["horizon"]), dt=float(m["dt"]),
                     ky=m["ky"], ku=m["ku"], gtol=float(m["gtol"]),
                     max_iter=int(m["max_iter"]), substeps=int(m["substeps"]))


def _find_instances(params, cfg):
    c = cfg["instances"]
    return find_input_instances(
        params, np.asarray(cfg["setpoint"], float),
        u1_range=tuple(c["u1_range"]), u2_range=tuple(c["u2_range"]),
        grid=tuple(int(g) for g in c["grid"]),
        merge_radius=float(c["merge_radius"]), tol=float(c["tol"]))


def _require_instances(params, cfg):
    inst = _find_instances(params, cfg)
    if len(inst) == 0:
        raise SolverError("no steady-state input instances found in the search box")
    return inst


def _outdir(cfg):
    path = cfg["output"]["dir"]
    os.makedirs(path, exist_ok=True)
    return path


def cmd_instances(cfg):
    params = _plant(cfg)
    inst = _find_instances(params, cfg)
    rows = [(i, q.u.u1, q.u.u2, q.x.x1, q.x.x2, q.residual, 1)
            for i, q in enumerate(inst.instances)]
    path = os.path.join(_outdir(cfg), "instances.csv")
    write_csv(path, "instances", cfg,
              ("s", "u1", "u2", "y1", "y2", "residual", "stable"), rows)
    print(f"found {len(inst)} input instance(s) for r = {_fmt(cfg['setpoint'])}")
    for i, q in enumerate(inst.instances):
        print(f"  instance {i + 1}: u = ({q.u.u1:.9g}, {q.u.u2:.9g})"
              f"  residual = {q.residual:.3g}")
    print(f"wrote {path}")
    return 0


def cmd_gains(cfg):
    params = _plant(cfg)
    inst = _require_instances(params, cfg)
    rows = []
    for i, q in enumerate(inst.instances):
        ga = analyze_instance(params, q.u, q.x)
        rows.append((i + 1, q.u.u1, q.u.u2, *ga.gain.ravel(), *ga.rga.ravel(),
                     ga.jac_eigs[0], ga.jac_eigs[1]))
    path = os.path.join(_outdir(cfg), "gains.csv")
    write_csv(path, "gains", cfg,
              ("instance", "u1", "u2", "g11", "g12", "g21", "g22",
               "rga11", "rga12", "rga21", "rga22", "eig1", "eig2"), rows)
    print(f"wrote {path}")
    return 0


def cmd_table1(cfg):
    params = _plant(cfg)
    inst = _require_instances(params, cfg)
    md_path = os.path.join(_outdir(cfg), "table1.md")
    csv_rows = []
    with open(md_path, "w") as fh:
        for line in _header_lines("table1", cfg):
            fh.write(f"<!-- {line[2:]} -->\n")
        fh.write("| y = r | u | G | RGA | (y1-u1),(y2-u2) | (y1-u2),(y2-u1) |\n")
        fh.write("|---|---|---|---|---|---|\n")
        r = inst.setpoint
        for i, q in enumerate(inst.instances):
            ga = analyze_instance(params, q.u, q.x)
            direct = ",".join(_fmt_signs(s) for s in feasible_sign_sets(ga.gain, "direct"))
            swapped = ",".join(_fmt_signs(s) for s in feasible_sign_sets(ga.gain, "swapped"))
            g = ga.gain
            lam = ga.rga
            fh.write(
                f"| ({r[0]:.9g}, {r[1]:.9g}) | ({q.u.u1:.9g}, {q.u.u2:.9g}) "
                f"| [[{g[0,0]:.3g}, {g[0,1]:.3g}], [{g[1,0]:.3g}, {g[1,1]:.3g}]] "
                f"| [[{lam[0,0]:.3g}, {lam[0,1]:.3g}], [{lam[1,0]:.3g}, {lam[1,1]:.3g}]] "
                f"| {direct} | {swapped} |\n")
            csv_rows.append((i + 1, q.u.u1, q.u.u2, *g.ravel(), *lam.ravel(),
                             direct, swapped))
    csv_path = os.path.join(_outdir(cfg), "table1.csv")
    write_csv(csv_path, "table1", cfg,
              ("instance", "u1", "u2", "g11", "g12", "g21", "g22",
               "rga11", "rga12", "rga21", "rga22", "signs_direct", "signs_swapped"),
              csv_rows)
    print(f"wrote {md_path} and {csv_path}")
    return 0


def _resolve_pairing(cfg, analyses):
    pc = cfg["pairing"]
    signs = _parse_signs(pc["signs"])
    order = pc["order"]
    if order not in ("direct", "swapped"):
        raise ConfigError(f"pairing.order must be direct|swapped, got {order!r}")
    mags = pc["magnitudes"]
    if isinstance(mags, str):
        if mags != "witness":
            raise ConfigError("pairing.magnitudes must be 'witness' or two numbers")
        probe = PairingConfig(pairing=order, signs=signs)
        rep = uniqueness_report(analyses, probe)
        mags_val = (1.0, 1.0)
        for idx in rep.stable_instances:
            verdict = ic_classify(analyses[idx].gain, probe)
            if verdict.witness is not None:
                mags_val = verdict.witness
                break
    else:
        mags_val = (float(mags[0]), float(mags[1]))
    return PairingConfig(pairing=order, signs=signs, magnitudes=mags_val)


def cmd_iloop_sim(cfg):
    params = _plant(cfg)
    inst = _require_instances(params, cfg)
    analyses = [analyze_instance(params, q.u, q.x) for q in inst.instances]
    pairing = _resolve_pairing(cfg, analyses)
    il = cfg["iloop"]
    loop_cfg = iloop_mod.IntegralLoopConfig(
        pairing=pairing, k=float(il["k"]), r=tuple(cfg["setpoint"]),
        u_init=tuple(il["u0"]), x_init=tuple(il["x0"]))
    t_final = float(il["t_final"])
    t_eval = np.linspace(0.0, t_final, int(il["samples"]) + 1)[1:]
    res = iloop_mod.simulate(params, loop_cfg, t_final=t_final, t_eval=t_eval,
                             targets=inst.u_array())
    verdict = res.reason
    if res.instance >= 0:
        verdict = f"converged-instance-{res.instance + 1}"
    rows = [(t, *z) for t, z in zip(res.t_trace, res.z_trace)]
    path = os.path.join(_outdir(cfg), "iloop_traj.csv")
    write_csv(path, "iloop-sim", cfg, ("t", "x1", "x2", "u1", "u2"), rows)
    print(f"pairing={pairing.pairing} signs={_fmt_signs(pairing.signs)} "
          f"magnitudes=({pairing.magnitudes[0]:.9g}, {pairing.magnitudes[1]:.9g}) "
          f"k={loop_cfg.k:.9g}")
    print(f"verdict: {verdict} (t_end = {res.t_trace[-1]:.9g} s)")
    print(f"wrote {path}")
    return 0


def cmd_iloop_eigs(cfg):
    params = _plant(cfg)
    inst = _require_instances(params, cfg)
    analyses = [analyze_instance(params, q.u, q.x) for q in inst.instances]
    pairing = _resolve_pairing(cfg, analyses)
    loop_cfg = iloop_mod.IntegralLoopConfig(pairing=pairing,
                                            k=float(cfg["iloop"]["k"]),
                                            r=tuple(cfg["setpoint"]))
    rows = []
    for i, q in enumerate(inst.instances):
        eig, hurwitz = iloop_mod.local_stability(params, loop_cfg, q.u)
        rows.append((i + 1, q.u.u1, q.u.u2, loop_cfg.k,
                     *np.column_stack([eig.real, eig.imag]).ravel(),
                     int(hurwitz)))
        print(f"instance {i + 1}: hurwitz={bool(hurwitz)}  "
              f"max Re = {eig.real.max():.9g}")
    path = os.path.join(_outdir(cfg), "iloop_eigs.csv")
    write_csv(path, "iloop-eigs", cfg,
              ("instance", "u1", "u2", "k",
               "re1", "im1", "re2", "im2", "re3", "im3", "re4", "im4",
               "hurwitz"), rows)
    print(f"wrote {path}")
    return 0


def cmd_mpc_sim(cfg):
    params = _plant(cfg)
    inst = _require_instances(params, cfg)
    mpc_cfg = _mpc_config(cfg)
    m = cfg["mpc"]
    run = simulate_mpc(params, mpc_cfg, np.asarray(m["x0"], float),
                       np.asarray(m["u0"], float),
                       np.asarray(cfg["setpoint"], float), inst.u_array(),
                       max_steps=int(m["steps"]))
    path = os.path.join(_outdir(cfg), "mpc_traj.csv")
    write_csv(path, "mpc-sim", cfg, TRAJ_COLUMNS,
              (tuple(row) for row in run.trajectory))
    print(f"classification: {run.classification} after {run.steps} steps"
          f" ({run.n_warnings} optimizer warnings)")
    print(f"wrote {path}")
    return 0


def cmd_basins(cfg):
    params = _plant(cfg)
    inst = _require_instances(params, cfg)
    mpc_cfg = _mpc_config(cfg)
    b = cfg["basins"]
    if b["slice"] == "u":
        box = (tuple(b["u1_range"]), tuple(b["u2_range"]))
        fixed = tuple(b["y0"])
    elif b["slice"] == "y":
        box = (tuple(b["y1_range"]), tuple(b["y2_range"]))
        fixed = tuple(b["u0"])
    else:
        raise ConfigError(f"basins.slice must be 'u' or 'y', got {b['slice']!r}")
    res = int(b["res"])
    spec = basins_mod.SweepSpec(
        slice_kind=b["slice"], fixed=fixed, box=box, resolution=(res, res),
        setpoint=tuple(cfg["setpoint"]),
        targets=tuple(map(tuple, inst.u_array())),
        max_steps=int(b["max_steps"]))
    threads = int(b["threads"])
    grid = basins_mod.sweep(params, mpc_cfg, spec, threads=threads)
    grids = [grid] + basins_mod.refine_boundary(grid, levels=int(b["refine"]),
                                                threads=threads)
    outdir = _outdir(cfg)
    summary = []
    for g in grids:
        base = os.path.join(outdir, f"basins_L{g.level}")
        write_csv(base + ".csv", "basins", cfg,
                  ("i", "j", "coord1", "coord2", "label", "steps"),
                  basins_mod.grid_rows(g))
        with open(base + ".pgm", "wb") as fh:
            fh.write(basins_mod.pgm_bytes(g))
        mixed = int(np.count_nonzero(basins_mod.mixed_mask(g.labels)))
        summary.append((g.level, g.labels.shape[0], g.labels.shape[1],
                        g.cell_size(), mixed, g.changed_fraction))
        labs = sorted(int(v) for v in np.unique(g.labels))
        print(f"level {g.level}: {g.labels.shape[0]}x{g.labels.shape[1]} cells,"
              f" labels present {labs}, mixed cells {mixed}")
    write_csv(os.path.join(outdir, "basins_boundary.csv"), "basins", cfg,
              ("level", "n1", "n2", "cell_size", "mixed_cells",
               "changed_fraction"), summary)
    if len(grids) >= 3:
        dim = basins_mod.boundary_dimension(grids)
        if dim.ok:
            print(f"box-counting boundary dimension ~= {dim.slope:.3f}")
        else:
            print(f"boundary dimension: {dim.message}")
    print(f"wrote {outdir}/basins_L*.csv, .pgm and basins_boundary.csv")
    return 0


def cmd_continue(cfg):
    params = _plant(cfg)
    inst = _require_instances(params, cfg)
    c = cfg["continuation"]
    idx = int(c["from_instance"]) - 1
    if not 0 <= idx < len(inst):
        raise ConfigError(f"continuation.from_instance out of range 1..{len(inst)}")
    start = inst.instances[idx]
    r = inst.setpoint
    fixes = {"y1": [0], "y2": [1], "both": [0, 1]}.get(c["fix"])
    if fixes is None:
        raise ConfigError(f"continuation.fix must be y1|y2|both, got {c['fix']!r}")
    outdir = _outdir(cfg)
    visited = []
    for fixed_index in fixes:
        free_index = 1 - fixed_index
        for direction in (1, -1):
            branch = continue_branch(
                params, (fixed_index, r[fixed_index]), r[free_index],
                start.u, direction=direction, ds0=float(c["ds"]),
                ds_min=float(c["ds_min"]), ds_max=float(c["ds_max"]),
                max_points=int(c["max_points"]), s_max=float(c["s_max"]))
            tag = f"y{fixed_index + 1}fixed_{'fwd' if direction > 0 else 'bwd'}"
            path = os.path.join(outdir, f"continue_{tag}.csv")
            write_csv(path, "continue", cfg,
                      ("s", "u1", "u2", "y1", "y2", "stable"), branch.as_rows())
            print(f"branch {tag}: {len(branch.points)} points, "
                  f"stopped: {branch.stop_reason}; wrote {path}")
            visited.extend(branch_crossings(branch, r[free_index]))
    hits = []
    for i, q in enumerate(inst.instances):
        d = min((np.max(np.abs(v - q.u.as_array())) for v in visited),
                default=np.inf)
        hits.append(f"instance {i + 1}: nearest crossing {d:.3g}")
    print("coverage at the setpoint: " + "; ".join(hits))
    return 0


_COMMANDS = {
    "instances": cmd_instances,
    "gains": cmd_gains,
    "table1": cmd_table1,
    "iloop-sim": cmd_iloop_sim,
    "iloop-eigs": cmd_iloop_eigs,
    "mpc-sim": cmd_mpc_sim,
    "basins": cmd_basins,
    "continue": cmd_continue,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="inmux",
        description="Input-multiplicity control analysis for the 2x2 CSTR benchmark")
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **flags):
        sp = sub.add_parser(name)
        for flag, kw in flags.items():
            sp.add_argument(flag, **kw)
        return sp

    add("instances", **{"--r": {}, "--box-u1": {}, "--box-u2": {}, "--grid": {}})
    add("gains", **{"--r": {}})
    add("table1", **{"--r": {}})
    add("iloop-sim", **{"--r": {}, "--pairing": {}, "--signs": {},
                        "--magnitudes": {}, "--k": {"type": float},
                        "--x0": {}, "--u0": {}, "--t-final": {"type": float}})
    add("iloop-eigs", **{"--r": {}, "--pairing": {}, "--signs": {},
                         "--magnitudes": {}, "--k": {"type": float}})
    add("mpc-sim", **{"--r": {}, "--x0": {}, "--u0": {},
                      "--steps": {"type": int}})
    add("basins", **{"--r": {}, "--slice": {}, "--y0": {}, "--u0": {},
                     "--res": {"type": int}, "--refine": {"type": int},
                     "--max-steps": {"type": int}, "--threads": {"type": int}})
    add("continue", **{"--r": {}, "--from-instance": {"type": int},
                       "--fix": {}, "--ds": {"type": float},
                       "--s-max": {"type": float}})
    return parser


def _apply_flags(cfg, args):
    if args.out:
        cfg["output"]["dir"] = args.out
    if getattr(args, "r", None):
        cfg["setpoint"] = _pair(args.r, "--r")
    flag_map = {
        "box_u1": ("instances", "u1_range", lambda v: _pair(v, "--box-u1")),
        "box_u2": ("instances", "u2_range", lambda v: _pair(v, "--box-u2")),
        "grid": ("instances", "grid",
                 lambda v: [int(x) for x in _pair(v, "--grid")]),
        "pairing": ("pairing", "order", str),
        "signs": ("pairing", "signs", str),
        "magnitudes": ("pairing", "magnitudes",
                       lambda v: v if v == "witness" else _pair(v, "--magnitudes")),
        "k": ("iloop", "k", float),
        "t_final": ("iloop", "t_final", float),
        "steps": ("mpc", "steps", int),
        "slice": ("basins", "slice", str),
        "res": ("basins", "res", int),
        "refine": ("basins", "refine", int),
        "max_steps": ("basins", "max_steps", int),
        "threads": ("basins", "threads", int),
        "from_instance": ("continuation", "from_instance", int),
        "fix": ("continuation", "fix", str),
        "ds": ("continuation", "ds", float),
        "s_max": ("continuation", "s_max", float),
    }
    for attr, (section, key, conv) in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg[section][key] = conv(val)
    # x0/u0/y0 land in different sections depending on the subcommand
    if getattr(args, "x0", None):
        cfg["iloop" if args.command.startswith("iloop") else "mpc"]["x0"] = \
            _pair(args.x0, "--x0")
    if getattr(args, "u0", None):
        section = "basins" if args.command == "basins" else (
            "iloop" if args.command.startswith("iloop") else "mpc")
        cfg[section]["u0"] = _pair(args.u0, "--u0")
    if getattr(args, "y0", None):
        cfg["basins"]["y0"] = _pair(args.y0, "--y0")
    return cfg


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = _apply_flags(cfg, args)
        return _COMMANDS[args.command](cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (SolverError, IntegrationError, np.linalg.LinAlgError) as err:
        print(f"computation failed: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
