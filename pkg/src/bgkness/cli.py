"""Command line front end.

Usage:  bgkness <subcommand> --config path/to/run.toml [--out DIR] [--seed N]

Subcommands: ness, bounds, lipschitz, linearize, gap, evolve, simulate,
doeblin, perturb, all.  Configuration is TOML with strict key checking:
unknown sections or keys abort with exit code 3 so typos cannot silently
fall back to defaults.  Convergence failures exit with code 2.

Every run writes records.ndjson (one JSON object per result, deterministic
for a fixed config and seed), one CSV per subcommand where tabular output
makes sense, and meta.json (timestamps and argv live only there, keeping
the data files byte-reproducible).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np
import tomli

from . import __version__
from .model import (DomainError, Params, constant_profile, cosine_profile,
                    make_grid, maxwellian, KineticState, Profile)
from .steady_state import (ConvergenceError, check_bounds, fixed_point,
                           lipschitz_probe)
from .linearized import (assemble_L, split_CT, closed_form_defects,
                         coercivity_report, spectral_gap, operator_A,
                         entropy_eps_scan, perturbation_scaling)
from .evolution import evolve_nonlinear, decay_rate
from . import particle as pt
from ._jump_py import _interp_periodic


class ConfigError(Exception):
    pass


_SCHEMA = {
    "params": {"alpha": 0.1, "kappa": 1.0},
    "tau": {"kind": "constant", "tau0": 5.0, "amplitude": 0.5,
            "harmonics": 1, "table": []},
    "grid": {"nx": 32, "nv": 64, "vmax": 0.0},
    "fixed_point": {"tol": 1e-13, "max_iter": 200, "damping": 1.0,
                    "T_init": 0.0},
    "gap": {"method": "dense", "eps_entropy": "auto", "t_end": 14.0,
            "dt": 0.002, "sample_every": 25},
    "evolve": {"t_end": 50.0, "dt": 0.005, "observe_dt": 5.0,
               "start": "maxwellian"},
    "sim": {"n_particles": 200000, "t_end": 2.0, "observe_dt": 0.25,
            "seed": 1234, "mode": "linear", "cells": 32,
            "min_occupancy": 50, "backend": "auto"},
    "doeblin": {"diracs": [[0.1, 0.3], [0.35, -0.7], [0.5, 0.0],
                           [0.65, 1.0], [0.9, -0.5]],
                "t_star": 2.0, "n_particles": 1000000,
                "cells_x": 32, "cells_v": 16, "vmin": -1.0, "vmax": 1.0},
    "lipschitz": {"n_pairs": 20, "seed": 0},
    "perturb": {"eps": [0.01, 0.02, 0.05, 0.1], "n_samples": 40, "seed": 5},
    "output": {"dir": "out"},
}

# zero-valued sentinels above mean "derive a default at run time"
_SENTINEL_KEYS = {("grid", "vmax"), ("fixed_point", "T_init")}

# keys that accept either a keyword string or a number
_UNION_KEYS = {("gap", "eps_entropy")}


def load_config(path: str) -> dict:
    """Read TOML, reject unknown keys, fill defaults."""
    try:
        with open(path, "rb") as fh:
            user = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"bad TOML in {path}: {exc}")
    cfg = {}
    for sec, defaults in _SCHEMA.items():
        cfg[sec] = dict(defaults)
    for sec, body in user.items():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown config section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"section [{sec}] must be a table")
        for key, val in body.items():
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key {sec}.{key}")
            ref = _SCHEMA[sec][key]
            if (sec, key) in _UNION_KEYS:
                if isinstance(val, bool) or not isinstance(val, (str, int, float)):
                    raise ConfigError(f"{sec}.{key} must be a string or number")
            elif isinstance(ref, bool) != isinstance(val, bool):
                raise ConfigError(f"bad type for {sec}.{key}")
            elif isinstance(ref, (int, float)) and not isinstance(val, (int, float)):
                raise ConfigError(f"{sec}.{key} must be a number")
            elif isinstance(ref, str) and not isinstance(val, str):
                raise ConfigError(f"{sec}.{key} must be a string")
            elif isinstance(ref, list) and not isinstance(val, list):
                raise ConfigError(f"{sec}.{key} must be an array")
            cfg[sec][key] = val
    return cfg


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _build_tau(cfg) -> Profile:
    t = cfg["tau"]
    nx = cfg["grid"]["nx"]
    if t["kind"] == "constant":
        return constant_profile(t["tau0"], nx)
    if t["kind"] == "cosine":
        return cosine_profile(t["tau0"], t["amplitude"], t["harmonics"], nx)
    if t["kind"] == "table":
        vals = np.asarray(t["table"], dtype=float)
        if vals.size != nx:
            raise ConfigError(f"tau.table must have grid.nx = {nx} entries")
        if vals.min() <= 0.0:
            raise ConfigError("tau.table entries must be positive")
        return Profile(vals, kind="table")
    raise ConfigError(f"unknown tau.kind {t['kind']!r}")


def _build_grid(cfg, tau: Profile):
    g = cfg["grid"]
    vmax = g["vmax"]
    if vmax <= 0.0:
        vmax = 8.0 * float(np.sqrt(np.mean(tau.samples)))
        g["vmax"] = vmax   # resolved value shows up in output records
    return make_grid(g["nx"], g["nv"], vmax)


class RunWriter:
    """Accumulates NDJSON records and CSV tables for one invocation."""

    def __init__(self, out_dir: str, cfg: dict, argv):
        self.out_dir = out_dir
        self.cfg_hash = _config_hash(cfg)
        self.grid_info = cfg["grid"]   # shared: picks up the resolved vmax
        self.records = []
        self.csv_files = []
        self.argv = list(argv)
        os.makedirs(out_dir, exist_ok=True)

    def record(self, kind: str, payload: dict):
        rec = {"kind": kind, "config_hash": self.cfg_hash,
               "grid": self.grid_info, "version": __version__}
        rec.update(payload)
        self.records.append(rec)

    def table(self, name: str, header, rows):
        path = os.path.join(self.out_dir, name)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        self.csv_files.append(name)

    def finish(self, subcommand: str):
        self.record("manifest", {"subcommand": subcommand,
                                 "files": sorted(self.csv_files)})
        path = os.path.join(self.out_dir, "records.ndjson")
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(_jsonable(rec), sort_keys=True) + "\n")
        meta = {"created": datetime.now(timezone.utc).isoformat(),
                "argv": self.argv}
        with open(os.path.join(self.out_dir, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _solve(cfg, tau, grid):
    fp = cfg["fixed_point"]
    T0 = fp["T_init"] if fp["T_init"] > 0.0 else None
    p = Params(alpha=cfg["params"]["alpha"], kappa=cfg["params"]["kappa"])
    res = fixed_point(tau, p, grid, T0=T0, tol=fp["tol"],
                      max_iter=int(fp["max_iter"]), damping=fp["damping"])
    return p, res


def _ness_payload(res):
    return {"iterations": res.iterations,
            "converged": res.converged,
            "T_min": float(res.T.samples.min()),
            "T_max": float(res.T.samples.max()),
            "rho_min": float(res.rho.samples.min()),
            "rho_max": float(res.rho.samples.max()),
            "pressure": float(np.mean(res.moments.P)),
            "max_abs_u": float(np.max(np.abs(res.moments.u))),
            "mass_defect": float(abs(res.g.mass() - 1.0)),
            "collocation_residual": res.polish["residual"],
            "perron_defect": res.perron["eigenvalue_defect"],
            "ratio_trace": [float(r) for r in res.ratio_trace]}


def _setup(cfg):
    tau = _build_tau(cfg)
    grid = _build_grid(cfg, tau)
    p, res = _solve(cfg, tau, grid)
    return p, res, tau, grid


def cmd_ness(cfg, writer, seed, solved=None):
    p, res, tau, grid = solved or _setup(cfg)
    writer.record("ness", _ness_payload(res))
    m = res.moments
    rows = zip(grid.x, tau.samples, m.rho, m.u, m.P, m.T)
    writer.table("profiles.csv", ["x", "tau", "rho", "u", "P", "T"],
                 [[f"{v:.17g}" for v in row] for row in rows])
    return p, res, tau, grid


def cmd_bounds(cfg, writer, seed, solved=None):
    p, res, tau, grid = solved or _setup(cfg)
    rep = check_bounds(res, tau, p)
    writer.record("bounds", _jsonable(rep))
    return p, res, tau, grid


def cmd_lipschitz(cfg, writer, seed):
    tau = _build_tau(cfg)
    grid = _build_grid(cfg, tau)
    p = Params(alpha=cfg["params"]["alpha"], kappa=cfg["params"]["kappa"])
    lp = lipschitz_probe(tau, p, grid, n_pairs=int(cfg["lipschitz"]["n_pairs"]),
                         seed=int(cfg["lipschitz"]["seed"]))
    writer.record("lipschitz", _jsonable(lp))
    writer.table("lipschitz.csv", ["pair", "quotient"],
                 [[i, f"{r:.17g}"] for i, r in enumerate(lp["ratios"])])


def cmd_linearize(cfg, writer, seed, solved=None):
    p, res, tau, grid = solved or _setup(cfg)
    L = assemble_L(res.g, tau.samples, p)
    C, T_op = split_CT(L)
    defs = closed_form_defects(res.g, tau.samples, p)
    rep = coercivity_report(C, T_op)
    writer.record("linearize", {
        "lambda_micro": rep.lambda_micro,
        "lambda_micro_sampling": rep.lambda_micro_sampling,
        "min_sample_quotient": rep.min_sample_quotient,
        "lambda_macro": rep.lambda_macro,
        "macro_form_reldiff": rep.macro_form_reldiff,
        "basis_residual": rep.basis_residual,
        "dict_dim": rep.dict_dim,
        "defects": {k: v for k, v in defs.items()
                    if isinstance(v, (int, float))}})
    return p, res, tau, grid, L


def cmd_gap(cfg, writer, seed, solved=None):
    if solved is None:
        p, res, tau, grid = _setup(cfg)
        L = assemble_L(res.g, tau.samples, p)
    else:
        p, res, tau, grid, L = solved
    gcfg = cfg["gap"]
    if gcfg["method"] == "dense":
        gr = spectral_gap(L)
        dec = decay_rate(L, t_end=gcfg["t_end"], dt=gcfg["dt"],
                         sample_every=int(gcfg["sample_every"]))
        reldiff = abs(dec["rate"] - gr.gap) / gr.gap
        payload = {"method": "dense", "gap": gr.gap,
                   "n_zero_modes": gr.n_zero_modes,
                   "zero_mode_alignment": gr.zero_mode_alignment,
                   "decay_rate": dec["rate"],
                   "decay_gap_reldiff": reldiff,
                   "decay_inconclusive": dec["inconclusive"]}
        lam = np.sort_complex(gr.eigenvalues)
        writer.table("spectrum.csv", ["re", "im"],
                     [[f"{z.real:.17g}", f"{z.imag:.17g}"] for z in lam])
    elif gcfg["method"] == "evolve":
        dec = decay_rate(L, t_end=gcfg["t_end"], dt=gcfg["dt"],
                         sample_every=int(gcfg["sample_every"]))
        payload = {"method": "evolve", "decay_rate": dec["rate"],
                   "fit_residual": dec["fit_residual"],
                   "decay_inconclusive": dec["inconclusive"]}
        writer.table("decay.csv", ["t", "norm"],
                     [[f"{t:.17g}", f"{n:.17g}"]
                      for t, n in zip(dec["times"], dec["norms"])])
    else:
        raise ConfigError(f"unknown gap.method {gcfg['method']!r}")
    if gcfg["eps_entropy"] == "auto":
        C, T_op = split_CT(L)
        A = operator_A(T_op, L=L)
        scan = entropy_eps_scan(L, C, A)
        payload["eps_entropy"] = scan["eps"]
        payload["entropy_scan"] = _jsonable(scan["table"])
    elif isinstance(gcfg["eps_entropy"], (int, float)):
        payload["eps_entropy"] = float(gcfg["eps_entropy"])
    else:
        raise ConfigError("gap.eps_entropy must be 'auto' or a number")
    writer.record("gap", payload)


def cmd_evolve(cfg, writer, seed):
    p, res, tau, grid = _setup(cfg)
    e = cfg["evolve"]
    if e["start"] == "maxwellian":
        taubar = float(np.mean(tau.samples))
        f0 = KineticState(np.tile(maxwellian(grid.v, 0.0, taubar),
                                  (grid.nx, 1)), grid)
    elif e["start"] == "ness":
        f0 = res.g.copy()
    else:
        raise ConfigError(f"unknown evolve.start {e['start']!r}")
    log = evolve_nonlinear(f0, e["t_end"], e["dt"], tau, p,
                           observe_dt=e["observe_dt"], reference=res.g)
    rows = []
    for i, t in enumerate(log.times):
        m = log.moments[i]
        rows.append([f"{t:.17g}", f"{log.mass[i]:.17g}",
                     f"{log.dist[i]:.17g}",
                     f"{float(np.min(m.T)):.17g}", f"{float(np.max(m.T)):.17g}",
                     f"{float(np.max(np.abs(m.u))):.17g}"])
    writer.table("trajectory.csv",
                 ["t", "mass", "dist_to_ness", "T_min", "T_max", "u_max"],
                 rows)
    writer.record("evolve", {"t_end": e["t_end"], "dt": e["dt"],
                             "start": e["start"],
                             "final_dist": float(log.dist[-1]),
                             "mass_drift": float(abs(log.mass[-1] - log.mass[0]))})


def cmd_simulate(cfg, writer, seed):
    p, res, tau, grid = _setup(cfg)
    s = cfg["sim"]
    sim_seed = seed if seed is not None else int(s["seed"])
    backend = None if s["backend"] == "auto" else s["backend"]
    profiles = {"tau": tau, "T": res.T}
    ens = pt.sample_ness(res, int(s["n_particles"]), sim_seed)
    n_int = int(round(s["t_end"] / s["observe_dt"]))
    cells = int(s["cells"])
    rows = []
    fallback_any = []
    for k in range(1, n_int + 1):
        ens = pt.step_ensemble(ens, s["observe_dt"], s["mode"], profiles, p,
                               cells=cells,
                               min_occupancy=int(s["min_occupancy"]),
                               backend=backend)
        cs = pt.empirical_moments(ens, cells)
        fallback_any.extend(ens.meta.get("fallback_cells", []))
        for c in range(cells):
            rows.append([k, f"{ens.time:.17g}", c, int(cs.counts[c]),
                         f"{cs.rho[c]:.17g}", f"{cs.u[c]:.17g}",
                         f"{cs.T[c]:.17g}"])
    writer.table("moments.csv",
                 ["interval", "time", "cell", "count", "rho", "u", "T"], rows)
    cs = pt.empirical_moments(ens, cells)
    xc = (np.arange(cells) + 0.5) / cells
    Tref = _interp_periodic(xc, res.T.samples)
    sig = pt.meanfield_sigma(Tref, np.maximum(cs.counts, 1))
    writer.record("simulate", {
        "mode": s["mode"], "n_particles": int(s["n_particles"]),
        "seed": sim_seed, "t_end": s["t_end"],
        "backend": backend or pt.default_backend(),
        "fallback_cells": sorted(set(fallback_any)),
        "final_max_z_T": float(np.max(np.abs((cs.T - Tref) / sig["sigma_T"]))),
        "final_max_z_u": float(np.max(np.abs(cs.u / sig["sigma_u"])))})


def cmd_doeblin(cfg, writer, seed):
    p, res, tau, grid = _setup(cfg)
    d = cfg["doeblin"]
    sim_seed = seed if seed is not None else int(cfg["sim"]["seed"])
    profiles = {"tau": tau, "T": res.T}
    rows = []
    betas = []
    for i, (x0, v0) in enumerate(d["diracs"]):
        out = pt.doeblin_check(x0, v0, d["t_star"], int(d["n_particles"]),
                               sim_seed, profiles, p,
                               cells=(int(d["cells_x"]), int(d["cells_v"])),
                               v_window=(d["vmin"], d["vmax"]))
        betas.append(out["beta_hat"])
        rows.append([i, f"{x0:.17g}", f"{v0:.17g}",
                     f"{out['beta_hat']:.17g}", out["min_count"], out["n"]])
    writer.table("cells.csv",
                 ["dirac", "x0", "v0", "beta_hat", "min_count", "n"], rows)
    bm = float(np.mean(betas))
    spread = float(max(abs(b - bm) for b in betas) / bm) if bm > 0 else None
    writer.record("doeblin", {"beta_hats": betas, "mean_beta": bm,
                              "max_rel_dev": spread,
                              "t_star": d["t_star"],
                              "n_particles": int(d["n_particles"]),
                              "seed": sim_seed,
                              "positive": bool(min(betas) > 0.0)})


def cmd_perturb(cfg, writer, seed):
    tau = _build_tau(cfg)
    grid = _build_grid(cfg, tau)
    if tau.kind != "constant":
        raise ConfigError("perturb requires tau.kind = 'constant' "
                          "(the scan perturbs around it)")
    p = Params(alpha=cfg["params"]["alpha"], kappa=cfg["params"]["kappa"])
    pr = cfg["perturb"]
    out = perturbation_scaling(float(cfg["tau"]["tau0"]),
                               [float(e) for e in pr["eps"]], p, grid,
                               n_samples=int(pr["n_samples"]),
                               seed=int(pr["seed"]))
    writer.record("perturb", _jsonable(out))
    writer.table("perturb.csv", ["eps", "op_diff", "gap"],
                 [[f"{e:.17g}", f"{d:.17g}", f"{g:.17g}"]
                  for e, d, g in zip(out["eps"], out["diff_norms"],
                                     out["gaps"])])


def cmd_all(cfg, writer, seed):
    solved = _setup(cfg)
    cmd_ness(cfg, writer, seed, solved=solved)
    cmd_bounds(cfg, writer, seed, solved=solved)
    out = cmd_linearize(cfg, writer, seed, solved=solved)
    cmd_gap(cfg, writer, seed, solved=out)


_COMMANDS = {
    "ness": cmd_ness, "bounds": cmd_bounds, "lipschitz": cmd_lipschitz,
    "linearize": cmd_linearize, "gap": cmd_gap, "evolve": cmd_evolve,
    "simulate": cmd_simulate, "doeblin": cmd_doeblin, "perturb": cmd_perturb,
    "all": cmd_all,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bgkness",
        description="steady states, spectral gaps and particle runs for a "
                    "thermostatted kinetic relaxation model on the torus")
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="TOML run config")
    parser.add_argument("--out", default=None,
                        help="output directory (default: config output.dir, "
                             "or BGKNESS_OUT)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override particle seed (or BGKNESS_SEED)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3

    out_dir = args.out or os.environ.get("BGKNESS_OUT") or cfg["output"]["dir"]
    seed = args.seed
    if seed is None and "BGKNESS_SEED" in os.environ:
        try:
            seed = int(os.environ["BGKNESS_SEED"])
        except ValueError:
            print("config error: BGKNESS_SEED must be an integer",
                  file=sys.stderr)
            return 3

    writer = RunWriter(out_dir, cfg, argv if argv is not None else sys.argv[1:])
    try:
        _COMMANDS[args.subcommand](cfg, writer, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    writer.finish(args.subcommand)
    return 0


if __name__ == "__main__":
    sys.exit(main())
