"""Command-line front end: ``gmac-amp {region,se,simulate,sweep,thresholds}``.

Every run writes its CSV outputs plus ``manifest.json`` (config echo,
package version, wall-clock timings) into ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time

import numpy as np

from . import __version__, region, sim
from .amp import write_trial_csv
from .large_payload import (choose_coupling_params, large_payload_phase, s_amp, s_opt,
                            sc_design_params)
from .state_evolution import write_se_csv

THRESHOLD_CSV_HEADER = ["quantity", "value"]
SIM_CSV_HEADER = ["trial", "uer", "predicted_uer", "iterations", "final_mse", "mse_bound"]
SUMMARY_CSV_HEADER = ["mu", "ebn0_db", "trials", "sections", "uer_mean", "uer_se", "predicted_uer"]


def _load_config(args):
    cfg = sim.ExperimentConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            cfg = sim.parse_config(f.read(), cfg)
    cfg = sim.apply_preset(cfg, args.preset)
    over = {}
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.out is not None:
        over["out_dir"] = args.out
    for name in ("mu", "ebn0_db", "L", "trials"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    if "mu" in over:
        over["n"] = 0
    return sim.ExperimentConfig(**{**sim.asdict(cfg), **over})


def _mu_grid(cfg):
    return list(cfg.mu_grid) if cfg.mu_grid else [cfg.mu]


def cmd_region(cfg, args):
    curves = sim.emit_region(_mu_grid(cfg), cfg.prior(), cfg.target_uer)
    path = os.path.join(cfg.out_dir, "region.csv")
    region.write_region_csv(path, curves)
    with open(os.path.join(cfg.out_dir, "region.json"), "w") as f:
        json.dump([{"scheme": c.scheme, "target_uer": c.target_uer, "payload_bits": c.payload_bits,
                    "mu": c.mu, "min_ebn0_db": [None if math.isinf(v) else v for v in c.min_ebn0_db],
                    "reachable": c.reachable} for c in curves], f, indent=1)
    return ["region.csv", "region.json"]


def cmd_se(cfg, args):
    trace = sim._se_trace(cfg)
    write_se_csv(os.path.join(cfg.out_dir, "se.csv"), trace)
    return ["se.csv"]


def cmd_simulate(cfg, args):
    p = sim.run_point(cfg, args.threads)
    with open(os.path.join(cfg.out_dir, "trials.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SIM_CSV_HEADER)
        for r in p.results:
            w.writerow([r.seed[1], r.uer, r.predicted_uer, r.iterations_run, r.mse_trace[-1], r.mse_bound])
    with open(os.path.join(cfg.out_dir, "summary.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_CSV_HEADER)
        w.writerow([p.mu, p.ebn0_db, p.trials, p.sections, p.uer_mean, p.uer_se, p.predicted_uer])
    if p.results:
        write_trial_csv(os.path.join(cfg.out_dir, "trace_trial0.csv"), p.results[0])
    print(f"mu={p.mu:.5g} ebn0={p.ebn0_db:g} dB  UER={p.uer_mean:.4g} +- {p.uer_se:.2g}  "
          f"(SE prediction {p.predicted_uer:.4g}, {p.trials} trials)")
    return ["trials.csv", "summary.csv", "trace_trial0.csv"]


def cmd_sweep(cfg, args):
    def show(row):
        print(f"mu={row['mu']:.5g} omega={row['omega']} analytic={row['analytic_min_ebn0_db']:.3f} dB "
              f"empirical={row['empirical_min_ebn0_db']:.3f} dB")
    res = sim.sweep(cfg, args.threads, progress=show)
    res.write_csv(os.path.join(cfg.out_dir, "sweep.csv"))
    curves = sim.emit_region(_mu_grid(cfg) if cfg.mu_grid else [], cfg.prior(), cfg.target_uer)
    region.write_region_csv(os.path.join(cfg.out_dir, "region.csv"), curves)
    return ["sweep.csv", "region.csv"]


def cmd_thresholds(cfg, args):
    prior = cfg.prior()
    ebn0 = 10 ** (cfg.ebn0_db / 10)
    rows = [("ebn0_db", cfg.ebn0_db), ("S_amp", s_amp(ebn0)), ("S_opt", s_opt(ebn0))]
    S = cfg.mu_actual * prior.payload_bits
    rows.append(("S", S))
    if cfg.scheme == sim.SC:
        th = sc_design_params(cfg.mu_actual, cfg.B, ebn0, cfg.omega, cfg.lam)
        rows += [("theta", th.theta), ("Delta", th.Delta), ("omega_star", th.omega_star),
                 ("rho_star", th.rho_star), ("in_window", int(th.in_window))]
    ch = choose_coupling_params(S, ebn0)
    rows.append(("suggested_scheme", ch.kind))
    if ch.kind == "sc":
        rows += [("suggested_omega", ch.omega), ("suggested_lambda", ch.lam),
                 ("suggested_theta", ch.theta0)]
    if prior.kind == "flat" and cfg.B >= 2:
        ph = large_payload_phase(cfg.mu_actual, cfg.B, ebn0, args.delta, args.delta)
        rows += [("phase", ph.regime), ("phase_bound", ph.bound)]
    with open(os.path.join(cfg.out_dir, "thresholds.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(THRESHOLD_CSV_HEADER)
        w.writerows(rows)
    for k, v in rows:
        print(f"{k:>18} = {v}")
    return ["thresholds.csv"]


COMMANDS = {"region": cmd_region, "se": cmd_se, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "thresholds": cmd_thresholds}


def build_parser():
    p = argparse.ArgumentParser(prog="gmac-amp", description="AMP decoding for many-user Gaussian channels")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"region": "analytic minimum Eb/N0 curves and the converse bound",
             "se": "state-evolution trace at the configured point",
             "simulate": "Monte Carlo trials at one (mu, Eb/N0) point",
             "sweep": "empirical minimum Eb/N0 over the mu grid",
             "thresholds": "large-payload spectral-efficiency thresholds"}
    for name, h in helps.items():
        s = sub.add_parser(name, help=h)
        s.add_argument("--config", help="INI configuration file")
        s.add_argument("--seed", type=int, help="master seed (overrides [run] seed)")
        s.add_argument("--out", help="output directory (overrides [output] dir)")
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--preset", choices=["desk", "paper-scale"])
        s.add_argument("--mu", type=float)
        s.add_argument("--ebn0-db", dest="ebn0_db", type=float)
        s.add_argument("-L", type=int, dest="L")
        s.add_argument("--trials", type=int)
        if name == "thresholds":
            s.add_argument("--delta", type=float, default=0.1, help="slack for the phase test")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("--threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = _load_config(args)
    except (ValueError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    os.makedirs(cfg.out_dir, exist_ok=True)
    t0 = time.perf_counter()
    outputs = COMMANDS[args.command](cfg, args)
    elapsed = time.perf_counter() - t0
    manifest = {
        "command": args.command,
        "version": __version__,
        "config": cfg.to_dict(),
        "config_ini": sim.config_to_ini(cfg),
        "outputs": outputs,
        "threads": args.threads,
        "timings_s": {"total": elapsed},
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    with open(os.path.join(cfg.out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1, default=str)
    return 0


if __name__ == "__main__":
    sys.exit(main())
