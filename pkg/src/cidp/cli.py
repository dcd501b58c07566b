"""Command line entry point: ``cidp run|compare|detect|bound|sltm-design``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import core_model


def _load(path):
    return core_model.load_paper_scenario() if path in (None, "paper") else core_model.load_config(path)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def _dump(obj, path: Path):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def cmd_run(a) -> int:
    from .sim_engine import run

    cfg = _load(a.config)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    r = run(cfg, a.mode, a.replication, record_trace=True)
    core_model.write_trace(r.trace, out / "trace.jsonl")
    _dump(r.ledger.to_dict(), out / "ledger.json")
    print(f"{a.mode}: {len(r.trace)} events, {r.ledger.rt_delivered} real-time deliveries -> {out}")
    return 0


def cmd_compare(a) -> int:
    from .metrics_reporting import compare, write_comparison

    cfg = _load(a.config)
    report = compare(cfg, a.reps, detection=not a.no_detection, jobs=a.jobs)
    write_comparison(report, a.out)
    for row in report["metrics"]:
        print(f"{row['metric']:>18}  baseline={row['baseline']}  cidp={row['cidp']}")
    failed = [k for k, ok in report["checks"].items() if not ok]
    for k in failed:
        print(f"ordering check failed: {k}", file=sys.stderr)
    return 1 if failed else 0


def cmd_detect(a) -> int:
    from .adversary import detection_sweep
    from .metrics_reporting import write_detection
    from .sltm_optimizer import design_for

    cfg = _load(a.config)
    _, design = design_for(cfg)
    curves = [detection_sweep(cfg, am, design.schedule, core_model.make_rng(cfg.sim.seed, "detection"))
              for am in ("static_baseline", "cidp_sltm")]
    curves[0].mode, curves[1].mode = "baseline", "cidp"
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    write_detection(curves, out, core_model.config_hash(cfg))
    for c in curves:
        print(c.mode, " ".join(f"{s:g}:{p:.4f}" for s, p in c.points))
    return 0


def cmd_bound(a) -> int:
    from .adversary import TrilemmaInputs, delta_floor

    print(repr(delta_floor(TrilemmaInputs(a.tau, a.beta, a.lam, a.gamma, a.ephy))))
    return 0


def cmd_sltm_design(a) -> int:
    from .metrics_reporting import _csv_text
    from .sltm_optimizer import design_for, pattern

    cfg = _load(a.config)
    sc = cfg.sltm
    p, d = design_for(cfg)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    theta = np.arange(-90.0, 90.0 + 1e-9, sc.grid_step_deg)
    F = np.atleast_2d(pattern(d.schedule.astype(float), theta, sc.theta0_deg, sc.spacing_wavelengths))
    if F.shape[0] != theta.size:
        F = F.T
    K = F.shape[1]
    header = ["theta_deg"] + [f"subslot_{k}" for k in range(K)] + ["time_averaged", "relaxed"]
    relaxed = np.abs(pattern(d.s_relaxed, theta, sc.theta0_deg, sc.spacing_wavelengths))
    rows = [[float(th)] + np.abs(F[i]).tolist() + [float(abs(F[i].mean())), float(relaxed[i])]
            for i, th in enumerate(theta)]
    (out / "pattern.csv").write_text(_csv_text(header, rows))
    _dump({"config_hash": core_model.config_hash(cfg), "s_relaxed": d.s_relaxed,
           "eta_star": d.eta_star, "schedule": d.schedule, "e_phy_bits": d.e_phy_bits,
           "kkt_residual": d.kkt_residual, "feasibility_residual": d.feasibility_residual,
           "static_peak_sidelobe": float(np.abs(pattern(np.ones(p.m), p.mask_angles_deg,
                                                         sc.theta0_deg, sc.spacing_wavelengths)).max())},
          out / "design.json")
    print(f"eta_star={d.eta_star:.6f} gap={d.kkt_residual:.2e} e_phy={d.e_phy_bits:.4f} bits")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cidp")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="simulate one replication")
    p.add_argument("--config", default=None, help="scenario JSON (default: bundled scenario)")
    p.add_argument("--mode", choices=("cidp", "baseline"), required=True)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("compare", help="paired comparison of both modes")
    p.add_argument("--config", default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-detection", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("detect", help="radiometer detection curves")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("bound", help="anonymity floor")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--ephy", type=float, default=0.0)
    p.set_defaults(fn=cmd_bound)

    p = sub.add_parser("sltm-design", help="solve and round the SLTM design")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sltm_design)
    return ap


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    try:
        return a.fn(a)
    except (core_model.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
