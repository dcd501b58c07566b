"""Ledgers, the four headline metrics, and comparison artifacts."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class NoRealtimeDeliveries(ValueError):
    """Jitter metrics requested on a ledger without real-time deliveries."""


@dataclass
class MetricsLedger:
    mode: str = ""
    config_hash: str = ""
    jitter_samples_ms: dict = field(default_factory=dict)   # flow -> list of samples
    latencies_ms: dict = field(default_factory=dict)        # flow -> list
    delivered_data_pkts: int = 0
    delivered_dummy_pkts: int = 0
    nominal_pkts: int = 0
    rt_delivered: int = 0
    anonymity_set_sizes: list = field(default_factory=list)
    barrier_h_before: list = field(default_factory=list)
    barrier_h_after: list = field(default_factory=list)
    detection_curves: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.delivered_data_pkts < 0 or self.delivered_dummy_pkts < 0 or self.nominal_pkts < 0:
            raise ValueError("ledger counters must be non-negative")

    def all_jitter(self) -> np.ndarray:
        parts = [np.asarray(v, dtype=float) for _, v in sorted(self.jitter_samples_ms.items())]
        return np.concatenate(parts) if parts else np.zeros(0)

    def merge(self, other: "MetricsLedger") -> "MetricsLedger":
        """Concatenate two ledgers of the same mode (replications)."""
        out = MetricsLedger(self.mode or other.mode, self.config_hash or other.config_hash)
        for src in (self, other):
            for f, v in src.jitter_samples_ms.items():
                out.jitter_samples_ms.setdefault(f, []).extend(v)
            for f, v in src.latencies_ms.items():
                out.latencies_ms.setdefault(f, []).extend(v)
            out.delivered_data_pkts += src.delivered_data_pkts
            out.delivered_dummy_pkts += src.delivered_dummy_pkts
            out.nominal_pkts += src.nominal_pkts
            out.rt_delivered += src.rt_delivered
            out.anonymity_set_sizes.extend(src.anonymity_set_sizes)
            out.barrier_h_before.extend(src.barrier_h_before)
            out.barrier_h_after.extend(src.barrier_h_after)
            out.detection_curves.extend(src.detection_curves)
        return out

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "config_hash": self.config_hash,
            "delivered_data_pkts": int(self.delivered_data_pkts),
            "delivered_dummy_pkts": int(self.delivered_dummy_pkts),
            "nominal_pkts": int(self.nominal_pkts),
            "rt_delivered": int(self.rt_delivered),
            "jitter_samples_ms": {str(k): [float(x) for x in v]
                                  for k, v in sorted(self.jitter_samples_ms.items())},
            "anonymity_set_sizes": [float(x) for x in self.anonymity_set_sizes],
            "extra": self.extra,
        }


def merge_ledgers(ledgers) -> MetricsLedger:
    ledgers = list(ledgers)
    if not ledgers:
        return MetricsLedger()
    out = ledgers[0]
    for lg in ledgers[1:]:
        out = out.merge(lg)
    return out


# ---------------------------------------------------------------- metrics


def _ecdf(x: np.ndarray):
    x = np.sort(np.asarray(x, dtype=float))
    vals, counts = np.unique(x, return_counts=True)
    cum = np.cumsum(counts) / len(x)
    return list(zip(vals.tolist(), cum.tolist()))


def jitter_cdf(ledger: MetricsLedger):
    x = ledger.all_jitter()
    if x.size == 0:
        raise NoRealtimeDeliveries("no real-time deliveries")
    return _ecdf(x)


def compliance(ledger: MetricsLedger, dmax_ms: float) -> float:
    x = ledger.all_jitter()
    if x.size == 0:
        raise NoRealtimeDeliveries("no real-time deliveries")
    return float(np.mean(x <= dmax_ms))


def percentile_nearest_rank(x, q: float) -> float:
    """Nearest-rank percentile: the ``ceil(q/100 * n)``-th smallest sample."""
    x = np.sort(np.asarray(x, dtype=float))
    if x.size == 0:
        raise NoRealtimeDeliveries("no real-time deliveries")
    k = int(np.ceil(q / 100.0 * x.size))
    return float(x[min(max(k, 1), x.size) - 1])


def p99_jitter(ledger: MetricsLedger) -> float:
    return percentile_nearest_rank(ledger.all_jitter(), 99.0)


def saet(ledger: MetricsLedger, count_dummies: bool = False) -> float:
    """Delivered data over nominal data; dummies count only with ``count_dummies``."""
    if ledger.nominal_pkts <= 0:
        raise ValueError("saet needs nominal_pkts > 0")
    num = ledger.delivered_data_pkts + (ledger.delivered_dummy_pkts if count_dummies else 0)
    return float(num / ledger.nominal_pkts)


def anonymity_cdf(ledger: MetricsLedger):
    """``(cdf points, median)`` of effective anonymity set sizes."""
    x = np.asarray(ledger.anonymity_set_sizes, dtype=float)
    if x.size == 0:
        raise ValueError("no anonymity posteriors")
    return _ecdf(x), float(np.median(x))


# ---------------------------------------------------------------- comparison


def summarize(ledger: MetricsLedger, dmax_ms: float) -> dict:
    out = {"saet": saet(ledger) if ledger.nominal_pkts else None,
           "rt_delivered": int(ledger.rt_delivered)}
    try:
        out["jitter_compliance"] = compliance(ledger, dmax_ms)
        out["p99_jitter_ms"] = p99_jitter(ledger)
    except NoRealtimeDeliveries:
        out["jitter_compliance"] = None
        out["p99_jitter_ms"] = None
    out["median_anonymity"] = (float(np.median(ledger.anonymity_set_sizes))
                               if ledger.anonymity_set_sizes else None)
    return out


METRICS = ("jitter_compliance", "p99_jitter_ms", "median_anonymity", "saet")


def _paired(a, b):
    """Mean paired difference ``b - a`` and its standard error (None for one pair)."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    se = float(d.std(ddof=1) / np.sqrt(len(d))) if len(d) > 1 else None
    return float(d.mean()), se


def _ledger_of(cfg, mode, rep):
    from . import sim_engine
    return sim_engine.run(cfg, mode, rep, record_trace=False).ledger


def compare(cfg, replications: int | None = None, detection: bool = True, jobs: int = 1) -> dict:
    """Run both modes over paired replications and collect the comparison report."""
    from . import sim_engine
    from .core_model import config_hash

    reps = int(replications or cfg.sim.replications)
    if reps < 1:
        raise ValueError("replications must be >= 1")
    jobs_ = [(m, r) for m in ("baseline", "cidp") for r in range(reps)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            out = list(ex.map(_ledger_of, [cfg] * len(jobs_), *zip(*jobs_)))
    else:
        out = [_ledger_of(cfg, m, r) for m, r in jobs_]
    runs = {"baseline": out[:reps], "cidp": out[reps:]}
    dmax = cfg.control.dmax_ms
    per_rep = {m: [summarize(lg, dmax) for lg in runs[m]] for m in runs}
    pooled = {m: summarize(merge_ledgers(runs[m]), dmax) for m in runs}
    rows = []
    for k in METRICS:
        a = [s[k] for s in per_rep["baseline"]]
        b = [s[k] for s in per_rep["cidp"]]
        if any(v is None for v in a + b):
            delta, se = None, None
        else:
            delta, se = _paired(a, b)
        rows.append({"metric": k, "baseline": pooled["baseline"][k], "cidp": pooled["cidp"][k],
                     "delta": delta, "delta_stderr": se})
    report = {
        "config_hash": config_hash(cfg),
        "replications": reps,
        "metrics": rows,
        "pooled": pooled,
        "ledgers": {m: merge_ledgers(runs[m]) for m in runs},
    }
    if detection:
        from .adversary import detection_sweep
        from .core_model import make_rng
        from .sltm_optimizer import design_for

        _, design = design_for(cfg)
        curves = {}
        for m, am in (("baseline", "static_baseline"), ("cidp", "cidp_sltm")):
            curves[m] = detection_sweep(cfg, am, design.schedule, make_rng(cfg.sim.seed, "detection"))
        report["detection"] = curves
    report["checks"] = ordering_checks(report, cfg)
    return report


def ordering_checks(report: dict, cfg) -> dict:
    """Orderings the comparison gates on."""
    p = report["pooled"]
    dmax = cfg.control.dmax_ms
    c, b = p["cidp"], p["baseline"]
    checks = {
        "cidp_compliance_full": c["jitter_compliance"] == 1.0,
        "baseline_compliance_below_full": b["jitter_compliance"] is not None and b["jitter_compliance"] < 1.0,
        "cidp_p99_within_dmax": c["p99_jitter_ms"] is not None and c["p99_jitter_ms"] <= dmax,
        "anonymity_ordering": (c["median_anonymity"] is not None and b["median_anonymity"] is not None
                               and c["median_anonymity"] >= 1.2 * b["median_anonymity"]),
    }
    return {k: bool(v) for k, v in checks.items()}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 12))
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def write_comparison(report: dict, out_dir) -> list[Path]:
    """``comparison.json``, ``comparison.csv``, ``jitter_cdf.csv``, ``anon_cdf.csv`` (+ ``detection.csv``)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = report["config_hash"]
    doc = {"config_hash": h, "replications": report["replications"], "metrics": report["metrics"],
           "checks": report["checks"]}
    if "detection" in report:
        doc["detection"] = {m: {"snr_db": c.snr_db.tolist(), "p_d": c.p_d.tolist(),
                                "stderr": c.stderr.tolist(), "theta_eve_deg": c.theta_eve_deg,
                                "inband_gain": c.gain}
                            for m, c in report["detection"].items()}
    files = []
    p = out / "comparison.json"
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    files.append(p)
    p = out / "comparison.csv"
    p.write_text(_csv_text(["config_hash", "metric", "baseline", "cidp", "delta", "delta_stderr"],
                           [[h, r["metric"], r["baseline"], r["cidp"], r["delta"], r["delta_stderr"]]
                            for r in report["metrics"]]))
    files.append(p)
    rows = []
    for m in ("baseline", "cidp"):
        try:
            rows += [[h, m, x, c] for x, c in jitter_cdf(report["ledgers"][m])]
        except NoRealtimeDeliveries:
            pass
    p = out / "jitter_cdf.csv"
    p.write_text(_csv_text(["config_hash", "mode", "jitter_ms", "cdf"], rows))
    files.append(p)
    rows = []
    for m in ("baseline", "cidp"):
        lg = report["ledgers"][m]
        if lg.anonymity_set_sizes:
            rows += [[h, m, x, c] for x, c in anonymity_cdf(lg)[0]]
    p = out / "anon_cdf.csv"
    p.write_text(_csv_text(["config_hash", "mode", "set_size", "cdf"], rows))
    files.append(p)
    if "detection" in report:
        files.append(write_detection(report["detection"].values(), out, h))
    return files


def write_detection(curves, out_dir, config_hash: str) -> Path:
    rows = []
    for c in curves:
        for s, pd, se in zip(c.snr_db, c.p_d, c.stderr):
            rows.append([config_hash, c.mode, float(s), float(pd), float(se)])
    p = Path(out_dir) / "detection.csv"
    p.write_text(_csv_text(["config_hash", "mode", "snr_db", "p_d", "stderr"], rows))
    return p
