"""Scenario configuration, deterministic random streams and trace events.

A scenario is one JSON document with the sections ``network``, ``flows``,
``control``, ``sltm``, ``adversary`` and ``sim``.  :func:`parse_config`
validates it and fills documented defaults; :func:`serialize_config` is its
inverse.

Random streams
--------------
:func:`make_rng` returns a :class:`numpy.random.Generator` driven by the
counter-based Philox4x64-10 bit generator.  The Philox key is derived from a
:class:`numpy.random.SeedSequence` whose entropy is ``(seed, *words(label))``
where ``words`` are the eight little-endian 32-bit words of
``blake2b(label, digest_size=32)``.  Identical ``(seed, label)`` pairs give
bit-identical streams on every platform numpy supports.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np


class ConfigError(ValueError):
    """Raised for schema or invariant violations; ``path`` names the offending key."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class FlowSpec:
    src: int
    dst: int
    rate_pkts_per_s: float
    period_ms: float = 0.0
    realtime: bool = False
    priority: int = 0


@dataclass(frozen=True)
class NetworkConfig:
    n_nodes: int
    area_m: float
    gamma0_db: float
    pathloss_exponent: float
    rician_k_db: float
    tx_power_dbm: float
    noise_dbm: float
    link_capacity: int = 1
    ref_gain_db: float = -40.0
    positions_m: tuple[tuple[float, float], ...] | None = None
    carrier: str = "X-band"


@dataclass(frozen=True)
class ControlConfig:
    V: float
    alpha: float
    dmax_ms: float
    t_align_ms: float | None = None
    v_max_ms: float | None = None
    h_dummy_bits: float = 1.0
    epoch_slots: int = 100


@dataclass(frozen=True)
class SltmConfig:
    m_elements: int
    spacing_wavelengths: float
    theta0_deg: float
    mask_exclusion_deg: float
    grid_step_deg: float
    subslots: int
    rho: float = 0.9
    equality_mode: bool = False
    ephy_theta_deg: float = 45.0
    mag_bins: int = 8
    phase_bins: int = 8
    tol: float = 1e-6


@dataclass(frozen=True)
class AdversaryConfig:
    snr_grid_db: tuple[float, ...]
    pfa: float
    window_samples: int
    mc_trials: int
    theta_eve_deg: float | None = None
    eve_position_m: tuple[float, float] | None = None
    eve_offset_db: float = 0.0
    tau: float = 1.0
    gamma: float = 0.1
    candidates: str = "all"


@dataclass(frozen=True)
class SimConfig:
    n_slots: int
    slot_ms: float
    seed: int
    replications: int = 1


@dataclass(frozen=True)
class ScenarioConfig:
    network: NetworkConfig
    flows: tuple[FlowSpec, ...]
    control: ControlConfig
    sltm: SltmConfig
    adversary: AdversaryConfig
    sim: SimConfig

    def replace(self, **sections: Any) -> "ScenarioConfig":
        """Copy with whole sections or ``section__field`` keys replaced."""
        out = {}
        nested: dict[str, dict[str, Any]] = {}
        for key, value in sections.items():
            if "__" in key:
                sec, name = key.split("__", 1)
                nested.setdefault(sec, {})[name] = value
            else:
                out[key] = value
        for sec, changes in nested.items():
            out[sec] = dataclasses.replace(out.get(sec, getattr(self, sec)), **changes)
        return dataclasses.replace(self, **out)


_SECTIONS = {
    "network": NetworkConfig,
    "control": ControlConfig,
    "sltm": SltmConfig,
    "adversary": AdversaryConfig,
    "sim": SimConfig,
}

_INT_FIELDS = {
    "n_nodes", "link_capacity", "epoch_slots", "m_elements", "subslots",
    "mag_bins", "phase_bins", "window_samples", "mc_trials", "n_slots",
    "seed", "replications", "src", "dst", "priority",
}


def _coerce(path: str, name: str, value: Any, f: dataclasses.Field) -> Any:
    if value is None:
        return None
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(path, "expected an integer")
        return int(value)
    if name in ("realtime", "equality_mode"):
        if not isinstance(value, bool):
            raise ConfigError(path, "expected a boolean")
        return value
    if name in ("carrier", "candidates"):
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    if name == "snr_grid_db":
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(path, "expected a non-empty list of numbers")
        return tuple(float(_num(f"{path}[{i}]", v)) for i, v in enumerate(value))
    if name in ("eve_position_m",):
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(path, "expected [x, y]")
        return (float(_num(path, value[0])), float(_num(path, value[1])))
    if name == "positions_m":
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, "expected a list of [x, y] pairs")
        pts = []
        for i, p in enumerate(value):
            if not isinstance(p, (list, tuple)) or len(p) != 2:
                raise ConfigError(f"{path}[{i}]", "expected [x, y]")
            pts.append((float(_num(f"{path}[{i}]", p[0])), float(_num(f"{path}[{i}]", p[1]))))
        return tuple(pts)
    return float(_num(path, value))


def _num(path: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, "expected a number")
    return value


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path, "expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}", "unknown key")
    kwargs = {}
    for name, f in fields.items():
        sub = f"{path}.{name}"
        if name in data:
            kwargs[name] = _coerce(sub, name, data[name], f)
        elif f.default is dataclasses.MISSING:
            raise ConfigError(sub, "required key missing")
    return cls(**kwargs)


def _check(cond: bool, path: str, invariant: str) -> None:
    if not cond:
        raise ConfigError(path, f"invariant violated: {invariant}")


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    n = cfg.network
    _check(n.n_nodes >= 2, "network.n_nodes", "network.n_nodes ≥ 2")
    _check(n.area_m > 0, "network.area_m", "network.area_m > 0")
    _check(n.link_capacity >= 0, "network.link_capacity", "network.link_capacity ≥ 0")
    if n.positions_m is not None:
        _check(len(n.positions_m) == n.n_nodes, "network.positions_m",
               "len(network.positions_m) = n_nodes")
    c = cfg.control
    _check(c.V >= 0, "control.V", "control.V ≥ 0")
    _check(0 < c.alpha < 1, "control.alpha", "control.alpha ∈ (0,1)")
    _check(c.dmax_ms > 0, "control.dmax_ms", "control.dmax_ms > 0")
    _check(c.t_align_ms is None or c.t_align_ms > 0, "control.t_align_ms", "control.t_align_ms > 0")
    _check(c.v_max_ms is None or c.v_max_ms > 0, "control.v_max_ms", "control.v_max_ms > 0")
    _check(c.epoch_slots >= 1, "control.epoch_slots", "control.epoch_slots ≥ 1")
    s = cfg.sltm
    _check(s.m_elements >= 2, "sltm.m_elements", "sltm.m_elements ≥ 2")
    _check(s.subslots >= 1, "sltm.subslots", "sltm.subslots ≥ 1")
    _check(s.grid_step_deg > 0, "sltm.grid_step_deg", "sltm.grid_step_deg > 0")
    _check(s.mask_exclusion_deg > 0, "sltm.mask_exclusion_deg", "sltm.mask_exclusion_deg > 0")
    _check(0 < s.rho <= 1, "sltm.rho", "sltm.rho ∈ (0,1]")
    _check(s.tol > 0, "sltm.tol", "sltm.tol > 0")
    _check(s.mag_bins >= 1 and s.phase_bins >= 1, "sltm.mag_bins", "quantization bins ≥ 1")
    a = cfg.adversary
    _check(0 < a.pfa < 1, "adversary.pfa", "adversary.pfa ∈ (0,1)")
    _check(a.window_samples >= 1, "adversary.window_samples", "adversary.window_samples ≥ 1")
    _check(a.mc_trials >= 1, "adversary.mc_trials", "adversary.mc_trials ≥ 1")
    _check(a.tau >= 0 and a.gamma >= 0, "adversary.gamma", "adversary.tau, gamma ≥ 0")
    _check(a.candidates in ("all", "active"), "adversary.candidates",
           "adversary.candidates ∈ {all, active}")
    m = cfg.sim
    _check(m.n_slots >= 0, "sim.n_slots", "sim.n_slots ≥ 0")
    _check(m.slot_ms > 0, "sim.slot_ms", "sim.slot_ms > 0")
    _check(0 <= m.seed < 2**64, "sim.seed", "sim.seed is a 64-bit unsigned integer")
    _check(m.replications >= 1, "sim.replications", "sim.replications ≥ 1")
    for i, fl in enumerate(cfg.flows):
        p = f"flows[{i}]"
        _check(fl.src != fl.dst, p, f"{p}.src ≠ {p}.dst")
        _check(0 <= fl.src < n.n_nodes and 0 <= fl.dst < n.n_nodes, p,
               f"{p}.src, {p}.dst < network.n_nodes")
        _check(fl.rate_pkts_per_s > 0, f"{p}.rate_pkts_per_s", f"{p}.rate_pkts_per_s > 0")
        _check(not fl.realtime or fl.period_ms > 0, f"{p}.period_ms",
               f"{p}.period_ms > 0 when realtime")
    return cfg


def config_from_dict(doc: Any) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("$", "expected an object")
    unknown = sorted(set(doc) - set(_SECTIONS) - {"flows"})
    if unknown:
        raise ConfigError(unknown[0], "unknown section")
    sections = {}
    for name, cls in _SECTIONS.items():
        if name not in doc:
            raise ConfigError(name, "required section missing")
        sections[name] = _build(cls, doc[name], name)
    flows = doc.get("flows")
    if not isinstance(flows, list) or not flows:
        raise ConfigError("flows", "expected a non-empty list")
    sections["flows"] = tuple(_build(FlowSpec, f, f"flows[{i}]") for i, f in enumerate(flows))
    return validate(ScenarioConfig(**sections))


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a JSON scenario document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"malformed JSON: {exc}") from None
    return config_from_dict(doc)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    def conv(obj):
        if isinstance(obj, tuple):
            return [conv(o) for o in obj]
        return obj

    out = {name: {k: conv(v) for k, v in dataclasses.asdict(getattr(cfg, name)).items()}
           for name in _SECTIONS}
    out["flows"] = [dataclasses.asdict(f) for f in cfg.flows]
    return out


def serialize_config(cfg: ScenarioConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)


def config_hash(cfg: ScenarioConfig) -> str:
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def paper_scenario_text() -> str:
    return resources.files("cidp.scenarios").joinpath("paper_scenario.json").read_text("utf-8")


def load_paper_scenario() -> ScenarioConfig:
    """The shipped desk-scale reproduction of the evaluation setup (N = 16 assumed)."""
    return parse_config(paper_scenario_text())


def _label_words(label: str) -> list[int]:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=32).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 32, 4)]


def make_rng(seed: int, stream_label: str) -> np.random.Generator:
    """Independent deterministic stream for ``(seed, stream_label)``."""
    seed = int(seed)
    entropy = [seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF, *_label_words(stream_label)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


TRACE_KINDS = ("arrival", "forward", "dummy", "hold", "deliver", "drop", "barrier_violation")


@dataclass(frozen=True)
class TraceEvent:
    slot: int
    kind: str
    flow: int
    node: int
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"slot": self.slot, "kind": self.kind, "flow": self.flow,
                           "node": self.node, "payload": self.payload}, sort_keys=True)


def write_trace(events, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(ev.to_json())
            fh.write("\n")
