import json

import numpy as np
import pytest

from cidp.core_model import (ConfigError, TraceEvent, config_from_dict, config_hash, config_to_dict,
                             load_paper_scenario, make_rng, parse_config, paper_scenario_text,
                             serialize_config, write_trace)


def test_paper_scenario_loads(paper_cfg):
    assert paper_cfg.network.n_nodes == 16
    assert any(f.realtime for f in paper_cfg.flows)
    assert any(not f.realtime for f in paper_cfg.flows)


def test_round_trip_and_hash(paper_cfg):
    again = parse_config(serialize_config(paper_cfg))
    assert again == paper_cfg
    assert config_hash(again) == config_hash(paper_cfg)
    changed = paper_cfg.replace(sim__seed=paper_cfg.sim.seed + 1)
    assert config_hash(changed) != config_hash(paper_cfg)


def test_defaults_applied():
    d = json.loads(paper_scenario_text())
    del d["control"]["epoch_slots"]
    cfg = config_from_dict(d)
    assert cfg.control.epoch_slots == 100
    assert cfg.control.t_align_ms is None


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["network"].update(bogus=1), "network.bogus"),
    (lambda d: d["network"].pop("n_nodes"), "network.n_nodes"),
    (lambda d: d["network"].update(n_nodes="16"), "network.n_nodes"),
    (lambda d: d["control"].update(alpha=1.5), "control.alpha"),
    (lambda d: d["flows"][0].update(dst=d["flows"][0]["src"]), "flows[0]"),
    (lambda d: d["flows"][0].update(src=99), "flows[0]"),
    (lambda d: d["adversary"].update(pfa=0.0), "adversary.pfa"),
    (lambda d: d.pop("sim"), "sim"),
])
def test_errors_name_the_path(mutate, path):
    d = json.loads(paper_scenario_text())
    mutate(d)
    with pytest.raises(ConfigError) as ei:
        config_from_dict(d)
    assert ei.value.path == path


def test_malformed_json():
    with pytest.raises(ConfigError):
        parse_config("{not json")


def test_rng_streams_deterministic_and_distinct():
    a = make_rng(7, "fading/0").random(5)
    b = make_rng(7, "fading/0").random(5)
    c = make_rng(7, "fading/1").random(5)
    d = make_rng(8, "fading/0").random(5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)


def test_large_seed_accepted():
    make_rng(2**64 - 1, "x").random()


def test_trace_lines(tmp_path):
    ev = [TraceEvent(0, "arrival", 1, 2, {"seq": 0}), TraceEvent(1, "dummy", -1, 3, {"to": [4]})]
    p = tmp_path / "t.jsonl"
    write_trace(ev, p)
    lines = p.read_text().splitlines()
    assert [json.loads(x)["kind"] for x in lines] == ["arrival", "dummy"]


def test_config_to_dict_is_json(paper_cfg):
    json.dumps(config_to_dict(paper_cfg))
    assert load_paper_scenario() == paper_cfg
