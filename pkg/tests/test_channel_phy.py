import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cidp.channel_phy import (Channel, array_response, link_gain, rician_draw, rician_params,
                              steered_response)
from cidp.core_model import make_rng


def test_rician_unit_power():
    h = rician_draw(make_rng(1, "t"), 6.0, 200_000)
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.01


def test_rician_k_split():
    los, sig = rician_params(10.0)
    assert abs(los ** 2 / (2 * sig ** 2) - 10.0) < 1e-9


def test_link_gain_pathloss():
    # ten times the distance costs 10 n dB
    g1 = link_gain(10.0, 1.0, 3.0)
    g2 = link_gain(100.0, 1.0, 3.0)
    assert g1 - g2 == pytest.approx(30.0)
    with pytest.raises(ValueError):
        link_gain(0.0, 1.0, 3.0)


def test_channel_gate(paper_cfg):
    pos = np.array([[0.0, 0.0], [100.0, 0.0], [10_000.0, 0.0]])
    ch = Channel(paper_cfg.network, pos)
    ref = ch.reference_links()
    assert ref[0, 1] and ref[1, 0]
    assert not ref[0, 2]
    s = ch.link_state(0, 1, 1.0)
    assert s.active and s.sinr_db == pytest.approx(ch.mean_snr_db()[0, 1])
    with pytest.raises(ValueError):
        ch.link_state(1, 1, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-89, 89), st.integers(2, 24))
def test_steered_mainlobe_is_m(theta0, m):
    b = steered_response(theta0, theta0, m)
    assert abs(b.sum() - m) < 1e-9


def test_array_shapes():
    assert array_response(0.0, 4).shape == (4,)
    assert array_response(np.zeros(3), 4).shape == (3, 4)
    with pytest.raises(ValueError):
        array_response(0.0, 1)
