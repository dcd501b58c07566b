import numpy as np
import pytest

from cidp.core_model import load_paper_scenario


@pytest.fixture(scope="session")
def paper_cfg():
    return load_paper_scenario()


@pytest.fixture
def small_cfg(paper_cfg):
    """Four-node line, one real-time and one bulk flow, short horizon."""
    pos = ((0.0, 0.0), (150.0, 0.0), (300.0, 0.0), (450.0, 0.0))
    from cidp.core_model import FlowSpec
    flows = (FlowSpec(0, 3, 50.0, 20.0, True, 1), FlowSpec(3, 0, 20.0, 0.0, False, 0))
    return paper_cfg.replace(flows=flows, network__n_nodes=4, network__positions_m=pos,
                             network__area_m=450.0, sim__n_slots=300)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
