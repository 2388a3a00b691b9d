import numpy as np
import pytest

from config.settings import Deployment, FrameConfig, ScenarioConfig
from core.channel import contamination, estimate_quality, large_scale
from core.scenario import build_layout


@pytest.fixture
def small_config() -> ScenarioConfig:
    """16-AP indoor-style grid with 4 UEs and 4 orthogonal pilots."""
    return ScenarioConfig(
        name="small",
        num_aps=16,
        num_ues=4,
        frame=FrameConfig(tau=200, tau_up=4, tau_ud=0, tau_dp=0, tau_dd=196),
    ).validate()


@pytest.fixture
def perimeter_config() -> ScenarioConfig:
    return ScenarioConfig(
        name="ring",
        deployment=Deployment.PERIMETER,
        wrap_around=False,
        num_aps=20,
        num_ues=4,
        frame=FrameConfig(tau=200, tau_up=4, tau_ud=0, tau_dp=0, tau_dd=196),
    ).validate()


@pytest.fixture
def small_instance(small_config):
    layout = build_layout(small_config, rng_seed=1)
    beta = large_scale(layout, small_config, rng_seed=2)
    pilot_of = np.arange(small_config.num_ues)
    gamma = estimate_quality(beta, pilot_of, small_config.frame, small_config.pilot_snr).gamma
    return {
        "config": small_config,
        "layout": layout,
        "beta": beta.beta,
        "gamma": gamma,
        "contamination": contamination(pilot_of),
        "rho_d": small_config.rho_d,
    }
