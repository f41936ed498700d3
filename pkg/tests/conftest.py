import pathlib

import pytest

from triqss import ChannelModel, EpsilonBudget

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

# the benchmark channel: 30 dB total loss at the default attenuation
BENCH_LOSS_DB = 30.0


@pytest.fixture
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


@pytest.fixture
def budget() -> EpsilonBudget:
    return EpsilonBudget()


@pytest.fixture
def bench_channel() -> ChannelModel:
    return ChannelModel(length_km=BENCH_LOSS_DB / 0.167)
