import os

import pytest

from procdep_trainer import TrainConfig, load_processes, train_encoder

MICRO = os.path.join(os.path.dirname(__file__), "data", "micro.json")


@pytest.fixture(scope="session")
def micro_path() -> str:
    return MICRO


@pytest.fixture(scope="session")
def micro_processes():
    return load_processes(MICRO)


@pytest.fixture(scope="session")
def overfit_encoder(micro_processes):
    """One shared 120-epoch run; several tests inspect it."""
    return train_encoder(micro_processes, config=TrainConfig(epochs=120, seed=13))
