import pytest

from schwarznet.config import apply_overrides, default_config

TINY_OVERRIDES = [
    "sampling.n_interior=32", "sampling.n_boundary=8", "sampling.n_interface=8",
    "network.hidden=6", "training.epochs=5", "schedule.outer_iterations=2",
    "schedule.error_resolution=9",
]


def tiny_config(name="poisson_1way", extra=()):
    return apply_overrides(default_config(name), TINY_OVERRIDES + list(extra))


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory):
    """One small completed experiment shared by artifact tests."""
    from dataclasses import replace

    from schwarznet.reporting import run_experiment

    out = tmp_path_factory.mktemp("tiny_run")
    cfg = replace(tiny_config(), out_dir=str(out))
    result = run_experiment(cfg)
    return cfg, result, out
