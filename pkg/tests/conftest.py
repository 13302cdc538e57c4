"""Shared fixtures plus the acceptance-criteria summary hook."""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stancewatch.encoder import EncoderConfig, init_params
from stancewatch.tokenizer import Encoding

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

# Filled by test_acceptance via the criterion() context manager; printed
# as one line per [PRIMARY] criterion after the run.
ACCEPTANCE_RESULTS: list[list[str]] = []


@contextmanager
def criterion(name: str):
    entry = [name, "FAIL"]
    ACCEPTANCE_RESULTS.append(entry)
    yield
    entry[1] = "PASS"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status}  {name}")


TINY = dict(vocab_size=16, d_model=8, n_layers=1, n_heads=2, max_len=8)


@pytest.fixture
def tiny_config() -> EncoderConfig:
    return EncoderConfig(**TINY)


@pytest.fixture
def tiny_params(tiny_config):
    return init_params(tiny_config, seed=7)


def random_encodings(rng: np.random.Generator, n: int, config: EncoderConfig) -> list[Encoding]:
    """Valid-looking encodings: CLS, random interior, SEP, PAD tail."""
    out = []
    for _ in range(n):
        n_real = int(rng.integers(2, config.max_len + 1))
        interior = rng.integers(4, config.vocab_size, max(0, n_real - 2))
        ids = [2, *[int(x) for x in interior], 3]
        ids = ids[: config.max_len]
        n_real = len(ids)
        ids += [0] * (config.max_len - n_real)
        mask = [1] * n_real + [0] * (config.max_len - n_real)
        out.append(Encoding(tuple(ids), tuple(mask), n_real))
    return out
