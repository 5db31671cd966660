import dataclasses
import json
from pathlib import Path

import pytest

from archseg.pipeline import load_config, run_dataset

ROOT = Path(__file__).resolve().parents[1]
BENCHMARK_CONFIG = ROOT / "configs" / "benchmark.json"
GOLDEN_REPORT = ROOT / "golden" / "benchmark_report.json"


@pytest.fixture(scope="session")
def benchmark_config():
    return load_config(BENCHMARK_CONFIG)


@pytest.fixture(scope="session")
def golden_report():
    with open(GOLDEN_REPORT) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def full_report(benchmark_config):
    """The pinned benchmark run end to end (detection + segmentation)."""
    return run_dataset(benchmark_config)


@pytest.fixture(scope="session")
def fps_report(benchmark_config):
    """Pinned benchmark with FPS sampling, detection only."""
    cfg = dataclasses.replace(
        benchmark_config, sampling_method="fps", with_segmentation=False
    )
    return run_dataset(cfg)


@pytest.fixture(scope="session")
def coarse_report(benchmark_config):
    """Pinned benchmark with the unrefined coarse arch, detection only."""
    cfg = dataclasses.replace(
        benchmark_config, arch_mode="coarse", with_segmentation=False
    )
    return run_dataset(cfg)
