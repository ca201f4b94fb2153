from pathlib import Path

import pytest
import yaml

from core.variables import default_registry
from qa_pipeline.core.records import build_records
from qa_pipeline.core.synthetic import generate_synthetic


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def synth(registry):
    """(dataset, ledger): 3×3 grid, two regions, seed 7."""
    return generate_synthetic(7, 3, 3, registry, regions=2)


@pytest.fixture(scope="session")
def dataset(synth):
    return synth[0]


@pytest.fixture(scope="session")
def records(dataset):
    """3 cells × 4 tasks × 2 templates."""
    return build_records(dataset, seed=7, cells=3)


@pytest.fixture(scope="session")
def temperature_records(dataset):
    return build_records(dataset, seed=11, cells=3, variables=["annual_temp_max"])


@pytest.fixture(scope="session")
def records_120(registry):
    ds, _ = generate_synthetic(3, 5, 5, registry, regions=3)
    return build_records(ds, seed=3, cells=15)


@pytest.fixture
def write_config(tmp_path):
    """Write a harness config into tmp_path and return its path."""

    def _write(**overrides) -> Path:
        doc = {
            "seed": 7,
            "output_dir": str(tmp_path / "run"),
            "synthetic": {"rows": 3, "cols": 3, "regions": 2},
            "gateway": {
                "base_url": "http://127.0.0.1:9/v1",
                "api_key": "test-key",
                "model_name": "test-model",
                "max_retries": 0,
                "timeout": 2,
                "cache": False,
            },
            "sampling": {"cells": 3},
            "split": {"test_fraction": 0.1},
        }
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(doc.get(key), dict):
                doc[key] = {**doc[key], **value}
            elif value is None:
                doc.pop(key, None)
            else:
                doc[key] = value
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump(doc, allow_unicode=True), encoding="utf-8")
        return path

    return _write
