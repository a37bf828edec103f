from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fame.evolution import EvolutionConfig
from fame.fixtures import EVOLUTION_POPULATION, build_corpus, fixture, write_corpus_dataset
from fame.functionality.models import load_models


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()


@pytest.fixture(scope="session")
def models():
    return load_models()


@pytest.fixture(scope="session")
def models_by_category(models):
    return {m.category: m for m in models}


@pytest.fixture(scope="session")
def chair():
    return fixture("chair_basic")


@pytest.fixture(scope="session")
def cart():
    return fixture("cart_basic")


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory) -> Path:
    """The four-shape evolution population as an on-disk dataset."""
    path = tmp_path_factory.mktemp("dataset")
    write_corpus_dataset(path, EVOLUTION_POPULATION)
    return path


@pytest.fixture(scope="session")
def fast_config() -> EvolutionConfig:
    """Small, quick settings for pipeline tests."""
    return EvolutionConfig(user_labels=("rolling", "sitting"), max_generations=1,
                           rng_seed=7, scoring_mode="simplified", top_k=4,
                           max_pair_offspring=8, max_generation_size=24)
