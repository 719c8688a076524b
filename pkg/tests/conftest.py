"""Shared fixtures: a tiny synthetic dataset and a tiny model around it."""

import pytest

from chatseg.datagen import GenerationConfig, SceneConfig, generate_dataset, load_dataset
from chatseg.model import ModelConfig, Tokenizer, build_model
from chatseg.training import build_stage_samples
from chatseg.training.data import training_corpus

TRAIN_SCENE = SceneConfig(
    image_size=64,
    min_canvas=64,
    area_mode="relative",
    relative_area=(0.06, 0.2),
    n_elements=(2, 4),
    depth_range=(2, 3),
    decoy_probability=0.2,
)


def tiny_dataset(tmp_path, num_images=8, seed=11):
    cfg = GenerationConfig(
        num_images=num_images,
        seed=seed,
        out_dir=str(tmp_path / f"ds_{num_images}_{seed}"),
        scene=TRAIN_SCENE,
    )
    manifest = generate_dataset(cfg)
    return load_dataset(manifest.manifest_path)


def tiny_model(samples, seed=0):
    tokenizer = Tokenizer.from_corpus(training_corpus(samples))
    return build_model(ModelConfig.preset("tiny"), tokenizer, seed=seed)


@pytest.fixture(scope="session")
def shared_dataset(tmp_path_factory):
    return tiny_dataset(tmp_path_factory.mktemp("data"), num_images=8, seed=11)


@pytest.fixture(scope="session")
def shared_model(shared_dataset):
    return tiny_model(shared_dataset, seed=0)


@pytest.fixture
def stage1_samples(shared_dataset, shared_model):
    return build_stage_samples(1, shared_dataset, shared_model)


@pytest.fixture
def stage2_samples(shared_dataset, shared_model):
    return build_stage_samples(2, shared_dataset, shared_model)
