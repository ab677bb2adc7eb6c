"""
Pruebas de la configuración jerárquica y de los grupos de partes
"""

import pytest
from omegaconf import OmegaConf

from src.utils.config import (
    NET_PRESETS,
    complement_parts,
    load_config,
    part_groups_for,
    resolve_part_group,
    save_config,
)
from src.utils.errors import ConfigError, UnknownPartGroupError


def test_defaults_expand_the_desk_preset():
    cfg = load_config()
    assert cfg.net.image_size == NET_PRESETS["desk"]["image_size"]
    assert cfg.loss.weights.vgg == 10.0
    assert cfg.train.beta1 == 0.5
    assert cfg.seed == 0


def test_precedence_file_then_overrides_then_flags(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("seed: 1\nnet:\n  preset: tiny\n  latent_dim: 3\ntrain:\n  lr: 0.1\n")
    cfg = load_config(path, overrides=["train.lr=0.2", "seed=2"], seed=5)
    assert cfg.net.image_size == NET_PRESETS["tiny"]["image_size"]
    assert cfg.net.latent_dim == 3
    assert cfg.train.lr == 0.2
    assert cfg.seed == 5


def test_none_flags_do_not_override():
    cfg = load_config(overrides=["seed=4"], seed=None)
    assert cfg.seed == 4


def test_env_sets_data_root_and_device(monkeypatch):
    monkeypatch.setenv("PARTGEN_DATA_ROOT", "/tmp/maniquies")
    monkeypatch.setenv("PARTGEN_DEVICE", "cpu")
    cfg = load_config()
    assert cfg.data.root == "/tmp/maniquies"
    assert cfg.device == "cpu"


def test_bad_inputs_raise_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigError):
        load_config(overrides=["net.preset=huge"])
    with pytest.raises(ConfigError):
        load_config(overrides=["train.lr=[1"])


def test_saved_config_reloads(tmp_path):
    cfg = load_config(overrides=["net.preset=tiny"], seed=9)
    path = save_config(cfg, tmp_path)
    assert path.name == "config.yaml"
    again = load_config(path)
    assert OmegaConf.to_container(again) == OmegaConf.to_container(cfg)


def test_part_groups_resolve_for_both_layouts():
    assert resolve_part_group("head", 6) == [1]
    assert resolve_part_group("head", 24) == [23, 24]
    assert resolve_part_group("Upper-Body", 6) == [2, 3, 4]
    assert resolve_part_group("all", 6) == [1, 2, 3, 4, 5, 6]
    assert resolve_part_group("none", 24) == []
    assert resolve_part_group("4,3", 6) == [3, 4]


def test_unknown_groups_are_rejected():
    with pytest.raises(UnknownPartGroupError):
        resolve_part_group("cape", 6)
    with pytest.raises(UnknownPartGroupError):
        resolve_part_group("7", 6)
    with pytest.raises(UnknownPartGroupError):
        resolve_part_group("head", 12)


def test_group_tables_cover_valid_parts():
    for num_parts in (6, 24):
        for parts in part_groups_for(num_parts).values():
            assert all(1 <= k <= num_parts for k in parts)
    assert part_groups_for(12) == {}


def test_complement_parts():
    assert complement_parts([1, 3], 4) == [2, 4]
    assert complement_parts([], 2) == [1, 2]
