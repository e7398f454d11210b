"""
Presets de red, validación de formas y flujos aleatorios.
"""

import numpy as np
import numpy.testing as npt
import pytest

from config.networkConfig import (HIDDEN_LAYERS, ErsConfig, TrainConfig, load_network_config,
                                  network_config_from_dict)
from config.randomStreams import stream_rng
from config.settings import get_settings
from network.errors import ConfigurationError
from network.parameters import init_params, tensor_specs


def test_table1_preset_is_exact():
    cfg = load_network_config("table1")
    assert [cfg.visual(n).maps for n in ("vf", "vm", "vs")] == [4, 8, 12]
    assert cfg.map_extents() == {"vf": (44, 60), "vm": (21, 29), "vs": (9, 13)}
    assert [cfg.proprio(n).neurons for n in ("pf", "pm", "ps")] == [30, 20, 10]
    assert [cfg.tau(n) for n in ("vf", "vm", "vs")] == [2, 4, 8]
    assert [cfg.tau(n) for n in ("pf", "pm", "ps")] == [2, 4, 8]
    assert cfg.io_tau == 1
    assert cfg.proprio_size == 20
    assert tuple(cfg.vs.lateral.size) == (9, 13)


def test_desk_and_tiny_presets():
    desk = load_network_config("desk")
    assert [desk.visual(n).maps for n in ("vf", "vm", "vs")] == [2, 4, 6]
    assert desk.map_extents() == {"vf": (44, 60), "vm": (21, 29), "vs": (9, 13)}
    tiny = load_network_config("tiny")
    assert (tiny.image_height, tiny.image_width) == (12, 16)
    assert [tiny.visual(n).maps for n in ("vf", "vm", "vs")] == [1, 2, 2]
    assert [tiny.proprio(n).neurons for n in ("pf", "pm", "ps")] == [6, 4, 3]


def test_unknown_preset():
    with pytest.raises(ConfigurationError):
        load_network_config("no-such-preset")


def _raw_table1():
    raw = load_network_config("table1").model_dump()
    return raw


def test_inconsistent_top_down_kernel_is_rejected():
    raw = _raw_table1()
    raw["vf"]["top_down"] = {"size": [5, 5], "stride": [2, 2]}
    with pytest.raises(ConfigurationError):
        network_config_from_dict(raw)


def test_lateral_kernel_must_cover_top_map():
    raw = _raw_table1()
    raw["vs"]["lateral"] = {"size": [9, 12], "stride": [1, 1]}
    with pytest.raises(ConfigurationError):
        network_config_from_dict(raw)


def test_kernel_larger_than_input_is_rejected():
    raw = _raw_table1()
    raw["image_height"], raw["image_width"] = 4, 4
    with pytest.raises(ConfigurationError):
        network_config_from_dict(raw)


def test_state_shapes(tiny_config):
    assert tiny_config.state_shape("vs") == (2,) + tiny_config.map_extents()["vs"]
    assert tiny_config.state_shape("ps") == (3,)


def test_init_params_shapes_and_neutral_values(tiny_config):
    params = init_params(tiny_config, seed=0, n_sequences=3)
    for spec in tensor_specs(tiny_config):
        assert params.tensors[spec.name].shape == spec.shape
        if spec.kind == "bias":
            npt.assert_array_equal(params.tensors[spec.name], 0.0)
        else:
            limit = 1.0 / np.sqrt(spec.fan_in)
            assert np.abs(params.tensors[spec.name]).max() <= limit
    for name in HIDDEN_LAYERS:
        assert params.tensors[f"init.{name}"].shape == (3,) + tiny_config.state_shape(name)
        npt.assert_array_equal(params.tensors[f"init.{name}"], 0.0)
    assert params.sequence_ids == [0, 1, 2]


def test_init_params_is_seeded(tiny_config):
    a = init_params(tiny_config, seed=5)
    b = init_params(tiny_config, seed=5)
    c = init_params(tiny_config, seed=6)
    for name in a.tensors:
        npt.assert_array_equal(a.tensors[name], b.tensors[name])
    assert any(not np.array_equal(a.tensors[n], c.tensors[n]) for n in a.weight_names())


def test_named_streams_are_isolated():
    a = stream_rng(1, "params").normal(size=5)
    assert np.array_equal(a, stream_rng(1, "params").normal(size=5))
    assert not np.array_equal(a, stream_rng(1, "jitter").normal(size=5))
    assert not np.array_equal(a, stream_rng(2, "params").normal(size=5))


def test_training_and_ers_defaults():
    train = TrainConfig()
    assert train.epochs == 40000 and train.learning_rate == 0.001
    ers = ErsConfig()
    assert (ers.window, ers.iterations, ers.learning_rate) == (30, 50, 0.1)


def test_runtime_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("VMI_THREADS", "3")
    monkeypatch.setenv("VMI_OUTPUT_DIR", str(tmp_path))
    settings = get_settings()
    assert settings.threads == 3
    assert settings.output_dir == tmp_path
    assert settings.record_wall_time is False


def test_wall_time_is_off_by_default(monkeypatch):
    monkeypatch.delenv("VMI_RECORD_WALL_TIME")
    assert get_settings().record_wall_time is False
    monkeypatch.setenv("VMI_RECORD_WALL_TIME", "true")
    assert get_settings().record_wall_time is True
