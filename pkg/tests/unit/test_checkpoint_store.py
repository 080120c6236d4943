import numpy as np
import pytest

from monotone_peridynamics.integrations.checkpoint_store import (
    format_checkpoint,
    load_checkpoint,
    parse_checkpoint,
    save_checkpoint,
)
from monotone_peridynamics.schemas.enums import Activation
from monotone_peridynamics.services.constitutive import AnalyticKernel, AnalyticStretch, ConstitutiveModel
from monotone_peridynamics.services.networks import KernelNet, MonotoneStretchNet, StretchMLP
from monotone_peridynamics.utils.exceptions import DatasetFormatError


def _assert_same_model(loaded, original):
    assert loaded.stretch_scale == original.stretch_scale
    assert loaded.kernel_scale == original.kernel_scale
    assert loaded.trainable == original.trainable
    assert loaded.stretch.architecture() == original.stretch.architecture()
    assert loaded.kernel.architecture() == original.kernel.architecture()
    params = original.network_parameters()
    assert set(loaded.network_parameters()) == set(params)
    for key, value in loaded.network_parameters().items():
        assert np.array_equal(value, params[key])


def test_network_pair_round_trip(tmp_path, rng):
    model = ConstitutiveModel(MonotoneStretchNet(3, 5, [Activation.SIGMOID, Activation.TANH, Activation.SOFTPLUS],
                                                rng=rng),
                              KernelNet(1, [7, 7], rng=rng), stretch_scale=0.3, kernel_scale=1.0 / 3.0)
    model.set_parameters({key: rng.normal(size=value.shape) for key, value in model.network_parameters().items()})

    loaded = load_checkpoint(save_checkpoint(model, tmp_path / "run" / "model.ckpt"))
    _assert_same_model(loaded, model)
    lam = np.linspace(0.8, 1.2, 5)
    assert np.array_equal(loaded.stretch_values(lam), model.stretch_values(lam))


def test_analytic_components_round_trip(ex2_truth):
    loaded = parse_checkpoint(format_checkpoint(ex2_truth))

    _assert_same_model(loaded, ex2_truth)
    assert loaded.trainable == set()
    assert loaded.kernel.constant == 1.0
    assert loaded.kernel.horizon == 0.25


def test_baseline_and_partial_trainability_round_trip(rng):
    model = ConstitutiveModel(StretchMLP([6, 6], rng=rng), AnalyticKernel("ex1", 2.0, 0.25))
    loaded = parse_checkpoint(format_checkpoint(model.with_trainable([])))

    assert isinstance(loaded.stretch, StretchMLP)
    assert loaded.trainable == set()
    assert np.array_equal(loaded.network_parameters()["g.weight_0"], model.network_parameters()["g.weight_0"])


def test_checkpoint_header():
    text = format_checkpoint(ConstitutiveModel(AnalyticStretch("bk"), AnalyticKernel("ex1", 1.0, 0.25)))
    assert text.splitlines()[0] == "mpno-checkpoint 1"
    assert text.endswith("end\n")


def test_malformed_checkpoints_are_rejected(rng, tmp_path):
    model = ConstitutiveModel(MonotoneStretchNet(2, 3, [Activation.SIGMOID], rng=rng),
                              AnalyticKernel("ex1", 1.0, 0.25))
    text = format_checkpoint(model)

    with pytest.raises(DatasetFormatError):
        parse_checkpoint("not a checkpoint\n")
    with pytest.raises(DatasetFormatError):
        parse_checkpoint("\n".join(line for line in text.splitlines() if not line.startswith("component k")))
    lines = text.splitlines()
    at = next(i for i, line in enumerate(lines) if line.startswith("param g.W "))
    with pytest.raises(DatasetFormatError):
        parse_checkpoint("\n".join(lines[:at] + lines[at + 2:]))
    with pytest.raises(DatasetFormatError):
        parse_checkpoint("\n".join(lines[:-1]))
    with pytest.raises(DatasetFormatError):
        load_checkpoint(tmp_path / "missing.ckpt")
