import numpy as np
import pytest

from monotone_peridynamics.schemas.config_schema import NetworkConfig, TrainConfig
from monotone_peridynamics.schemas.enums import Activation, LearnablePart, SplitName, StretchArchitecture
from monotone_peridynamics.services.constitutive import AnalyticKernel, AnalyticStretch, ConstitutiveModel
from monotone_peridynamics.services.networks import KernelNet, MonotoneStretchNet, StretchMLP
from monotone_peridynamics.services.training import (
    AdamState,
    SplitData,
    TrainHistory,
    adam_step,
    build_model,
    check_gradients,
    evaluate_loss,
    learning_rate_schedule,
    loss_and_gradients,
    train,
)
from monotone_peridynamics.utils.exceptions import ConfigurationError, ZeroForceError

SMALL_NETWORK = NetworkConfig(stretch_layers=2, stretch_width=4, kernel_hidden=[6])


def _learnable_model(rng):
    return ConstitutiveModel(MonotoneStretchNet(2, 4, [Activation.SIGMOID], rng=rng),
                             KernelNet(1, [6], activation=Activation.TANH, rng=rng))


def test_reverse_gradients_match_central_differences(train_split, rng):
    model = _learnable_model(rng)
    report = check_gradients(model, train_split.grid, train_split.bonds, train_split.u, train_split.b,
                             n_params=25, rng=np.random.default_rng(5))

    assert len(report) == 25
    for key, index, analytic, fd, _ in report:
        assert abs(fd - analytic) <= 1e-5 * max(abs(fd), abs(analytic)) + 1e-7, (key, index)


def test_gradients_cover_only_trainable_blocks(train_split, rng):
    model = _learnable_model(rng).with_trainable(["k"])
    _, grads = loss_and_gradients(model, train_split.grid, train_split.bonds, train_split.u, train_split.b)

    assert set(grads) == set(model.network_parameters())
    assert all(np.all(value == 0.0) for key, value in grads.items() if key.startswith("g."))
    assert any(np.any(value != 0.0) for key, value in grads.items() if key.startswith("k."))


def test_zero_kernel_has_unit_loss(train_split):
    model = ConstitutiveModel(AnalyticStretch("bk"), AnalyticKernel("ex1", 0.0, 0.25))
    assert evaluate_loss(model, train_split.grid, train_split.bonds, train_split.u, train_split.b) == 1.0


def test_ground_truth_has_vanishing_loss_on_its_own_mesh(same_mesh_dataset, ex1_truth):
    data = same_mesh_dataset.split(SplitName.TRAIN)
    assert evaluate_loss(ex1_truth, data.grid, data.bonds, data.u, data.b) < 1e-12


def test_chunking_does_not_change_the_loss(train_split, rng):
    model = _learnable_model(rng)
    whole, grads_whole = loss_and_gradients(model, train_split.grid, train_split.bonds, train_split.u,
                                            train_split.b, chunk_size=8)
    pieces, grads_pieces = loss_and_gradients(model, train_split.grid, train_split.bonds, train_split.u,
                                              train_split.b, chunk_size=1)

    assert pieces == pytest.approx(whole, rel=1e-13)
    for key in grads_whole:
        assert np.allclose(grads_pieces[key], grads_whole[key], rtol=1e-10, atol=1e-14)


def test_zero_force_sample_is_rejected(train_split, ex1_truth):
    b = train_split.b.copy()
    b[1] = 0.0
    with pytest.raises(ZeroForceError):
        evaluate_loss(ex1_truth, train_split.grid, train_split.bonds, train_split.u, b)


def test_learning_rate_schedule():
    rates = learning_rate_schedule(0.1, 9, 0.5, 0.25)

    assert rates.tolist()[:4] == [0.1, 0.05, 0.025, 0.0125]
    assert rates[8] == pytest.approx(0.1 * 0.5 ** 3 * 0.25 ** 5, rel=1e-14)
    assert learning_rate_schedule(0.1, 0, 0.5, 0.5).size == 0


def test_adam_with_zero_gradient_keeps_parameters():
    params = {"w": np.array([1.0, -2.0])}
    new, state = adam_step(params, {"w": np.zeros(2)}, AdamState.zeros_like(params), lr=0.1)

    assert np.array_equal(new["w"], params["w"])
    assert state.step == 1


def test_adam_first_step_moves_by_the_learning_rate():
    params = {"x": np.array([1.0])}
    new, _ = adam_step(params, {"x": 2.0 * params["x"]}, AdamState.zeros_like(params), lr=0.1)

    assert new["x"][0] == pytest.approx(0.9, rel=1e-7)
    assert params["x"][0] == 1.0


def test_adam_minimizes_a_quadratic():
    params = {"x": np.array([1.0, -3.0])}
    state = AdamState.zeros_like(params)
    for _ in range(500):
        params, state = adam_step(params, {"x": 2.0 * params["x"]}, state, lr=0.05)

    assert np.all(np.abs(params["x"]) < 1e-2)


def test_adam_rejects_mismatched_state():
    with pytest.raises(ValueError):
        adam_step({"a": np.zeros(1)}, {"a": np.zeros(1)}, AdamState.zeros_like({"b": np.zeros(1)}), lr=0.1)


@pytest.mark.parametrize("learnable, expected", [
    (LearnablePart.KERNEL_ONLY, {"k"}),
    (LearnablePart.STRETCH_ONLY, {"g"}),
    (LearnablePart.BOTH, {"g", "k"}),
])
def test_build_model_learns_the_requested_parts(ex2_truth, learnable, expected):
    model = build_model(SMALL_NETWORK, learnable, ex2_truth, dimension=1, seed=4)

    assert set(model.trainable) == expected
    if not learnable.learns_stretch:
        assert model.stretch is ex2_truth.stretch
    if not learnable.learns_kernel:
        assert model.kernel is ex2_truth.kernel


def test_build_model_baseline_architecture(ex2_truth):
    network = NetworkConfig(g_arch=StretchArchitecture.MLP, mlp_hidden=[8, 8])
    model = build_model(network, LearnablePart.STRETCH_ONLY, ex2_truth, dimension=1)

    assert isinstance(model.stretch, StretchMLP)


def test_build_model_is_seeded(ex2_truth):
    first = build_model(SMALL_NETWORK, LearnablePart.BOTH, ex2_truth, dimension=1, seed=9)
    second = build_model(SMALL_NETWORK, LearnablePart.BOTH, ex2_truth, dimension=1, seed=9)

    for key, value in first.network_parameters().items():
        assert np.array_equal(value, second.network_parameters()[key])


def test_zero_epochs_return_the_initial_model(nested_dataset, ex2_truth):
    model = build_model(SMALL_NETWORK, LearnablePart.KERNEL_ONLY, ex2_truth, dimension=1)
    best, history = train(model, nested_dataset.split(SplitName.TRAIN), nested_dataset.split(SplitName.VALID),
                          TrainConfig(epochs=0))

    assert best is model
    assert history.best_epoch is None
    assert history.rows() == []


def test_empty_split_is_rejected(nested_dataset, ex2_truth):
    valid = nested_dataset.split(SplitName.VALID)
    empty = SplitData(valid.grid, valid.u[:0], valid.b[:0], valid.bonds)
    model = build_model(SMALL_NETWORK, LearnablePart.KERNEL_ONLY, ex2_truth, dimension=1)

    with pytest.raises(ConfigurationError):
        train(model, empty, valid, TrainConfig(epochs=2))


def _run(dataset, truth, seed=0, **settings):
    model = build_model(SMALL_NETWORK, LearnablePart.BOTH, truth, dimension=1, seed=seed)
    improvements = []
    best, history = train(model, dataset.split(SplitName.TRAIN), dataset.split(SplitName.VALID),
                          TrainConfig(seed=seed, log_every=1, **settings),
                          on_improvement=lambda m, epoch: improvements.append(epoch))
    return best, history, improvements


def test_training_tracks_the_best_validation_error(nested_dataset, ex2_truth):
    settings = dict(epochs=4, learning_rate=1e-2, batch_size=2)
    best, history, improvements = _run(nested_dataset, ex2_truth, **settings)

    assert len(history.train_loss) == len(history.valid_error) == 4
    assert history.best_valid == min(history.valid_error)
    assert improvements[-1] == history.best_epoch
    valid = nested_dataset.split(SplitName.VALID)
    assert evaluate_loss(best, valid.grid, valid.bonds, valid.u, valid.b) == pytest.approx(history.best_valid,
                                                                                          rel=1e-12)
    assert [row[0] for row in history.rows()] == [0, 1, 2, 3]
    assert history.rows()[1][3] == pytest.approx(1e-2 * TrainConfig().decay_first, rel=1e-14)


def test_training_is_reproducible(nested_dataset, ex2_truth):
    settings = dict(epochs=2, learning_rate=1e-2, batch_size=2)
    _, first, _ = _run(nested_dataset, ex2_truth, seed=7, **settings)
    _, second, _ = _run(nested_dataset, ex2_truth, seed=7, **settings)

    assert first.train_loss == second.train_loss
    assert first.valid_error == second.valid_error


def test_history_rows_leave_out_timings():
    history = TrainHistory(train_loss=[0.5], valid_error=[0.4], learning_rate=[1e-3], epoch_seconds=[2.0],
                           best_epoch=0)
    assert history.rows() == [[0, 0.5, 0.4, 1e-3]]
    assert history.best_valid == 0.4
