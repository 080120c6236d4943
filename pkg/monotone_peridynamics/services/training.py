"""
    Loss, exact parameter gradients, Adam and the training loop.

    The loss is the mean over samples of the relative residual
    ‖𝒢_Δx[u] + b‖ / ‖b‖ on interior nodes. Gradients flow by hand through the
    bond sum into the stretch network (one reverse pass over all bond stretches)
    and into the kernel network (one reverse pass over the shared offsets).
"""
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from monotone_peridynamics.schemas.config_schema import NetworkConfig, TrainConfig
from monotone_peridynamics.schemas.enums import LearnablePart, StretchArchitecture
from monotone_peridynamics.services.constitutive import ConstitutiveModel
from monotone_peridynamics.services.geometry import BondTable, Grid, build_bond_table
from monotone_peridynamics.services.networks import KernelNet, MonotoneStretchNet, StretchMLP
from monotone_peridynamics.services.operator import accumulate_bonds, as_stack, bond_kinematics
from monotone_peridynamics.utils.exceptions import (
    ConfigurationError,
    NonFiniteGradientError,
    TrainingDivergedError,
    ZeroForceError,
)
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)


def force_norms(grid: Grid, b_stack: np.ndarray) -> np.ndarray:
    """Interior l² norm of each force sample; zero norms are rejected."""
    norms = np.linalg.norm(b_stack[:, grid.interior_nodes].reshape(b_stack.shape[0], -1), axis=1)
    if np.any(norms == 0.0):
        raise ZeroForceError(f"Sample {int(np.argmax(norms == 0.0))} has a zero force field; "
                             "its relative residual is undefined")
    return norms


def loss_and_gradients(model: ConstitutiveModel,
                       grid: Grid,
                       bonds: BondTable,
                       u,
                       b,
                       with_gradients: bool = True,
                       chunk_size: int = 4) -> Tuple[float, Dict[str, np.ndarray]]:
    """Relative-residual loss and its gradient for every network block.

    Args:
        model: constitutive pair; only its trainable parts get nonzero gradients
        grid, bonds: lattice the samples live on
        u, b: displacement and force stacks (S, nodes, d)
        with_gradients: skip the reverse pass when False
        chunk_size: samples per forward/reverse pass, bounds the size of the stretch cache

    Returns:
        (loss, grads) with grads keyed like ``model.network_parameters()``
    """
    u_stack, b_stack = as_stack(u, grid), as_stack(b, grid)
    samples = u_stack.shape[0]
    interior = bonds.interior_nodes
    b_norms = force_norms(grid, b_stack)

    kernel_values, kernel_cache = model.kernel_forward(bonds.xi)
    d_kernel = np.zeros(bonds.offset_count)
    stretch_grads: Dict[str, np.ndarray] = {}
    learn_g = with_gradients and "g" in model.trainable
    learn_k = with_gradients and "k" in model.trainable

    total = 0.0
    for start in range(0, samples, chunk_size):
        stop = min(start + chunk_size, samples)
        kin = bond_kinematics(grid, bonds, u_stack[start:stop])
        stretch_values, stretch_cache = model.stretch_forward(kin.stretch)
        magnitude = stretch_values * kernel_values * bonds.weight
        r = accumulate_bonds(magnitude, kin.direction) + b_stack[start:stop, interior]
        r_norms = np.linalg.norm(r.reshape(stop - start, -1), axis=1)
        total += float(np.sum(r_norms / b_norms[start:stop]))

        if not (learn_g or learn_k):
            continue
        safe = np.where(r_norms > 0.0, r_norms, 1.0)
        d_r = r / (safe * b_norms[start:stop] * samples)[:, None, None]
        d_r[r_norms == 0.0] = 0.0
        d_magnitude = np.einsum('smod,smd->smo', kin.direction, d_r) * bonds.weight
        if learn_k:
            d_kernel += np.einsum('smo,smo->o', d_magnitude, stretch_values)
        if learn_g:
            chunk_grads, _ = model.stretch_backward(stretch_cache, d_magnitude * kernel_values)
            for name, value in chunk_grads.items():
                stretch_grads[name] = stretch_grads.get(name, 0.0) + value

    loss = total / samples
    if not with_gradients:
        return loss, {}

    grads = {key: np.zeros_like(value) for key, value in model.network_parameters().items()}
    for name, value in stretch_grads.items():
        grads[f"g.{name}"] = value
    if learn_k:
        kernel_grads, _ = model.kernel_backward(kernel_cache, d_kernel)
        for name, value in kernel_grads.items():
            grads[f"k.{name}"] = value

    for key, value in grads.items():
        if not np.all(np.isfinite(value)):
            output.print_section_item(f"[X] Non-finite gradient in block {key}", log_level="error", color="red")
            raise NonFiniteGradientError(key)
    return loss, grads


def evaluate_loss(model: ConstitutiveModel, grid: Grid, bonds: BondTable, u, b, chunk_size: int = 4) -> float:
    return loss_and_gradients(model, grid, bonds, u, b, with_gradients=False, chunk_size=chunk_size)[0]


def check_gradients(model: ConstitutiveModel,
                    grid: Grid,
                    bonds: BondTable,
                    u,
                    b,
                    n_params: int = 20,
                    rng: np.random.Generator = None,
                    step: float = 1e-5,
                    floor: float = 1e-8) -> List[Tuple[str, int, float, float, float]]:
    """Compare reverse-mode gradients against central differences.

    Picks ``n_params`` random scalar entries among the trainable blocks.

    Returns:
        list of (block, flat index, analytic, finite difference, relative error),
        relative error = |fd - analytic| / max(|fd|, |analytic|, floor)
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    _, grads = loss_and_gradients(model, grid, bonds, u, b)
    params = model.parameters()
    if not params:
        return []
    keys = list(params)
    sizes = np.array([params[key].size for key in keys])
    picks = rng.choice(int(sizes.sum()), size=min(n_params, int(sizes.sum())), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    report = []
    perturbed_model = model.copy()
    for pick in np.sort(picks):
        block = int(np.searchsorted(offsets, pick, side="right") - 1)
        key, index = keys[block], int(pick - offsets[block])
        original = params[key].reshape(-1)[index]
        h = step * max(1.0, abs(original))
        values = []
        for sign in (1.0, -1.0):
            perturbed = params[key].copy()
            perturbed.reshape(-1)[index] = original + sign * h
            perturbed_model.set_parameters({key: perturbed})
            values.append(evaluate_loss(perturbed_model, grid, bonds, u, b))
        perturbed_model.set_parameters({key: params[key]})
        fd = (values[0] - values[1]) / (2.0 * h)
        analytic = float(grads[key].reshape(-1)[index])
        error = abs(fd - analytic) / max(abs(fd), abs(analytic), floor)
        report.append((key, index, analytic, fd, error))
    return report


@dataclass
class AdamState:
    first: Dict[str, np.ndarray]
    second: Dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Dict[str, np.ndarray]) -> "AdamState":
        return cls(first={k: np.zeros_like(v) for k, v in params.items()},
                   second={k: np.zeros_like(v) for k, v in params.items()})


def adam_step(params: Dict[str, np.ndarray],
              grads: Dict[str, np.ndarray],
              state: AdamState,
              lr: float,
              beta1: float = 0.9,
              beta2: float = 0.999,
              eps: float = 1e-8) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    if set(params) != set(state.first):
        raise ValueError("Adam state does not match the parameter blocks")
    t = state.step + 1
    new_params, first, second = {}, {}, {}
    for key, value in params.items():
        g = grads[key]
        first[key] = beta1 * state.first[key] + (1.0 - beta1) * g
        second[key] = beta2 * state.second[key] + (1.0 - beta2) * g * g
        m_hat = first[key] / (1.0 - beta1 ** t)
        v_hat = second[key] / (1.0 - beta2 ** t)
        new_params[key] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(first=first, second=second, step=t)


def learning_rate_schedule(initial: float, epochs: int, decay_first: float, decay_rest: float) -> np.ndarray:
    """lr(e) = lr₀·Π_{i<e} f(i) with f(i) = decay_first for i < E/3, else decay_rest."""
    rates = np.empty(epochs)
    rate = float(initial)
    for epoch in range(epochs):
        rates[epoch] = rate
        rate *= decay_first if epoch < epochs / 3.0 else decay_rest
    return rates


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    valid_error: List[float] = field(default_factory=list)
    learning_rate: List[float] = field(default_factory=list)
    epoch_seconds: List[float] = field(default_factory=list)
    best_epoch: Optional[int] = None

    @property
    def best_valid(self) -> Optional[float]:
        return None if self.best_epoch is None else self.valid_error[self.best_epoch]

    def rows(self) -> List[List]:
        """CSV rows (epoch, train_loss, valid_Eb, lr); wall-clock times are left out."""
        return [[epoch, loss, valid, lr] for epoch, (loss, valid, lr)
                in enumerate(zip(self.train_loss, self.valid_error, self.learning_rate))]


def build_model(network: NetworkConfig,
                learnable: LearnablePart,
                truth: ConstitutiveModel,
                dimension: int,
                seed: int = 0) -> ConstitutiveModel:
    """Initial model for a learning case; the part that is not learned is the analytic truth."""
    rng = np.random.default_rng(seed)
    stretch = truth.stretch
    kernel = truth.kernel
    if learnable.learns_stretch:
        if network.g_arch == StretchArchitecture.MGN:
            stretch = MonotoneStretchNet(network.stretch_layers, network.stretch_width,
                                         network.stretch_activation, rng=rng)
        else:
            stretch = StretchMLP(network.mlp_hidden, network.mlp_activation, rng=rng)
    if learnable.learns_kernel:
        kernel = KernelNet(dimension, network.kernel_hidden, network.kernel_activation, rng=rng)
    return ConstitutiveModel(stretch, kernel)


@dataclass
class SplitData:
    """Fields of one dataset split with the lattice they live on."""
    grid: Grid
    u: np.ndarray
    b: np.ndarray
    bonds: BondTable = None

    def __post_init__(self):
        if self.bonds is None:
            self.bonds = build_bond_table(self.grid)

    @property
    def size(self) -> int:
        return self.u.shape[0]


def train(model: ConstitutiveModel,
          train_data: SplitData,
          valid_data: SplitData,
          settings: TrainConfig,
          on_improvement: Callable[[ConstitutiveModel, int], None] = None
          ) -> Tuple[ConstitutiveModel, TrainHistory]:
    """Adam over epochs × batches, keeping the parameters with the best validation E_b.

    Args:
        model: initial model; it is updated in place while training
        train_data, valid_data: non-empty splits
        settings: optimizer, schedule and stopping settings
        on_improvement: called with (best model, epoch) on every validation improvement

    Returns:
        (best model, history); with zero epochs the initial model is returned unchanged

    Raises:
        TrainingDivergedError: loss became non-finite; carries the best model so far
    """
    history = TrainHistory()
    if settings.epochs == 0:
        return model, history
    if train_data.size == 0 or valid_data.size == 0:
        raise ConfigurationError("Training needs non-empty train and validation splits")

    rates = learning_rate_schedule(settings.learning_rate, settings.epochs,
                                   settings.decay_first, settings.decay_rest)
    shuffle = np.random.default_rng(settings.seed)
    batch_size = settings.batch_size or train_data.size
    params = model.parameters()
    state = AdamState.zeros_like(params)
    best_model = model.copy()

    output.print_section_item(f"Training {model.parameter_count()} parameters: {model.describe()}")
    if settings.gradient_check:
        report = check_gradients(model, train_data.grid, train_data.bonds,
                                 train_data.u[:batch_size], train_data.b[:batch_size],
                                 rng=np.random.default_rng([settings.seed, 1]))
        worst = max((entry[-1] for entry in report), default=0.0)
        level, mark = ("info", "[+]") if worst <= 1e-5 else ("warning", "[!]")
        output.print_section_item(f"{mark} Gradient check: worst relative error {worst:.2e}", log_level=level)

    for epoch in range(settings.epochs):
        started = time.perf_counter()
        order = shuffle.permutation(train_data.size) if batch_size < train_data.size else np.arange(train_data.size)
        weighted_loss = 0.0
        for start in range(0, train_data.size, batch_size):
            batch = order[start:start + batch_size]
            loss, grads = loss_and_gradients(model, train_data.grid, train_data.bonds,
                                             train_data.u[batch], train_data.b[batch],
                                             chunk_size=settings.chunk_size)
            if not np.isfinite(loss):
                raise _diverged(epoch, best_model, history)
            params, state = adam_step(params, {k: grads[k] for k in params}, state, rates[epoch],
                                      settings.adam_beta1, settings.adam_beta2, settings.adam_epsilon)
            model.set_parameters(params)
            weighted_loss += loss * batch.size

        valid = evaluate_loss(model, valid_data.grid, valid_data.bonds, valid_data.u, valid_data.b,
                              chunk_size=settings.chunk_size)
        if not np.isfinite(valid):
            raise _diverged(epoch, best_model, history)

        history.train_loss.append(weighted_loss / train_data.size)
        history.valid_error.append(valid)
        history.learning_rate.append(float(rates[epoch]))
        history.epoch_seconds.append(time.perf_counter() - started)

        if history.best_epoch is None or valid < history.best_valid:
            history.best_epoch = epoch
            best_model = model.copy()
            if on_improvement is not None:
                on_improvement(best_model, epoch)

        if epoch % settings.log_every == 0 or epoch == settings.epochs - 1:
            output.print_section_item(
                f"epoch {epoch}: train {history.train_loss[-1]:.6e}, valid E_b {valid:.6e}, "
                f"lr {rates[epoch]:.3e}")

        if settings.patience is not None and epoch - history.best_epoch >= settings.patience:
            output.print_section_item(f"[!] No improvement for {settings.patience} epochs, stopping at {epoch}",
                                      log_level="warning", color="yellow")
            break

    output.print_section_item(f"[+] Best validation E_b {history.best_valid:.6e} at epoch {history.best_epoch}",
                              color="green")
    return best_model, history


def _diverged(epoch: int, best_model: ConstitutiveModel, history: TrainHistory) -> TrainingDivergedError:
    output.print_section_item(f"[X] Loss became non-finite at epoch {epoch}", log_level="error", color="red")
    return TrainingDivergedError(f"Training diverged at epoch {epoch}", best_model=best_model, history=history)
