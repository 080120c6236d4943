"""
    Separable constitutive laws g(λ)·k(ξ).

    A ConstitutiveModel pairs a stretch component with a kernel component. Each
    component is either an analytic ground-truth function or a network from
    ``services.networks``; the model carries the scale factors introduced by
    identifiability normalization, so (g/C, C·k) is represented without
    touching the underlying parameters.
"""
import copy
from typing import Dict, Iterable, Optional, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from monotone_peridynamics.schemas.enums import GENERATOR_TRUTH, GeneratorTag, KernelTag, StretchTag
from monotone_peridynamics.services.networks import Network
from monotone_peridynamics.utils.exceptions import (
    ConfigurationError,
    DegenerateKernelError,
    QuadratureError,
    StretchDomainError,
)
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

ANTIDERIVATIVE_STEP = 1e-3


def _require_nonzero_stretch(lam: np.ndarray):
    # linearized stretches may be negative; g and G are singular only at 0
    if np.any(~np.isfinite(lam)) or np.any(lam == 0):
        raise StretchDomainError("Bond stretch must be finite and nonzero")


def _require_positive_stretch(lam: np.ndarray):
    if np.any(~(lam > 0)):
        raise StretchDomainError(f"Bond stretch must be positive, got min {np.min(lam)}")


class AnalyticStretch:
    """Closed-form stretch function g with derivative and antiderivative G(λ), G(1) = 0."""
    kind = "analytic_stretch"

    def __init__(self, tag: Union[StretchTag, str]):
        self.tag = StretchTag(tag)

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        _require_nonzero_stretch(lam)
        blatz_ko = lam - lam ** -3
        if self.tag == StretchTag.BLATZ_KO:
            return blatz_ko
        return np.pi * blatz_ko + np.sin(np.pi * lam)

    def derivative(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        _require_nonzero_stretch(lam)
        blatz_ko = 1.0 + 3.0 * lam ** -4
        if self.tag == StretchTag.BLATZ_KO:
            return blatz_ko
        return np.pi * blatz_ko + np.pi * np.cos(np.pi * lam)

    def antiderivative(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        _require_nonzero_stretch(lam)
        blatz_ko = 0.5 * (lam ** 2 + lam ** -2) - 1.0
        if self.tag == StretchTag.BLATZ_KO:
            return blatz_ko
        return np.pi * blatz_ko - (np.cos(np.pi * lam) + 1.0) / np.pi

    def architecture(self) -> Dict[str, str]:
        return {"kind": self.kind, "tag": self.tag.value}


class AnalyticKernel:
    """Radial ground-truth kernels.

    ex1: 2c·cos(π|ξ|)
    ex2: 2c·exp(-50|ξ|²)·(δ - |ξ|)
    """
    kind = "analytic_kernel"

    def __init__(self, tag: Union[KernelTag, str], constant: float, horizon: float):
        self.tag = KernelTag(tag)
        self.constant = float(constant)
        self.horizon = float(horizon)

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        r = np.linalg.norm(xi, axis=-1)
        if self.tag == KernelTag.EX1:
            return 2.0 * self.constant * np.cos(np.pi * r)
        return 2.0 * self.constant * np.exp(-50.0 * r ** 2) * (self.horizon - r)

    def architecture(self) -> Dict[str, str]:
        return {"kind": self.kind, "tag": self.tag.value,
                "constant": repr(self.constant), "horizon": repr(self.horizon)}


class TabulatedKernel:
    """Kernel known only at the lattice offsets of one spacing, e.g. a least-squares fit."""
    kind = "tabulated_kernel"

    def __init__(self, spacing: float, offsets: np.ndarray, values: np.ndarray):
        self.spacing = float(spacing)
        self.table = {tuple(int(i) for i in offset): float(v) for offset, v in zip(offsets, values)}

    def __call__(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        lattice = np.rint(xi / self.spacing).astype(np.int64).reshape(-1, xi.shape[-1])
        try:
            values = [self.table[tuple(offset)] for offset in lattice]
        except KeyError as error:
            raise ValueError(f"Offset {error.args[0]} is not tabulated") from error
        return np.asarray(values).reshape(xi.shape[:-1])

    def architecture(self) -> Dict[str, str]:
        return {"kind": self.kind, "spacing": repr(self.spacing)}


class TabulatedAntiderivative:
    """G(λ) = ∫_1^λ g for a stretch function without a closed form.

    The table is a composite trapezoid on a uniform λ-grid through 1 with
    linear interpolation in between; it grows when asked for values outside
    the tabulated range.
    """

    def __init__(self, stretch, step: float = ANTIDERIVATIVE_STEP):
        self.stretch = stretch
        self.step = step
        self.nodes: Optional[np.ndarray] = None
        self.values: Optional[np.ndarray] = None

    def _covers(self, lo: float, hi: float) -> bool:
        return self.nodes is not None and self.nodes[0] <= lo and self.nodes[-1] >= hi

    def _build(self, lo: float, hi: float):
        first = min(int(np.floor((lo - 1.0) / self.step)) - 1, 0)
        last = max(int(np.ceil((hi - 1.0) / self.step)) + 1, 0)
        nodes = 1.0 + self.step * np.arange(first, last + 1)
        nodes = nodes[nodes > 0]
        if lo < nodes[0]:
            nodes = np.concatenate([[lo], nodes])
        with np.errstate(all='ignore'):
            values = np.asarray(self.stretch(nodes), dtype=float)
            table = cumulative_trapezoid(values, nodes, initial=0.0)
        table = table - table[int(np.argmin(np.abs(nodes - 1.0)))]
        if not np.all(np.isfinite(table)):
            raise QuadratureError(f"Stretch antiderivative is not finite on [{nodes[0]:.6g}, {nodes[-1]:.6g}]")
        self.nodes, self.values = nodes, table

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        _require_positive_stretch(lam)
        lo, hi = float(np.min(lam, initial=1.0)), float(np.max(lam, initial=1.0))
        if not self._covers(lo, hi):
            if self.nodes is not None:
                lo, hi = min(lo, self.nodes[0]), max(hi, self.nodes[-1])
            self._build(lo, hi)
        return np.interp(lam, self.nodes, self.values)


def is_network(component) -> bool:
    return isinstance(component, Network)


class ConstitutiveModel:
    """Pair (g, k) plus normalization scales; the force magnitude of a bond is
    stretch_scale·g(λ) · kernel_scale·k(ξ).

    ``trainable`` lists which network parts ('g', 'k') receive updates; a part
    whose component is analytic can never be trainable.
    """

    def __init__(self,
                 stretch,
                 kernel,
                 stretch_scale: float = 1.0,
                 kernel_scale: float = 1.0,
                 trainable: Optional[Iterable[str]] = None):
        self.stretch = stretch
        self.kernel = kernel
        self.stretch_scale = float(stretch_scale)
        self.kernel_scale = float(kernel_scale)
        networks = {part for part, comp in (("g", stretch), ("k", kernel)) if is_network(comp)}
        self.trainable = networks if trainable is None else set(trainable)
        if not self.trainable <= networks:
            raise ConfigurationError(f"Parts {sorted(self.trainable - networks)} are analytic and cannot be trained")
        self._antiderivative = None

    # --- evaluation -----------------------------------------------------------

    def stretch_values(self, lam) -> np.ndarray:
        return self.stretch_scale * self.stretch(lam)

    def kernel_values(self, xi) -> np.ndarray:
        return self.kernel_scale * self.kernel(xi)

    def stretch_forward(self, lam) -> Tuple[np.ndarray, object]:
        if is_network(self.stretch):
            values, cache = self.stretch.forward(lam)
            return self.stretch_scale * values, cache
        return self.stretch_values(lam), None

    def kernel_forward(self, xi) -> Tuple[np.ndarray, object]:
        if is_network(self.kernel):
            values, cache = self.kernel.forward(xi)
            return self.kernel_scale * values, cache
        return self.kernel_values(xi), None

    def stretch_backward(self, cache, upstream) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        return self.stretch.backward(cache, self.stretch_scale * np.asarray(upstream, dtype=float))

    def kernel_backward(self, cache, upstream) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
        return self.kernel.backward(cache, self.kernel_scale * np.asarray(upstream, dtype=float))

    def stretch_derivative(self, lam) -> np.ndarray:
        """Exact dg/dλ: closed form for analytic g, reverse pass for networks."""
        lam = np.asarray(lam, dtype=float)
        if is_network(self.stretch):
            _, cache = self.stretch.forward(lam)
            _, d_lam = self.stretch.backward(cache, np.ones(lam.size))
            return self.stretch_scale * d_lam.reshape(lam.shape)
        return self.stretch_scale * self.stretch.derivative(lam)

    def antiderivative(self, lam) -> np.ndarray:
        if not is_network(self.stretch):
            return self.stretch_scale * self.stretch.antiderivative(lam)
        if self._antiderivative is None:
            self._antiderivative = TabulatedAntiderivative(self.stretch)
        return self.stretch_scale * self._antiderivative(lam)

    # --- parameters -----------------------------------------------------------

    def _parts(self) -> Dict[str, Network]:
        return {part: comp for part, comp in (("g", self.stretch), ("k", self.kernel)) if is_network(comp)}

    def network_parameters(self) -> Dict[str, np.ndarray]:
        """Every network block, keyed '<part>.<block>', frozen parts included."""
        return {f"{part}.{name}": value
                for part, net in self._parts().items() for name, value in net.params.items()}

    def parameters(self) -> Dict[str, np.ndarray]:
        return {key: value for key, value in self.network_parameters().items()
                if key.split(".", 1)[0] in self.trainable}

    def set_parameters(self, params: Dict[str, np.ndarray]):
        for part, net in self._parts().items():
            updates = {key.split(".", 1)[1]: value for key, value in params.items()
                       if key.split(".", 1)[0] == part}
            if updates:
                merged = net.get_params()
                merged.update(updates)
                net.set_params(merged)
        self._antiderivative = None

    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.parameters().values()))

    # --- derived models -------------------------------------------------------

    def copy(self) -> "ConstitutiveModel":
        clone = copy.deepcopy(self)
        clone._antiderivative = None
        return clone

    def with_trainable(self, parts: Iterable[str]) -> "ConstitutiveModel":
        clone = self.copy()
        networks = set(clone._parts())
        parts = set(parts)
        if not parts <= networks:
            raise ConfigurationError(f"Parts {sorted(parts - networks)} are analytic and cannot be trained")
        clone.trainable = parts
        return clone

    def rescaled(self, factor: float) -> "ConstitutiveModel":
        """The equivalent pair (g/C, C·k); the operator output is unchanged."""
        if not factor > 0:
            raise ValueError(f"Rescaling factor must be positive, got {factor}")
        clone = self.copy()
        clone.stretch_scale = self.stretch_scale / factor
        clone.kernel_scale = self.kernel_scale * factor
        return clone

    def describe(self) -> str:
        def name(component):
            return getattr(component, "kind", type(component).__name__)
        return (f"g={name(self.stretch)} (scale {self.stretch_scale:.6g}), "
                f"k={name(self.kernel)} (scale {self.kernel_scale:.6g}), trainable={sorted(self.trainable)}")


def analytic_stretch(tag: Union[StretchTag, str]) -> AnalyticStretch:
    return AnalyticStretch(tag)


def analytic_kernel(tag: Union[KernelTag, str], constant: float, horizon: float) -> AnalyticKernel:
    return AnalyticKernel(tag, constant, horizon)


def ground_truth_model(generator: Union[GeneratorTag, str], constant: float, horizon: float) -> ConstitutiveModel:
    """Analytic (g, k) behind a synthetic generator tag."""
    generator = GeneratorTag(generator)
    if generator not in GENERATOR_TRUTH:
        raise ConfigurationError(f"Generator '{generator.value}' has no analytic ground truth")
    stretch_tag, kernel_tag = GENERATOR_TRUTH[generator]
    return ConstitutiveModel(AnalyticStretch(stretch_tag), AnalyticKernel(kernel_tag, constant, horizon))


def kernel_integral(kernel, bonds) -> float:
    """Riemann sum Σ_ξ k(ξ)·Δx^d over the horizon offsets of a bond table."""
    return float(np.sum(kernel(bonds.xi)) * bonds.weight)


def normalize_pair(model: ConstitutiveModel, reference_kernel, bonds) -> float:
    """Scale factor C = ∫k / ∫k^NN that makes the learned kernel integrate like the reference.

    Args:
        model: learned pair (its current scales included)
        reference_kernel: callable k(ξ) of the ground truth
        bonds: bond table whose offsets define the Riemann sum over B_δ(0)

    Returns:
        float: C; ``model.rescaled(C)`` is the normalized pair (g/C, C·k)

    Raises:
        DegenerateKernelError: when ∫k^NN is not safely positive
    """
    reference = kernel_integral(reference_kernel, bonds)
    learned = kernel_integral(model.kernel_values, bonds)
    tolerance = 1e-14 * max(1.0, abs(reference))
    if not learned > tolerance:
        output.print_section_item(f"[X] Learned kernel integrates to {learned:.3e}; cannot normalize",
                                  log_level="error", color="red")
        raise DegenerateKernelError(f"Learned kernel integral {learned:.3e} is not positive")
    return reference / learned


def normalized(model: ConstitutiveModel, reference_kernel, bonds) -> Tuple[ConstitutiveModel, float]:
    factor = normalize_pair(model, reference_kernel, bonds)
    return model.rescaled(factor), factor
