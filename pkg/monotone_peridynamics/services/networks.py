"""
    Small numpy networks with hand-derived reverse passes.

    MonotoneStretchNet is the cascaded monotone gradient network used for the
    stretch function g(λ); MultiLayerPerceptron backs both the nonnegative
    kernel network k(ξ) and the unconstrained stretch baseline.

    Every network keeps its trainable tensors in an ordered ``params`` dict.
    ``forward`` returns the output and a cache, ``backward`` maps an upstream
    gradient on the output to gradients for every block plus the input
    gradient.
"""
import copy
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.special import expit

from monotone_peridynamics.schemas.enums import Activation

NONNEGATIVE_MAP = "softplus"


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softplus_inverse(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("softplus_inverse is only defined for positive values")
    return y + np.log(-np.expm1(-y))


def activate(tag: Activation, z: np.ndarray) -> np.ndarray:
    if tag == Activation.IDENTITY:
        return z
    if tag == Activation.SIGMOID:
        return expit(z)
    if tag == Activation.TANH:
        return np.tanh(z)
    if tag == Activation.SOFTPLUS:
        return softplus(z)
    if tag == Activation.RELU:
        return np.maximum(z, 0.0)
    if tag == Activation.SIGMOID_SKIP:
        return expit(z) + z
    raise ValueError(f"Unknown activation {tag}")


def activate_derivative(tag: Activation, z: np.ndarray) -> np.ndarray:
    if tag == Activation.IDENTITY:
        return np.ones_like(z)
    if tag == Activation.SIGMOID:
        s = expit(z)
        return s * (1.0 - s)
    if tag == Activation.TANH:
        return 1.0 - np.tanh(z) ** 2
    if tag == Activation.SOFTPLUS:
        return expit(z)
    if tag == Activation.RELU:
        return (z > 0).astype(float)
    if tag == Activation.SIGMOID_SKIP:
        s = expit(z)
        return s * (1.0 - s) + 1.0
    raise ValueError(f"Unknown activation {tag}")


# Activations usable inside the monotone network: differentiable and nondecreasing
MONOTONE_ACTIVATIONS = (
    Activation.IDENTITY,
    Activation.SIGMOID,
    Activation.TANH,
    Activation.SOFTPLUS,
    Activation.SIGMOID_SKIP,
)


class Network:
    """Common parameter plumbing shared by the networks."""
    kind = "network"

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}

    def __call__(self, x) -> np.ndarray:
        out, _ = self.forward(x)
        return out

    def forward(self, x):
        raise NotImplementedError

    def backward(self, cache, dout: np.ndarray):
        raise NotImplementedError

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def get_params(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.params.items()}

    def set_params(self, params: Dict[str, np.ndarray]):
        missing = set(self.params) - set(params)
        if missing:
            raise KeyError(f"Missing parameter blocks: {sorted(missing)}")
        for name in self.params:
            value = np.asarray(params[name], dtype=float)
            if value.shape != self.params[name].shape:
                raise ValueError(f"Block '{name}' has shape {value.shape}, expected {self.params[name].shape}")
            self.params[name] = value.copy()

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def architecture(self) -> Dict[str, str]:
        raise NotImplementedError


class MonotoneStretchNet(Network):
    """Cascaded monotone gradient network g: (0, ∞) -> R.

        z_0 = β_0 ⊙ Wλ + b_0
        z_l = β_l ⊙ Wλ + α_l ⊙ σ_l(z_{l-1}) + b_l,   l = 1..L-1
        g(λ) = Wᵀ[α_L ⊙ σ_L(z_{L-1})] + b_L

    α and β are stored raw and mapped through softplus, so their effective
    values stay nonnegative for any raw value and g is nondecreasing.

    Blocks: ``W`` (m,), ``beta_raw`` (L, m) for β_0..β_{L-1}, ``alpha_raw``
    (L, m) for α_1..α_L, ``bias`` (L, m) for b_0..b_{L-1}, ``out_bias`` (1,).
    """
    kind = "mgn"

    def __init__(self, layers: int, width: int, activations: Sequence[Activation], rng: np.random.Generator = None):
        super().__init__()
        activations = [Activation(a) for a in activations]
        if layers < 1 or width < 1:
            raise ValueError("MonotoneStretchNet needs at least one layer of width one")
        if len(activations) == 1 and layers > 1:
            activations = activations * layers
        if len(activations) != layers:
            raise ValueError(f"Expected {layers} activation tags, got {len(activations)}")
        bad = [a for a in activations if a not in MONOTONE_ACTIVATIONS]
        if bad:
            raise ValueError(f"Activations {bad} are not allowed in the monotone network")

        self.layers = layers
        self.width = width
        self.activations = activations

        rng = rng if rng is not None else np.random.default_rng(0)
        unit = float(softplus_inverse(1.0))
        self.params = {
            "W": rng.uniform(-1.0, 1.0, size=width),
            "beta_raw": np.full((layers, width), unit),
            "alpha_raw": np.full((layers, width), unit),
            "bias": np.zeros((layers, width)),
            "out_bias": np.zeros(1),
        }

    @classmethod
    def from_effective(cls, W, beta, alpha, bias, out_bias: float, activations) -> "MonotoneStretchNet":
        """Build a network from effective (already nonnegative) α and β values."""
        W = np.atleast_1d(np.asarray(W, dtype=float))
        beta = np.atleast_2d(np.asarray(beta, dtype=float))
        alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
        bias = np.atleast_2d(np.asarray(bias, dtype=float))
        net = cls(layers=beta.shape[0], width=W.size, activations=activations)
        net.params = {
            "W": W.copy(),
            "beta_raw": softplus_inverse(beta),
            "alpha_raw": softplus_inverse(alpha),
            "bias": bias.copy(),
            "out_bias": np.array([float(out_bias)]),
        }
        return net

    def effective_scalings(self) -> Tuple[np.ndarray, np.ndarray]:
        return softplus(self.params["beta_raw"]), softplus(self.params["alpha_raw"])

    def forward(self, lam):
        lam = np.asarray(lam, dtype=float)
        shape = lam.shape
        flat = lam.reshape(-1)

        W = self.params["W"]
        bias = self.params["bias"]
        beta, alpha = self.effective_scalings()

        a = flat[:, None] * W[None, :]
        z = beta[0] * a + bias[0]
        pre = [z]
        post = []
        for l in range(1, self.layers):
            s = activate(self.activations[l - 1], z)
            z = beta[l] * a + alpha[l - 1] * s + bias[l]
            post.append(s)
            pre.append(z)
        s = activate(self.activations[-1], z)
        post.append(s)
        h = alpha[-1] * s
        out = h @ W + self.params["out_bias"][0]

        cache = (shape, flat, a, pre, post, h, beta, alpha)
        return out.reshape(shape), cache

    def backward(self, cache, dout):
        shape, flat, a, pre, post, h, beta, alpha = cache
        dout = np.asarray(dout, dtype=float).reshape(-1)
        W = self.params["W"]
        L = self.layers

        d_beta = np.zeros_like(beta)
        d_alpha = np.zeros_like(alpha)
        d_bias = np.zeros_like(self.params["bias"])

        dW = dout @ h
        dh = dout[:, None] * W[None, :]
        d_alpha[L - 1] = np.sum(dh * post[L - 1], axis=0)
        dz = dh * alpha[L - 1] * activate_derivative(self.activations[L - 1], pre[L - 1])

        da = np.zeros_like(a)
        for l in range(L - 1, 0, -1):
            d_beta[l] = np.sum(dz * a, axis=0)
            da += dz * beta[l]
            d_alpha[l - 1] = np.sum(dz * post[l - 1], axis=0)
            d_bias[l] = np.sum(dz, axis=0)
            dz = dz * alpha[l - 1] * activate_derivative(self.activations[l - 1], pre[l - 1])
        d_beta[0] = np.sum(dz * a, axis=0)
        da += dz * beta[0]
        d_bias[0] = np.sum(dz, axis=0)

        dW = dW + flat @ da
        d_lam = da @ W

        grads = {
            "W": dW,
            "beta_raw": d_beta * expit(self.params["beta_raw"]),
            "alpha_raw": d_alpha * expit(self.params["alpha_raw"]),
            "bias": d_bias,
            "out_bias": np.array([dout.sum()]),
        }
        return grads, d_lam.reshape(shape)

    def architecture(self) -> Dict[str, str]:
        return {
            "kind": self.kind,
            "layers": str(self.layers),
            "width": str(self.width),
            "activations": ",".join(a.value for a in self.activations),
            "nonnegative_map": NONNEGATIVE_MAP,
        }


class MultiLayerPerceptron(Network):
    """Fully connected network R^n_in -> R with a fixed output activation.

    Blocks ``weight_i`` (fan_in, fan_out) and ``bias_i`` for every layer,
    the last one mapping to a single output.
    """
    kind = "mlp"

    def __init__(self,
                 input_dim: int,
                 hidden_widths: Sequence[int],
                 activation: Activation = Activation.RELU,
                 output_activation: Activation = Activation.IDENTITY,
                 output_bias: float = 0.0,
                 rng: np.random.Generator = None):
        super().__init__()
        self.input_dim = int(input_dim)
        self.hidden_widths = [int(w) for w in hidden_widths]
        self.activation = Activation(activation)
        self.output_activation = Activation(output_activation)

        rng = rng if rng is not None else np.random.default_rng(0)
        widths = [self.input_dim] + self.hidden_widths + [1]
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            self.params[f"weight_{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            self.params[f"bias_{i}"] = np.zeros(fan_out)
        self.params[f"bias_{len(widths) - 2}"][:] = output_bias

    @property
    def depth(self) -> int:
        return len(self.hidden_widths) + 1

    # Scalar-input networks take arrays of any shape and map them elementwise
    scalar_input = False

    def _as_input(self, x) -> Tuple[np.ndarray, tuple]:
        x = np.asarray(x, dtype=float)
        if self.scalar_input:
            return x.reshape(-1, 1), x.shape
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"Expected inputs with trailing dimension {self.input_dim}, got {x.shape}")
        return x.reshape(-1, self.input_dim), x.shape[:-1]

    def forward(self, x):
        h, shape = self._as_input(x)
        inputs: List[np.ndarray] = []
        pre: List[np.ndarray] = []
        for i in range(self.depth):
            inputs.append(h)
            z = h @ self.params[f"weight_{i}"] + self.params[f"bias_{i}"]
            pre.append(z)
            tag = self.activation if i < self.depth - 1 else self.output_activation
            h = activate(tag, z)
        out = h[:, 0]
        return out.reshape(shape), (shape, inputs, pre)

    def backward(self, cache, dout):
        shape, inputs, pre = cache
        dz = np.asarray(dout, dtype=float).reshape(-1, 1) * activate_derivative(self.output_activation, pre[-1])
        grads = {}
        for i in range(self.depth - 1, -1, -1):
            grads[f"weight_{i}"] = inputs[i].T @ dz
            grads[f"bias_{i}"] = dz.sum(axis=0)
            dh = dz @ self.params[f"weight_{i}"].T
            if i > 0:
                dz = dh * activate_derivative(self.activation, pre[i - 1])
        ordered = {name: grads[name] for name in self.params}
        if self.scalar_input:
            return ordered, dh.reshape(shape)
        return ordered, dh.reshape(shape + (self.input_dim,))

    def architecture(self) -> Dict[str, str]:
        return {
            "kind": self.kind,
            "input_dim": str(self.input_dim),
            "hidden_widths": ",".join(str(w) for w in self.hidden_widths),
            "activation": self.activation.value,
            "output_activation": self.output_activation.value,
        }


class KernelNet(MultiLayerPerceptron):
    """Kernel network k: R^d -> [0, ∞); the output ReLU forces nonnegativity.

    The output bias starts at 1 so the ReLU is active at initialization
    (hidden biases start at zero).
    """
    kind = "kernel"

    def __init__(self, dimension: int, hidden_widths: Sequence[int],
                 activation: Activation = Activation.RELU, rng: np.random.Generator = None,
                 output_bias: float = 1.0):
        super().__init__(dimension, hidden_widths, activation, Activation.RELU,
                         output_bias=output_bias, rng=rng)


class StretchMLP(MultiLayerPerceptron):
    """Unconstrained stretch baseline g: R -> R with a linear output."""
    kind = "stretch_mlp"
    scalar_input = True

    def __init__(self, hidden_widths: Sequence[int], activation: Activation = Activation.RELU,
                 rng: np.random.Generator = None):
        super().__init__(1, hidden_widths, activation, Activation.IDENTITY, rng=rng)
