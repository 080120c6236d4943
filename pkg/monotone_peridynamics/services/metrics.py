"""
    Evaluation criteria: residual error E_b, model errors under the empirical
    kernel-exploration measures, solution error E_u, the least-squares
    baselines and convergence-order fits.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from monotone_peridynamics.config import config
from monotone_peridynamics.schemas.config_schema import SolverConfig
from monotone_peridynamics.services.constitutive import ConstitutiveModel, normalized
from monotone_peridynamics.services.operator import bond_kinematics, residual
from monotone_peridynamics.services.solver import two_phase_solve
from monotone_peridynamics.services.training import SplitData, evaluate_loss
from monotone_peridynamics.utils.exceptions import ConfigurationError, MetricError
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

# Samples whose bond kinematics are materialized at once
MEASURE_BATCH = 16


def relative_l2(approx, exact, weights=None) -> float:
    """‖approx - exact‖ / ‖exact‖ in the (optionally weighted) l² norm."""
    approx, exact = np.asarray(approx, dtype=float), np.asarray(exact, dtype=float)
    weights = np.ones_like(exact) if weights is None else np.broadcast_to(weights, exact.shape)
    denominator = np.sqrt(np.sum(weights * exact ** 2))
    if not denominator > 0:
        raise MetricError("Relative error is undefined: the reference vanishes under the measure")
    return float(np.sqrt(np.sum(weights * (approx - exact) ** 2)) / denominator)


def err_b(model: ConstitutiveModel, data: SplitData) -> float:
    """Mean relative residual ‖𝒢[u] + b‖ / ‖b‖ over the samples of a split."""
    if data.size == 0:
        raise MetricError("E_b needs at least one sample")
    return evaluate_loss(model, data.grid, data.bonds, data.u, data.b)


def max_abs_b(model: ConstitutiveModel, data: SplitData) -> float:
    """max |𝒢[u] + b| over interior nodes; the residual metric for force-free test sets."""
    r = residual(model, data.grid, data.bonds, data.u, data.b)
    return float(np.max(np.abs(r[:, data.grid.interior_nodes])))


def _batches(data: SplitData):
    for start in range(0, data.size, MEASURE_BATCH):
        yield bond_kinematics(data.grid, data.bonds, data.u[start:start + MEASURE_BATCH])


@dataclass
class EmpiricalMeasureXi:
    """Bond-offset measure ρ_ξ: accumulated |g(λ)| per offset over all bonds, divided by |ℛ|."""
    offsets: np.ndarray
    xi: np.ndarray
    weights: np.ndarray
    bond_count: int

    @property
    def degenerate(self) -> bool:
        return not np.any(self.weights > 0)


@dataclass
class EmpiricalMeasureLambda:
    """Stretch measure ρ_λ: accumulated |k(ξ)| per λ bin, divided by |ℛ|."""
    edges: np.ndarray
    weights: np.ndarray
    bond_count: int

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def degenerate(self) -> bool:
        return not np.any(self.weights > 0)


def build_measure_xi(data: SplitData, truth: ConstitutiveModel, literal: bool = False) -> EmpiricalMeasureXi:
    """ρ_ξ from the training split and the true stretch function.

    The bond weight |g(λ)(ξ+η)| / |ξ+η| equals |g(λ)|; ``literal`` evaluates
    the unsimplified expression instead.
    """
    bonds = data.bonds
    interior = bonds.interior_nodes
    totals = np.zeros(bonds.offset_count)
    for start in range(0, data.size, MEASURE_BATCH):
        u = data.u[start:start + MEASURE_BATCH]
        kin = bond_kinematics(data.grid, bonds, u)
        g = truth.stretch_values(kin.stretch)
        if literal:
            deformed = bonds.xi + u[:, bonds.interior_targets, :] - u[:, interior, None, :]
            weight = np.linalg.norm(g[..., None] * deformed, axis=-1) / np.linalg.norm(deformed, axis=-1)
        else:
            weight = np.abs(g)
        totals += weight.sum(axis=(0, 1))
    count = data.size * bonds.interior_nodes.size * bonds.offset_count
    measure = EmpiricalMeasureXi(offsets=bonds.offsets, xi=bonds.xi, weights=totals / count, bond_count=count)
    if measure.degenerate:
        output.print_section_item("[!] ρ_ξ carries no mass: the true stretch vanishes on every bond",
                                  log_level="warning", color="yellow")
    return measure


def build_measure_lambda(data: SplitData, truth: ConstitutiveModel,
                         bins: int = config.DEFAULT_STRETCH_BINS) -> EmpiricalMeasureLambda:
    """ρ_λ from the training split and the true kernel, on uniform bins over the observed λ range."""
    bonds = data.bonds
    kernel = np.abs(truth.kernel_values(bonds.xi))
    lo, hi = np.inf, -np.inf
    for kin in _batches(data):
        lo, hi = min(lo, float(kin.stretch.min())), max(hi, float(kin.stretch.max()))
    if lo == hi:
        pad = 1e-9 * max(1.0, abs(lo))
        lo, hi = lo - pad, hi + pad

    totals = np.zeros(bins)
    edges = np.linspace(lo, hi, bins + 1)
    for kin in _batches(data):
        weights = np.broadcast_to(kernel, kin.stretch.shape)
        totals += np.histogram(kin.stretch.reshape(-1), bins=edges, weights=weights.reshape(-1))[0]
    count = data.size * bonds.interior_nodes.size * bonds.offset_count
    measure = EmpiricalMeasureLambda(edges=edges, weights=totals / count, bond_count=count)
    if measure.degenerate:
        output.print_section_item("[!] ρ_λ carries no mass", log_level="warning", color="yellow")
    return measure


@dataclass
class ModelErrors:
    kernel: float
    stretch: float
    product: float
    scale: float


def err_model(model: ConstitutiveModel,
              truth: ConstitutiveModel,
              measure_xi: EmpiricalMeasureXi,
              measure_lambda: EmpiricalMeasureLambda,
              data: SplitData) -> ModelErrors:
    """E_k, E_g and E_gk of the normalized learned pair in the weighted l² norms.

    The learned pair is first rescaled so its kernel integrates like the true
    one over the split's offsets; E_gk lives on the offsets × bin-midpoint grid
    weighted by ρ_ξ·ρ_λ.
    """
    model, scale = normalized(model, truth.kernel_values, data.bonds)
    lam = measure_lambda.midpoints
    k_nn, k_true = model.kernel_values(measure_xi.xi), truth.kernel_values(measure_xi.xi)
    g_nn, g_true = model.stretch_values(lam), truth.stretch_values(lam)
    return ModelErrors(
        kernel=relative_l2(k_nn, k_true, measure_xi.weights),
        stretch=relative_l2(g_nn, g_true, measure_lambda.weights),
        product=relative_l2(np.outer(k_nn, g_nn), np.outer(k_true, g_true),
                            np.outer(measure_xi.weights, measure_lambda.weights)),
        scale=scale,
    )


@dataclass
class SolutionErrors:
    mean: float
    errors: List[float] = field(default_factory=list)
    failures: List[int] = field(default_factory=list)

    @property
    def failure_rate(self) -> float:
        total = len(self.errors) + len(self.failures)
        return len(self.failures) / total if total else 0.0


def _solve_sample(model: ConstitutiveModel, data: SplitData, index: int, settings: SolverConfig):
    result = two_phase_solve(model, data.grid, data.bonds, data.b[index], data.u[index], settings)
    interior = data.grid.interior_nodes
    return result.converged, relative_l2(result.u[interior], data.u[index][interior])


def err_u(model: ConstitutiveModel, data: SplitData, settings: SolverConfig = None, threads: int = 1) -> SolutionErrors:
    """Mean relative interior error of the solved displacement against the true one.

    Each sample is solved with its own force and its true boundary-layer
    values. Unconverged samples are listed in ``failures`` and left out of the
    mean.
    """
    settings = settings or SolverConfig()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(lambda i: _solve_sample(model, data, i, settings), range(data.size)))

    errors = [error for converged, error in outcomes if converged]
    failures = [i for i, (converged, _) in enumerate(outcomes) if not converged]
    if failures:
        output.print_section_item(f"[!] {len(failures)} of {data.size} solves did not converge",
                                  log_level="warning", color="yellow")
    mean = float(np.mean(errors)) if errors else float("nan")
    return SolutionErrors(mean=mean, errors=errors, failures=failures)


@dataclass
class LeastSquaresResult:
    values: np.ndarray
    rank: int
    condition: float
    residual_norm: float
    abscissa: np.ndarray


def _solve_least_squares(matrix: np.ndarray, rhs: np.ndarray, abscissa: np.ndarray, label: str) -> LeastSquaresResult:
    solution, _, rank, singular = scipy.linalg.lstsq(matrix, rhs)
    condition = float((singular[0] / singular[-1]) ** 2) if singular[-1] > 0 else float("inf")
    if rank < matrix.shape[1]:
        output.print_section_item(f"[!] {label}: matrix has rank {rank} < {matrix.shape[1]} columns, "
                                  f"cond(AᵀA) ≈ {condition:.3e}; returning the minimum-norm solution",
                                  log_level="warning", color="yellow")
    return LeastSquaresResult(values=solution, rank=int(rank), condition=condition,
                              residual_norm=float(np.linalg.norm(matrix @ solution - rhs)), abscissa=abscissa)


def case1_matrix(data: SplitData, truth: ConstitutiveModel) -> Tuple[np.ndarray, np.ndarray]:
    """A[(s, j, c), o] = Δx^d·g(λ_{s,j,o})·dir_c and the stacked forces b, so 𝒢[u] + b = A·k + b."""
    bonds = data.bonds
    blocks = []
    for kin in _batches(data):
        g = truth.stretch_values(kin.stretch) * bonds.weight
        block = np.einsum('smo,smoc->smco', g, kin.direction)
        blocks.append(block.reshape(-1, bonds.offset_count))
    rhs = data.b[:, data.grid.interior_nodes].reshape(-1)
    return np.concatenate(blocks), rhs


def case1_least_squares(data: SplitData, truth: ConstitutiveModel) -> LeastSquaresResult:
    """Kernel values k(ξ_o) at every offset minimizing ‖A·k + b‖ with g known."""
    matrix, rhs = case1_matrix(data, truth)
    return _solve_least_squares(matrix, -rhs, data.bonds.xi_norm, "case-1 least squares")


def case2_least_squares(data: SplitData, truth: ConstitutiveModel,
                        bins: int = config.DEFAULT_STRETCH_BINS) -> LeastSquaresResult:
    """Stretch values g at λ-bin midpoints minimizing ‖B·g + b‖ with k known.

    Every bond's g(λ) is approximated by the value of the bin holding λ.
    """
    measure = build_measure_lambda(data, truth, bins)
    bonds = data.bonds
    kernel = truth.kernel_values(bonds.xi) * bonds.weight
    blocks = []
    for kin in _batches(data):
        which = np.clip(np.searchsorted(measure.edges, kin.stretch, side="right") - 1, 0, bins - 1)
        contribution = kernel[None, None, :, None] * kin.direction
        block = np.zeros(kin.stretch.shape[:2] + (data.grid.dimension, bins))
        s_idx, m_idx = np.indices(kin.stretch.shape[:2])
        for o in range(bonds.offset_count):
            np.add.at(block, (s_idx, m_idx, slice(None), which[:, :, o]), contribution[:, :, o, :])
        blocks.append(block.reshape(-1, bins))
    rhs = data.b[:, data.grid.interior_nodes].reshape(-1)
    return _solve_least_squares(np.concatenate(blocks), -rhs, measure.midpoints, "case-2 least squares")


def convergence_order(spacings: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(Δx).

    Raises:
        ConfigurationError: fewer than three mesh levels
        MetricError: a non-positive error
    """
    spacings, errors = np.asarray(spacings, dtype=float), np.asarray(errors, dtype=float)
    if spacings.size < 3 or spacings.size != errors.size:
        raise ConfigurationError(f"A convergence order needs at least 3 mesh levels, got {spacings.size}")
    if np.any(~(errors > 0)):
        raise MetricError("Convergence orders need positive errors")
    return float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])


@dataclass
class ConvergenceTable:
    """(Δx, error) pairs per metric and their fitted orders."""
    spacings: List[float] = field(default_factory=list)
    errors: Dict[str, List[float]] = field(default_factory=dict)

    def add(self, spacing: float, **errors: float):
        self.spacings.append(float(spacing))
        for metric, value in errors.items():
            self.errors.setdefault(metric, []).append(float(value))

    def order(self, metric: str) -> Optional[float]:
        values = self.errors[metric]
        if len(values) < 3 or any(not v > 0 for v in values):
            return None
        return convergence_order(self.spacings, values)

    def rows(self) -> List[List]:
        return [[metric, spacing, value] for metric, values in self.errors.items()
                for spacing, value in zip(self.spacings, values)]

    def order_rows(self) -> List[List]:
        return [[metric, self.order(metric)] for metric in self.errors]
