"""
    Synthetic datasets: random Fourier displacements, forces from the
    ground-truth operator on a fine lattice, restriction to the measurement
    lattice and mesh subsampling.
"""
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from monotone_peridynamics.config import config
from monotone_peridynamics.schemas.dataset_schema import DatasetManifest, SplitSpec
from monotone_peridynamics.schemas.enums import GeneratorTag, SplitName
from monotone_peridynamics.services.constitutive import ground_truth_model
from monotone_peridynamics.services.geometry import Grid, build_bond_table, build_grid, boundary_layer_width
from monotone_peridynamics.services.operator import apply_operator, bond_kinematics
from monotone_peridynamics.services.training import SplitData
from monotone_peridynamics.utils.exceptions import (
    ConfigurationError,
    DataGenerationError,
    DegenerateBondError,
    NonNestedMeshError,
)
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

# Spawn key of the split-assignment stream; sample streams use (SAMPLE_STREAM, index)
SPLIT_STREAM = 0
SAMPLE_STREAM = 1

# Samples pushed through the fine-mesh operator at once
GENERATION_BATCH = 16


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based substream of sample ``index``; independent of every other sample."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(SAMPLE_STREAM, index))))


def split_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(SPLIT_STREAM,))))


@dataclass
class FourierDisplacement:
    """u(x) = Σ_{j=1}^{J} e^{-j/J}(a_j sin(jπx) + b_j cos(jπx)) + C·x."""
    sine: np.ndarray
    cosine: np.ndarray
    slope: float = 0.0

    @property
    def max_frequency(self) -> int:
        return self.sine.size

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        j = np.arange(1, self.max_frequency + 1)
        decay = np.exp(-j / self.max_frequency)
        phase = np.pi * np.outer(x, j)
        values = np.sin(phase) @ (decay * self.sine) + np.cos(phase) @ (decay * self.cosine)
        return (values + self.slope * x)[:, None]


@dataclass
class TensorFourierDisplacement:
    """Two-component field, each u_c(x, y) = Σ_{i,j} e^{-(i+j)/J}(a_ij sin iπx sin jπy + b_ij cos iπx cos jπy)."""
    sine: np.ndarray
    cosine: np.ndarray

    @property
    def max_frequency(self) -> int:
        return self.sine.shape[1]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        j = np.arange(1, self.max_frequency + 1)
        decay = np.exp(-np.add.outer(j, j) / self.max_frequency)
        sx, sy = np.sin(np.pi * np.outer(x[:, 0], j)), np.sin(np.pi * np.outer(x[:, 1], j))
        cx, cy = np.cos(np.pi * np.outer(x[:, 0], j)), np.cos(np.pi * np.outer(x[:, 1], j))
        columns = []
        for c in range(2):
            columns.append(np.einsum('ni,ij,nj->n', sx, decay * self.sine[c], sy)
                           + np.einsum('ni,ij,nj->n', cx, decay * self.cosine[c], cy))
        return np.stack(columns, axis=1)


def sample_displacement(max_frequency: int,
                        amplitude: float,
                        slope_range: Optional[Tuple[float, float]],
                        rng: np.random.Generator,
                        dimension: int = 1):
    """Draw a random displacement field.

    Coefficients a_j, b_j ~ U[-amplitude, amplitude]; the linear slope
    C ~ U[slope_range] when a range is given, else C = 0. In 2D the field is
    the tensor-product series without a linear term.
    """
    if max_frequency < 1:
        raise ConfigurationError(f"Maximum frequency must be at least 1, got {max_frequency}")
    if dimension == 1:
        sine = rng.uniform(-amplitude, amplitude, size=max_frequency)
        cosine = rng.uniform(-amplitude, amplitude, size=max_frequency)
        slope = float(rng.uniform(*slope_range)) if slope_range is not None else 0.0
        return FourierDisplacement(sine=sine, cosine=cosine, slope=slope)
    shape = (2, max_frequency, max_frequency)
    return TensorFourierDisplacement(sine=rng.uniform(-amplitude, amplitude, size=shape),
                                     cosine=rng.uniform(-amplitude, amplitude, size=shape))


@dataclass
class FieldDataset:
    """Displacement/force stacks per split, each on its own lattice (usually shared)."""
    manifest: DatasetManifest
    grids: Dict[SplitName, Grid]
    u: Dict[SplitName, np.ndarray]
    b: Dict[SplitName, np.ndarray]
    _splits: Dict[SplitName, SplitData] = field(default_factory=dict, repr=False)

    def split(self, name) -> SplitData:
        name = SplitName(name)
        if name not in self._splits:
            self._splits[name] = SplitData(grid=self.grids[name], u=self.u[name], b=self.b[name])
        return self._splits[name]

    def count(self, name) -> int:
        return int(self.u[SplitName(name)].shape[0])


def grid_from_spec(manifest: DatasetManifest, spec: SplitSpec) -> Grid:
    return build_grid(manifest.dimension, spec.origin, manifest.spacing, spec.nodes, manifest.horizon)


def _nesting_ratio(coarse: float, fine: float) -> int:
    ratio = coarse / fine
    rounded = int(round(ratio))
    if rounded < 1 or abs(ratio - rounded) > 1e-9 * ratio:
        raise NonNestedMeshError(f"Spacing {coarse} is not an integer multiple of {fine}")
    return rounded


def generate_dataset(generator,
                     n_samples: int = sum(config.DEFAULT_SPLIT_SIZES),
                     fine_spacing: float = config.DEFAULT_FINE_SPACING,
                     measurement_points: int = config.DEFAULT_MEASUREMENT_POINTS,
                     horizon: float = config.DEFAULT_HORIZON,
                     constant: float = config.DEFAULT_KERNEL_CONSTANT,
                     split_sizes: Sequence[int] = config.DEFAULT_SPLIT_SIZES,
                     seed: int = 0,
                     max_frequency: int = config.DEFAULT_MAX_FREQUENCY,
                     amplitude: float = config.DEFAULT_COEFFICIENT_AMPLITUDE,
                     slope_range: Optional[Tuple[float, float]] = None,
                     dimension: int = 1) -> FieldDataset:
    """Generate a synthetic dataset for one of the analytic ground truths.

    u is evaluated analytically on a fine lattice over the padded domain,
    b = -𝒢_fine[u] on the fine interior, and both are restricted to the nested
    measurement lattice over [0, 1]^d (b stays zero on its boundary layer).
    Samples are assigned to splits by a seeded shuffle.

    Raises:
        NonNestedMeshError: the fine spacing does not divide the measurement spacing
        DataGenerationError: a generated bond stretch falls to MIN_GENERATED_STRETCH or below
    """
    generator = GeneratorTag(generator)
    split_sizes = tuple(int(s) for s in split_sizes)
    if sum(split_sizes) != n_samples or len(split_sizes) != 3:
        raise ConfigurationError(f"Split sizes {split_sizes} do not add up to {n_samples} samples")
    if measurement_points < 2:
        raise ConfigurationError("The measurement lattice needs at least two points per axis")

    spacing = 1.0 / (measurement_points - 1)
    ratio = _nesting_ratio(spacing, fine_spacing)
    width = boundary_layer_width(spacing, horizon)
    truth = ground_truth_model(generator, constant, horizon)

    measurement = build_grid(dimension, -width * spacing, spacing, measurement_points + 2 * width, horizon)
    fine_nodes = (measurement_points - 1) * ratio + 1 + 2 * width * ratio
    fine = build_grid(dimension, -width * spacing, fine_spacing, fine_nodes, horizon)
    fine_bonds = build_bond_table(fine)
    nested = np.array([fine.node_at(index * ratio) for index in measurement.multi_index])

    output.print_section_item(
        f"Generating {n_samples} {generator.value} samples: fine dx={fine_spacing:.6g}, "
        f"measurement dx={spacing:.6g}, J={max_frequency}", color="blue")

    u_all = np.empty((n_samples, measurement.node_count, dimension))
    b_all = np.zeros((n_samples, measurement.node_count, dimension))
    interior = measurement.interior_nodes
    for start in range(0, n_samples, GENERATION_BATCH):
        indices = range(start, min(start + GENERATION_BATCH, n_samples))
        fields = [sample_displacement(max_frequency, amplitude, slope_range, sample_rng(seed, i), dimension)
                  for i in indices]
        u_fine = np.stack([f(fine.coordinates) for f in fields])
        try:
            kin = bond_kinematics(fine, fine_bonds, u_fine)
        except DegenerateBondError as error:
            raise DataGenerationError(f"Generated sample collapses a bond: {error}") from error
        low = float(kin.stretch.min())
        if low <= config.MIN_GENERATED_STRETCH:
            raise DataGenerationError(
                f"Generated bond stretch {low:.4f} is not above {config.MIN_GENERATED_STRETCH}; "
                "lower the amplitude or slope range")
        b_fine = -apply_operator(truth, fine, fine_bonds, u_fine)
        u_all[start:start + len(fields)] = u_fine[:, nested]
        b_all[start:start + len(fields), interior] = b_fine[:, nested[interior]]

    order = split_rng(seed).permutation(n_samples)
    bounds = np.cumsum((0,) + split_sizes)
    names = (SplitName.TRAIN, SplitName.VALID, SplitName.TEST)
    picks = {name: np.sort(order[bounds[i]:bounds[i + 1]]) for i, name in enumerate(names)}

    manifest = DatasetManifest(
        dimension=dimension, horizon=horizon, constant=constant, spacing=spacing,
        generator=generator, seed=seed, fine_spacing=fine_spacing, max_frequency=max_frequency,
        amplitude=amplitude, slope_range=slope_range,
        splits={name: SplitSpec(count=int(picks[name].size), origin=measurement.origin, nodes=measurement.counts)
                for name in names})
    dataset = FieldDataset(manifest=manifest,
                           grids={name: measurement for name in names},
                           u={name: u_all[picks[name]] for name in names},
                           b={name: b_all[picks[name]] for name in names})
    output.print_section_item(f"[+] Generated {split_sizes[0]}/{split_sizes[1]}/{split_sizes[2]} "
                              f"train/valid/test samples", color="green")
    return dataset


def subsample(dataset: FieldDataset, spacing: float) -> FieldDataset:
    """Restrict every split to the coarser lattice with the given spacing.

    The coarse lattice keeps its own boundary layer of width ceil(δ/Δx); its
    nodes must be nodes of the original lattice.

    Raises:
        NonNestedMeshError: misaligned spacing or a boundary layer the data does not cover
    """
    manifest = dataset.manifest
    ratio = _nesting_ratio(spacing, manifest.spacing)
    if ratio == 1:
        return dataset

    grids, u, b, specs = {}, {}, {}, {}
    for name, grid in dataset.grids.items():
        shift = grid.layer_width - boundary_layer_width(spacing, manifest.horizon) * ratio
        spans = [n - 1 - 2 * shift for n in grid.counts]
        if shift < 0 or any(span < 0 or span % ratio for span in spans):
            raise NonNestedMeshError(f"Split {name.value}: lattice {grid.counts} cannot be restricted to "
                                     f"spacing {spacing} with horizon {manifest.horizon}")
        origin = tuple(o + shift * grid.spacing for o in grid.origin)
        coarse = build_grid(grid.dimension, origin, spacing, [span // ratio + 1 for span in spans], grid.horizon)
        nodes = np.array([grid.node_at(shift + index * ratio) for index in coarse.multi_index])

        grids[name] = coarse
        u[name] = dataset.u[name][:, nodes]
        b[name] = np.zeros((dataset.b[name].shape[0], coarse.node_count, coarse.dimension))
        b[name][:, coarse.interior_nodes] = dataset.b[name][:, nodes[coarse.interior_nodes]]
        specs[name] = SplitSpec(count=dataset.count(name), origin=coarse.origin, nodes=coarse.counts)

    updated = manifest.model_copy(update={"spacing": spacing, "splits": specs, "checksums": {}})
    output.print_section_item(f"Subsampled dataset from dx={manifest.spacing:.6g} to dx={spacing:.6g}",
                              log_level="debug")
    return FieldDataset(manifest=updated, grids=grids, u=u, b=b)


def stretch_range(dataset: FieldDataset, split=SplitName.TRAIN) -> Tuple[float, float]:
    """Smallest and largest bond stretch the split's displacements produce on its lattice."""
    data = dataset.split(split)
    lo, hi = np.inf, -np.inf
    for start in range(0, data.size, GENERATION_BATCH):
        kin = bond_kinematics(data.grid, data.bonds, data.u[start:start + GENERATION_BATCH])
        lo, hi = min(lo, float(kin.stretch.min())), max(hi, float(kin.stretch.max()))
    return lo, hi
