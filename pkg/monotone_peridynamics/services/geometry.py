"""
    Uniform node lattices over the domain plus its nonlocal boundary layer,
    neighbour enumeration inside the horizon and per-bond kinematics.
"""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Tuple, Union

import numpy as np

from monotone_peridynamics.schemas.enums import RegionTag
from monotone_peridynamics.utils.exceptions import DegenerateBondError, GeometryError
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

# Offsets within this relative distance of the horizon count as lying on it
HORIZON_RTOL = 1e-12


def boundary_layer_width(spacing: float, horizon: float) -> int:
    """Smallest node count whose span reaches the horizon."""
    return int(math.ceil(horizon / spacing * (1.0 - HORIZON_RTOL)))


@dataclass(frozen=True)
class Grid:
    """Uniform lattice over Ω ∪ Ω_I.

    Nodes are numbered in C order (last axis fastest). Coordinates are always
    derived from the integer multi-index, so coarse and fine lattices sharing an
    origin produce bit-identical positions at shared nodes.
    """
    dimension: int
    origin: Tuple[float, ...]
    spacing: float
    counts: Tuple[int, ...]
    horizon: float

    @property
    def node_count(self) -> int:
        return int(np.prod(self.counts))

    @property
    def layer_width(self) -> int:
        """Number of boundary-layer nodes on each side of each axis."""
        return boundary_layer_width(self.spacing, self.horizon)

    @cached_property
    def strides(self) -> np.ndarray:
        strides = np.ones(self.dimension, dtype=np.int64)
        for axis in range(self.dimension - 2, -1, -1):
            strides[axis] = strides[axis + 1] * self.counts[axis + 1]
        return strides

    @cached_property
    def multi_index(self) -> np.ndarray:
        """(node_count, d) integer lattice indices."""
        grids = np.indices(self.counts, dtype=np.int64)
        return grids.reshape(self.dimension, -1).T.copy()

    @cached_property
    def coordinates(self) -> np.ndarray:
        """(node_count, d) node positions, origin + index * spacing."""
        return np.asarray(self.origin, dtype=float) + self.multi_index * self.spacing

    @cached_property
    def interior_mask(self) -> np.ndarray:
        width = self.layer_width
        counts = np.asarray(self.counts)
        index = self.multi_index
        return np.all((index >= width) & (index <= counts - 1 - width), axis=1)

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask)

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.interior_mask)

    def region(self, node: int) -> RegionTag:
        return RegionTag.INTERIOR if self.interior_mask[node] else RegionTag.BOUNDARY_LAYER

    def node_at(self, index: Sequence[int]) -> int:
        return int(np.dot(np.asarray(index, dtype=np.int64), self.strides))

    def describe(self) -> str:
        return (f"d={self.dimension}, dx={self.spacing:.6g}, counts={self.counts}, "
                f"delta={self.horizon:.6g}, interior={self.interior_nodes.size}")


def build_grid(dimension: int,
               origin: Union[float, Sequence[float]],
               spacing: float,
               counts: Union[int, Sequence[int]],
               horizon: float) -> Grid:
    """Build a uniform grid and tag interior / boundary-layer nodes.

    A node is interior when its distance to the edge of the lattice is at
    least the horizon, so every interior node owns a complete neighbourhood.

    Args:
        dimension: 1 or 2
        origin: coordinate of node 0 per axis (a scalar is broadcast)
        spacing: lattice spacing Δx, shared by all axes
        counts: nodes per axis (a scalar is broadcast)
        horizon: interaction radius δ

    Returns:
        Grid: the immutable lattice

    Raises:
        GeometryError: non-positive spacing or horizon, δ < Δx, or no interior node
    """
    if dimension not in (1, 2):
        raise GeometryError(f"Only 1D and 2D grids are supported, got d={dimension}")
    if not (np.isfinite(spacing) and spacing > 0):
        raise GeometryError(f"Grid spacing must be positive, got {spacing}")
    if not (np.isfinite(horizon) and horizon > 0):
        raise GeometryError(f"Horizon must be positive, got {horizon}")
    if horizon < spacing:
        raise GeometryError(
            f"Horizon {horizon} is smaller than the spacing {spacing}: neighbourhoods would be empty")

    origin = tuple(float(o) for o in np.broadcast_to(np.asarray(origin, dtype=float), (dimension,)))
    counts = tuple(int(n) for n in np.broadcast_to(np.asarray(counts), (dimension,)))
    if any(n <= 0 for n in counts):
        raise GeometryError(f"Node counts must be positive, got {counts}")

    grid = Grid(dimension=dimension, origin=origin, spacing=float(spacing), counts=counts,
                horizon=float(horizon))
    if grid.interior_nodes.size == 0:
        raise GeometryError(f"Grid has no interior node ({grid.describe()})")

    output.print_section_item(f"Built grid: {grid.describe()}", log_level="debug")
    return grid


def build_padded_grid(dimension: int,
                      spacing: float,
                      horizon: float,
                      domain: Tuple[float, float] = (0.0, 1.0)) -> Grid:
    """Build the grid whose interior is exactly the lattice over [lo, hi]^d.

    The boundary layer gets ceil(δ/Δx) nodes per side, so the origin is
    lo - ceil(δ/Δx)·Δx.
    """
    if not (np.isfinite(spacing) and spacing > 0):
        raise GeometryError(f"Grid spacing must be positive, got {spacing}")
    lo, hi = domain
    intervals = (hi - lo) / spacing
    if abs(intervals - round(intervals)) > 1e-9 * max(1.0, intervals):
        raise GeometryError(f"Spacing {spacing} does not divide the domain [{lo}, {hi}]")
    if horizon < spacing:
        raise GeometryError(
            f"Horizon {horizon} is smaller than the spacing {spacing}: neighbourhoods would be empty")

    width = boundary_layer_width(spacing, horizon)
    count = int(round(intervals)) + 1 + 2 * width
    return build_grid(dimension, lo - width * spacing, spacing, count, horizon)


@dataclass(frozen=True)
class BondState:
    xi: np.ndarray
    eta: np.ndarray
    stretch: float


class BondTable:
    """Neighbour lists and bond offsets for every node of a grid.

    Offsets are enumerated once, in lexicographic order of their integer
    lattice vector; every per-node list follows that order. Interior nodes
    have a complete neighbourhood, stored densely in ``interior_targets``.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.offsets = self._enumerate_offsets(grid)
        self.xi = self.offsets * grid.spacing
        self.xi_norm = np.linalg.norm(self.xi, axis=1)
        self.weight = grid.spacing ** grid.dimension
        self.flat_shifts = self.offsets @ grid.strides

        # CSR lists over every node
        targets_index = grid.multi_index[:, None, :] + self.offsets[None, :, :]
        counts = np.asarray(grid.counts)
        valid = np.all((targets_index >= 0) & (targets_index < counts), axis=2)
        flat_targets = np.arange(grid.node_count)[:, None] + self.flat_shifts[None, :]
        self.indptr = np.concatenate([[0], np.cumsum(valid.sum(axis=1))])
        self.neighbor_ids = flat_targets[valid]
        self.neighbor_offsets = np.broadcast_to(np.arange(self.offsets.shape[0]), valid.shape)[valid]

        self.interior_nodes = grid.interior_nodes
        self.interior_targets = self.interior_nodes[:, None] + self.flat_shifts[None, :]

    @staticmethod
    def _enumerate_offsets(grid: Grid) -> np.ndarray:
        reach = int(math.floor(grid.horizon / grid.spacing)) + 1
        axis = np.arange(-reach, reach + 1)
        mesh = np.stack(np.meshgrid(*([axis] * grid.dimension), indexing='ij'), axis=-1)
        candidates = mesh.reshape(-1, grid.dimension)
        radius = np.linalg.norm(candidates * grid.spacing, axis=1)
        keep = (radius > 0) & (radius < grid.horizon * (1.0 - HORIZON_RTOL))
        return candidates[keep].astype(np.int64)

    @property
    def offset_count(self) -> int:
        return self.offsets.shape[0]

    @property
    def bond_count(self) -> int:
        return int(self.neighbor_ids.size)

    def neighbors(self, node: int) -> Tuple[np.ndarray, np.ndarray]:
        """Neighbour node ids of ``node`` and the offset id of each bond."""
        start, stop = self.indptr[node], self.indptr[node + 1]
        return self.neighbor_ids[start:stop], self.neighbor_offsets[start:stop]

    def offset_id(self, lattice_offset: Sequence[int]) -> int:
        matches = np.flatnonzero(np.all(self.offsets == np.asarray(lattice_offset), axis=1))
        if matches.size == 0:
            raise KeyError(f"Offset {tuple(lattice_offset)} is not a bond of this table")
        return int(matches[0])


def build_bond_table(grid: Grid) -> BondTable:
    """Enumerate all bonds with 0 < |ξ| < δ and attach the weights Δx^d."""
    bonds = BondTable(grid)
    output.print_section_item(
        f"Bond table: {bonds.offset_count} offsets per interior node, {bonds.bond_count} bonds",
        log_level="debug")
    return bonds


def bond_state(grid: Grid, u, node: int, neighbor: int) -> BondState:
    """Kinematics of the bond from ``node`` to ``neighbor`` under displacement ``u``.

    Args:
        grid: grid the displacement lives on
        u: (node_count, d) displacement array or a Field
        node: index j of the bond origin
        neighbor: index k of the bond end

    Returns:
        BondState: ξ = x_k - x_j, η = u_k - u_j and λ = |ξ + η| / |ξ|

    Raises:
        GeometryError: when j == k (no self bonds)
        DegenerateBondError: when the deformed bond collapses to zero length
    """
    values = np.asarray(getattr(u, 'values', u), dtype=float).reshape(grid.node_count, grid.dimension)
    xi = (grid.multi_index[neighbor] - grid.multi_index[node]) * grid.spacing
    xi_norm = float(np.linalg.norm(xi))
    if xi_norm == 0.0:
        raise GeometryError(f"Bond ({node}, {neighbor}) has zero reference length")

    eta = values[neighbor] - values[node]
    deformed = float(np.linalg.norm(xi + eta))
    if deformed == 0.0:
        raise DegenerateBondError(f"Deformed bond ({node}, {neighbor}) has zero length",
                                  node=node, neighbor=neighbor)
    return BondState(xi=xi, eta=eta, stretch=deformed / xi_norm)
