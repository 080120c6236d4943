"""
    Discrete nonlocal operator

        𝒢_Δx[u](x_j) = Σ_k g(λ_jk)·k(ξ_jk)·(ξ+η)/|ξ+η|·Δx^d,

    its small-deformation variant (λ = 1 + ξ·η/|ξ|², direction ξ/|ξ|), the
    residual 𝒢[u] + b and the discrete energy.

    Every operator takes a single Field, a (nodes, d) array or a stack of
    fields (samples, nodes, d) and returns the same kind of object. Outputs at
    boundary-layer nodes are zero and unused.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np

from monotone_peridynamics.services.constitutive import ConstitutiveModel
from monotone_peridynamics.services.geometry import BondTable, Grid
from monotone_peridynamics.utils.exceptions import DataError, DegenerateBondError, GridMismatchError


@dataclass(frozen=True, eq=False)
class Field:
    """Per-node vector values on a grid, shape (node_count, d)."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.grid.node_count, self.grid.dimension)
        if values.size != expected[0] * expected[1]:
            raise GridMismatchError(f"Field has {values.size} values, grid expects {expected[0]}×{expected[1]}")
        values = values.reshape(expected)
        if not np.all(np.isfinite(values)):
            raise DataError("Field values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros((grid.node_count, grid.dimension)))

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_nodes]


FieldLike = Union[Field, np.ndarray]


@dataclass
class BondKinematics:
    """Stretch and unit force direction of every interior bond, shapes (S, m, O) and (S, m, O, d)."""
    stretch: np.ndarray
    direction: np.ndarray


def as_stack(u: FieldLike, grid: Grid) -> np.ndarray:
    """View any field-like input as a (samples, nodes, d) stack."""
    if isinstance(u, Field):
        if u.grid != grid:
            raise GridMismatchError("Field lives on a different grid")
        return u.values[None]
    values = np.asarray(u, dtype=float)
    if values.ndim == 3:
        stack = values
    else:
        stack = values.reshape(1, grid.node_count, grid.dimension) if values.size == grid.node_count * grid.dimension \
            else values
    if stack.ndim != 3 or stack.shape[1:] != (grid.node_count, grid.dimension):
        raise GridMismatchError(
            f"Field array of shape {values.shape} does not match grid ({grid.node_count}, {grid.dimension})")
    return stack


def _like_input(u: FieldLike, grid: Grid, stack: np.ndarray) -> FieldLike:
    if isinstance(u, Field):
        return Field(grid, stack[0])
    if np.asarray(u).ndim == 3:
        return stack
    return stack[0].reshape(np.asarray(u).shape)


def bond_kinematics(grid: Grid, bonds: BondTable, u: FieldLike, linearized: bool = False) -> BondKinematics:
    """λ and force direction for every (interior node, offset) bond.

    Raises:
        DegenerateBondError: a deformed bond has zero length (full kinematics only)
    """
    stack = as_stack(u, grid)
    interior = bonds.interior_nodes
    eta = stack[:, bonds.interior_targets, :] - stack[:, interior, None, :]
    xi = bonds.xi

    if linearized:
        stretch = 1.0 + np.einsum('smod,od->smo', eta, xi) / bonds.xi_norm ** 2
        direction = np.broadcast_to(xi / bonds.xi_norm[:, None], eta.shape)
        return BondKinematics(stretch=stretch, direction=direction)

    deformed = xi + eta
    length = np.linalg.norm(deformed, axis=-1)
    if np.any(length == 0.0):
        s, m, o = np.argwhere(length == 0.0)[0]
        node, neighbor = int(interior[m]), int(bonds.interior_targets[m, o])
        raise DegenerateBondError(f"Deformed bond ({node}, {neighbor}) of sample {s} has zero length",
                                  node=node, neighbor=neighbor)
    return BondKinematics(stretch=length / bonds.xi_norm, direction=deformed / length[..., None])


def accumulate_bonds(magnitude: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Σ_o magnitude·direction per interior node, reduced sequentially in offset order."""
    total = np.zeros(direction.shape[:2] + direction.shape[3:])
    for o in range(direction.shape[2]):
        total += magnitude[:, :, o, None] * direction[:, :, o, :]
    return total


def bond_forces(model: ConstitutiveModel, grid: Grid, bonds: BondTable, u: FieldLike,
                linearized: bool = False) -> np.ndarray:
    """Force magnitudes g(λ)·k(ξ) of every interior bond, shape (S, m, O)."""
    kin = bond_kinematics(grid, bonds, u, linearized)
    return model.stretch_values(kin.stretch) * model.kernel_values(bonds.xi)


def _apply(model: ConstitutiveModel, grid: Grid, bonds: BondTable, u: FieldLike, linearized: bool) -> FieldLike:
    stack = as_stack(u, grid)
    kin = bond_kinematics(grid, bonds, stack, linearized)
    magnitude = model.stretch_values(kin.stretch) * model.kernel_values(bonds.xi) * bonds.weight
    result = np.zeros_like(stack)
    result[:, bonds.interior_nodes, :] = accumulate_bonds(magnitude, kin.direction)
    return _like_input(u, grid, result)


def apply_operator(model: ConstitutiveModel, grid: Grid, bonds: BondTable, u: FieldLike) -> FieldLike:
    """𝒢_Δx[u] at interior nodes (zero on the boundary layer)."""
    return _apply(model, grid, bonds, u, linearized=False)


def apply_linearized(model: ConstitutiveModel, grid: Grid, bonds: BondTable, u: FieldLike) -> FieldLike:
    """Small-deformation operator: linearized stretch and reference bond directions."""
    return _apply(model, grid, bonds, u, linearized=True)


def residual(model: ConstitutiveModel, grid: Grid, bonds: BondTable, u: FieldLike, b: FieldLike,
             linearized: bool = False) -> FieldLike:
    """𝒢[u] + b at interior nodes, zero on the boundary layer."""
    u_stack, b_stack = as_stack(u, grid), as_stack(b, grid)
    if u_stack.shape != b_stack.shape:
        raise GridMismatchError(f"u has shape {u_stack.shape} but b has shape {b_stack.shape}")
    applied = _apply(model, grid, bonds, u_stack, linearized)
    result = np.zeros_like(u_stack)
    interior = bonds.interior_nodes
    result[:, interior] = applied[:, interior] + b_stack[:, interior]
    return _like_input(u, grid, result)


def discrete_energy(model: ConstitutiveModel, grid: Grid, bonds: BondTable, u: FieldLike,
                    b: FieldLike = None, linearized: bool = False):
    """E = ½ Σ_x Σ_ξ |ξ|·k(ξ)·G(λ)·Δx^{2d} + Σ_{x∈Ω} b·u·Δx^d.

    The double sum runs over every stored bond of the lattice, so the
    derivative with respect to an interior displacement is
    Δx^d·(-𝒢[u] + b) at that node for a symmetric kernel.

    Returns:
        float for a single field, (S,) array for a stack
    """
    stack = as_stack(u, grid)
    rows = np.repeat(np.arange(grid.node_count), np.diff(bonds.indptr))
    xi = bonds.xi[bonds.neighbor_offsets]
    xi_norm = bonds.xi_norm[bonds.neighbor_offsets]
    eta = stack[:, bonds.neighbor_ids, :] - stack[:, rows, :]

    if linearized:
        stretch = 1.0 + np.einsum('snd,nd->sn', eta, xi) / xi_norm ** 2
    else:
        length = np.linalg.norm(xi + eta, axis=-1)
        if np.any(length == 0.0):
            s, n = np.argwhere(length == 0.0)[0]
            raise DegenerateBondError(f"Deformed bond ({rows[n]}, {bonds.neighbor_ids[n]}) has zero length",
                                      node=int(rows[n]), neighbor=int(bonds.neighbor_ids[n]))
        stretch = length / xi_norm

    micro = xi_norm * model.kernel_values(xi) * model.antiderivative(stretch)
    energy = 0.5 * micro.sum(axis=1) * bonds.weight ** 2

    if b is not None:
        b_stack = as_stack(b, grid)
        interior = bonds.interior_nodes
        energy = energy + np.einsum('snd,snd->s', b_stack[:, interior], stack[:, interior]) * bonds.weight

    if isinstance(u, Field) or np.asarray(u).ndim < 3:
        return float(energy[0])
    return energy
