"""
    Displacement solves with Levenberg-Marquardt on the interior unknowns.

    Unknowns are the interior nodes in lexicographic order with the d
    components interleaved per node. Boundary-layer rows are copied from the
    prescribed data and never change.
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.linalg

from monotone_peridynamics.schemas.config_schema import SolverConfig
from monotone_peridynamics.schemas.enums import PhaseMode, SolverPhase
from monotone_peridynamics.services.constitutive import ConstitutiveModel
from monotone_peridynamics.services.geometry import BondTable, Grid
from monotone_peridynamics.services.operator import as_stack, residual
from monotone_peridynamics.utils.exceptions import DegenerateBondError, SolverFailure, StretchDomainError
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

# Perturbed residuals evaluated together when assembling a Jacobian
JACOBIAN_BATCH = 64

# Damping above this multiple of max diag(JᵀJ) means the step has stagnated
DAMPING_CEILING = 1e16


@dataclass
class TraceRow:
    phase: SolverPhase
    iteration: int
    residual_norm: float
    damping: float
    accepted: bool


@dataclass
class SolveResult:
    u: np.ndarray
    converged: bool
    iterations: int
    relative_residual: float
    phase: SolverPhase
    trace: List[TraceRow] = field(default_factory=list)


@dataclass
class TwoPhaseResult:
    u: np.ndarray
    converged: bool
    phases: List[SolveResult]

    @property
    def failed_phase(self) -> Optional[SolverPhase]:
        return next((p.phase for p in self.phases if not p.converged), None)

    @property
    def trace(self) -> List[TraceRow]:
        return [row for p in self.phases for row in p.trace]


class ResidualSystem:
    """F(x) = 𝒢[u(x)] + b restricted to interior rows, with u(x) fixed on the boundary layer."""

    def __init__(self, model: ConstitutiveModel, grid: Grid, bonds: BondTable, b, u_bc, linearized: bool):
        self.model = model
        self.grid = grid
        self.bonds = bonds
        self.linearized = linearized
        self.b = as_stack(b, grid)[0]
        self.u_bc = as_stack(u_bc, grid)[0].copy()
        self.interior = bonds.interior_nodes
        self.scale = float(np.linalg.norm(self.b[self.interior])) or 1.0

    def unknowns(self, u) -> np.ndarray:
        return as_stack(u, self.grid)[0][self.interior].reshape(-1).copy()

    def expand(self, x: np.ndarray) -> np.ndarray:
        """(k, N) unknown vectors -> (k, nodes, d) displacement stack."""
        x = np.atleast_2d(x)
        stack = np.repeat(self.u_bc[None], x.shape[0], axis=0)
        stack[:, self.interior] = x.reshape(x.shape[0], self.interior.size, self.grid.dimension)
        return stack

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Residual rows for one (N,) vector or a (k, N) batch."""
        stack = self.expand(x)
        b = np.broadcast_to(self.b, stack.shape)
        r = residual(self.model, self.grid, self.bonds, stack, b, linearized=self.linearized)
        rows = r[:, self.interior].reshape(stack.shape[0], -1)
        return rows[0] if np.ndim(x) == 1 else rows

    def jacobian(self, x: np.ndarray, f: np.ndarray, step: float) -> np.ndarray:
        """Forward differences, column i perturbed by step·(1 + |x_i|)."""
        n = x.size
        jac = np.empty((f.size, n))
        for start in range(0, n, JACOBIAN_BATCH):
            cols = np.arange(start, min(start + JACOBIAN_BATCH, n))
            h = step * (1.0 + np.abs(x[cols]))
            shifted = np.repeat(x[None], cols.size, axis=0)
            shifted[np.arange(cols.size), cols] += h
            jac[:, cols] = ((self(shifted) - f) / h[:, None]).T
        return jac


def levenberg_marquardt(system: ResidualSystem,
                        x0: np.ndarray,
                        settings: SolverConfig,
                        phase: SolverPhase) -> SolveResult:
    """Damped Gauss-Newton on ‖F‖² with the Marquardt damping policy.

    Solves (JᵀJ + μI)s = -JᵀF; a step is accepted only when it lowers ‖F‖, which
    also shrinks μ by ``damping_down``; a rejected or degenerate step grows μ by
    ``damping_up``. Stops once ‖F‖/‖b‖ ≤ tolerance.
    """
    x = x0.copy()
    trace: List[TraceRow] = []

    def result(converged: bool, iterations: int, norm: float) -> SolveResult:
        return SolveResult(u=system.expand(x)[0], converged=converged, iterations=iterations,
                           relative_residual=norm / system.scale, phase=phase, trace=trace)

    try:
        f = system(x)
    except (DegenerateBondError, StretchDomainError) as error:
        output.print_section_item(f"[X] {phase.value} phase: initial iterate is degenerate ({error})",
                                  log_level="error", color="red")
        return result(False, 0, np.inf)
    norm = float(np.linalg.norm(f))
    trace.append(TraceRow(phase, 0, norm, 0.0, True))
    if norm / system.scale <= settings.tolerance:
        return result(True, 0, norm)

    jac = system.jacobian(x, f, settings.fd_step)
    normal = jac.T @ jac
    gradient = jac.T @ f
    diag_max = float(np.max(np.diag(normal))) or 1.0
    damping = settings.damping_scale * diag_max

    for iteration in range(1, settings.max_iterations + 1):
        accepted = False
        try:
            step = scipy.linalg.solve(normal + damping * np.eye(x.size), -gradient, assume_a='pos')
            f_new = system(x + step)
            norm_new = float(np.linalg.norm(f_new))
            accepted = norm_new < norm
        except (scipy.linalg.LinAlgError, DegenerateBondError, StretchDomainError):
            pass

        if accepted:
            x = x + step
            f, norm = f_new, norm_new
            damping *= settings.damping_down
            trace.append(TraceRow(phase, iteration, norm, damping, True))
            if norm / system.scale <= settings.tolerance:
                return result(True, iteration, norm)
            jac = system.jacobian(x, f, settings.fd_step)
            normal = jac.T @ jac
            gradient = jac.T @ f
        else:
            damping *= settings.damping_up
            trace.append(TraceRow(phase, iteration, norm, damping, False))
            if damping > DAMPING_CEILING * diag_max:
                break

    return result(False, len(trace) - 1, norm)


def solve_small_deformation(model: ConstitutiveModel, grid: Grid, bonds: BondTable, b, u_bc,
                            settings: SolverConfig = None) -> SolveResult:
    """Linearized-stretch equilibrium from a zero interior initial guess."""
    settings = settings or SolverConfig()
    system = ResidualSystem(model, grid, bonds, b, u_bc, linearized=True)
    return levenberg_marquardt(system, np.zeros(system.interior.size * grid.dimension), settings,
                               SolverPhase.SMALL_DEFORMATION)


def solve_full(model: ConstitutiveModel, grid: Grid, bonds: BondTable, b, u_bc, u_init,
               settings: SolverConfig = None) -> SolveResult:
    """Full nonlinear equilibrium starting from ``u_init`` (its interior values)."""
    settings = settings or SolverConfig()
    system = ResidualSystem(model, grid, bonds, b, u_bc, linearized=False)
    return levenberg_marquardt(system, system.unknowns(u_init), settings, SolverPhase.FULL)


def two_phase_solve(model: ConstitutiveModel, grid: Grid, bonds: BondTable, b, u_bc,
                    settings: SolverConfig = None, raise_on_failure: bool = False) -> TwoPhaseResult:
    """Phase 1 (small deformation) then phase 2 (full model) initialized at phase 1.

    ``settings.phase`` selects the composition: two-phase, one-phase (full model
    from zero) or small-only (phase 1 result returned as is). The outcome is
    converged only when every phase that ran converged; a failed phase 1 ends
    the solve with its best iterate, since phase 2 would start from it.

    Raises:
        SolverFailure: only with ``raise_on_failure``, naming the failed phase
    """
    settings = settings or SolverConfig()
    phases: List[SolveResult] = []

    if settings.phase in (PhaseMode.TWO_PHASE, PhaseMode.SMALL_ONLY):
        small = solve_small_deformation(model, grid, bonds, b, u_bc, settings)
        phases.append(small)
        start = small.u
    else:
        start = ResidualSystem(model, grid, bonds, b, u_bc, linearized=False).expand(
            np.zeros(bonds.interior_nodes.size * grid.dimension))[0]

    if settings.phase != PhaseMode.SMALL_ONLY and all(p.converged for p in phases):
        phases.append(solve_full(model, grid, bonds, b, u_bc, start, settings))

    converged = all(p.converged for p in phases)
    outcome = TwoPhaseResult(u=phases[-1].u, converged=converged, phases=phases)

    for p in phases:
        mark, level = ("[+]", "debug") if p.converged else ("[!]", "warning")
        output.print_section_item(f"{mark} {p.phase.value} phase: {p.iterations} iterations, "
                                  f"relative residual {p.relative_residual:.3e}", log_level=level)
    if not converged and settings.phase == PhaseMode.TWO_PHASE and len(phases) == 1:
        output.print_section_item("[!] full phase skipped after the small-deformation phase failed",
                                  log_level="warning")
    if raise_on_failure and not converged:
        failed = outcome.failed_phase
        raise SolverFailure(f"{failed.value} phase did not converge", phase=failed.value, result=outcome)
    return outcome
