"""Monotone network against the unconstrained MLP for learning g (k known)."""
from typing import List, Optional

from monotone_peridynamics.automations.evaluation import dataset_truth
from monotone_peridynamics.schemas.config_schema import NetworkConfig, SolverConfig, TrainConfig
from monotone_peridynamics.schemas.enums import LearnablePart, SplitName, StretchArchitecture
from monotone_peridynamics.services.datagen import FieldDataset, stretch_range
from monotone_peridynamics.services.metrics import build_measure_lambda, build_measure_xi, err_b, err_model, err_u
from monotone_peridynamics.services.training import build_model, train
from monotone_peridynamics.utils.exceptions import ConfigurationError
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

COMPARISON_HEADER = ["architecture", "metric", "value"]


def compare_stretch_architectures(dataset: FieldDataset,
                                  settings: TrainConfig,
                                  network: NetworkConfig,
                                  solver: Optional[SolverConfig] = None,
                                  threads: int = 1) -> List[List]:
    """Train g with both architectures and report E_g, E_b, E_u and solver failures.

    Returns:
        rows (architecture, metric, value), MGN first
    """
    truth = dataset_truth(dataset)
    if truth is None:
        raise ConfigurationError("The architecture comparison needs a synthetic dataset with a known truth")
    settings = settings.model_copy(update={"case": 2})
    solver = solver or SolverConfig()

    train_data = dataset.split(SplitName.TRAIN)
    low, high = stretch_range(dataset, SplitName.TRAIN)
    output.print_section_item(f"Training stretches span [{low:.4f}, {high:.4f}]")
    measure_xi, measure_lambda = build_measure_xi(train_data, truth), build_measure_lambda(train_data, truth)

    rows: List[List] = [["data", "stretch_min", low], ["data", "stretch_max", high]]
    for arch in (StretchArchitecture.MGN, StretchArchitecture.MLP):
        output.print_section_header(f"Architecture {arch.value}")
        model = build_model(network.model_copy(update={"g_arch": arch}), LearnablePart.STRETCH_ONLY, truth,
                            dataset.manifest.dimension, settings.seed)
        rows.append([arch.value, "parameters", model.parameter_count()])
        model, history = train(model, train_data, dataset.split(SplitName.VALID), settings)
        errors = err_model(model, truth, measure_xi, measure_lambda, train_data)
        solutions = err_u(model, dataset.split(SplitName.TEST), solver, threads)
        rows += [[arch.value, "best_valid_E_b", history.best_valid],
                 [arch.value, "E_b_test", err_b(model, dataset.split(SplitName.TEST))],
                 [arch.value, "E_g", errors.stretch],
                 [arch.value, "E_u", solutions.mean],
                 [arch.value, "solver_failures", len(solutions.failures)]]
    return rows
