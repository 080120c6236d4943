"""Metric report of a trained model against a dataset."""
from typing import List, Optional, Sequence

import numpy as np

from monotone_peridynamics.schemas.config_schema import SolverConfig
from monotone_peridynamics.schemas.enums import GENERATOR_TRUTH, SplitName
from monotone_peridynamics.services.constitutive import ConstitutiveModel, ground_truth_model
from monotone_peridynamics.services.datagen import FieldDataset
from monotone_peridynamics.services.metrics import (
    build_measure_lambda,
    build_measure_xi,
    err_b,
    err_model,
    err_u,
    max_abs_b,
)
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

METRIC_HEADER = ["metric", "split", "dx", "value"]


def dataset_truth(dataset: FieldDataset) -> Optional[ConstitutiveModel]:
    """Analytic ground truth behind a synthetic dataset, None for external data."""
    manifest = dataset.manifest
    if manifest.generator not in GENERATOR_TRUTH:
        return None
    return ground_truth_model(manifest.generator, manifest.constant, manifest.horizon)


def evaluate_model(model: ConstitutiveModel,
                   dataset: FieldDataset,
                   splits: Sequence[SplitName] = (SplitName.VALID, SplitName.TEST),
                   solver: Optional[SolverConfig] = None,
                   solve_split: Optional[SplitName] = SplitName.TEST,
                   threads: int = 1) -> List[List]:
    """Rows (metric, split, dx, value) for E_b, the model errors and E_u.

    E_b is replaced by max_abs_b on splits whose forces vanish identically.
    Model errors need an analytic truth and use measures built from the train
    split. E_u is computed on ``solve_split`` only, with its failure rate.
    """
    dx = dataset.manifest.spacing
    rows: List[List] = []

    for split in splits:
        if dataset.count(split) == 0:
            continue
        data = dataset.split(split)
        if not np.any(data.b):
            rows.append(["max_abs_b", split.value, dx, max_abs_b(model, data)])
        else:
            rows.append(["E_b", split.value, dx, err_b(model, data)])
        output.print_metric(rows[-1][0], rows[-1][3], split.value)

    truth = dataset_truth(dataset)
    if truth is not None and dataset.count(SplitName.TRAIN) > 0:
        train = dataset.split(SplitName.TRAIN)
        errors = err_model(model, truth, build_measure_xi(train, truth), build_measure_lambda(train, truth), train)
        rows += [["E_k", "train", dx, errors.kernel],
                 ["E_g", "train", dx, errors.stretch],
                 ["E_gk", "train", dx, errors.product],
                 ["normalization", "train", dx, errors.scale]]
        output.print_section_item(f"E_k {errors.kernel:.4e}, E_g {errors.stretch:.4e}, E_gk {errors.product:.4e}")

    if solver is not None and solve_split is not None and dataset.count(solve_split) > 0:
        solutions = err_u(model, dataset.split(solve_split), solver, threads)
        rows += [["E_u", solve_split.value, dx, solutions.mean],
                 ["solver_failure_rate", solve_split.value, dx, solutions.failure_rate]]
        output.print_metric("E_u", solutions.mean, solve_split.value)
        output.print_section_item(f"{len(solutions.failures)} of {dataset.count(solve_split)} solves failed",
                                  log_level="warning" if solutions.failures else "info")
    return rows
