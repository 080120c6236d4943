"""
    Mesh-refinement study: one synthetic dataset on the finest measurement
    lattice, restricted to every coarser spacing, with either the Case-1
    least-squares kernel or a trained model fitted per level.
"""
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from monotone_peridynamics.config import config
from monotone_peridynamics.schemas.config_schema import NetworkConfig, TrainConfig
from monotone_peridynamics.schemas.enums import GeneratorTag, SplitName
from monotone_peridynamics.services.constitutive import ConstitutiveModel, TabulatedKernel, ground_truth_model
from monotone_peridynamics.services.datagen import generate_dataset, subsample
from monotone_peridynamics.services.metrics import (
    ConvergenceTable,
    build_measure_lambda,
    build_measure_xi,
    case1_least_squares,
    err_b,
    err_model,
    relative_l2,
)
from monotone_peridynamics.services.training import build_model, train
from monotone_peridynamics.utils.csv_tables import write_csv
from monotone_peridynamics.utils.exceptions import ConfigurationError
from monotone_peridynamics.utils.output_manager import OutputManager
from monotone_peridynamics.utils.svg_plot import write_line_plot

output = OutputManager(__name__)

LEAST_SQUARES = "least-squares"
TRAINED = "train"


def run_convergence_study(generator,
                          spacings: Sequence[float] = config.CONVERGENCE_SPACINGS,
                          method: str = LEAST_SQUARES,
                          n_samples: int = 40,
                          split_sizes: Sequence[int] = (30, 5, 5),
                          seed: int = 0,
                          fine_spacing: float = config.CONVERGENCE_FINE_SPACING,
                          horizon: float = config.DEFAULT_HORIZON,
                          constant: float = config.DEFAULT_KERNEL_CONSTANT,
                          max_frequency: int = config.DEFAULT_MAX_FREQUENCY,
                          train_settings: Optional[TrainConfig] = None,
                          network: Optional[NetworkConfig] = None) -> ConvergenceTable:
    """Errors per mesh level.

    least-squares: E_k of the Case-1 kernel fit against the true kernel at the
    level's offsets, and E_b of the fitted pair on the test split.
    train: E_b on the test split and E_k/E_g/E_gk of a model trained per level.

    Raises:
        ConfigurationError: fewer than three levels or an unknown method
    """
    spacings = sorted((float(s) for s in spacings), reverse=True)
    if len(spacings) < 3:
        raise ConfigurationError(f"A convergence study needs at least 3 mesh levels, got {len(spacings)}")
    if method not in (LEAST_SQUARES, TRAINED):
        raise ConfigurationError(f"Unknown convergence method '{method}'")

    truth = ground_truth_model(generator, constant, horizon)
    finest = spacings[-1]
    dataset = generate_dataset(GeneratorTag(generator), n_samples=n_samples, fine_spacing=fine_spacing,
                               measurement_points=int(round(1.0 / finest)) + 1, horizon=horizon,
                               constant=constant, split_sizes=split_sizes, seed=seed,
                               max_frequency=max_frequency)

    table = ConvergenceTable()
    for spacing in spacings:
        level = subsample(dataset, spacing)
        train_data, test_data = level.split(SplitName.TRAIN), level.split(SplitName.TEST)
        output.print_section_header(f"Level dx = {spacing:.6g}")

        if method == LEAST_SQUARES:
            fit = case1_least_squares(train_data, truth)
            bonds = train_data.bonds
            model = ConstitutiveModel(truth.stretch, TabulatedKernel(spacing, bonds.offsets, fit.values))
            table.add(spacing,
                      E_k=relative_l2(fit.values, truth.kernel_values(bonds.xi)),
                      E_b=err_b(model, test_data))
        else:
            settings = train_settings or TrainConfig(case=1)
            model = build_model(network or NetworkConfig(), settings.learnable, truth, level.manifest.dimension,
                                settings.seed)
            model, _ = train(model, train_data, level.split(SplitName.VALID), settings)
            errors = err_model(model, truth, build_measure_xi(train_data, truth),
                               build_measure_lambda(train_data, truth), train_data)
            table.add(spacing, E_b=err_b(model, test_data), E_k=errors.kernel, E_g=errors.stretch,
                      E_gk=errors.product)

        output.print_section_item(", ".join(f"{m} {v[-1]:.4e}" for m, v in table.errors.items()))

    for metric in table.errors:
        order = table.order(metric)
        if order is not None:
            output.print_section_item(f"[+] {metric}: fitted order {order:.3f}", color="green")
    return table


def write_convergence_outputs(table: ConvergenceTable, directory, title: str = "") -> None:
    """errors.csv, orders.csv and a log-log errors.svg."""
    directory = Path(directory)
    write_csv(directory / "errors.csv", ["metric", "dx", "error"], table.rows())
    write_csv(directory / "orders.csv", ["metric", "order"], table.order_rows())
    series = {metric: (np.asarray(table.spacings), np.asarray(values)) for metric, values in table.errors.items()}
    write_line_plot(directory / "errors.svg", series, title=title, x_label="dx", y_label="error",
                    log_x=True, log_y=True)
