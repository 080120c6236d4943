"""Grid search over network widths, depths and initial learning rates."""
import itertools
from typing import List, Sequence

from monotone_peridynamics.config import config
from monotone_peridynamics.schemas.config_schema import NetworkConfig, TrainConfig
from monotone_peridynamics.schemas.enums import SplitName, StretchArchitecture
from monotone_peridynamics.services.constitutive import ConstitutiveModel
from monotone_peridynamics.services.datagen import FieldDataset
from monotone_peridynamics.services.training import build_model, train
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

SWEEP_HEADER = ["rank", "width", "depth", "learning_rate", "best_valid_E_b", "best_epoch", "parameters"]


def network_for(base: NetworkConfig, width: int, depth: int) -> NetworkConfig:
    """Apply one (width, depth) grid point to every learnable network."""
    update = {"kernel_hidden": [width] * depth}
    if base.g_arch == StretchArchitecture.MGN:
        update.update({"stretch_width": width, "stretch_layers": depth})
    else:
        update["mlp_hidden"] = [width] * depth
    return base.model_copy(update=update)


def run_sweep(dataset: FieldDataset,
              truth: ConstitutiveModel,
              settings: TrainConfig,
              network: NetworkConfig,
              widths: Sequence[int] = config.SWEEP_WIDTHS,
              depths: Sequence[int] = config.SWEEP_DEPTHS,
              learning_rates: Sequence[float] = config.SWEEP_LEARNING_RATES) -> List[List]:
    """Train one model per grid point; rows ranked by best validation E_b (ties keep grid order)."""
    train_data, valid_data = dataset.split(SplitName.TRAIN), dataset.split(SplitName.VALID)
    results = []
    for width, depth, lr in itertools.product(widths, depths, learning_rates):
        output.print_section_header(f"width={width} depth={depth} lr={lr:g}")
        model = build_model(network_for(network, width, depth), settings.learnable, truth,
                            dataset.manifest.dimension, settings.seed)
        count = model.parameter_count()
        _, history = train(model, train_data, valid_data, settings.model_copy(update={"learning_rate": lr}))
        results.append([width, depth, lr, history.best_valid, history.best_epoch, count])

    results.sort(key=lambda row: (float("inf") if row[3] is None else row[3]))
    return [[rank] + row for rank, row in enumerate(results, start=1)]
