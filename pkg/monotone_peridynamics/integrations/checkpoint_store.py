"""
    Text checkpoints for constitutive models.

    Layout, one item per line:

        mpno-checkpoint 1
        scales <stretch_scale> <kernel_scale>
        trainable g,k
        component g kind=mgn layers=3 ...
        param g.W 32
        <values>
        component k kind=kernel ...
        param k.weight_0 1,32
        <values>
        end

    Values are written with 17 significant digits so binary64 parameters
    survive the round trip exactly.
"""
from pathlib import Path
from typing import Dict, List

import numpy as np

from monotone_peridynamics.schemas.enums import Activation
from monotone_peridynamics.services.constitutive import AnalyticKernel, AnalyticStretch, ConstitutiveModel
from monotone_peridynamics.services.networks import KernelNet, MonotoneStretchNet, StretchMLP
from monotone_peridynamics.utils.exceptions import DatasetFormatError
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

CHECKPOINT_HEADER = "mpno-checkpoint 1"


def _format_values(values: np.ndarray) -> str:
    return " ".join(format(float(v), ".17g") for v in np.asarray(values).reshape(-1))


def format_checkpoint(model: ConstitutiveModel) -> str:
    lines = [CHECKPOINT_HEADER,
             f"scales {model.stretch_scale:.17g} {model.kernel_scale:.17g}",
             f"trainable {','.join(sorted(model.trainable))}"]
    for part, component in (("g", model.stretch), ("k", model.kernel)):
        architecture = component.architecture()
        lines.append(f"component {part} " + " ".join(f"{key}={value}" for key, value in architecture.items()))
        for name, value in getattr(component, "params", {}).items():
            lines.append(f"param {part}.{name} {','.join(str(n) for n in value.shape)}")
            lines.append(_format_values(value))
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_checkpoint(model: ConstitutiveModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_checkpoint(model))
    return path


def _split_list(value: str) -> List[str]:
    return [item for item in value.split(",") if item]


def _build_component(architecture: Dict[str, str]):
    kind = architecture.get("kind")
    if kind == AnalyticStretch.kind:
        return AnalyticStretch(architecture["tag"])
    if kind == AnalyticKernel.kind:
        return AnalyticKernel(architecture["tag"], float(architecture["constant"]), float(architecture["horizon"]))
    if kind == MonotoneStretchNet.kind:
        return MonotoneStretchNet(int(architecture["layers"]), int(architecture["width"]),
                                  [Activation(a) for a in _split_list(architecture["activations"])])
    if kind == KernelNet.kind:
        return KernelNet(int(architecture["input_dim"]), [int(w) for w in _split_list(architecture["hidden_widths"])],
                         Activation(architecture["activation"]))
    if kind == StretchMLP.kind:
        return StretchMLP([int(w) for w in _split_list(architecture["hidden_widths"])],
                          Activation(architecture["activation"]))
    raise DatasetFormatError(f"Unknown component kind '{kind}' in checkpoint")


def parse_checkpoint(text: str) -> ConstitutiveModel:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_HEADER:
        raise DatasetFormatError("Not a checkpoint file (bad header)")
    try:
        scales = lines[1].split()
        trainable = _split_list(lines[2].split(" ", 1)[1]) if " " in lines[2] else []
        components, params = {}, {}
        position = 3
        while lines[position].strip() != "end":
            tokens = lines[position].split()
            if tokens[0] == "component":
                architecture = dict(token.split("=", 1) for token in tokens[2:])
                components[tokens[1]] = _build_component(architecture)
                position += 1
            elif tokens[0] == "param":
                shape = tuple(int(n) for n in _split_list(tokens[2]))
                values = np.array([float(v) for v in lines[position + 1].split()], dtype=float)
                params[tokens[1]] = values.reshape(shape)
                position += 2
            else:
                raise DatasetFormatError(f"Unexpected checkpoint line {position + 1}: '{lines[position]}'")
    except (IndexError, KeyError, ValueError) as error:
        if isinstance(error, DatasetFormatError):
            raise
        raise DatasetFormatError(f"Malformed checkpoint: {error}") from error

    if set(components) != {"g", "k"}:
        raise DatasetFormatError("Checkpoint must describe both the stretch (g) and kernel (k) components")
    model = ConstitutiveModel(components["g"], components["k"], float(scales[1]), float(scales[2]),
                              trainable=trainable)
    missing = set(model.network_parameters()) - set(params)
    if missing:
        raise DatasetFormatError(f"Checkpoint lacks parameter blocks {sorted(missing)}")
    try:
        model.set_parameters(params)
    except (KeyError, ValueError) as error:
        raise DatasetFormatError(f"Checkpoint parameters do not fit the architecture: {error}") from error
    return model


def load_checkpoint(path) -> ConstitutiveModel:
    path = Path(path)
    if not path.is_file():
        raise DatasetFormatError(f"Checkpoint not found: {path}")
    model = parse_checkpoint(path.read_text())
    output.print_section_item(f"Loaded checkpoint {path}: {model.describe()}", log_level="debug")
    return model
