"""
    Pydantic models for run configuration and the flat key-value config files.

    A config file is plain text with one ``key = value`` per line and ``#``
    comments. Keys are routed to TrainConfig, SolverConfig or NetworkConfig by
    field name; list values are comma separated.
"""
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator

from monotone_peridynamics.config import config
from monotone_peridynamics.schemas.enums import Activation, LearnablePart, PhaseMode, StretchArchitecture
from monotone_peridynamics.utils.exceptions import ConfigurationError


class MPNOBaseModel(BaseModel):
    """Base model with strict keys and validated assignment."""
    model_config = {
        "extra": "forbid",
        "validate_assignment": True,
    }


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class NetworkConfig(MPNOBaseModel):
    g_arch: StretchArchitecture = StretchArchitecture.MGN
    stretch_layers: int = Field(default=3, ge=1)
    stretch_width: int = Field(default=32, ge=1)
    stretch_activation: List[Activation] = Field(default_factory=lambda: [Activation.SIGMOID])
    mlp_hidden: List[int] = Field(default_factory=lambda: [128] * 5)
    mlp_activation: Activation = Activation.RELU
    kernel_hidden: List[int] = Field(default_factory=lambda: [32, 32])
    kernel_activation: Activation = Activation.RELU

    @field_validator("stretch_activation", "mlp_hidden", "kernel_hidden", mode="before")
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)

    @field_validator("stretch_activation")
    @classmethod
    def monotone_activations(cls, value):
        if Activation.RELU in value:
            raise ValueError("relu is not differentiable and cannot be used in the monotone stretch network")
        return value


class TrainConfig(MPNOBaseModel):
    case: int = Field(default=3, ge=1, le=3)
    learning_rate: float = Field(default=1e-3, gt=0)
    epochs: int = Field(default=1000, ge=0)
    decay_first: float = config.DECAY_FIRST_THIRD
    decay_rest: float = config.DECAY_REMAINDER
    batch_size: Optional[int] = Field(default=None, ge=1)
    chunk_size: int = Field(default=4, ge=1)
    seed: int = 0
    patience: Optional[int] = Field(default=None, ge=1)
    gradient_check: bool = False
    log_every: int = Field(default=100, ge=1)
    adam_beta1: float = config.ADAM_BETA1
    adam_beta2: float = config.ADAM_BETA2
    adam_epsilon: float = config.ADAM_EPSILON

    @field_validator("decay_first", "decay_rest")
    @classmethod
    def decay_in_unit_interval(cls, value):
        if not 0.0 < value <= 1.0:
            raise ValueError(f"decay factors must lie in (0, 1], got {value}")
        return value

    @property
    def learnable(self) -> LearnablePart:
        return LearnablePart.from_case(self.case)


class SolverConfig(MPNOBaseModel):
    tolerance: float = Field(default=config.SOLVER_TOLERANCE, gt=0)
    max_iterations: int = Field(default=config.SOLVER_MAX_ITERATIONS, ge=1)
    damping_scale: float = Field(default=config.SOLVER_DAMPING_SCALE, gt=0)
    damping_up: float = config.SOLVER_DAMPING_UP
    damping_down: float = config.SOLVER_DAMPING_DOWN
    fd_step: float = Field(default=config.SOLVER_FD_STEP, gt=0)
    phase: PhaseMode = PhaseMode.TWO_PHASE

    @field_validator("damping_up")
    @classmethod
    def up_above_one(cls, value):
        if not value > 1.0:
            raise ValueError(f"damping_up must exceed 1, got {value}")
        return value

    @field_validator("damping_down")
    @classmethod
    def down_below_one(cls, value):
        if not 0.0 < value < 1.0:
            raise ValueError(f"damping_down must lie in (0, 1), got {value}")
        return value


class RunConfig(MPNOBaseModel):
    command: str
    data: Optional[Path] = None
    checkpoint: Optional[Path] = None
    output: Optional[Path] = None
    seed: int = 0
    threads: int = Field(default=config.DEFAULT_THREADS, ge=1)
    train: TrainConfig = Field(default_factory=TrainConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)


def load_key_value_file(path) -> Dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are skipped.

    Raises:
        ConfigurationError: missing file, malformed line or duplicate key
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Config file not found: {path}")
    values: Dict[str, str] = {}
    for number, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{number}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{path}:{number}: empty key")
        if key in values:
            raise ConfigurationError(f"{path}:{number}: duplicate key '{key}'")
        values[key] = value
    return values


def build_configs(values: Dict[str, str],
                  base: Tuple[TrainConfig, SolverConfig, NetworkConfig] = None
                  ) -> Tuple[TrainConfig, SolverConfig, NetworkConfig]:
    """Route flat key-value overrides onto the three config models."""
    train, solver, network = base if base is not None else (TrainConfig(), SolverConfig(), NetworkConfig())
    groups = {"train": {}, "solver": {}, "network": {}}
    owners = [("train", TrainConfig), ("solver", SolverConfig), ("network", NetworkConfig)]
    for key, value in values.items():
        owner = next((name for name, model in owners if key in model.model_fields), None)
        if owner is None:
            raise ConfigurationError(f"Unknown config key '{key}'")
        groups[owner][key] = value
    try:
        train = TrainConfig(**{**train.model_dump(), **groups["train"]})
        solver = SolverConfig(**{**solver.model_dump(), **groups["solver"]})
        network = NetworkConfig(**{**network.model_dump(), **groups["network"]})
    except ValidationError as error:
        raise ConfigurationError(f"Invalid configuration: {error}") from error
    return train, solver, network
