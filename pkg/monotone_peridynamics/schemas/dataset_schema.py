"""
    Pydantic models for the dataset manifest.
"""
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from monotone_peridynamics.config.config import DATASET_FORMAT_VERSION
from monotone_peridynamics.schemas.enums import GeneratorTag, SplitName


class ManifestBaseModel(BaseModel):
    model_config = {
        "extra": "forbid",
    }


class SplitSpec(ManifestBaseModel):
    """Sample count and lattice of one split."""
    count: int = Field(ge=0)
    origin: Tuple[float, ...]
    nodes: Tuple[int, ...]


class DatasetManifest(ManifestBaseModel):
    version: int = DATASET_FORMAT_VERSION
    dimension: int = Field(ge=1, le=2)
    horizon: float = Field(gt=0)
    constant: float
    spacing: float = Field(gt=0)
    generator: GeneratorTag
    seed: Optional[int] = None
    fine_spacing: Optional[float] = None
    max_frequency: Optional[int] = None
    amplitude: Optional[float] = None
    slope_range: Optional[Tuple[float, float]] = None
    splits: Dict[SplitName, SplitSpec]
    checksums: Dict[str, str] = Field(default_factory=dict)

    @field_validator("version")
    @classmethod
    def supported_version(cls, value):
        if value != DATASET_FORMAT_VERSION:
            raise ValueError(f"unsupported dataset format version {value}, expected {DATASET_FORMAT_VERSION}")
        return value

    @property
    def sample_count(self) -> int:
        return sum(spec.count for spec in self.splits.values())
