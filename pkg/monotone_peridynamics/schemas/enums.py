from enum import Enum


class RegionTag(str, Enum):
    INTERIOR = "interior"
    BOUNDARY_LAYER = "boundary_layer"


class StretchTag(str, Enum):
    BLATZ_KO = "bk"
    SINE = "sine"


class KernelTag(str, Enum):
    EX1 = "ex1"
    EX2 = "ex2"


class GeneratorTag(str, Enum):
    EX1 = "ex1"
    EX2 = "ex2"
    SINE = "sine"
    EXTERNAL = "external"


class LearnablePart(str, Enum):
    KERNEL_ONLY = "k"       # Case 1
    STRETCH_ONLY = "g"      # Case 2
    BOTH = "gk"             # Case 3

    @classmethod
    def from_case(cls, case: int) -> "LearnablePart":
        mapping = {1: cls.KERNEL_ONLY, 2: cls.STRETCH_ONLY, 3: cls.BOTH}
        if case not in mapping:
            raise ValueError(f"Unknown learning case {case}; expected 1, 2 or 3")
        return mapping[case]

    @property
    def learns_stretch(self) -> bool:
        return self in (LearnablePart.STRETCH_ONLY, LearnablePart.BOTH)

    @property
    def learns_kernel(self) -> bool:
        return self in (LearnablePart.KERNEL_ONLY, LearnablePart.BOTH)


class StretchArchitecture(str, Enum):
    MGN = "mgn"
    MLP = "mlp"


class Activation(str, Enum):
    IDENTITY = "identity"
    SIGMOID = "sigmoid"
    TANH = "tanh"
    SOFTPLUS = "softplus"
    RELU = "relu"
    SIGMOID_SKIP = "sigmoid_skip"


class PhaseMode(str, Enum):
    ONE_PHASE = "one-phase"
    TWO_PHASE = "two-phase"
    SMALL_ONLY = "small-only"


class SolverPhase(str, Enum):
    SMALL_DEFORMATION = "small"
    FULL = "full"


class SplitName(str, Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


# Generator tag -> (stretch function, kernel function) of the ground truth
GENERATOR_TRUTH = {
    GeneratorTag.EX1: (StretchTag.BLATZ_KO, KernelTag.EX1),
    GeneratorTag.EX2: (StretchTag.BLATZ_KO, KernelTag.EX2),
    GeneratorTag.SINE: (StretchTag.SINE, KernelTag.EX2),
}
