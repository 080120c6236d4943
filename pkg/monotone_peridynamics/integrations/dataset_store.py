"""
    On-disk dataset format.

    A dataset directory holds a ``manifest`` (``key=value`` lines) and one
    binary file per field, ``u_<split>_<idx>.f64`` and ``b_<split>_<idx>.f64``:
    8-byte magic ``MPNOFLD1``, two little-endian int64 (node count, d), then
    little-endian binary64 values, node-major with components interleaved.
    Every field file is covered by a 64-bit FNV-1a checksum in the manifest.
"""
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
from pydantic import ValidationError

from monotone_peridynamics.config.config import FIELD_FILE_MAGIC, MANIFEST_FILE_NAME
from monotone_peridynamics.schemas.dataset_schema import DatasetManifest, SplitSpec
from monotone_peridynamics.schemas.enums import SplitName
from monotone_peridynamics.services.datagen import FieldDataset, grid_from_spec
from monotone_peridynamics.utils.exceptions import ChecksumError, DatasetFormatError, GeometryError, GridMismatchError
from monotone_peridynamics.utils.output_manager import OutputManager

output = OutputManager(__name__)

FNV_OFFSET_BASIS = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3
FNV_MASK = 0xFFFFFFFFFFFFFFFF
HEADER = struct.Struct('<qq')


def fnv1a_64_update(digest: int, data: bytes) -> int:
    """Fold ``data`` into a running FNV-1a 64 state; chunks may be fed in order."""
    prime, mask = FNV_PRIME, FNV_MASK
    for byte in memoryview(data).cast("B"):
        digest = ((digest ^ byte) * prime) & mask
    return digest


def fnv1a_64(data: bytes, chunk_size: int = 1 << 20) -> str:
    digest = FNV_OFFSET_BASIS
    view = memoryview(data).cast("B")
    for start in range(0, len(view), chunk_size):
        digest = fnv1a_64_update(digest, view[start:start + chunk_size])
    return f"{digest:016x}"


def encode_field(values: np.ndarray) -> bytes:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    return FIELD_FILE_MAGIC + HEADER.pack(*values.shape) + values.astype('<f8').tobytes()


def decode_field(data: bytes, file_name: str = "<field>") -> np.ndarray:
    head = len(FIELD_FILE_MAGIC) + HEADER.size
    if len(data) < head or data[:len(FIELD_FILE_MAGIC)] != FIELD_FILE_MAGIC:
        raise DatasetFormatError(f"{file_name}: not a field file (bad magic)")
    nodes, dimension = HEADER.unpack(data[len(FIELD_FILE_MAGIC):head])
    if nodes < 0 or dimension < 1 or len(data) != head + 8 * nodes * dimension:
        raise DatasetFormatError(f"{file_name}: header announces {nodes}×{dimension} values "
                                 f"but the payload has {len(data) - head} bytes")
    return np.frombuffer(data, dtype='<f8', offset=head).astype(float).reshape(nodes, dimension)


def field_file_name(kind: str, split: SplitName, index: int) -> str:
    return f"{kind}_{SplitName(split).value}_{index}.f64"


def _fmt(value) -> str:
    if isinstance(value, (tuple, list)):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_manifest(manifest: DatasetManifest) -> str:
    lines = [
        f"version={manifest.version}",
        f"d={manifest.dimension}",
        f"delta={_fmt(manifest.horizon)}",
        f"c={_fmt(manifest.constant)}",
        f"dx={_fmt(manifest.spacing)}",
        f"generator={manifest.generator.value}",
    ]
    optional = [("seed", manifest.seed), ("fine_dx", manifest.fine_spacing), ("J", manifest.max_frequency),
                ("amplitude", manifest.amplitude), ("slope", manifest.slope_range)]
    lines += [f"{key}={_fmt(value)}" for key, value in optional if value is not None]
    for name in SplitName:
        spec = manifest.splits.get(name)
        if spec is None:
            continue
        lines += [f"{name.value}.count={spec.count}",
                  f"{name.value}.nx={_fmt(spec.nodes)}",
                  f"{name.value}.origin={_fmt(tuple(float(o) for o in spec.origin))}"]
    lines += [f"checksum.{file}={digest}" for file, digest in sorted(manifest.checksums.items())]
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> DatasetManifest:
    """Parse manifest text into the validated model.

    Raises:
        DatasetFormatError: malformed lines, unknown keys or invalid values
    """
    values: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DatasetFormatError(f"manifest line {number}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()

    def floats(text_value: str) -> Tuple[float, ...]:
        return tuple(float(v) for v in text_value.split(","))

    scalar_keys = {"version": "version", "d": "dimension", "delta": "horizon", "c": "constant",
                   "dx": "spacing", "generator": "generator", "seed": "seed", "fine_dx": "fine_spacing",
                   "J": "max_frequency", "amplitude": "amplitude"}
    fields: Dict[str, object] = {"splits": {}, "checksums": {}}
    try:
        for key, value in values.items():
            if key in scalar_keys:
                fields[scalar_keys[key]] = value
            elif key == "slope":
                fields["slope_range"] = floats(value)
            elif key.startswith("checksum."):
                fields["checksums"][key[len("checksum."):]] = value
            elif "." in key and key.split(".", 1)[0] in {s.value for s in SplitName}:
                split, attribute = key.split(".", 1)
                entry = fields["splits"].setdefault(split, {})
                if attribute == "count":
                    entry["count"] = int(value)
                elif attribute == "nx":
                    entry["nodes"] = tuple(int(v) for v in value.split(","))
                elif attribute == "origin":
                    entry["origin"] = floats(value)
                else:
                    raise DatasetFormatError(f"manifest: unknown split attribute '{key}'")
            else:
                raise DatasetFormatError(f"manifest: unknown key '{key}'")
        return DatasetManifest(**fields)
    except (ValueError, ValidationError) as error:
        if isinstance(error, DatasetFormatError):
            raise
        raise DatasetFormatError(f"manifest: {error}") from error


def write_dataset(dataset: FieldDataset, directory) -> DatasetManifest:
    """Write every field file and the manifest with fresh checksums.

    Returns:
        DatasetManifest: the manifest as written
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    checksums = {}
    for split in dataset.grids:
        for kind, stack in (("u", dataset.u[split]), ("b", dataset.b[split])):
            for index in range(stack.shape[0]):
                name = field_file_name(kind, split, index)
                data = encode_field(stack[index])
                (directory / name).write_bytes(data)
                checksums[name] = fnv1a_64(data)

    manifest = dataset.manifest.model_copy(update={"checksums": checksums})
    (directory / MANIFEST_FILE_NAME).write_text(format_manifest(manifest))
    output.print_section_item(f"[+] Wrote {len(checksums)} field files to {directory}", color="green")
    return manifest


def read_dataset(directory) -> FieldDataset:
    """Load and verify a dataset directory.

    Raises:
        DatasetFormatError: missing manifest or field file, bad header, unsupported version
        ChecksumError: a field file does not match its recorded checksum
        GridMismatchError: a field file's node count or dimension disagrees with its split lattice
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE_NAME
    if not manifest_path.is_file():
        raise DatasetFormatError(f"No manifest found in {directory}")
    manifest = parse_manifest(manifest_path.read_text())

    grids, u, b = {}, {}, {}
    for split, spec in manifest.splits.items():
        try:
            grid = grid_from_spec(manifest, spec)
        except GeometryError as error:
            raise DatasetFormatError(f"Split {split.value}: invalid lattice ({error})") from error
        grids[split] = grid
        stacks = {"u": np.empty((spec.count, grid.node_count, grid.dimension)),
                  "b": np.empty((spec.count, grid.node_count, grid.dimension))}
        for kind, stack in stacks.items():
            for index in range(spec.count):
                name = field_file_name(kind, split, index)
                path = directory / name
                if not path.is_file():
                    raise DatasetFormatError(f"Missing field file {name}")
                data = path.read_bytes()
                expected = manifest.checksums.get(name)
                if expected is None:
                    raise DatasetFormatError(f"No checksum recorded for {name}")
                actual = fnv1a_64(data)
                if actual != expected:
                    output.print_section_item(f"[X] Checksum mismatch for {name}", log_level="error", color="red")
                    raise ChecksumError(name, expected, actual)
                values = decode_field(data, name)
                if values.shape != stack.shape[1:]:
                    raise GridMismatchError(f"{name}: {values.shape} values, split lattice expects {stack.shape[1:]}")
                stack[index] = values
        u[split], b[split] = stacks["u"], stacks["b"]

    output.print_section_item(f"Loaded dataset {directory}: "
                              + ", ".join(f"{s.value}={manifest.splits[s].count}" for s in manifest.splits),
                              log_level="debug")
    return FieldDataset(manifest=manifest, grids=grids, u=u, b=b)
