import numpy as np
import pytest

from monotone_peridynamics.integrations.dataset_store import (
    decode_field,
    encode_field,
    field_file_name,
    fnv1a_64,
    fnv1a_64_update,
    format_manifest,
    parse_manifest,
    read_dataset,
    write_dataset,
)
from monotone_peridynamics.schemas.enums import SplitName
from monotone_peridynamics.utils.exceptions import ChecksumError, DatasetFormatError, GridMismatchError


def test_fnv1a_reference_values():
    assert fnv1a_64(b"") == "cbf29ce484222325"
    assert fnv1a_64(b"a") == "af63dc4c8601ec8c"
    assert fnv1a_64(b"foobar") == "85944171f73967e8"


@pytest.mark.parametrize("chunk_size", [1, 7, 4096])
def test_fnv1a_is_independent_of_chunking(chunk_size):
    data = encode_field(np.linspace(-1.0, 1.0, 1500))
    digest = fnv1a_64_update(fnv1a_64_update(0xcbf29ce484222325, data[:1000]), data[1000:])

    assert fnv1a_64(data, chunk_size=chunk_size) == fnv1a_64(data) == f"{digest:016x}"


def test_field_layout():
    data = encode_field(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))

    assert data[:8] == b"MPNOFLD1"
    assert int.from_bytes(data[8:16], "little") == 3
    assert int.from_bytes(data[16:24], "little") == 2
    assert len(data) == 24 + 6 * 8
    assert np.frombuffer(data[24:32], dtype="<f8")[0] == 1.0
    assert np.frombuffer(data[32:40], dtype="<f8")[0] == 2.0


def test_field_decoding_rejects_bad_files():
    data = encode_field(np.zeros(4))
    assert decode_field(data).shape == (4, 1)
    with pytest.raises(DatasetFormatError):
        decode_field(b"NOTAFILE" + data[8:])
    with pytest.raises(DatasetFormatError):
        decode_field(data[:-8])


def test_field_file_names():
    assert field_file_name("u", SplitName.TRAIN, 0) == "u_train_0.f64"
    assert field_file_name("b", "test", 12) == "b_test_12.f64"


def test_manifest_text(nested_dataset):
    text = format_manifest(nested_dataset.manifest)

    assert text.startswith("version=1\nd=1\ndelta=0.25\n")
    assert "generator=ex2\n" in text
    assert "train.count=4\n" in text
    assert "train.nx=25\n" in text
    assert parse_manifest(text).model_dump() == nested_dataset.manifest.model_dump()


def test_manifest_parsing_errors():
    with pytest.raises(DatasetFormatError):
        parse_manifest("version=1\nno separator here\n")
    with pytest.raises(DatasetFormatError):
        parse_manifest("version=1\nd=1\ncolour=blue\n")
    with pytest.raises(DatasetFormatError):
        parse_manifest("version=2\nd=1\ndelta=0.25\nc=1.0\ndx=0.0625\ngenerator=ex1\n")


def test_round_trip_is_bit_exact(nested_dataset, tmp_path):
    manifest = write_dataset(nested_dataset, tmp_path / "data")
    loaded = read_dataset(tmp_path / "data")

    assert len(manifest.checksums) == 2 * 8
    for name in SplitName:
        assert np.array_equal(loaded.u[name], nested_dataset.u[name])
        assert np.array_equal(loaded.b[name], nested_dataset.b[name])
        assert loaded.grids[name] == nested_dataset.grids[name]


def test_rewriting_is_byte_identical(nested_dataset, tmp_path):
    write_dataset(nested_dataset, tmp_path / "first")
    write_dataset(read_dataset(tmp_path / "first"), tmp_path / "second")

    for path in sorted((tmp_path / "first").iterdir()):
        assert path.read_bytes() == (tmp_path / "second" / path.name).read_bytes()


def test_tampered_field_fails_its_checksum(nested_dataset, tmp_path):
    write_dataset(nested_dataset, tmp_path)
    target = tmp_path / "b_valid_1.f64"
    data = bytearray(target.read_bytes())
    data[-1] ^= 0x01
    target.write_bytes(bytes(data))

    with pytest.raises(ChecksumError) as error:
        read_dataset(tmp_path)
    assert error.value.file_name == "b_valid_1.f64"


def test_missing_pieces(nested_dataset, tmp_path):
    with pytest.raises(DatasetFormatError):
        read_dataset(tmp_path)

    write_dataset(nested_dataset, tmp_path)
    (tmp_path / "u_test_0.f64").unlink()
    with pytest.raises(DatasetFormatError):
        read_dataset(tmp_path)


def test_field_with_wrong_node_count(nested_dataset, tmp_path):
    write_dataset(nested_dataset, tmp_path)
    data = encode_field(np.zeros(7))
    (tmp_path / "u_train_0.f64").write_bytes(data)
    manifest = (tmp_path / "manifest").read_text()
    old = next(line for line in manifest.splitlines() if line.startswith("checksum.u_train_0.f64="))
    (tmp_path / "manifest").write_text(manifest.replace(old, f"checksum.u_train_0.f64={fnv1a_64(data)}"))

    with pytest.raises(GridMismatchError):
        read_dataset(tmp_path)
