"""Reader conformance against the VXF byte layout."""

import struct

import numpy as np
import pytest

from trainkit import vxf

HEADER = struct.Struct("<4sHHII3HH6f4fQ")


def build_record(
    dims=(2, 3, 2),
    channels=3,
    sparse=False,
    entries=None,
    dense_values=None,
    label=7,
    snippet_index=2,
    magic=b"VXF1",
    version=1,
    payload_count=None,
):
    """Construct record bytes by hand, straight from the layout definition."""
    x, y, z = dims
    if sparse:
        entries = entries or []
        payload = b"".join(
            struct.pack("<I", idx) + struct.pack(f"<{channels}f", *vals)
            for idx, vals in entries
        )
        count = len(entries) if payload_count is None else payload_count
    else:
        nvox = x * y * z
        dense_values = (
            dense_values
            if dense_values is not None
            else np.arange(nvox * channels, dtype=np.float32)
        )
        payload = np.asarray(dense_values, dtype="<f4").tobytes()
        count = nvox * channels if payload_count is None else payload_count
    header = HEADER.pack(
        magic, version, 1 if sparse else 0, label, snippet_index,
        x, y, z, channels,
        -1.0, -2.0, -3.0, 1.0, 2.0, 3.0,
        0.0, 0.0, 0.0, 0.0,
        count,
    )
    return header + payload


class TestDense:
    def test_channel_major_xyz_row_major(self):
        record = vxf.read_record(build_record())
        x, y, z = record.dims
        flat = np.arange(x * y * z * record.channels, dtype=np.float32)
        # value at (channel c, voxel (i,j,k)) = flat[((c*X + i)*Y + j)*Z + k]
        assert record.planes[0, 0, 0, 0] == flat[0]
        assert record.planes[0, 0, 0, 1] == flat[1]
        assert record.planes[0, 1, 0, 0] == flat[y * z]
        assert record.planes[1, 0, 0, 0] == flat[x * y * z]
        assert record.label == 7
        assert record.snippet_index == 2
        assert record.bounds_min == (-1.0, -2.0, -3.0)

    def test_wrong_payload_count_rejected(self):
        with pytest.raises(vxf.VxfFormatError):
            vxf.read_record(build_record(payload_count=5))


class TestSparse:
    def test_linear_index_decodes_to_xyz(self):
        # linear index = (x * Y + y) * Z + z with dims (2, 3, 2)
        entries = [(0, (1.0, 2.0, 3.0)), (9, (4.0, 5.0, 6.0))]  # 9 -> x=1,y=1,z=1
        record = vxf.read_record(build_record(sparse=True, entries=entries))
        assert record.planes[0, 0, 0, 0] == 1.0
        assert record.planes[2, 0, 0, 0] == 3.0
        assert record.planes[0, 1, 1, 1] == 4.0
        assert record.planes[2, 1, 1, 1] == 6.0
        assert np.count_nonzero(record.planes) == 6

    def test_empty_sparse_is_all_zero(self):
        record = vxf.read_record(build_record(sparse=True, entries=[]))
        assert not record.planes.any()

    def test_out_of_range_index_rejected(self):
        entries = [(99, (1.0, 1.0, 1.0))]
        with pytest.raises(vxf.VxfFormatError):
            vxf.read_record(build_record(sparse=True, entries=entries))


class TestErrors:
    def test_bad_magic(self):
        with pytest.raises(vxf.VxfFormatError):
            vxf.read_record(build_record(magic=b"XXXX"))

    def test_bad_version(self):
        with pytest.raises(vxf.VxfFormatError):
            vxf.read_record(build_record(version=3))

    def test_truncated(self):
        with pytest.raises(vxf.VxfFormatError):
            vxf.read_record(build_record()[:-4])


class TestAgainstProducer:
    def test_reads_producer_records(self, tiny_dataset):
        records = vxf.read_index(tiny_dataset)
        assert len(records) == 24
        seen_labels = set()
        for path, label in records:
            rec = vxf.read_file(path)
            assert rec.label == label
            assert rec.dims == (12, 12, 12)
            assert rec.channels == 6  # 3 * (L - 1) with L = 3
            assert np.isfinite(rec.planes).all()
            seen_labels.add(label)
        assert seen_labels == {0, 1, 2, 3}

    def test_index_requires_labels_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            vxf.read_index(tmp_path)
