"""CLI surface: subcommands, config merging, exit codes."""

import json

import numpy as np
import pytest

from voxflow.cli import main
from voxflow.store import read_vxf_file
from voxflow import synth


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    synth.render_corpus(root, n_videos=2, frames=6, seed=1, image_size=(96, 80))
    return root


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestBuild:
    def test_corpus_build(self, corpus, tmp_path, capsys):
        code, out, _ = run(
            capsys,
            "build",
            "--input", str(corpus),
            "--calib", str(corpus / "calib.json"),
            "--out", str(tmp_path / "out"),
            "--snippets", "2",
            "--len", "3",
            "--grid", "12,12,12",
            "--workers", "1",
        )
        assert code == 0
        summary = json.loads(out)
        assert summary["records"] == 4
        files = sorted((tmp_path / "out").glob("*.vxf"))
        assert len(files) == 4
        tensor, _ = read_vxf_file(files[0])
        assert tensor.spec.dims == (12, 12, 12)
        assert tensor.channels == 6

    def test_single_video_build(self, corpus, tmp_path, capsys):
        code, out, _ = run(
            capsys,
            "build",
            "--rgb", str(corpus / "video000" / "rgb"),
            "--depth", str(corpus / "video000" / "depth"),
            "--calib", str(corpus / "calib.json"),
            "--out", str(tmp_path / "single"),
            "--video-id", "solo",
            "--snippets", "2",
            "--len", "3",
            "--grid", "10,10,10",
        )
        assert code == 0
        assert (tmp_path / "single" / "solo_k00.vxf").exists()

    def test_missing_calib_is_exit_2(self, corpus, tmp_path, capsys):
        code, _, err = run(
            capsys,
            "build",
            "--input", str(corpus),
            "--calib", str(corpus / "nothere.json"),
            "--out", str(tmp_path / "out"),
        )
        assert code == 2
        assert "nothere.json" in err

    def test_config_file_with_flag_precedence(self, corpus, tmp_path, capsys):
        config = tmp_path / "conf.json"
        config.write_text(json.dumps({"snippets": 2, "len": 3, "grid": "8,8,8", "workers": 1}))
        code, out, _ = run(
            capsys,
            "build",
            "--input", str(corpus),
            "--calib", str(corpus / "calib.json"),
            "--out", str(tmp_path / "out"),
            "--config", str(config),
            "--grid", "6,6,6",  # flag beats config
        )
        assert code == 0
        tensor, _ = read_vxf_file(sorted((tmp_path / "out").glob("*.vxf"))[0])
        assert tensor.spec.dims == (6, 6, 6)

    def test_unknown_config_key_is_exit_2(self, corpus, tmp_path, capsys):
        config = tmp_path / "conf.json"
        config.write_text(json.dumps({"sniplets": 2}))
        code, _, err = run(
            capsys,
            "build",
            "--input", str(corpus),
            "--calib", str(corpus / "calib.json"),
            "--out", str(tmp_path / "out"),
            "--config", str(config),
        )
        assert code == 2
        assert "sniplets" in err

    def test_workers_env_override(self, corpus, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("VOXFLOW_WORKERS", "2")
        code, out, _ = run(
            capsys,
            "build",
            "--input", str(corpus),
            "--calib", str(corpus / "calib.json"),
            "--out", str(tmp_path / "out"),
            "--snippets", "2",
            "--len", "3",
            "--grid", "8,8,8",
            "--workers", "1",
        )
        assert code == 0


class TestSynthCommand:
    def test_vxf_emission(self, tmp_path, capsys):
        code, out, _ = run(
            capsys,
            "synth",
            "--out", str(tmp_path / "data"),
            "--classes", "2",
            "--per-class", "1",
            "--grid", "10,10,10",
            "--len", "3",
            "--image-size", "96x80",
            "--from-truth",
            "--seed", "4",
        )
        assert code == 0
        assert json.loads(out)["records"] == 2
        assert (tmp_path / "data" / "labels.tsv").exists()

    def test_frames_emission(self, tmp_path, capsys):
        code, out, _ = run(
            capsys,
            "synth",
            "--out", str(tmp_path / "vids"),
            "--emit", "frames",
            "--videos", "1",
            "--frames", "3",
            "--image-size", "96x80",
        )
        assert code == 0
        assert (tmp_path / "vids" / "video000" / "rgb").is_dir()


class TestInspect:
    def test_inspect_and_ply(self, tmp_path, capsys):
        synth.make_labeled_set(
            1, 1, seed=2, out_dir=tmp_path,
            config=synth.LabeledSetConfig(
                grid_dims=(10, 10, 10), snippet_len=3, image_size=(96, 80), from_truth=True
            ),
        )
        record = sorted(tmp_path.glob("*.vxf"))[0]
        code, out, _ = run(capsys, "inspect", str(record), "--ply", str(tmp_path / "v.ply"))
        assert code == 0
        info = json.loads(out)
        assert info["dims"] == [10, 10, 10]
        assert info["channels"] == 6
        assert 0 < info["occupancy_fraction"] <= 1
        assert len(info["channel_stats"]) == 6
        assert (tmp_path / "v.ply").exists()

    def test_corrupt_record_is_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.vxf"
        bad.write_bytes(b"VXF1" + b"\x00" * 100)
        code, _, err = run(capsys, "inspect", str(bad))
        assert code == 2

    def test_all_zero_record_occupancy(self, tmp_path, capsys):
        from voxflow.store import write_vxf_file
        from voxflow.voxelizer import GridSpec, SnippetTensor

        t = SnippetTensor(
            np.zeros((6, 4, 4, 4), dtype=np.float32), None, GridSpec((4, 4, 4), (0, 0, 0), (1, 1, 1))
        )
        write_vxf_file(tmp_path / "zero.vxf", t)
        code, out, _ = run(capsys, "inspect", str(tmp_path / "zero.vxf"))
        assert code == 0
        assert json.loads(out)["occupancy_fraction"] == 0.0


class TestExportPly:
    def test_exports_moving_points(self, corpus, tmp_path, capsys):
        out_file = tmp_path / "pair.ply"
        code, out, _ = run(
            capsys,
            "export-ply",
            "--rgb", str(corpus / "video000" / "rgb"),
            "--depth", str(corpus / "video000" / "depth"),
            "--calib", str(corpus / "calib.json"),
            "--pair", "0",
            "--out", str(out_file),
        )
        assert code == 0
        assert out_file.exists()
        assert json.loads(out)["vertices"] > 0

    def test_pair_out_of_range(self, corpus, tmp_path, capsys):
        code, _, err = run(
            capsys,
            "export-ply",
            "--rgb", str(corpus / "video000" / "rgb"),
            "--depth", str(corpus / "video000" / "depth"),
            "--calib", str(corpus / "calib.json"),
            "--pair", "99",
            "--out", str(tmp_path / "x.ply"),
        )
        assert code == 2


class TestBenchCommand:
    def test_report_json(self, tmp_path, capsys):
        code, out, _ = run(
            capsys, "bench", "--frames", "3", "--workers", "1",
            "--report", str(tmp_path / "r.json"),
        )
        assert code == 0
        report = json.loads(out)
        assert report["frame_pairs"] == 2
        assert (tmp_path / "r.json").exists()
