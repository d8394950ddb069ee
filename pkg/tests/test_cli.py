"""End-to-end CLI tests: config parsing, every verb, artifact layout,
CSV schema, determinism, and exit codes."""

import numpy as np
import pytest

from depthpocs.cli import CSV_HEADER, build_parser, load_config, main
from depthpocs.errors import ConfigError
from depthpocs.pgm import read_pgm, write_pgm

SMALL_SCENE = """
[scene]
width = 64
height = 64
seed = 5
noise_amp = 1.0

[camera]
focal = 120.0
baseline = 6.0

[primitive.back]
type = plane
a = 0.3
b = -0.1
c = 140.0

[primitive.slab]
type = box
x0 = 0.0
x1 = 10.0
y0 = -8.0
y1 = 6.0
depth = 70.0

[quant]
delta = 24.0

[refine]
max_iters = 3
eps = 0.01
"""

CONSTANT_SCENE = """
[scene]
width = 32
height = 32
noise_amp = 0.0

[camera]
focal = 100.0
baseline = 4.0

[primitive.wall]
type = plane
a = 0.0
b = 0.0
c = 100.0
ripple = no

[quant]
delta = 16.0

[refine]
max_iters = 3
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "scene.ini"
    p.write_text(SMALL_SCENE)
    return p


def read_csv_rows(path):
    lines = path.read_text().strip().split("\n")
    return lines[0], [line.split(",") for line in lines[1:]]


class TestLoadConfig:
    def test_scene_config(self, small_cfg):
        cfg = load_config(small_cfg)
        assert cfg.scene is not None
        assert cfg.scene.width == 64
        assert len(cfg.scene.primitives) == 2
        assert np.all(cfg.table == 24.0)
        assert cfg.options.max_iters == 3
        assert cfg.options.round_metrics

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_missing_camera_file(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[inputs]\nleft = l.pgm\nright = r.pgm\ncamera_file = gone.ini\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_quant_delta_quality_exclusive(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text(SMALL_SCENE.replace("delta = 24.0", "delta = 24.0\nquality = 50"))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_quality_table(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text(SMALL_SCENE.replace("delta = 24.0", "quality = 50"))
        cfg = load_config(p)
        assert cfg.table[0, 0] == 16.0

    def test_scene_needs_camera_section(self, tmp_path):
        p = tmp_path / "c.ini"
        text = SMALL_SCENE.replace("[camera]", "[cameraX]")
        p.write_text(text)
        with pytest.raises(ConfigError):
            load_config(p)

    def test_needs_scene_or_inputs(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[quant]\ndelta = 8\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_bad_refine_option(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text(SMALL_SCENE.replace("max_iters = 3", "max_iters = 0"))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_import_mode_with_matrices(self, tmp_path):
        write_pgm(tmp_path / "l.pgm", np.full((16, 16), 90.0))
        write_pgm(tmp_path / "r.pgm", np.full((16, 16), 90.0))
        p = tmp_path / "c.ini"
        p.write_text(
            "[inputs]\nleft = l.pgm\nright = r.pgm\n"
            "[camera.left]\nk = 100 0 7.5 0 100 7.5 0 0 1\n"
            "e = 1 0 0 0  0 1 0 0  0 0 1 0\n"
            "[camera.right]\nk = 100 0 7.5 0 100 7.5 0 0 1\n"
            "e = 1 0 0 4  0 1 0 0  0 0 1 0\n"
            "[quant]\ndelta = 16\n"
        )
        cfg = load_config(p)
        assert cfg.cameras is not None
        assert cfg.cameras.baseline == 4.0


class TestRunVerb:
    def test_run_writes_all_artifacts(self, small_cfg, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", str(small_cfg), "-o", str(out)]) == 0
        for name in (
            "truth_left", "truth_right", "mask_left", "mask_right",
            "std_left", "std_right", "smo_left", "smo_right",
            "our_left", "our_right",
            "err_std_left", "err_std_right", "err_smo_left", "err_smo_right",
            "err_our_left", "err_our_right",
        ):
            assert (out / f"{name}.pgm").is_file(), name
        assert (out / "left.qdm").is_file() and (out / "right.qdm").is_file()
        header, rows = read_csv_rows(out / "report.csv")
        assert header == CSV_HEADER
        n_iters = (len(rows) - 1) // 2
        assert len(rows) == 2 * n_iters + 1
        assert rows[-1][0] == "summary" and rows[-1][1] == "all"
        assert rows[-1][5] == "" and rows[-1][6] == ""
        q_std, q_smo, q_our = (float(rows[-1][i]) for i in (2, 3, 4))
        assert q_std > 0 and q_smo > 0 and q_our > 0
        assert "Q_our" in capsys.readouterr().out

    def test_half_iteration_rows_have_all_fields(self, small_cfg, tmp_path):
        out = tmp_path / "out"
        main(["run", str(small_cfg), "-o", str(out)])
        _, rows = read_csv_rows(out / "report.csv")
        for row in rows[:-1]:
            assert row[1] in ("left", "right")
            int(row[0])
            for field in row[2:]:
                float(field)  # parseable, inf allowed

    def test_lossless_corner_all_infinite(self, tmp_path):
        cfg = tmp_path / "const.ini"
        cfg.write_text(CONSTANT_SCENE)
        out = tmp_path / "out"
        assert main(["run", str(cfg), "-o", str(out)]) == 0
        _, rows = read_csv_rows(out / "report.csv")
        assert rows[-1][2] == "inf" and rows[-1][3] == "inf" and rows[-1][4] == "inf"
        assert float(rows[0][5]) < 1e-9  # converges immediately

    def test_missing_camera_file_no_partial_csv(self, tmp_path, capsys):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[inputs]\nleft = l.pgm\nright = r.pgm\ncamera_file = gone.ini\n")
        out = tmp_path / "out"
        code = main(["run", str(cfg), "-o", str(out)])
        assert code == 2
        assert not (out / "report.csv").exists()
        assert "error" in capsys.readouterr().err

    def test_determinism_byte_identical(self, small_cfg, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(small_cfg), "-o", str(out1)]) == 0
        assert main(["run", str(small_cfg), "-o", str(out2)]) == 0
        for f1 in sorted(out1.iterdir()):
            f2 = out2 / f1.name
            assert f1.read_bytes() == f2.read_bytes(), f1.name

    def test_pgm16_flag(self, small_cfg, tmp_path):
        out = tmp_path / "deep"
        assert main(["run", str(small_cfg), "-o", str(out), "--pgm16"]) == 0
        raw = (out / "truth_left.pgm").read_bytes()
        assert b"65535" in raw[:32]

    def test_import_mode_run(self, tmp_path):
        rng = np.random.default_rng(17)
        base = np.clip(np.cumsum(rng.uniform(-1, 1, (32, 32)), axis=1) + 120, 20, 240)
        write_pgm(tmp_path / "l.pgm", base)
        write_pgm(tmp_path / "r.pgm", base)
        cfg = tmp_path / "c.ini"
        cfg.write_text(
            "[inputs]\nleft = l.pgm\nright = r.pgm\n"
            "[camera]\nfocal = 100.0\nbaseline = 0.0\n"
            "[quant]\ndelta = 16\n[refine]\nmax_iters = 2\n"
        )
        out = tmp_path / "out"
        assert main(["run", str(cfg), "-o", str(out)]) == 0
        assert (out / "report.csv").is_file()
        assert not (out / "mask_left.pgm").exists()  # masks are scene-only


class TestPieceWiseVerbs:
    def test_generate_compress_decode_evaluate(self, small_cfg, tmp_path, capsys):
        gdir = tmp_path / "gen"
        assert main(["generate", str(small_cfg), "-o", str(gdir)]) == 0
        assert (gdir / "truth_left.pgm").is_file()
        assert (gdir / "mask_right.pgm").is_file()

        qdm = tmp_path / "left.qdm"
        assert main(["compress", str(gdir / "truth_left.pgm"), "-o", str(qdm), "--delta", "16"]) == 0
        dec = tmp_path / "dec.pgm"
        assert main(["decode", str(qdm), "-o", str(dec)]) == 0
        decoded = read_pgm(dec)
        truth = read_pgm(gdir / "truth_left.pgm")
        assert decoded.shape == truth.shape
        assert np.mean(np.abs(decoded - truth)) < 4.0

        capsys.readouterr()
        assert main([
            "evaluate",
            "--left", str(dec), "--right", str(dec),
            "--ref-left", str(gdir / "truth_left.pgm"),
            "--ref-right", str(gdir / "truth_left.pgm"),
            "-o", str(tmp_path / "ev"),
        ]) == 0
        out = capsys.readouterr().out
        assert "g=" in out
        assert (tmp_path / "ev" / "err_left.pgm").is_file()

    def test_compress_rejects_both_tables(self, small_cfg, tmp_path, capsys):
        gdir = tmp_path / "gen"
        main(["generate", str(small_cfg), "-o", str(gdir)])
        code = main([
            "compress", str(gdir / "truth_left.pgm"),
            "-o", str(tmp_path / "x.qdm"), "--delta", "8", "--quality", "50",
        ])
        assert code == 2

    def test_refine_verb(self, small_cfg, tmp_path):
        gdir = tmp_path / "gen"
        main(["generate", str(small_cfg), "-o", str(gdir)])
        lq, rq = tmp_path / "l.qdm", tmp_path / "r.qdm"
        main(["compress", str(gdir / "truth_left.pgm"), "-o", str(lq), "--delta", "24"])
        main(["compress", str(gdir / "truth_right.pgm"), "-o", str(rq), "--delta", "24"])
        out = tmp_path / "ref"
        assert main([
            "refine", str(small_cfg),
            "--left-desc", str(lq), "--right-desc", str(rq),
            "-o", str(out),
        ]) == 0
        assert (out / "our_left.pgm").is_file()
        header, rows = read_csv_rows(out / "report.csv")
        assert header == CSV_HEADER
        assert rows[0][2] == "nan"  # no ground truth supplied

    def test_refine_verb_with_truth(self, small_cfg, tmp_path):
        gdir = tmp_path / "gen"
        main(["generate", str(small_cfg), "-o", str(gdir)])
        lq, rq = tmp_path / "l.qdm", tmp_path / "r.qdm"
        main(["compress", str(gdir / "truth_left.pgm"), "-o", str(lq), "--delta", "24"])
        main(["compress", str(gdir / "truth_right.pgm"), "-o", str(rq), "--delta", "24"])
        out = tmp_path / "ref"
        assert main([
            "refine", str(small_cfg),
            "--left-desc", str(lq), "--right-desc", str(rq),
            "--truth-left", str(gdir / "truth_left.pgm"),
            "--truth-right", str(gdir / "truth_right.pgm"),
            "-o", str(out),
        ]) == 0
        _, rows = read_csv_rows(out / "report.csv")
        assert float(rows[0][2]) > 0.0


class TestSweep:
    def test_sweep_aggregate(self, small_cfg, tmp_path):
        out = tmp_path / "sw"
        assert main(["sweep", str(small_cfg), "-o", str(out), "--deltas", "16,32"]) == 0
        assert (out / "delta_16" / "report.csv").is_file()
        assert (out / "delta_32" / "report.csv").is_file()
        lines = (out / "aggregate.csv").read_text().strip().split("\n")
        assert lines[0] == "delta,q_std,q_smo,q_our"
        assert len(lines) == 3
        assert lines[1].startswith("16,") and lines[2].startswith("32,")

    def test_sweep_bad_deltas(self, small_cfg, tmp_path):
        assert main(["sweep", str(small_cfg), "-o", str(tmp_path / "x"), "--deltas", "a,b"]) == 2


class TestExitCodes:
    def test_io_failure_is_3(self, tmp_path, capsys):
        assert main(["decode", str(tmp_path / "missing.qdm"), "-o", str(tmp_path / "o.pgm")]) == 3
        assert main(["compress", str(tmp_path / "missing.pgm"), "-o", str(tmp_path / "o.qdm")]) == 3

    def test_corrupt_description_is_4(self, tmp_path):
        bad = tmp_path / "bad.qdm"
        bad.write_bytes(b"QDM1" + bytes(40))
        assert main(["decode", str(bad), "-o", str(tmp_path / "o.pgm")]) == 4

    def test_bad_pgm_is_3(self, tmp_path):
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
        assert main(["compress", str(bad), "-o", str(tmp_path / "o.qdm")]) == 3

    def test_invalid_scene_is_2(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text(
            "[scene]\nwidth = 16\nheight = 16\n"
            "[camera]\nfocal = 100\nbaseline = 4\n"
            "[primitive.only]\ntype = box\nx0 = -1\nx1 = 1\ny0 = -1\ny1 = 1\ndepth = 50\n"
            "[quant]\ndelta = 16\n"
        )
        assert main(["run", str(cfg), "-o", str(tmp_path / "o")]) == 2


class TestParser:
    def test_requires_subcommand(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            main(["--version"])
