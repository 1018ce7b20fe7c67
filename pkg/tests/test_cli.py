import pytest

from ventcelfem.analysis import ConvergenceTable, ErrorReport, RunResult
from ventcelfem.cli import build_parser, main, resolve_config
from ventcelfem.reporting import CSV_HEADER, defect_flags, errors_csv_text, summary_markdown


def run_cli(args):
    return main(args)


@pytest.fixture(scope="module")
def study_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    code = run_cli(["--r", "2", "--k", "1", "--levels", "0..2",
                    "--out", str(out), "--dump-mesh", "--dump-matrix"])
    assert code == 0
    return out


class TestStudyOutputs:
    def test_csv_layout(self, study_dir):
        csv = (study_dir / "r2_k1_new_s4" / "errors.csv").read_text()
        lines = csv.strip().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 4
        fields = lines[1].split(",")
        assert int(fields[0]) == 0 and int(fields[2]) > 0

    def test_summary_written(self, study_dir):
        md = (study_dir / "summary.md").read_text()
        assert "mesh order" in md
        assert "r=2" in md

    def test_figure_rendered(self, study_dir):
        png = study_dir / "r2_k1_new_s4" / "convergence.png"
        assert png.exists() and png.stat().st_size > 1000

    def test_mesh_dumps(self, study_dir):
        for level in range(3):
            dump = study_dir / "r2_k1_new_s4" / f"mesh_level{level}.txt"
            assert dump.exists()
            assert dump.read_text().startswith("order 2 ")

    def test_matrix_dump(self, study_dir):
        path = study_dir / "r2_k1_new_s4" / "matrix_level2.txt"
        rows = path.read_text().strip().splitlines()
        i, j, v = rows[0].split()
        int(i), int(j), float(v)


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert run_cli(["--r", "1", "--k", "2", "--levels", "0..2",
                            "--out", str(out), "--no-plots"]) == 0
            outs.append((out / "r1_k2_new_s3" / "errors.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_summary_identical(self, tmp_path):
        texts = []
        for name in ("a", "b"):
            out = tmp_path / name
            run_cli(["--r", "1", "--k", "1", "--levels", "0..1",
                     "--out", str(out), "--no-plots"])
            texts.append((out / "summary.md").read_bytes())
        assert texts[0] == texts[1]


class TestExitCodes:
    def test_runtime_error_is_three(self, tmp_path):
        assert run_cli(["--solution", "not_a_case", "--r", "1", "--k", "1",
                        "--levels", "0..0", "--out", str(tmp_path)]) == 3

    def test_bad_levels_is_three(self, tmp_path):
        assert run_cli(["--levels", "zz", "--out", str(tmp_path)]) == 3


class TestConfigResolution:
    def test_file_values_and_flag_precedence(self, tmp_path):
        cfg_file = tmp_path / "run.cfg"
        cfg_file.write_text("k = 2\nlevels = 0..1\nkappa = 1.5\nout = fromfile\n")
        args = build_parser().parse_args(["--config", str(cfg_file), "--kappa", "0.25"])
        cfg = resolve_config(args)
        assert cfg.ks == (2,)
        assert cfg.levels == (0, 1)
        assert cfg.kappa == 0.25  # flag wins
        assert cfg.out == "fromfile"
        assert cfg.rs == (1, 2, 3)  # unspecified: full sweep

    def test_defaults(self):
        cfg = resolve_config(build_parser().parse_args([]))
        assert cfg.rs == (1, 2, 3) and cfg.ks == (1, 2, 3, 4)
        assert cfg.levels == (0, 4)
        assert cfg.variant == "new" and cfg.s == "auto"
        assert cfg.kappa == 0.0 and cfg.alpha == 1.0 and cfg.beta == 1.0
        assert cfg.solution == "y_exp_x"

    def test_auto_exponent_resolves(self):
        cfg = resolve_config(build_parser().parse_args(["--s", "2"]))
        assert cfg.lift_config().exponent == 2
        cfg = resolve_config(build_parser().parse_args([]))
        assert cfg.lift_config().resolve_exponent(3) == 5


class TestDefectFlags:
    def synthetic(self, r, k, rate):
        run = RunResult(r=r, k=k, variant="new", s=r + 2)
        for level, h in enumerate([0.4, 0.2, 0.1, 0.05, 0.025]):
            e = h**rate
            run.reports.append(ErrorReport(level, h, 10, e, e, e, e))
        return run

    def test_flag_raised_when_interior_order_drops(self):
        table = ConvergenceTable()
        table.add(self.synthetic(3, 2, 2.5))  # 0.5 below k+1
        table.add(self.synthetic(3, 1, 2.0))  # at k+1: clean
        table.add(self.synthetic(2, 2, 2.5))  # not a cubic mesh: ignored
        flags = defect_flags(table)
        assert len(flags) == 1
        assert "P2" in flags[0] and "defect observed" in flags[0]
        md = summary_markdown(table)
        assert "defect observed" in md

    def test_no_flags_when_clean(self):
        table = ConvergenceTable()
        table.add(self.synthetic(3, 2, 3.0))
        assert defect_flags(table) == []
        assert "defect observed" not in summary_markdown(table)


def test_csv_text_roundtrip():
    run = RunResult(r=1, k=1, variant="new", s=3)
    run.reports.append(ErrorReport(0, 0.5, 25, 1e-2, 1e-1, 2e-2, 2e-1))
    text = errors_csv_text(run)
    header, row = text.strip().splitlines()
    assert header == CSV_HEADER
    vals = row.split(",")
    assert float(vals[1]) == 0.5 and float(vals[3]) == 1e-2
