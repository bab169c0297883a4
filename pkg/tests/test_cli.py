"""Tests for the batch front door: library operations and command line."""

import math

import numpy as np
import pytest
from scipy.special import i0

from ktcy.cli import (
    EXIT_NONPOSITIVE,
    EXIT_NORMALIZATION,
    EXIT_OK,
    EXIT_USAGE,
    ExpressionError,
    NonPositiveLHS,
    builtin_field,
    evaluate_expression,
    grid_checksum,
    main,
    manufacture,
    parse_config_file,
    renormalize,
    write_csv_slice,
)
from ktcy.field import GridSpec, ScalarField, integrate, read_field, sample

TAU = 2.0 * np.pi


class TestManufacture:
    def test_zero(self, grid8):
        F, u0 = manufacture(ScalarField.zeros(grid8))
        assert np.max(np.abs(F.values)) == 0.0
        assert np.max(np.abs(u0.values)) == 0.0

    def test_small_mode_closed_form(self, grid16):
        u_star = sample(lambda x, y, t: 0.01 * np.sin(TAU * x), grid16)
        F, u0 = manufacture(u_star)
        want = sample(lambda x, y, t: np.log(1.0 - 0.01 * TAU**2 * np.sin(TAU * x)), grid16)
        assert np.allclose(F.values, want.values, atol=1e-12)
        assert np.min(np.exp(F.values)) > 0

    def test_normalized_at_quadrature_level(self, grid16):
        u_star = sample(
            lambda x, y, t: 0.01 * np.sin(TAU * x) + 0.005 * np.cos(TAU * y) * np.sin(TAU * t),
            grid16,
        )
        F, _ = manufacture(u_star)
        assert integrate(F.with_values(np.exp(F.values))) == pytest.approx(1.0, abs=1e-14)

    def test_rejects_large_amplitude(self, grid16):
        u_star = sample(lambda x, y, t: np.sin(TAU * x), grid16)
        with pytest.raises(NonPositiveLHS) as err:
            manufacture(u_star)
        assert err.value.min_value == pytest.approx(1.0 - TAU**2, abs=1e-9)
        assert len(err.value.index) == 3

    def test_projects_mean(self, grid8):
        u_star = ScalarField.constant(grid8, 4.0)
        F, u0 = manufacture(u_star)
        assert np.max(np.abs(u0.values)) == 0.0
        assert np.max(np.abs(F.values)) == 0.0


class TestRenormalize:
    def test_constant(self, grid8):
        F = renormalize(ScalarField.constant(grid8, math.log(2.0)))
        assert np.allclose(F.values, 0.0, atol=1e-15)

    def test_idempotent(self, grid16, rng):
        from ktcy.field import random_band_limited

        F = renormalize(random_band_limited(grid16, rng, max_mode=3, amplitude=0.7))
        F2 = renormalize(F)
        assert np.max(np.abs(F2.values - F.values)) <= 1e-14

    def test_sine_constant_is_bessel(self):
        # quadrature oracle: mean of e^{sin} over a period is I_0(1)
        g = GridSpec(32, 8, 8)
        F = sample(lambda x, y, t: np.sin(TAU * x), g)
        shifted = renormalize(F)
        constant = F.values[0, 0, 0] - shifted.values[0, 0, 0]
        assert constant == pytest.approx(math.log(i0(1.0)), abs=1e-13)


class TestExpressionGrammar:
    def test_basic(self, grid8):
        u = evaluate_expression("0.5*sin(2*pi*x) + cos(2*pi*t)", grid8)
        want = sample(lambda x, y, t: 0.5 * np.sin(TAU * x) + np.cos(TAU * t), grid8)
        assert np.allclose(u.values, want.values, atol=1e-15)

    def test_periods_available(self):
        g = GridSpec(8, 8, 8, L_x=2.0)
        u = evaluate_expression("sin(2*pi*x/Lx)", g)
        want = sample(lambda x, y, t: np.sin(TAU * x / 2.0), g)
        assert np.allclose(u.values, want.values, atol=1e-15)

    def test_exp_log(self, grid8):
        u = evaluate_expression("log(exp(1.5))", grid8)
        assert np.allclose(u.values, 1.5, atol=1e-15)

    @pytest.mark.parametrize(
        "expr",
        [
            "x**2",
            "__import__('os')",
            "sin(x, y)",
            "unknown_name",
            "sin(x) if x else 0",
            "np.sin(x)",
            "sin(x) > 0",
        ],
    )
    def test_rejects_out_of_grammar(self, grid8, expr):
        with pytest.raises(ExpressionError):
            evaluate_expression(expr, grid8)


class TestBuiltins:
    def test_zero(self, grid8):
        assert np.max(np.abs(builtin_field("zero", grid8).values)) == 0.0

    def test_triple_sine_default(self, grid8):
        u = builtin_field("triple_sine", grid8)
        want = sample(
            lambda x, y, t: 0.3 * np.sin(TAU * x) * np.sin(TAU * y) * np.sin(TAU * t), grid8
        )
        assert np.allclose(u.values, want.values, atol=1e-15)

    def test_two_mode_params(self, grid8):
        u = builtin_field("two_mode:a1=0.02,a2=0.01", grid8)
        want = sample(
            lambda x, y, t: 0.02 * np.sin(TAU * x) + 0.01 * np.cos(TAU * y) * np.sin(TAU * t),
            grid8,
        )
        assert np.allclose(u.values, want.values, atol=1e-15)

    @pytest.mark.parametrize("spec", ["nope", "zero:a=1", "two_mode:bad", "two_mode:q=3"])
    def test_rejects_malformed(self, grid8, spec):
        with pytest.raises(ExpressionError):
            builtin_field(spec, grid8)


class TestCsvSlice:
    def test_zero_field(self, grid8, tmp_path):
        path = tmp_path / "slice.csv"
        write_csv_slice(ScalarField.zeros(grid8), path, "t", 0)
        lines = path.read_text().splitlines()
        assert lines[0] == "x,y,value"
        assert len(lines) == 1 + 8 * 8
        assert all(line.endswith(",0") for line in lines[1:])

    def test_slice_values(self, grid8, tmp_path):
        u = sample(lambda x, y, t: x + 10.0 * y + 100.0 * t, grid8)
        path = tmp_path / "slice.csv"
        write_csv_slice(u, path, "y", 2)
        rows = path.read_text().splitlines()[1:]
        first = rows[0].split(",")
        # fixed y = 2/8; first row is x = 0, t = 0
        assert float(first[2]) == pytest.approx(10.0 * 2.0 / 8.0)

    def test_rejects_bad_index(self, grid8, tmp_path):
        with pytest.raises(ValueError, match="index"):
            write_csv_slice(ScalarField.zeros(grid8), tmp_path / "x.csv", "t", 99)


class TestConfigFile:
    def test_parse_and_comments(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# solver settings\n"
            "grid = 8,8,8\n"
            "newton_tol = 1e-10   # tight\n"
            "datum_builtin = zero\n"
        )
        items = parse_config_file(cfg)
        assert items == {"grid": "8,8,8", "newton_tol": "1e-10", "datum_builtin": "zero"}

    def test_rejects_unknown_key(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("wibble = 3\n")
        with pytest.raises(ValueError, match="unknown key"):
            parse_config_file(cfg)


class TestMainCommands:
    def test_solve_zero(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["solve", "--grid", "8,8,8", "--builtin", "zero", "--out", str(out)])
        assert code == EXIT_OK
        text = (out / "report.txt").read_text()
        assert "converged = true" in text
        assert "residual.sup = 0" in text
        assert text.count(".margin = ") == 10

    def test_solve_requires_one_datum_source(self, capsys):
        code = main(["solve", "--grid", "8,8,8"])
        assert code == EXIT_USAGE
        code = main(["solve", "--grid", "8,8,8", "--builtin", "zero", "--expr", "0"])
        assert code == EXIT_USAGE

    def test_solve_unnormalized_exits_3(self, capsys):
        code = main(["solve", "--grid", "8,8,8", "--expr", "1"])
        assert code == EXIT_NORMALIZATION
        assert "renormalize" in capsys.readouterr().err

    def test_solve_renormalize_flag(self, tmp_path):
        out = tmp_path / "run"
        code = main(["solve", "--grid", "8,8,8", "--expr", "1", "--renormalize",
                     "--out", str(out)])
        assert code == EXIT_OK

    def test_renormalize_flag_matches_prenormalized(self, tmp_path):
        # solve --renormalize on raw datum == solve on renormalized datum
        g = GridSpec(8, 8, 8)
        raw = sample(lambda x, y, t: 0.2 * np.sin(TAU * x), g)
        from ktcy.field import write_field

        raw_path = tmp_path / "raw.field"
        write_field(raw, raw_path)
        pre_path = tmp_path / "pre.field"
        write_field(renormalize(raw), pre_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["solve", "--field", str(raw_path), "--renormalize", "--out", str(out1)]) == EXIT_OK
        assert main(["solve", "--field", str(pre_path), "--out", str(out2)]) == EXIT_OK
        u1 = (out1 / "solution.field").read_text()
        u2 = (out2 / "solution.field").read_text()
        assert u1 == u2

    def test_manufacture_too_large_exits_5(self, tmp_path, capsys):
        code = main(["manufacture", "--grid", "16,16,16", "--expr", "sin(2*pi*x)",
                     "--out", str(tmp_path / "m")])
        assert code == EXIT_NONPOSITIVE

    def test_manufacture_then_solve_then_verify(self, tmp_path):
        mdir = tmp_path / "m"
        code = main(["manufacture", "--grid", "16,16,16",
                     "--builtin", "two_mode:a1=0.01,a2=0.005", "--out", str(mdir)])
        assert code == EXIT_OK
        sdir = tmp_path / "s"
        code = main(["solve", "--field", str(mdir / "F.field"), "--out", str(sdir)])
        assert code == EXIT_OK
        vdir = tmp_path / "v"
        code = main(["verify", "--solution", str(sdir / "solution.field"),
                     "--field", str(sdir / "datum.field"), "--out", str(vdir)])
        assert code == EXIT_OK
        # margins reproduce bitwise between the in-run and re-verified reports
        solve_lines = {
            line for line in (sdir / "report.txt").read_text().splitlines()
            if ".margin = " in line
        }
        verify_lines = {
            line for line in (vdir / "report.txt").read_text().splitlines()
            if ".margin = " in line
        }
        assert solve_lines == verify_lines
        # recovered solution matches the manufactured state
        u = read_field(sdir / "solution.field")
        u_star = read_field(mdir / "u_star.field")
        assert np.max(np.abs(u.values - u_star.values)) <= 1e-9

    def test_rotate_identity(self, tmp_path):
        rdir = tmp_path / "r"
        code = main(["rotate", "--grid", "16,16,16", "--angle", "1,0",
                     "--builtin", "zero", "--out", str(rdir)])
        assert code == EXIT_OK
        text = (rdir / "report.txt").read_text()
        assert "rotation.period = 1" in text
        assert "converged = true" in text

    def test_rotate_rejects_angle_elsewhere(self, capsys):
        code = main(["solve", "--grid", "8,8,8", "--builtin", "zero", "--angle", "1,1"])
        assert code == EXIT_USAGE

    def test_export_round_trip(self, tmp_path):
        g = GridSpec(8, 8, 8)
        u = sample(lambda x, y, t: np.sin(TAU * x), g)
        from ktcy.field import write_field

        src = tmp_path / "u.field"
        write_field(u, src)
        out = tmp_path / "exp"
        code = main(["export", "--field", str(src), "--format", "field-dump",
                     "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "export.field").read_text() == src.read_text()

    def test_export_csv_slice(self, tmp_path):
        g = GridSpec(8, 8, 8)
        from ktcy.field import write_field

        src = tmp_path / "u.field"
        write_field(ScalarField.zeros(g), src)
        out = tmp_path / "exp"
        code = main(["export", "--field", str(src), "--format", "csv-slice",
                     "--slice-axis", "t", "--slice-index", "3", "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "slice_t3.csv").read_text().splitlines()[0] == "x,y,value"

    def test_config_file_with_cli_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("grid = 8,8,8\ndatum_builtin = zero\n")
        out = tmp_path / "run"
        code = main(["solve", "--config", str(cfg), "--out", str(out)])
        assert code == EXIT_OK
        text = (out / "report.txt").read_text()
        assert "config.datum_builtin = zero" in text

    def test_io_failure_exit_code(self, capsys):
        code = main(["solve", "--grid", "8,8,8", "--field", "/nonexistent/F.field"])
        assert code == 6

    def test_continuation_stall_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "starved.cfg"
        cfg.write_text(
            "grid = 16,16,16\n"
            "datum_builtin = triple_sine\n"
            "renormalize = true\n"
            "newton_max_iters = 1\n"   # cannot converge in one iteration
            "tau_min_step = 0.1\n"
        )
        code = main(["solve", "--config", str(cfg)])
        assert code == 4
        assert "stalled" in capsys.readouterr().err

    def test_verify_requires_solution(self, capsys):
        code = main(["verify", "--builtin", "zero"])
        assert code == EXIT_USAGE
        assert "solution" in capsys.readouterr().err


class TestReportDeterminism:
    def test_grid_checksum_stable(self):
        g1 = GridSpec(16, 16, 16)
        g2 = GridSpec(16, 16, 16)
        g3 = GridSpec(16, 16, 32)
        assert grid_checksum(g1) == grid_checksum(g2)
        assert grid_checksum(g1) != grid_checksum(g3)

    def test_reports_identical_up_to_timing(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["solve", "--grid", "8,8,8",
                         "--builtin", "triple_sine:amplitude=0.1", "--renormalize",
                         "--out", str(out)]) == EXIT_OK
            lines = [
                line for line in (out / "report.txt").read_text().splitlines()
                if not line.startswith(("timing.", "config.out"))
            ]
            outs.append(lines)
        assert outs[0] == outs[1]
