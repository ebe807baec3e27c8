import json
import math
from pathlib import Path

import numpy as np
import pytest

from casgrat.cli import (ConfigError, ResultRow, emit_plot_data, load_config,
                         main, parse_material, run)
from casgrat.materials import Drude, Tabulated, Vacuum, save_tabulated, fused_silica

FAST_NUMERICS = """
[numerics]
tol = 1e-2
ell_max = 3
n_orders = 3
n_kx = 6
n_ky = 12
ky_cutoff = 16
"""

BASE = """
[geometry]
gap = 200e-9
radius = 150e-9
lateral = 0.0

[grating]
period = 1e-6
depth = 300e-9
fill = 0.5
material = eps:2.0

[sphere]
material = gold

[thermal]
temperature = 300
""" + FAST_NUMERICS


def write_config(tmp_path, body, name="run.ini"):
    path = tmp_path / name
    path.write_text(body)
    return path


class TestMaterials:
    def test_named_materials(self):
        assert isinstance(parse_material("gold"), Drude)
        assert isinstance(parse_material("silica"), Tabulated)
        assert isinstance(parse_material("vacuum"), Vacuum)
        assert isinstance(parse_material("eps:1.0"), Vacuum)
        drude = parse_material("drude:1.37e16,5.3e13")
        assert drude.omega_p == pytest.approx(1.37e16)

    def test_material_file(self, tmp_path):
        path = tmp_path / "eps.txt"
        save_tabulated(fused_silica(), path)
        model = parse_material(f"file:{path}")
        assert isinstance(model, Tabulated)

    def test_bad_materials(self):
        for token in ("unobtainium", "eps:0.5", "drude:1e16"):
            with pytest.raises(ConfigError):
                parse_material(token)


class TestConfig:
    def test_loads_and_validates(self, tmp_path):
        cfg = load_config(write_config(tmp_path, BASE + """
[output]
path = out.csv
"""))
        assert cfg.gap == pytest.approx(200e-9)
        assert cfg.trunc_overrides["ell_max"] == 3
        assert cfg.sweep_variable is None

    def test_missing_required_field(self, tmp_path):
        body = BASE.replace("period = 1e-6\n", "")
        with pytest.raises(ConfigError, match="period"):
            load_config(write_config(tmp_path, body))

    def test_invalid_fill_names_field(self, tmp_path):
        body = BASE.replace("fill = 0.5", "fill = 1.3")
        with pytest.raises(ConfigError, match="fill"):
            load_config(write_config(tmp_path, body))

    def test_sweep_values_validated(self, tmp_path):
        body = BASE + """
[sweep]
variable = gap
values = 1e-7, -2e-7
"""
        with pytest.raises(ConfigError, match="gap"):
            load_config(write_config(tmp_path, body))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/run.ini")


class TestRun:
    def test_single_point_csv(self, tmp_path):
        out = tmp_path / "out.csv"
        cfg = load_config(write_config(tmp_path, BASE + f"""
[output]
path = {out}
"""))
        rows, status = run(cfg)
        assert status == 0
        assert len(rows) == 1
        assert rows[0].F_J < 0.0
        assert rows[0].F_over_kBT == pytest.approx(
            rows[0].F_J / (1.380649e-23 * 300.0), rel=1e-12)
        header = out.read_text().splitlines()[0]
        assert header == ",".join(ResultRow.columns())

    def test_gap_sweep_monotone_and_json(self, tmp_path):
        out = tmp_path / "out.json"
        cfg = load_config(write_config(tmp_path, BASE + f"""
[sweep]
variable = gap
values = 150e-9, 250e-9, 400e-9

[output]
path = {out}
format = json
"""))
        rows, status = run(cfg)
        assert status == 0
        f_vals = [r.F_J for r in rows]
        assert f_vals[0] < f_vals[1] < f_vals[2] < 0.0
        payload = json.loads(out.read_text())
        assert [p["gap"] for p in payload] == [150e-9, 250e-9, 400e-9]

    def test_warm_cache_reproduces_bitwise(self, tmp_path):
        out = tmp_path / "out.csv"
        cache = tmp_path / "cache"
        body = BASE + f"""
[sweep]
variable = gap
values = 150e-9, 250e-9

[output]
path = {out}

[cache]
dir = {cache}
"""
        cfg = load_config(write_config(tmp_path, body))
        run(cfg)
        first = out.read_bytes()
        out.unlink()
        rows, status = run(load_config(write_config(tmp_path, body)))
        assert status == 0
        assert out.read_bytes() == first
        assert len(list(cache.glob("*.json"))) == 2

    def test_numerical_failure_yields_exit_3(self, tmp_path):
        # tabulated material whose grid cannot reach the Matsubara range
        mat = tmp_path / "short.txt"
        mat.write_text("# xi eps\n1.0e10 2.0\n1.0e11 1.9\n")
        body = BASE.replace("material = eps:2.0", f"material = file:{mat}")
        out = tmp_path / "out.csv"
        cfg = load_config(write_config(tmp_path, body + f"""
[output]
path = {out}
"""))
        rows, status = run(cfg)
        assert status == 3
        assert rows[0].error
        assert math.isnan(rows[0].F_J)
        assert out.exists()  # partial results are preserved

    def test_ledger_emission(self, tmp_path):
        out = tmp_path / "res.csv"
        cfg = load_config(write_config(tmp_path, BASE + f"""
[output]
path = {out}
ledger = true
"""))
        run(cfg)
        ledger = tmp_path / "res_ledger_000.csv"
        lines = ledger.read_text().splitlines()
        assert lines[0] == "n,xi_rad_per_s,term_J,cumulative_J"
        assert len(lines) > 3


class TestMain:
    def test_exit_codes(self, tmp_path):
        out = tmp_path / "o.csv"
        good = write_config(tmp_path, BASE + f"\n[output]\npath = {out}\n")
        assert main(["run", str(good)]) == 0
        assert main(["run", str(good), "--sweep-override", "fill=1.5"]) == 2
        bad = write_config(tmp_path, BASE.replace("fill = 0.5", "fill = 0"),
                           name="bad.ini")
        assert main(["run", str(bad)]) == 2

    def test_sweep_override_and_plot(self, tmp_path, monkeypatch):
        out = tmp_path / "o.csv"
        good = write_config(tmp_path, BASE + f"\n[output]\npath = {out}\n")
        monkeypatch.chdir(tmp_path)
        rc = main(["run", str(good), "--sweep-override",
                   "gap=150e-9,300e-9", "--emit-plot", "energy_vs_d"])
        assert rc == 0
        plot_csv = tmp_path / "o_energy_vs_d.csv"
        assert plot_csv.exists()
        assert (tmp_path / "o_energy_vs_d_plot.py").exists()
        assert len(plot_csv.read_text().splitlines()) == 3


class TestPlots:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            emit_plot_data([], "energy_vs_banana", "stem")

    def test_force_plot_requires_column(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        row = ResultRow(1e-7, 1e-7, 0.0, 1e-6, 1e-7, 0.5, 300.0,
                        -1e-21, -0.2, None, None, None, 3, 3, 5, 0.1)
        with pytest.raises(ConfigError, match="F_x_N"):
            emit_plot_data([row], "force_vs_xS", "stem")
