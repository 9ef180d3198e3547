import json
import subprocess
import sys

import numpy as np
import pytest

from loschmidt.cli import config as cfgmod
from loschmidt.cli.main import main
from loschmidt.cli.plotting import PlotError, emit_plot
from loschmidt.cli.runner import FIDELITY_COLUMNS, run_diagnostic, run_experiment


def small(tmp_path, **kw):
    base = dict(k="18", epsilon="5e-4", n="400", t_max="40", out_dir=str(tmp_path))
    base.update(kw)
    return cfgmod.build_config("custom", base)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


# -- config -------------------------------------------------------------------


def test_preset_values():
    P = cfgmod.PRESETS
    assert (P["fig1"]["k"], P["fig1"]["epsilon"], P["fig1"]["n"], P["fig1"]["lambda_ref"]) == (18.0, 1e-4, 350, 2.21)
    assert (P["fig2"]["k"], P["fig2"]["epsilon"], P["fig2"]["n"]) == (18.0, 5e-4, 3500)
    assert (P["fig3"]["k"], P["fig3"]["epsilon"], P["fig3"]["n"], P["fig3"]["lambda_ref"]) == (7.0, 5e-4, 100_000, 1.28)
    assert P["fig4"]["separation"] == 1e-11
    assert P["fig1"]["paths"] == ("exact", "ivr", "pt")
    assert P["fig2"]["paths"] == ("exact", "ivr", "pt", "fgr")
    assert "lyap" in P["fig3"]["paths"]


def test_parse_config_text():
    d = cfgmod.parse_config_text("# comment\nk = 7\nepsilon=1e-3  # trailing\n\npaths = exact, ivr\n")
    assert d == {"k": "7", "epsilon": "1e-3", "paths": "exact, ivr"}
    cfg = cfgmod.build_config("custom", d | {"n": "100", "t_max": "5"})
    assert cfg.k == 7.0 and cfg.paths == ("exact", "ivr")


@pytest.mark.parametrize(
    "text, field",
    [("k 7", "line 1"), ("bogus = 1", "bogus"), ("n = 3.5", "n")],
)
def test_parse_errors_name_field(text, field):
    with pytest.raises(cfgmod.ConfigError) as ei:
        cfgmod.build_config("custom", cfgmod.parse_config_text(text))
    assert ei.value.field == field


def test_custom_requires_physics():
    with pytest.raises(cfgmod.ConfigError) as ei:
        cfgmod.build_config("custom", {"k": "7"})
    assert ei.value.field == "epsilon"


def test_monte_carlo_needs_seed_and_samples(tmp_path):
    with pytest.raises(cfgmod.ConfigError) as ei:
        small(tmp_path, sampling="monte-carlo", samples="1000")
    assert ei.value.field == "seed"
    with pytest.raises(cfgmod.ConfigError) as ei:
        small(tmp_path, sampling="monte-carlo", seed="1")
    assert ei.value.field == "samples"


def test_full_grid_guard(tmp_path):
    with pytest.raises(cfgmod.ConfigError, match="monte-carlo"):
        small(tmp_path, n=str(10**7 + 1))


def test_gaussian_sigma_band(tmp_path):
    with pytest.raises(cfgmod.ConfigError) as ei:
        small(tmp_path, state="gaussian", sigma="0.001")
    assert ei.value.field == "sigma"
    assert small(tmp_path, state="gaussian", sigma="0.05").sigma == 0.05


def test_unknown_preset_and_path(tmp_path):
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.build_config("fig9")
    with pytest.raises(cfgmod.ConfigError) as ei:
        small(tmp_path, paths="exact,branch")
    assert ei.value.field == "paths"


def test_out_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv(cfgmod.OUT_ENV, str(tmp_path / "env"))
    cfg = cfgmod.build_config("custom", dict(k="1", epsilon="0", n="10", t_max="2"))
    assert cfg.resolved_out_dir() == tmp_path / "env"


# -- run_experiment -----------------------------------------------------------


def test_run_writes_csv_and_manifest(tmp_path):
    cfg = small(tmp_path, paths="exact,ivr,pt,fgr,lyap")
    man = run_experiment(cfg)
    header, rows = read_csv(tmp_path / "custom_fidelity.csv")
    assert tuple(header) == FIDELITY_COLUMNS
    assert len(rows) == 41
    assert rows[0][:5] == ["0"] + ["1.00000000000e+00"] * 4
    assert 0 < float(rows[0][5]) <= 1  # the Lyapunov law carries a prefactor
    assert rows[5][6] == ""  # no stderr without Monte Carlo
    # 12 significant digits in scientific notation
    mant = rows[3][1].split("e")[0]
    assert len(mant.replace(".", "").lstrip("-")) == 12
    data = json.loads((tmp_path / "custom_manifest.json").read_text())
    assert set(p.name for p in tmp_path.iterdir()) == set(data["files"])
    for key in ("hbar", "t_heisenberg", "K", "D", "lambda", "eps_pt_fgr", "eps_fgr_lyap", "ergodic_floor"):
        assert key in data["derived"]
    assert data["tool_version"] and data["wall_clock_s"] >= 0
    assert data["config"]["workers"] == 1
    assert "bloch_phases" in data["conventions"]
    assert man.files == data["files"]


def test_zero_eps_all_columns_one(tmp_path):
    run_experiment(small(tmp_path, epsilon="0", paths="exact,ivr,pt,fgr"))
    _, rows = read_csv(tmp_path / "custom_fidelity.csv")
    vals = np.array([[float(v) for v in r[1:5]] for r in rows])
    np.testing.assert_allclose(vals, 1.0, atol=1e-10)


def test_absent_paths_are_empty(tmp_path):
    run_experiment(small(tmp_path, paths="ivr"))
    _, rows = read_csv(tmp_path / "custom_fidelity.csv")
    assert all(r[1] == "" and r[2] != "" and r[3] == "" for r in rows)


def test_monte_carlo_run_has_stderr(tmp_path):
    run_experiment(small(tmp_path, paths="ivr", sampling="monte-carlo", samples="500", seed="3"))
    _, rows = read_csv(tmp_path / "custom_fidelity.csv")
    assert all(r[6] != "" for r in rows)


def test_determinism_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        run_experiment(small(d, paths="exact,ivr,pt", sampling="monte-carlo", samples="800", seed="9"))
    assert (a / "custom_fidelity.csv").read_bytes() == (b / "custom_fidelity.csv").read_bytes()


def test_fig1_manifest_heisenberg_time(tmp_path):
    cfg = cfgmod.build_config("fig1", {"out_dir": str(tmp_path), "t_max": "20"})
    man = run_experiment(cfg)
    assert man.derived["t_heisenberg"] == 350


def test_fig2_preset_decays_to_floor(tmp_path):
    cfg = cfgmod.build_config("fig2", {"out_dir": str(tmp_path)})
    man = run_experiment(cfg)
    _, rows = read_csv(tmp_path / "fig2_fidelity.csv")
    m = np.array([float(r[1]) for r in rows])
    assert m[0] == 1.0
    assert 1 / 3 < m[225:].mean() * 3500 < 3
    assert man.derived["regime"] == "fgr"
    assert man.results["M_exact_rate"] > 0


# -- diagnostics through the runner -------------------------------------------


def test_diagnostic_histogram_t0(tmp_path):
    cfg = small(tmp_path, n="2000", hist_t="0")
    man = run_diagnostic("histogram", cfg)
    header, rows = read_csv(tmp_path / "custom_histogram.csv")
    assert header == ["bin_left", "bin_right", "count", "gaussian_count"]
    assert len(rows) == 1
    assert man.results["variance"] == 0.0


def test_diagnostic_pair_time(tmp_path):
    cfg = small(tmp_path, k="7", pair_t_max="60", ensemble_size="2000")
    man = run_diagnostic("pair-time", cfg)
    header, rows = read_csv(tmp_path / "custom_pair-time.csv")
    assert header == ["t", "variance"] and len(rows) == 61
    for key in ("exp_rate", "linear_slope", "two_lambda", "four_K", "separation"):
        assert man.results[key] is not None
    assert man.results["separation"] == 1e-11


def test_diagnostic_branch_count(tmp_path):
    man = run_diagnostic("branch-count", small(tmp_path))
    assert man.results["log10_branches"] >= 50
    data = json.loads((tmp_path / "custom_branch-count_manifest.json").read_text())
    assert data["results"]["log10_branches"] >= 50


def test_diagnostic_unknown(tmp_path):
    with pytest.raises(ValueError):
        run_diagnostic("spectrum", small(tmp_path))


# -- plotting -----------------------------------------------------------------


def test_plot_fidelity_script(tmp_path):
    run_experiment(small(tmp_path, paths="exact,ivr,pt,fgr,lyap", lambda_ref="1.28"))
    script = emit_plot(tmp_path / "custom_fidelity.csv")
    text = script.read_text()
    assert text.count("ax.plot(") == 6  # five curves and the slope guide
    assert "axhline(" in text and "ls='--'" in text
    assert "slope -1.28" in text
    assert "set_yscale('log')" in text
    compile(text, str(script), "exec")


def test_plot_fig2_style(tmp_path):
    run_experiment(cfgmod.build_config("fig2", {"out_dir": str(tmp_path), "t_max": "40"}))
    text = emit_plot(tmp_path / "fig2_fidelity.csv").read_text()
    # exact, ivr, pt, fgr and the 2.21 guide; the floor is an axhline
    assert text.count("ax.plot(") == 5
    assert "axhline(0.000285714" in text


def test_plot_renders_if_matplotlib_available(tmp_path):
    pytest.importorskip("matplotlib")
    run_experiment(small(tmp_path))
    script = emit_plot(tmp_path / "custom_fidelity.csv")
    subprocess.run([sys.executable, str(script)], check=True)
    assert script.with_suffix(".png").exists()


def test_plot_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(PlotError, match="header"):
        emit_plot(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text(",".join(FIDELITY_COLUMNS) + "\n")
    with pytest.raises(PlotError, match="no data"):
        emit_plot(empty)


def test_plot_diagnostic_csv(tmp_path):
    run_diagnostic("branch-count", small(tmp_path, branch_t="10"))
    text = emit_plot(tmp_path / "custom_branch-count.csv").read_text()
    assert "log10 branches" in text


# -- command line -------------------------------------------------------------


def test_cli_run_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "o"
    rc = main(["run", "--preset", "fig1", "--out", str(out), "--workers", "2",
               "--set", "t_max=10", "--set", "paths=exact,ivr"])
    assert rc == 0
    data = json.loads((out / "fig1_manifest.json").read_text())
    assert data["config"]["workers"] == 2
    assert main(["run", "--preset", "fig1", "--set", "n=1", "--out", str(out)]) == 1
    assert "n:" in capsys.readouterr().err
    assert main(["plot", str(tmp_path / "missing.csv")]) == 1


def test_cli_config_file(tmp_path):
    conf = tmp_path / "exp.conf"
    conf.write_text(f"k = 7\nepsilon = 1e-3\nn = 300\nt_max = 8\nout_dir = {tmp_path}\n")
    assert main(["run", "--config", str(conf), "--workers", "1"]) == 0
    assert (tmp_path / "custom_fidelity.csv").exists()


def test_cli_samples_switch_to_monte_carlo(tmp_path):
    rc = main(["run", "--preset", "fig2", "--out", str(tmp_path), "--samples", "500", "--seed", "4",
               "--set", "t_max=5", "--set", "paths=ivr", "--workers", "1"])
    assert rc == 0
    data = json.loads((tmp_path / "fig2_manifest.json").read_text())
    assert data["config"]["sampling"] == "monte-carlo" and data["config"]["seed"] == 4


def test_cli_compute_error(tmp_path, monkeypatch):
    from loschmidt.cli import runner

    def boom(*a, **k):
        raise ValueError("singular")

    monkeypatch.setattr(runner, "compute_paths", boom)
    assert main(["run", "--preset", "fig2", "--out", str(tmp_path), "--workers", "1"]) == 2


def test_cli_info(capsys):
    assert main(["info"]) == 0
    assert "fig3" in capsys.readouterr().out
    assert main(["info", "nope"]) == 1


def test_cli_diagnose(tmp_path):
    rc = main(["diagnose", "branch-count", "--preset", "fig2", "--out", str(tmp_path),
               "--set", "branch_t=20", "--workers", "1"])
    assert rc == 0
    assert (tmp_path / "fig2_branch-count.csv").exists()


def test_console_script_module():
    r = subprocess.run([sys.executable, "-m", "loschmidt.cli.main", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "0.1.0" in r.stdout
