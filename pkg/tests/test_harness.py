import json
import numpy as np
import pytest
import yaml

from qadsim import cli
from qadsim import dynamics as dyn
from qadsim.config import config_from_mapping, load_config
from qadsim.errors import ConfigError, FormatError
from qadsim.io import (
    Table,
    export_bundle,
    import_trace_data,
    read_table,
    traces_to_table,
    write_table,
)
from qadsim.pipelines import run_experiment

FAST_SYSTEM = {"qubit_thermal_pop": 0.06}


def fast_config(experiment, settings, extra=None):
    raw = {"experiment": experiment, "seed": 123, "system": dict(FAST_SYSTEM),
           experiment: settings}
    if extra:
        raw.update(extra)
    return config_from_mapping(raw)


# ---------------------------------------------------------------------------
# Config validation
# ---------------------------------------------------------------------------

def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "exp.yaml"
    raw = {
        "experiment": "ladder",
        "seed": 7,
        "system": {"g0_khz": 350.0, "qubit_t1_us": 7.0},
        "ladder": {"n_values": [1, 2], "probe_time_us": 2.0},
    }
    path.write_text(yaml.safe_dump(raw))
    config = load_config(path)
    assert config.seed == 7
    assert config.system.g0 == pytest.approx(2 * np.pi * 350e3)
    assert config.settings.n_values == (1, 2)


def test_config_unknown_field_reports_path():
    with pytest.raises(ConfigError) as err:
        config_from_mapping(
            {"experiment": "ladder", "system": {"g0_mhz": 0.35}, "ladder": {}}
        )
    assert "system" in str(err.value)


def test_config_bad_value_reports_path():
    with pytest.raises(ConfigError) as err:
        config_from_mapping(
            {"experiment": "ladder", "system": {"qubit_t1_us": -7.0}, "ladder": {}}
        )
    assert "system" in str(err.value)


def test_config_empty_grid_rejected():
    with pytest.raises(ConfigError) as err:
        config_from_mapping(
            {"experiment": "chevron", "chevron": {"detuning_points": 0}}
        )
    assert "detuning_points" in str(err.value)


def test_config_experiment_mismatch():
    with pytest.raises(ConfigError):
        config_from_mapping({"experiment": "ladder", "ladder": {}}, experiment="wigner")


def test_config_missing_experiment():
    with pytest.raises(ConfigError):
        config_from_mapping({"system": {}})


# ---------------------------------------------------------------------------
# Table and trace round trips
# ---------------------------------------------------------------------------

def test_table_roundtrip_lossless(tmp_path):
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((17, 3)) * np.logspace(-8, 6, 3)
    table = Table(["a", "b", "c"], rows)
    path = tmp_path / "t.csv"
    write_table(table, path)
    back = read_table(path)
    assert back.columns == ["a", "b", "c"]
    assert np.array_equal(back.rows, rows)  # %.17g makes the trip exact


def test_read_table_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,pe\n0.0,0.1\n1.0,oops\n")
    with pytest.raises(FormatError) as err:
        read_table(path)
    assert "line 3" in str(err.value)
    assert "column 2" in str(err.value)


def test_import_two_column_csv(tmp_path):
    path = tmp_path / "trace.csv"
    t = np.linspace(0.0, 1e-6, 11)
    pe = np.linspace(0.0, 0.5, 11)
    write_table(Table(["t", "pe"], np.column_stack([t, pe])), path)
    traces = import_trace_data(path)
    assert len(traces) == 1
    assert np.array_equal(traces[0].times, t)
    assert np.array_equal(traces[0].pe, pe)


def test_import_rejects_decreasing_time(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,pe\n0.0,0.1\n2.0,0.2\n1.0,0.3\n")
    with pytest.raises(FormatError) as err:
        import_trace_data(path)
    assert "strictly increasing" in str(err.value)


def test_import_multi_column_roundtrip(tmp_path):
    grid = dyn.default_probe_grid(1e-6, 50e-9)
    traces = dyn.simulate_basis_traces(dyn.SystemParams(), 7, grid, phonon_dim=10)
    table = traces_to_table(traces, [f"pe_N{i}" for i in range(1, 8)])
    path = tmp_path / "seven.csv"
    write_table(table, path)
    back = import_trace_data(path)
    assert len(back) == 7
    for orig, loaded in zip(traces, back):
        assert np.array_equal(orig.pe, loaded.pe)


def test_import_resamples_non_uniform(tmp_path):
    path = tmp_path / "nonuniform.csv"
    path.write_text("t,pe\n0.0,0.0\n1.0,0.1\n3.0,0.3\n4.0,0.4\n")
    with pytest.raises(FormatError):
        import_trace_data(path)
    traces = import_trace_data(path, resample_points=5)
    assert np.allclose(traces[0].times, np.linspace(0.0, 4.0, 5))
    assert np.allclose(traces[0].pe, np.linspace(0.0, 0.4, 5))


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

def test_chevron_pipeline_and_export(tmp_path):
    config = fast_config(
        "chevron",
        {"detuning_points": 3, "detuning_min_mhz": -1.0, "detuning_max_mhz": 1.0,
         "time_max_us": 4.0, "time_step_ns": 25.0, "phonon_dim": 4},
    )
    bundle = run_experiment(config)
    assert bundle.summary["resonant_peak_hz"] == pytest.approx(700e3, rel=0.02)
    paths = export_bundle(bundle, tmp_path / "out")
    names = {p.name for p in paths}
    assert "manifest.json" in names and "chevron_map.csv" in names
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["seed"] == 123
    assert manifest["config"]["system"]["g0"] == pytest.approx(2 * np.pi * 350e3)


def test_rabi_basis_pipeline_fft_export_consistency(tmp_path):
    config = fast_config(
        "rabi_basis",
        {"n_max": 3, "peak_report_n": 2, "probe_time_us": 4.0,
         "probe_step_ns": 20.0, "phonon_dim": 8},
    )
    bundle = run_experiment(config)
    export_bundle(bundle, tmp_path)
    # recompute the dominant frequency from the exported CSVs and compare
    # against the module-computed peaks
    traces = import_trace_data(tmp_path / "basis_traces.csv")
    peaks_table = read_table(tmp_path / "basis_fft_peaks.csv")
    for i, trace in enumerate(traces):
        again = dyn.dominant_frequency(trace)
        assert again == pytest.approx(peaks_table.rows[i, 1], rel=1e-12)


def test_ladder_pipeline_small(tmp_path):
    config = fast_config(
        "ladder",
        {"n_values": [1], "fit_n_max": 6, "probe_time_us": 4.0,
         "probe_step_ns": 20.0, "delta_g_khz": 5.0, "phonon_dim": 10},
    )
    bundle = run_experiment(config)
    assert 0.8 < bundle.summary["p_1_1"] < 0.95
    assert bundle.summary["argmax_equals_N"]
    pops = bundle.tables["ladder_populations"]
    lo = bundle.tables["ladder_populations_low"]
    hi = bundle.tables["ladder_populations_high"]
    assert np.all(lo.rows[:, 1] <= pops.rows[:, 1] + 1e-12)
    assert np.all(hi.rows[:, 1] >= pops.rows[:, 1] - 1e-12)


def test_pipeline_determinism_byte_identical(tmp_path):
    settings = {"n_values": [1], "fit_n_max": 4, "probe_time_us": 2.0,
                "probe_step_ns": 40.0, "delta_g_khz": 0.0, "phonon_dim": 8,
                "noise_sigma": 0.02}
    out = []
    for name in ("a", "b"):
        config = fast_config("ladder", dict(settings))
        bundle = run_experiment(config)
        export_bundle(bundle, tmp_path / name)
        out.append((tmp_path / name / "ladder_traces.csv").read_bytes())
    assert out[0] == out[1]


def test_wigner_reconstruct_pipelines(tmp_path):
    config = fast_config(
        "wigner",
        {"preparation": "fock:1", "grid_points_per_side": 5, "grid_extent": 1.2,
         "max_radius": None, "displacement_mode": "ideal", "calibrate_drive": False,
         "fit_n_max": 8, "probe_time_us": 4.0, "probe_step_ns": 20.0,
         "phonon_dim": 16},
    )
    config.system = dyn.SystemParams.ideal()
    bundle = run_experiment(config)
    assert bundle.summary["central_parity"] == pytest.approx(-1.0, abs=0.05)
    export_bundle(bundle, tmp_path)

    rec_config = fast_config(
        "reconstruct",
        {"data_path": str(tmp_path / "wigner_data.csv"), "preparation": "fock:1",
         "dim": 6},
    )
    with pytest.warns(UserWarning):
        rec_bundle = run_experiment(rec_config)
    assert rec_bundle.summary["fidelity"] > 0.95
    assert rec_bundle.summary["min_wigner"] < -0.5
    export_bundle(rec_bundle, tmp_path / "rec")
    cut = read_table(tmp_path / "rec" / "wigner_cut.csv")
    assert cut.columns[0] == "re_alpha"


def test_reconstruct_requires_data_path():
    config = fast_config("reconstruct", {"preparation": "fock:1"})
    with pytest.raises(ConfigError):
        run_experiment(config)


def test_modes_pipeline_small(tmp_path):
    raw = {
        "experiment": "modes",
        "seed": 0,
        "system": {},
        "geometry": {"substrate_um": 49.5, "aln_nm": 500.0, "curvature_mm": 0.6,
                     "electrode_um": 15.0, "convex_um": 25.0},
        "material": {},
        "modes": {"band_center_ghz": 6.0, "band_span_fsr": 1.6, "n_roundtrips": 120,
                  "n_frequencies": 801, "grid_size": 96,
                  "extent_convex_diameters": 4.0, "max_transverse_order": 2},
    }
    config = config_from_mapping(raw)
    bundle = run_experiment(config)
    assert bundle.summary["fsr_hz"] == pytest.approx(111e6, rel=0.01)
    # physics-level selectivity is asserted at the device geometry in
    # test_acoustic; here just require a clearly dominant fundamental
    assert bundle.summary["coupling_selectivity"] > 1.5
    assert "analytic_modes" in bundle.tables
    assert "roundtrip_spectrum" in bundle.tables
    export_bundle(bundle, tmp_path)
    assert (tmp_path / "roundtrip_peaks.csv").exists()


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_ladder_end_to_end(tmp_path, capsys):
    config_path = tmp_path / "ladder.yaml"
    config_path.write_text(
        yaml.safe_dump(
            {
                "seed": 5,
                "system": {},
                "ladder": {"n_values": [1], "fit_n_max": 4, "probe_time_us": 2.0,
                           "probe_step_ns": 40.0, "delta_g_khz": 0.0,
                           "phonon_dim": 8},
            }
        )
    )
    code = cli.main(
        ["ladder", "--config", str(config_path), "--output-dir", str(tmp_path / "out")]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "p_1_1" in out
    assert (tmp_path / "out" / "manifest.json").exists()


def test_cli_config_error_exit_code(tmp_path, capsys):
    config_path = tmp_path / "bad.yaml"
    config_path.write_text(yaml.safe_dump({"system": {"g0_khz": -1}, "ladder": {}}))
    code = cli.main(["ladder", "--config", str(config_path)])
    assert code == 2
    err = capsys.readouterr().err
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"]["category"] == "config_validation"


def test_cli_import_command(tmp_path, capsys):
    path = tmp_path / "data.csv"
    t = np.linspace(0.0, 1e-6, 6)
    write_table(Table(["t", "pe"], np.column_stack([t, t * 1e5])), path)
    code = cli.main(["import", str(path), "--output-dir", str(tmp_path / "std")])
    assert code == 0
    assert (tmp_path / "std" / "imported_traces.csv").exists()


def test_cli_import_format_error(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("t,pe\n1.0,0.1\n0.5,0.2\n")
    code = cli.main(["import", str(path)])
    assert code == 3
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["error"]["category"] == "data_format"


def test_modes_pipeline_with_surface_profile(tmp_path):
    radius = np.linspace(0.0, 80e-6, 50)
    height = 2e-6 - radius**2 / (2 * 0.6e-3)
    profile = tmp_path / "surface.txt"
    np.savetxt(profile, np.column_stack([radius, height]))
    raw = {
        "experiment": "modes",
        "seed": 0,
        "system": {},
        "geometry": {"substrate_um": 49.5, "aln_nm": 500.0, "curvature_mm": 9.9,
                     "electrode_um": 15.0, "convex_um": 25.0},
        "material": {},
        "modes": {"band_center_ghz": 6.0, "band_span_fsr": 1.2, "n_roundtrips": 100,
                  "n_frequencies": 401, "grid_size": 96,
                  "extent_convex_diameters": 4.0, "max_transverse_order": 1,
                  "surface_profile_path": str(profile)},
    }
    bundle = run_experiment(config_from_mapping(raw))
    # splitting reflects the fitted 0.6 mm radius, not the configured 9.9 mm
    from qadsim import acoustic as ac
    fitted = ac.AcousticGeometry(substrate_thickness=49.5e-6, aln_thickness=500e-9,
                                 curvature_radius=0.6e-3, electrode_diameter=15e-6,
                                 convex_diameter=25e-6)
    expected = ac.transverse_mode_splitting(fitted, ac.MaterialParams())
    assert bundle.summary["transverse_splitting_hz"] == pytest.approx(expected, rel=1e-6)
