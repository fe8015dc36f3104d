"""Named experiment pipelines behind the CLI.

Each pipeline runs one experiment end to end and returns a
:class:`~qadsim.io.ResultBundle` of plot-ready tables plus summary metrics.
All stochastic steps derive from the config seed, so a given config is
bit-reproducible.
"""

import time
from dataclasses import replace

import numpy as np

from . import acoustic as ac
from . import dynamics as dyn
from . import tomography as tomo
from .config import config_echo
from .errors import ConfigError
from .io import ResultBundle, Table, base_manifest, read_table, traces_to_table
from .populations import extract_populations, population_error_bars

TWO_PI = 2.0 * np.pi


def run_experiment(config):
    """Execute the configured pipeline and return its result bundle."""
    runners = {
        "chevron": _run_chevron,
        "rabi_basis": _run_rabi_basis,
        "ladder": _run_ladder,
        "displacement_calibration": _run_displacement_calibration,
        "wigner": _run_wigner,
        "reconstruct": _run_reconstruct,
        "modes": _run_modes,
    }
    start = time.monotonic()
    bundle = runners[config.experiment](config)
    bundle.manifest["wall_time_s"] = time.monotonic() - start
    return bundle


def _make_bundle(config):
    return ResultBundle(
        manifest=base_manifest(config_echo(config), config.seed, config.experiment)
    )


def _probe_grid(settings):
    return dyn.default_probe_grid(
        settings.probe_time_us * 1e-6, settings.probe_step_ns * 1e-9
    )


def _add_noise(traces, sigma, seed):
    if sigma <= 0:
        return traces
    seqs = np.random.SeedSequence(seed).spawn(len(traces))
    out = []
    for tr, sub in zip(traces, seqs):
        rng = np.random.default_rng(sub)
        out.append(
            dyn.TimeTrace(
                tr.times, tr.pe + rng.normal(0.0, sigma, tr.pe.shape), check_bounds=False
            )
        )
    return out


def _fft_tables(traces, labels, prefix):
    freqs, _ = dyn.trace_spectrum(traces[0])
    mags = [dyn.trace_spectrum(tr)[1] for tr in traces]
    spectrum = Table(
        ["frequency_hz"] + [f"mag_{lab}" for lab in labels],
        np.column_stack([freqs] + mags),
    )
    peaks = np.array([dyn.dominant_frequency(tr) for tr in traces])
    return {f"{prefix}_fft_magnitude": spectrum}, peaks


# ---------------------------------------------------------------------------

def _run_chevron(config):
    s = config.settings
    bundle = _make_bundle(config)
    detunings = np.linspace(
        s.detuning_min_mhz * 1e6, s.detuning_max_mhz * 1e6, s.detuning_points
    )
    n_t = int(round(s.time_max_us * 1e3 / s.time_step_ns))
    t_grid = np.linspace(0.0, n_t * s.time_step_ns * 1e-9, n_t + 1)
    pe = dyn.simulate_chevron(config.system, detunings, t_grid, s.phonon_dim)
    bundle.tables["chevron_times"] = Table(["t"], t_grid[:, None])
    bundle.tables["chevron_map"] = Table(
        ["detuning_hz"] + [f"pe_{i}" for i in range(t_grid.size)],
        np.column_stack([detunings, pe]),
    )
    g0 = config.system.g0
    rows = []
    for i, det in enumerate(detunings):
        trace = dyn.TimeTrace(t_grid, pe[i], check_bounds=False)
        peak = dyn.dominant_frequency(trace)
        expected = np.sqrt(4.0 * g0**2 + (TWO_PI * det) ** 2) / TWO_PI
        rows.append([det, peak, expected])
    bundle.tables["chevron_peaks"] = Table(
        ["detuning_hz", "fft_peak_hz", "expected_hz"], np.array(rows)
    )
    center = int(np.argmin(np.abs(detunings)))
    bundle.summary["resonant_peak_hz"] = float(rows[center][1])
    bundle.summary["expected_resonant_hz"] = float(2.0 * g0 / TWO_PI)
    return bundle


def _run_rabi_basis(config):
    s = config.settings
    bundle = _make_bundle(config)
    t_grid = _probe_grid(s)
    traces = dyn.simulate_basis_traces(config.system, s.n_max, t_grid, s.phonon_dim)
    labels = [f"n{n}" for n in range(1, s.n_max + 1)]
    bundle.tables["basis_traces"] = traces_to_table(traces, labels)
    fft_tables, peaks = _fft_tables(traces, labels, "basis")
    bundle.tables.update(fft_tables)
    g0 = config.system.g0
    expected = np.array(
        [2.0 * np.sqrt(n) * g0 / TWO_PI for n in range(1, s.n_max + 1)]
    )
    bundle.tables["basis_fft_peaks"] = Table(
        ["n", "fft_peak_hz", "expected_hz", "relative_error"],
        np.column_stack(
            [
                np.arange(1, s.n_max + 1),
                peaks,
                expected,
                np.abs(peaks - expected) / expected,
            ]
        ),
    )
    upto = s.peak_report_n
    bundle.summary["max_relative_peak_error"] = float(
        np.max(np.abs(peaks[:upto] - expected[:upto]) / expected[:upto])
    )
    return bundle


def _run_ladder(config):
    s = config.settings
    bundle = _make_bundle(config)
    t_grid = _probe_grid(s)
    params = config.system
    basis = dyn.simulate_basis_traces(params, s.fit_n_max, t_grid, s.phonon_dim)
    raw_traces = []
    for n in s.n_values:
        state = dyn.simulate_fock_preparation(params, int(n), s.phonon_dim)
        raw_traces.append(dyn.simulate_probe_trace(params, state, t_grid))
    traces = _add_noise(raw_traces, s.noise_sigma, config.seed)
    labels = [f"N{int(n)}" for n in s.n_values]
    bundle.tables["ladder_traces"] = traces_to_table(traces, labels)
    fft_tables, peaks = _fft_tables(traces, labels, "ladder")
    bundle.tables.update(fft_tables)
    bundle.tables["ladder_fft_peaks"] = Table(
        ["N", "fft_peak_hz", "expected_hz"],
        np.column_stack(
            [
                np.array(s.n_values, dtype=float),
                peaks,
                [2.0 * np.sqrt(n) * params.g0 / TWO_PI for n in s.n_values],
            ]
        ),
    )
    dists, lo, hi = [], [], []
    delta_g = TWO_PI * s.delta_g_khz * 1e3
    for trace in traces:
        dist = extract_populations(trace, basis, s.fit_n_max)
        dists.append(dist)
        if delta_g > 0:
            minus, plus = population_error_bars(
                trace, params, delta_g, s.fit_n_max, s.phonon_dim
            )
            lo.append(np.minimum(np.minimum(minus.p, plus.p), dist.p))
            hi.append(np.maximum(np.maximum(minus.p, plus.p), dist.p))
        else:
            lo.append(dist.p)
            hi.append(dist.p)
    n_axis = np.arange(s.fit_n_max + 1, dtype=float)
    bundle.tables["ladder_populations"] = Table(
        ["n"] + [f"p_{lab}" for lab in labels],
        np.column_stack([n_axis] + [d.p for d in dists]),
    )
    bundle.tables["ladder_populations_low"] = Table(
        ["n"] + [f"p_{lab}" for lab in labels], np.column_stack([n_axis] + lo)
    )
    bundle.tables["ladder_populations_high"] = Table(
        ["n"] + [f"p_{lab}" for lab in labels], np.column_stack([n_axis] + hi)
    )
    diag = {
        f"p_{int(n)}_{int(n)}": float(d.p[int(n)]) for n, d in zip(s.n_values, dists)
    }
    bundle.summary.update(diag)
    bundle.summary["argmax_equals_N"] = all(
        d.argmax() == int(n) for n, d in zip(s.n_values, dists) if n > 0
    )
    return bundle


def _run_displacement_calibration(config):
    s = config.settings
    bundle = _make_bundle(config)
    params = config.system
    t_grid = _probe_grid(s)
    basis = dyn.simulate_basis_traces(params, s.fit_n_max, t_grid, s.phonon_dim)
    vacuum = tomo.prepare_state(params, tomo.Preparation.vacuum(), s.phonon_dim)
    dists = []
    for amp in s.amplitudes:
        displaced = dyn.simulate_displacement(
            params, vacuum, amp, calibrated_range=max(2.0, max(s.amplitudes))
        )
        trace = dyn.simulate_probe_trace(params, displaced, t_grid)
        dists.append(extract_populations(trace, basis, s.fit_n_max))
    cal = tomo.calibrate_displacement(list(s.amplitudes), dists)
    n_axis = np.arange(s.fit_n_max + 1, dtype=float)
    labels = [f"amp{i}" for i in range(len(s.amplitudes))]
    bundle.tables["calibration_populations"] = Table(
        ["n"] + labels, np.column_stack([n_axis] + [d.p for d in dists])
    )
    model = np.column_stack(
        [n_axis]
        + [
            tomo._poisson_pmf((cal.scale * a) ** 2, s.fit_n_max)
            for a in s.amplitudes
        ]
    )
    bundle.tables["calibration_poisson_fit"] = Table(["n"] + labels, model)
    tv = [
        0.5 * float(np.sum(np.abs(d.p - tomo._poisson_pmf((cal.scale * a) ** 2, s.fit_n_max))))
        for a, d in zip(s.amplitudes, dists)
    ]
    bundle.tables["calibration_tv_distance"] = Table(
        ["amplitude", "tv_distance"],
        np.column_stack([np.array(s.amplitudes, dtype=float), tv]),
    )
    bundle.summary["scale"] = cal.scale
    bundle.summary["residual"] = cal.residual
    bundle.summary["max_tv_distance"] = float(max(tv))
    return bundle


def _wigner_grid_points(s):
    grid = tomo.square_grid(s.grid_extent, s.grid_points_per_side)
    if s.max_radius is not None:
        grid = grid[np.abs(grid) <= s.max_radius + 1e-12]
    return grid


def _run_wigner(config):
    s = config.settings
    bundle = _make_bundle(config)
    prep = tomo.Preparation.parse(s.preparation)
    grid = _wigner_grid_points(s)
    data = tomo.wigner_scan(
        config.system,
        prep,
        grid,
        phonon_dim=s.phonon_dim,
        probe_grid=_probe_grid(s),
        n_max=s.fit_n_max,
        displacement_mode=s.displacement_mode,
        noise_sigma=s.noise_sigma,
        seed=config.seed,
        n_jobs=config.workers,
        calibrate_drive=s.calibrate_drive,
    )
    bundle.tables["wigner_data"] = Table(
        ["re_alpha", "im_alpha", "parity", "wigner"],
        np.column_stack(
            [data.alphas.real, data.alphas.imag, data.parities, data.wigner]
        ),
    )
    bundle.summary["preparation"] = prep.label()
    bundle.summary["n_points"] = int(data.alphas.size)
    center = np.argmin(np.abs(data.alphas))
    bundle.summary["central_parity"] = float(data.parities[center])
    return bundle


def _run_reconstruct(config):
    s = config.settings
    bundle = _make_bundle(config)
    prep = tomo.Preparation.parse(s.preparation)
    if s.data_path is None:
        raise ConfigError(
            "reconstruct needs a wigner_data CSV (run the wigner pipeline first)",
            field="reconstruct.data_path",
        )
    table = read_table(s.data_path)
    for needed in ("re_alpha", "im_alpha", "parity"):
        if needed not in table.columns:
            raise ConfigError(
                f"{s.data_path} lacks column {needed!r}", field="reconstruct.data_path"
            )
    alphas = table.column("re_alpha") + 1j * table.column("im_alpha")
    uncertainties = (
        table.column("uncertainty") if "uncertainty" in table.columns else None
    )
    data = tomo.WignerGrid(alphas, table.column("parity"), uncertainties)
    rho = tomo.mle_reconstruct(data, s.dim, seed=config.seed)
    target = prep.target_vector(s.dim)
    cut = np.linspace(-s.cut_extent, s.cut_extent, s.cut_points)
    report = tomo.reconstruction_report(rho, target, grid=alphas, cut_alphas=cut)
    idx = np.arange(s.dim, dtype=float)
    bundle.tables["rho_real"] = Table(
        ["n"] + [f"m{m}" for m in range(s.dim)],
        np.column_stack([idx, rho.real]),
    )
    bundle.tables["rho_imag"] = Table(
        ["n"] + [f"m{m}" for m in range(s.dim)],
        np.column_stack([idx, rho.imag]),
    )
    bundle.tables["predicted_wigner"] = Table(
        ["re_alpha", "im_alpha", "parity_reconstructed", "parity_measured"],
        np.column_stack(
            [alphas.real, alphas.imag, report.grid_parities, data.parities]
        ),
    )
    bundle.tables["wigner_cut"] = Table(
        ["re_alpha", "parity_reconstructed", "parity_ideal"],
        np.column_stack([cut, report.cut_parities, report.cut_parities_ideal]),
    )
    bundle.summary["fidelity"] = report.fidelity
    bundle.summary["min_wigner"] = report.min_wigner
    bundle.summary["central_parity"] = float(tomo.predict_parity(rho, 0.0))
    return bundle


def _run_modes(config):
    s = config.settings
    bundle = _make_bundle(config)
    geom, mat = config.geometry, config.material
    if s.surface_profile_path is not None:
        radius, height = ac.load_surface_profile(s.surface_profile_path)
        geom = replace(
            geom, curvature_radius=ac.curvature_radius_from_profile(radius, height)
        )
    fsr = ac.free_spectral_range(geom, mat)
    center = s.band_center_ghz * 1e9
    band = (center - 0.5 * s.band_span_fsr * fsr, center + 0.5 * s.band_span_fsr * fsr)
    modes = ac.analytic_mode_spectrum(geom, mat, band, s.max_transverse_order)
    extent = s.extent_convex_diameters * geom.convex_diameter
    electrode = ac.electrode_field(geom, s.grid_size, extent, kind="disk")
    modes = ac.coupling_rates(geom, mat, electrode, modes, anchor_g0=config.system.g0)
    bundle.tables["analytic_modes"] = Table(
        ["l", "m", "n", "frequency_hz", "waist_m", "coupling_rad_s"],
        np.array(
            [[r.l, r.m, r.n, r.frequency, r.waist, r.coupling] for r in modes]
        ),
    )
    excitation = ac.electrode_field(geom, s.grid_size, extent, kind=s.excitation)
    spectrum = ac.roundtrip_spectrum(
        geom, mat, band, s.n_roundtrips, excitation, s.n_frequencies
    )
    bundle.tables["roundtrip_spectrum"] = Table(
        ["frequency_hz", "intensity"],
        np.column_stack([spectrum.frequencies, spectrum.intensity]),
    )
    peaks = spectrum.peaks()
    if peaks:
        bundle.tables["roundtrip_peaks"] = Table(
            ["frequency_hz", "intensity"], np.array(peaks)
        )
    fundamentals = sorted(r.coupling for r in modes if r.m == 0 and r.n == 0)
    higher = [r.coupling for r in modes if (r.m, r.n) != (0, 0)]
    bundle.summary["fsr_hz"] = fsr
    bundle.summary["transverse_splitting_hz"] = ac.transverse_mode_splitting(geom, mat)
    bundle.summary["fundamental_waist_m"] = ac.fundamental_waist(geom, mat, center)
    bundle.summary["boundary_loss"] = spectrum.boundary_loss
    if fundamentals and higher:
        bundle.summary["coupling_selectivity"] = float(
            max(fundamentals) / max(higher)
        )
    return bundle
