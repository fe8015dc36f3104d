"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s``.  The end-to-end
tomography criteria (6, 7) share one set of Wigner scans; everything runs at
the device parameter set (g0/2pi = 350 kHz, qubit T1 = 7 us, phonon T1 =
64 us, phonon Ramsey T2 = 38 us, reset population 2 percent).
"""

import time

import numpy as np
import pytest

from qadsim import acoustic as ac
from qadsim import dynamics as dyn
from qadsim import fockspace as fs
from qadsim import tomography as tomo
from qadsim.config import config_from_mapping
from qadsim.io import export_bundle
from qadsim.pipelines import run_experiment
from qadsim.populations import PopulationDistribution, extract_populations, parity_from_populations

DEVICE = dyn.SystemParams()
MAT = ac.MaterialParams()
GEOM = ac.AcousticGeometry()

TWO_PI = 2.0 * np.pi


def check(num, description, ok, detail="", elapsed=None, budget=None):
    status = "PASS" if ok else "FAIL"
    timing = ""
    if elapsed is not None:
        timing = f" [{elapsed:.1f}s" + (f" / budget {budget:.0f}s]" if budget else "]")
    print(f"\n[{status}] criterion {num}: {description} {detail}{timing}")
    assert ok, f"criterion {num}: {description} {detail}"
    if budget is not None:
        assert elapsed < budget, f"criterion {num} exceeded its runtime budget"


def run_config(raw):
    return run_experiment(config_from_mapping(raw))


def test_criterion_1_sqrt_n_rabi_scaling():
    start = time.monotonic()
    grid = dyn.default_probe_grid()
    traces = dyn.simulate_basis_traces(DEVICE, 7, grid, phonon_dim=20)
    worst = 0.0
    for n, trace in enumerate(traces, start=1):
        peak = dyn.dominant_frequency(trace)
        expected = np.sqrt(n) * 700e3
        worst = max(worst, abs(peak - expected) / expected)
    elapsed = time.monotonic() - start
    check(
        1,
        "sqrt(N) Rabi scaling, FFT peaks at sqrt(N) x 700 kHz within 2 percent",
        worst < 0.02,
        f"(worst relative error {worst:.4f})",
        elapsed,
        60.0,
    )


def test_criterion_2_single_phonon_preparation():
    start = time.monotonic()
    bundle = run_config(
        {
            "experiment": "ladder",
            "seed": 0,
            "system": {},
            "ladder": {"n_values": [1], "fit_n_max": 14, "delta_g_khz": 0.0},
        }
    )
    p11 = bundle.summary["p_1_1"]
    elapsed = time.monotonic() - start
    check(
        2,
        "single-phonon preparation, extracted p1 = 0.86 +- 0.04",
        0.82 <= p11 <= 0.90,
        f"(extracted p1 = {p11:.4f})",
        elapsed,
        120.0,
    )


def test_criterion_3_ladder_shape():
    start = time.monotonic()
    bundle = run_config(
        {
            "experiment": "ladder",
            "seed": 0,
            "system": {},
            "ladder": {
                "n_values": [1, 2, 3, 4, 5, 6, 7],
                "fit_n_max": 14,
                "delta_g_khz": 0.0,
            },
        }
    )
    diag = [bundle.summary[f"p_{n}_{n}"] for n in range(1, 8)]
    argmax_ok = bundle.summary["argmax_equals_N"]
    inversions = [
        diag[i + 1] - diag[i] for i in range(6) if diag[i + 1] > diag[i] + 1e-12
    ]
    monotone_ok = len(inversions) == 0 or (
        len(inversions) == 1 and inversions[0] <= 0.02
    )
    elapsed = time.monotonic() - start
    check(
        3,
        "ladder distributions peaked at n = N with non-increasing p_NN",
        argmax_ok and monotone_ok,
        f"(diagonal {[f'{p:.3f}' for p in diag]})",
        elapsed,
        900.0,
    )


def test_criterion_4_displacement_calibration():
    start = time.monotonic()
    bundle = run_config(
        {
            "experiment": "displacement_calibration",
            "seed": 0,
            "system": {},
            "displacement_calibration": {},
        }
    )
    max_tv = bundle.summary["max_tv_distance"]
    elapsed = time.monotonic() - start
    check(
        4,
        "pulsed-drive calibration recovers one scale with Poisson TV < 0.05",
        max_tv < 0.05,
        f"(scale {bundle.summary['scale']:.4f}, max TV {max_tv:.4f})",
        elapsed,
        300.0,
    )


def test_criterion_5_tomography_roundtrip():
    start = time.monotonic()
    grid = tomo.square_grid(2.0, 21)
    targets = {
        "|0>": fs.fock_state(0, 10),
        "|1>": fs.fock_state(1, 10),
        "|2>": fs.fock_state(2, 10),
        "(|0>+|1>)/sqrt2": (fs.fock_state(0, 10) + fs.fock_state(1, 10)) / np.sqrt(2),
    }
    results = {}
    physical = True
    for label, vec in targets.items():
        state_start = time.monotonic()
        data = tomo.WignerGrid(
            grid, tomo.predict_parities(fs.density_matrix(vec), grid)
        )
        rho = tomo.mle_reconstruct(data, 10)
        results[label] = fs.state_fidelity(rho, vec)
        physical &= np.linalg.eigvalsh(rho).min() >= -1e-8
        physical &= np.max(np.abs(rho - rho.conj().T)) < 1e-8
        physical &= abs(np.trace(rho).real - 1.0) < 1e-8
        assert time.monotonic() - state_start < 300.0
    elapsed = time.monotonic() - start
    check(
        5,
        "noiseless synthetic reconstruction, fidelity >= 0.99 and physical to 1e-8",
        all(f >= 0.99 for f in results.values()) and physical,
        "(" + ", ".join(f"{k}: {v:.5f}" for k, v in results.items()) + ")",
        elapsed,
    )


@pytest.fixture(scope="module")
def end_to_end_reconstructions(tmp_path_factory):
    """Full prepare-displace-measure-reconstruct chain for the three states."""
    out = {}
    base = tmp_path_factory.mktemp("e2e")
    for prep in ("fock:1", "superposition", "fock:2"):
        label = tomo.Preparation.parse(prep).label()
        scan = run_config(
            {
                "experiment": "wigner",
                "seed": 0,
                "workers": 2,
                "system": {},
                "wigner": {"preparation": prep},
            }
        )
        scan_dir = base / label
        export_bundle(scan, scan_dir)
        recon = run_config(
            {
                "experiment": "reconstruct",
                "seed": 0,
                "system": {},
                "reconstruct": {
                    "data_path": str(scan_dir / "wigner_data.csv"),
                    "preparation": prep,
                },
            }
        )
        out[label] = recon.summary
    return out


def test_criterion_6_end_to_end_fidelities(end_to_end_reconstructions):
    start = time.monotonic()
    targets = {
        "fock1": 0.87,
        "superposition01": 0.94,
        "fock2": 0.78,
    }
    fidelities = {
        label: end_to_end_reconstructions[label]["fidelity"] for label in targets
    }
    ok = all(abs(fidelities[k] - v) <= 0.05 for k, v in targets.items())
    detail = ", ".join(
        f"{k}: {fidelities[k]:.4f} (target {v:.2f} +- 0.05)"
        for k, v in targets.items()
    )
    check(
        6,
        "end-to-end fidelities for |1>, (|0>+|1>)/sqrt2, |2>",
        ok,
        f"({detail})",
        time.monotonic() - start,
    )


def test_criterion_7_wigner_negativity(end_to_end_reconstructions):
    central = end_to_end_reconstructions["fock1"]["central_parity"]
    ideal = tomo.predict_parity(fs.density_matrix(fs.fock_state(1, 10)), 0.0)
    check(
        7,
        "reconstructed |1> central parity <= -0.5; ideal |1> gives -1",
        central <= -0.5 and abs(ideal + 1.0) < 1e-3,
        f"(reconstructed {central:.4f}, ideal {ideal:.6f})",
    )


def test_criterion_8_acoustic_spectrum_oracle():
    start = time.monotonic()
    geom = ac.AcousticGeometry(
        substrate_thickness=49.5e-6,
        aln_thickness=0.5e-6,
        curvature_radius=600e-6,
        electrode_diameter=15e-6,
        convex_diameter=25e-6,
    )
    fsr = ac.free_spectral_range(geom, MAT)
    center = 6.0e9
    band = (center - 0.6 * fsr, center + 1.6 * fsr)
    n_roundtrips = 400
    exc = ac.disk_field(18e-6, 96, 100e-6)
    shifted = ac.TransverseField(
        np.roll(exc.values, 4, axis=0), exc.extent
    ).normalized()
    spec = ac.roundtrip_spectrum(geom, MAT, band, n_roundtrips, shifted, 4001)
    half_linewidth = 0.5 * fsr / n_roundtrips
    peak_freqs = [f for f, _ in spec.peaks(rel_height=0.01)]
    analytic = ac.analytic_mode_spectrum(geom, MAT, band, max_transverse_order=2)
    worst = max(
        min(abs(p - mode.frequency) for p in peak_freqs) for mode in analytic
    )
    gauss = ac.gaussian_field(ac.fundamental_waist(geom, MAT, center), 96, 100e-6)
    fund = ac.roundtrip_spectrum(geom, MAT, band, 300, gauss, 4001)
    fund_peaks = [f for f, _ in fund.peaks(rel_height=0.3)]
    spacing_ok = (
        len(fund_peaks) >= 2
        and abs(abs(fund_peaks[1] - fund_peaks[0]) - fsr) < 1e-3 * fsr
    )
    elapsed = time.monotonic() - start
    check(
        8,
        "roundtrip peaks match analytic modes within half a linewidth; "
        "fundamental spacing matches the FSR to 0.1 percent",
        worst < half_linewidth and spacing_ok,
        f"(worst offset {worst / 1e3:.1f} kHz, half linewidth "
        f"{half_linewidth / 1e3:.1f} kHz)",
        elapsed,
        600.0,
    )


def test_criterion_9_coupling_selectivity():
    start = time.monotonic()
    splitting = ac.transverse_mode_splitting(GEOM, MAT)
    waist = ac.fundamental_waist(GEOM, MAT, 6.29e9)
    fsr = ac.free_spectral_range(GEOM, MAT)
    band = (6.29e9 - 0.6 * fsr, 6.29e9 + 0.6 * fsr)
    modes = ac.analytic_mode_spectrum(GEOM, MAT, band, max_transverse_order=4)
    electrode = ac.electrode_field(GEOM, 256, 4 * GEOM.convex_diameter)
    rated = ac.coupling_rates(GEOM, MAT, electrode, modes, anchor_g0=DEVICE.g0)
    fundamental = max(m.coupling for m in rated if (m.m, m.n) == (0, 0))
    strongest_higher = max(m.coupling for m in rated if (m.m, m.n) != (0, 0))
    ratio = fundamental / strongest_higher
    geometry_ok = 0.5e6 <= splitting <= 1.5e6 and 10e-6 <= waist <= 30e-6
    elapsed = time.monotonic() - start
    check(
        9,
        "fundamental coupling at least 5x any higher-order mode at the "
        "device-scale geometry",
        geometry_ok and ratio >= 5.0,
        f"(ratio {ratio:.1f}, splitting {splitting / 1e6:.2f} MHz, "
        f"waist {waist * 1e6:.1f} um)",
        elapsed,
    )


def test_criterion_10_property_suites(tmp_path):
    start = time.monotonic()
    failures = []

    # trace preservation and physicality along a pulse sequence
    state = dyn.joint_state_from_phonon(fs.coherent_state(0.7, 10), 10, 0.05)
    for seg in (
        dyn.PulseSegment.resonant(0.8e-6),
        dyn.PulseSegment.idle(1.0e-6, -5e6),
        dyn.PulseSegment.pi(),
    ):
        state = dyn.evolve(state, DEVICE, seg)
        if abs(np.trace(state.rho).real - 1.0) > 1e-8:
            failures.append("trace preservation")
        if np.linalg.eigvalsh(state.rho).min() < -1e-7:
            failures.append("positivity")

    # convex-mixture extraction oracle
    grid = dyn.default_probe_grid(4e-6, 20e-9)
    basis = dyn.simulate_basis_traces(DEVICE, 6, grid, phonon_dim=10)
    mix = dyn.TimeTrace(grid, 0.45 * basis[0].pe + 0.35 * basis[2].pe)
    dist = extract_populations(mix, basis)
    if abs(dist.p[1] - 0.45) > 1e-3 or abs(dist.p[3] - 0.35) > 1e-3:
        failures.append("convex-mixture oracle")

    # parity identities and Poisson closed forms
    alpha = 0.9 - 0.4j
    dim = 24
    p_op = fs.parity_operator(dim)
    conj = p_op @ fs.displacement_operator(alpha, dim) @ p_op
    if np.max(np.abs(conj[:16, :16] - fs.displacement_operator(-alpha, dim)[:16, :16])) > 1e-7:
        failures.append("parity-displacement identity")
    pops = np.abs(fs.coherent_state(1.0, 15)) ** 2
    pois = PopulationDistribution(
        np.concatenate([[1.0 - pops[1:15].sum()], pops[1:15]]), 14
    )
    if abs(parity_from_populations(pois) - np.exp(-2.0)) > 1e-4:
        failures.append("coherent parity closed form")

    # determinism: identical config + seed -> byte-identical tables
    raw = {
        "experiment": "ladder",
        "seed": 42,
        "system": {},
        "ladder": {
            "n_values": [1],
            "fit_n_max": 4,
            "probe_time_us": 2.0,
            "probe_step_ns": 40.0,
            "delta_g_khz": 0.0,
            "phonon_dim": 8,
            "noise_sigma": 0.01,
        },
    }
    blobs = []
    for name in ("first", "second"):
        bundle = run_config(dict(raw))
        export_bundle(bundle, tmp_path / name)
        blobs.append((tmp_path / name / "ladder_traces.csv").read_bytes())
    if blobs[0] != blobs[1]:
        failures.append("determinism")

    elapsed = time.monotonic() - start
    check(
        10,
        "module invariants and property suites",
        not failures,
        f"(failures: {failures or 'none'})",
        elapsed,
    )
