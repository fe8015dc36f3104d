"""Experiment configuration: a single YAML file with unit-suffixed fields.

Every physical quantity carries its unit in the field name (``_us``,
``_khz``, ``_mhz``, ``_um`` ...) to keep the mixed kHz/MHz/us bookkeeping
honest.  ``load_config`` turns the file into validated dataclasses and
reports problems with dotted field paths.
"""

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np
import yaml

from .acoustic import AcousticGeometry, MaterialParams
from .dynamics import SystemParams
from .errors import ConfigError, ValidationError

TWO_PI = 2.0 * np.pi

EXPERIMENTS = (
    "chevron",
    "rabi_basis",
    "ladder",
    "displacement_calibration",
    "wigner",
    "reconstruct",
    "modes",
)


@dataclass
class ChevronSettings:
    detuning_min_mhz: float = -3.0
    detuning_max_mhz: float = 3.0
    detuning_points: int = 41
    time_max_us: float = 4.0
    time_step_ns: float = 20.0
    phonon_dim: int = 6


@dataclass
class RabiBasisSettings:
    n_max: int = 14
    peak_report_n: int = 7
    probe_time_us: float = 6.0
    probe_step_ns: float = 10.0
    phonon_dim: int = 20


@dataclass
class LadderSettings:
    n_values: tuple = (1, 2, 3, 4, 5, 6, 7)
    fit_n_max: int = 14
    probe_time_us: float = 6.0
    probe_step_ns: float = 10.0
    delta_g_khz: float = 5.0
    noise_sigma: float = 0.0
    phonon_dim: int = 20


@dataclass
class DisplacementCalibrationSettings:
    amplitudes: tuple = (0.4, 0.8, 1.2, 1.6, 2.0, 2.4)
    fit_n_max: int = 14
    probe_time_us: float = 6.0
    probe_step_ns: float = 10.0
    phonon_dim: int = 30


@dataclass
class WignerSettings:
    preparation: str = "fock:1"
    grid_points_per_side: int = 21
    grid_extent: float = 2.0
    max_radius: Optional[float] = 2.0  # trim to the calibrated disk; None keeps all
    displacement_mode: str = "pulsed"
    calibrate_drive: bool = True
    fit_n_max: int = 14
    probe_time_us: float = 6.0
    probe_step_ns: float = 10.0
    noise_sigma: float = 0.0
    phonon_dim: int = 30


@dataclass
class ReconstructSettings:
    data_path: Optional[str] = None  # wigner CSV; None reconstructs synthetic data
    preparation: str = "fock:1"      # target state for fidelity reporting
    dim: int = 10
    cut_extent: float = 2.0
    cut_points: int = 81


@dataclass
class ModesSettings:
    band_center_ghz: float = 6.29
    band_span_fsr: float = 2.2
    n_roundtrips: int = 200
    n_frequencies: int = 1501
    grid_size: int = 512
    extent_convex_diameters: float = 4.0
    max_transverse_order: int = 3
    excitation: str = "disk"  # disk | gaussian
    surface_profile_path: Optional[str] = None


_SETTINGS_TYPES = {
    "chevron": ChevronSettings,
    "rabi_basis": RabiBasisSettings,
    "ladder": LadderSettings,
    "displacement_calibration": DisplacementCalibrationSettings,
    "wigner": WignerSettings,
    "reconstruct": ReconstructSettings,
    "modes": ModesSettings,
}


@dataclass
class ExperimentConfig:
    experiment: str
    system: SystemParams
    settings: object
    seed: int = 0
    output_dir: Optional[str] = None
    workers: int = 1
    geometry: Optional[AcousticGeometry] = None
    material: Optional[MaterialParams] = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}",
                field="experiment",
            )
        expected = _SETTINGS_TYPES[self.experiment]
        if not isinstance(self.settings, expected):
            raise ConfigError(
                f"settings must be {expected.__name__} for {self.experiment}",
                field="settings",
            )
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", field="workers")


def _require_mapping(node, path):
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError(f"expected a mapping, got {type(node).__name__}", field=path)
    return node


def _pop_number(node, key, path, default=None, required=False):
    if key not in node:
        if required:
            raise ConfigError("missing required field", field=f"{path}.{key}")
        return default
    value = node.pop(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(
            f"expected a number, got {value!r}", field=f"{path}.{key}"
        )
    return float(value)


def system_params_from_mapping(node, path="system"):
    node = dict(_require_mapping(node, path))
    g0_khz = _pop_number(node, "g0_khz", path, default=350.0)
    qubit_t1_us = _pop_number(node, "qubit_t1_us", path, default=7.0)
    qubit_t2_us = _pop_number(node, "qubit_t2_us", path, default=None)
    phonon_t1_us = _pop_number(node, "phonon_t1_us", path, default=64.0)
    phonon_t2_us = _pop_number(node, "phonon_t2_us", path, default=38.0)
    thermal = _pop_number(node, "qubit_thermal_pop", path, default=0.06)
    reset = _pop_number(node, "qubit_reset_pop", path, default=0.02)
    detuning_mhz = _pop_number(node, "detuning_mhz", path, default=-5.0)
    frame_tracking = node.pop("frame_tracking", True)
    if not isinstance(frame_tracking, bool):
        raise ConfigError("expected a boolean", field=f"{path}.frame_tracking")
    if node:
        raise ConfigError(
            f"unknown field(s): {sorted(node)}", field=path
        )
    try:
        return SystemParams(
            g0=TWO_PI * g0_khz * 1e3,
            qubit_t1=qubit_t1_us * 1e-6,
            qubit_t2=None if qubit_t2_us is None else qubit_t2_us * 1e-6,
            phonon_t1=phonon_t1_us * 1e-6,
            phonon_t2_ramsey=phonon_t2_us * 1e-6,
            qubit_thermal_pop=thermal,
            qubit_reset_pop=reset,
            nu0_detuning=detuning_mhz * 1e6,
            frame_tracking=frame_tracking,
        )
    except ValidationError as exc:
        raise ConfigError(str(exc), field=path) from exc


def geometry_from_mapping(node, path="geometry"):
    node = dict(_require_mapping(node, path))
    kwargs = {}
    for key, attr, scale in (
        ("substrate_um", "substrate_thickness", 1e-6),
        ("aln_nm", "aln_thickness", 1e-9),
        ("curvature_mm", "curvature_radius", 1e-3),
        ("electrode_um", "electrode_diameter", 1e-6),
        ("convex_um", "convex_diameter", 1e-6),
        ("gap_um", "chip_gap", 1e-6),
    ):
        value = _pop_number(node, key, path)
        if value is not None:
            kwargs[attr] = value * scale
    if node:
        raise ConfigError(f"unknown field(s): {sorted(node)}", field=path)
    try:
        return AcousticGeometry(**kwargs)
    except ValidationError as exc:
        raise ConfigError(str(exc), field=path) from exc


def material_from_mapping(node, path="material"):
    node = dict(_require_mapping(node, path))
    kwargs = {}
    for key, attr in (("v_l", "v_l"), ("v_t", "v_t"), ("piezo_coupling", "piezo_coupling")):
        value = _pop_number(node, key, path)
        if value is not None:
            kwargs[attr] = value
    if node:
        raise ConfigError(f"unknown field(s): {sorted(node)}", field=path)
    try:
        return MaterialParams(**kwargs)
    except ValidationError as exc:
        raise ConfigError(str(exc), field=path) from exc


def _settings_from_mapping(experiment, node):
    cls = _SETTINGS_TYPES[experiment]
    node = dict(_require_mapping(node, experiment))
    valid = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in node.items():
        if key not in valid:
            raise ConfigError(
                f"unknown field (valid: {sorted(valid)})", field=f"{experiment}.{key}"
            )
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        settings = cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field=experiment) from exc
    _validate_settings(experiment, settings)
    return settings


def _validate_settings(experiment, s):
    def check(cond, f, msg):
        if not cond:
            raise ConfigError(msg, field=f"{experiment}.{f}")

    if isinstance(s, ChevronSettings):
        check(s.detuning_points >= 1, "detuning_points", "must be >= 1")
        check(s.detuning_max_mhz >= s.detuning_min_mhz, "detuning_max_mhz", "empty detuning range")
        check(s.time_max_us > 0, "time_max_us", "must be > 0")
        check(s.time_step_ns > 0, "time_step_ns", "must be > 0")
        check(s.phonon_dim >= 2, "phonon_dim", "must be >= 2")
    elif isinstance(s, RabiBasisSettings):
        check(s.n_max >= 1, "n_max", "must be >= 1")
        check(1 <= s.peak_report_n <= s.n_max, "peak_report_n", "must be in [1, n_max]")
        check(s.phonon_dim > s.n_max, "phonon_dim", "must exceed n_max")
    elif isinstance(s, LadderSettings):
        check(len(s.n_values) > 0, "n_values", "must be non-empty")
        check(all(int(n) == n and n >= 0 for n in s.n_values), "n_values", "must be integers >= 0")
        check(s.fit_n_max >= max(s.n_values), "fit_n_max", "must cover max prepared N")
        check(s.delta_g_khz >= 0, "delta_g_khz", "must be >= 0")
        check(s.noise_sigma >= 0, "noise_sigma", "must be >= 0")
    elif isinstance(s, DisplacementCalibrationSettings):
        check(len(s.amplitudes) >= 3, "amplitudes", "need >= 3 drive amplitudes")
        check(all(a >= 0 for a in s.amplitudes), "amplitudes", "must be >= 0")
    elif isinstance(s, WignerSettings):
        check(s.grid_points_per_side >= 2, "grid_points_per_side", "must be >= 2")
        check(s.grid_extent > 0, "grid_extent", "must be > 0")
        check(s.displacement_mode in ("pulsed", "ideal"), "displacement_mode", "pulsed or ideal")
        check(s.noise_sigma >= 0, "noise_sigma", "must be >= 0")
        check(s.max_radius is None or s.max_radius > 0, "max_radius", "must be > 0 or null")
    elif isinstance(s, ReconstructSettings):
        check(s.dim >= 2, "dim", "must be >= 2")
        check(s.cut_points >= 2, "cut_points", "must be >= 2")
    elif isinstance(s, ModesSettings):
        check(s.band_center_ghz > 0, "band_center_ghz", "must be > 0")
        check(s.band_span_fsr > 0, "band_span_fsr", "must be > 0")
        check(s.n_roundtrips >= 8, "n_roundtrips", "must be >= 8")
        check(s.grid_size >= 16, "grid_size", "must be >= 16")
        check(s.excitation in ("disk", "gaussian"), "excitation", "disk or gaussian")


def config_from_mapping(raw, experiment=None, path="<config>"):
    raw = dict(_require_mapping(raw, path))
    file_experiment = raw.pop("experiment", None)
    if experiment is None:
        experiment = file_experiment
    elif file_experiment is not None and file_experiment != experiment:
        raise ConfigError(
            f"config file says {file_experiment!r} but {experiment!r} was requested",
            field="experiment",
        )
    if experiment is None:
        raise ConfigError("missing required field", field="experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}",
            field="experiment",
        )
    seed = raw.pop("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer", field="seed")
    output_dir = raw.pop("output_dir", None)
    workers = raw.pop("workers", 1)
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers must be an integer >= 1", field="workers")
    system = system_params_from_mapping(raw.pop("system", None))
    geometry = material = None
    if "geometry" in raw or experiment == "modes":
        geometry = geometry_from_mapping(raw.pop("geometry", None))
    if "material" in raw or experiment == "modes":
        material = material_from_mapping(raw.pop("material", None))
    settings = _settings_from_mapping(experiment, raw.pop(experiment, None))
    known_sections = set(EXPERIMENTS)
    leftovers = [k for k in raw if k not in known_sections]
    if leftovers:
        raise ConfigError(f"unknown top-level field(s): {sorted(leftovers)}", field=path)
    return ExperimentConfig(
        experiment=experiment,
        system=system,
        settings=settings,
        seed=seed,
        output_dir=output_dir,
        workers=workers,
        geometry=geometry,
        material=material,
    )


def load_config(path, experiment=None):
    """Parse and validate a YAML experiment configuration file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse YAML: {exc}") from exc
    return config_from_mapping(raw, experiment=experiment, path=str(path))


def config_echo(config):
    """JSON-serializable echo of a validated config for the result manifest."""

    def convert(value):
        if dataclasses.is_dataclass(value) and not isinstance(value, type):
            return {
                f.name: convert(getattr(value, f.name))
                for f in dataclasses.fields(value)
            }
        if isinstance(value, (np.floating, np.integer)):
            return value.item()
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        if isinstance(value, float) and not np.isfinite(value):
            return repr(value)
        return value

    return convert(config)
