"""Acoustic mode structure and coupling rates of a plano-convex bulk resonator.

Two routes to the mode spectrum:

* the analytic Hermite-Gaussian model of a stable plano-convex cavity,
  nu_{l,m,n} = FSR * [l + (m + n + 1) * zeta / pi] with the Gouy phase
  zeta = arccos(sqrt(1 - L/R)), and
* a round-trip beam-propagation simulation (angular-spectrum method) that
  coherently sums the field over many round trips; frequencies where the
  interference is constructive mark stable modes.

Coupling rates follow from the transverse overlap of the electrode drive
profile with each mode profile.  The AlN transducer film is treated
acoustically like the substrate; its thickness only extends the path length.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ResolutionError, StabilityError, ValidationError

PARAXIAL_RATIO_WARN = 10.0


@dataclass(frozen=True)
class AcousticGeometry:
    """Plano-convex resonator dimensions (meters)."""

    substrate_thickness: float = 410.2e-6
    aln_thickness: float = 0.9e-6
    curvature_radius: float = 6.0e-3
    electrode_diameter: float = 60e-6
    convex_diameter: float = 240e-6
    chip_gap: float = 1.0e-6

    def __post_init__(self):
        for name in (
            "substrate_thickness",
            "aln_thickness",
            "curvature_radius",
            "electrode_diameter",
            "convex_diameter",
            "chip_gap",
        ):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.curvature_radius < PARAXIAL_RATIO_WARN * self.path_length:
            warnings.warn(
                f"curvature radius {self.curvature_radius:.2e} m is less than "
                f"{PARAXIAL_RATIO_WARN:.0f}x the acoustic path length; the paraxial "
                "mode model is marginal",
                UserWarning,
            )

    @property
    def path_length(self):
        """One-way acoustic path: substrate plus AlN film."""
        return self.substrate_thickness + self.aln_thickness

    @classmethod
    def from_surface_profile(cls, radius, height, **kwargs):
        """Geometry with the curvature radius fitted from profilometry data."""
        r = curvature_radius_from_profile(radius, height)
        return cls(curvature_radius=r, **kwargs)


@dataclass(frozen=True)
class MaterialParams:
    """Sound velocities (m/s) and transduction strength (arbitrary units)."""

    v_l: float = 11100.0
    v_t: float = 8540.0  # unused by the longitudinal model, kept for completeness
    piezo_coupling: float = 1.0

    def __post_init__(self):
        if self.v_l <= 0 or self.v_t <= 0:
            raise ValidationError("sound velocities must be > 0")
        if self.v_t >= self.v_l:
            raise ValidationError(
                f"transverse velocity {self.v_t} must be below longitudinal {self.v_l}"
            )
        if self.piezo_coupling <= 0:
            raise ValidationError("piezo_coupling must be > 0")


@dataclass
class ModeRecord:
    """One acoustic mode: longitudinal index l, transverse indices (m, n)."""

    l: int
    m: int
    n: int
    frequency: float
    waist: float
    coupling: float = 0.0

    def __post_init__(self):
        if self.frequency <= 0 or self.waist <= 0:
            raise ValidationError("mode frequency and waist must be > 0")
        if self.coupling < 0:
            raise ValidationError("coupling must be >= 0")


def curvature_radius_from_profile(radius, height):
    """Radius of curvature from a (radius, height) surface profile.

    Fits the paraxial cap h(r) = h0 - r^2 / (2 R) by least squares.
    """
    r = np.asarray(radius, dtype=float)
    h = np.asarray(height, dtype=float)
    if r.size != h.size or r.size < 3:
        raise ValidationError("surface profile needs >= 3 (radius, height) samples")
    design = np.column_stack([np.ones_like(r), r**2])
    coef, *_ = np.linalg.lstsq(design, h, rcond=None)
    if coef[1] >= 0:
        raise ValidationError("surface profile is not convex (no downward curvature)")
    return float(-0.5 / coef[1])


def load_surface_profile(path):
    """Two-column text file (radius, height), both in meters."""
    data = np.loadtxt(path)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValidationError(f"expected two columns in {path}, got shape {data.shape}")
    return data[:, 0], data[:, 1]


# ---------------------------------------------------------------------------
# Analytic plano-convex spectrum
# ---------------------------------------------------------------------------

def free_spectral_range(geom, mat):
    """Longitudinal mode spacing v_l / (2 L_eff)."""
    return mat.v_l / (2.0 * geom.path_length)


def gouy_phase(geom):
    """One-way Gouy phase zeta = arccos(sqrt(1 - L/R)) of the stable cavity."""
    ratio = geom.path_length / geom.curvature_radius
    if ratio >= 1.0:
        raise StabilityError(
            f"cavity unstable: path length {geom.path_length:.3e} m >= "
            f"curvature radius {geom.curvature_radius:.3e} m"
        )
    return math.acos(math.sqrt(1.0 - ratio))


def fundamental_waist(geom, mat, frequency):
    """Gaussian waist (amplitude 1/e radius) at the flat surface."""
    wavelength = mat.v_l / frequency
    length = geom.path_length
    radius = geom.curvature_radius
    if length >= radius:
        raise StabilityError("cavity unstable: L >= R")
    return math.sqrt(
        (wavelength / math.pi) * math.sqrt(length * (radius - length))
    )


def analytic_mode_spectrum(geom, mat, band, max_transverse_order=3):
    """Hermite-Gaussian mode frequencies within a (low, high) frequency band."""
    low, high = float(band[0]), float(band[1])
    if not 0 < low < high:
        raise ValidationError(f"invalid frequency band ({low}, {high})")
    fsr = free_spectral_range(geom, mat)
    zeta = gouy_phase(geom)
    records = []
    l_min = max(int(math.floor(low / fsr)) - max_transverse_order - 2, 1)
    l_max = int(math.ceil(high / fsr)) + 1
    for l in range(l_min, l_max + 1):
        for order in range(max_transverse_order + 1):
            freq = fsr * (l + (order + 1) * zeta / math.pi)
            if not low <= freq <= high:
                continue
            waist = fundamental_waist(geom, mat, freq)
            for m in range(order + 1):
                records.append(
                    ModeRecord(l=l, m=m, n=order - m, frequency=freq, waist=waist)
                )
    records.sort(key=lambda r: (r.frequency, r.m))
    return records


def transverse_mode_splitting(geom, mat):
    """Frequency gap between the fundamental and the first higher-order family."""
    return free_spectral_range(geom, mat) * gouy_phase(geom) / math.pi


# ---------------------------------------------------------------------------
# Transverse fields
# ---------------------------------------------------------------------------

@dataclass
class TransverseField:
    """Complex field sampled on a centered square grid of physical size ``extent``."""

    values: np.ndarray
    extent: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValidationError(f"field must be a square 2-d array, got {self.values.shape}")
        if self.extent <= 0:
            raise ValidationError("extent must be > 0")

    @property
    def grid_size(self):
        return self.values.shape[0]

    @property
    def dx(self):
        return self.extent / self.grid_size

    def axes(self):
        n = self.grid_size
        x = (np.arange(n) - n / 2) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.dx**2))

    def normalized(self):
        n = self.norm()
        if n == 0:
            raise ValidationError("cannot normalize a zero field")
        return TransverseField(self.values / n, self.extent)

    def overlap(self, other):
        """L2 inner product <self|other>; grids must match."""
        if self.values.shape != other.values.shape or self.extent != other.extent:
            raise ValidationError("field grids do not match")
        return complex(np.sum(self.values.conj() * other.values) * self.dx**2)


def _hermite_poly(order, x):
    coeffs = np.zeros(order + 1)
    coeffs[order] = 1.0
    return np.polynomial.hermite.hermval(x, coeffs)


def hermite_gaussian_field(m, n, waist, grid_size, extent):
    """Normalized HG_mn profile with amplitude ~ exp(-r^2 / w^2)."""
    x = (np.arange(grid_size) - grid_size / 2) * (extent / grid_size)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    arg_x = np.sqrt(2.0) * xx / waist
    arg_y = np.sqrt(2.0) * yy / waist
    values = (
        _hermite_poly(m, arg_x)
        * _hermite_poly(n, arg_y)
        * np.exp(-(xx**2 + yy**2) / waist**2)
    )
    return TransverseField(values, extent).normalized()


def gaussian_field(waist, grid_size, extent):
    return hermite_gaussian_field(0, 0, waist, grid_size, extent)


def disk_field(diameter, grid_size, extent, edge_width=None):
    """Flat-top disk profile with a smooth (erf-like) edge, L2-normalized."""
    x = (np.arange(grid_size) - grid_size / 2) * (extent / grid_size)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    r = np.sqrt(xx**2 + yy**2)
    if edge_width is None:
        edge_width = max(2.0 * extent / grid_size, diameter / 40.0)
    values = 0.5 * (1.0 - np.tanh((r - 0.5 * diameter) / edge_width))
    return TransverseField(values.astype(complex), extent).normalized()


def electrode_field(geom, grid_size, extent, kind="disk"):
    """Parametric qubit-electrode drive profile (flat-top disk by default)."""
    if kind == "disk":
        return disk_field(geom.electrode_diameter, grid_size, extent)
    if kind == "gaussian":
        return gaussian_field(0.5 * geom.electrode_diameter, grid_size, extent)
    raise ValidationError(f"unknown electrode profile kind {kind!r}")


# ---------------------------------------------------------------------------
# Round-trip beam propagation (angular-spectrum method)
# ---------------------------------------------------------------------------

def propagate_angular_spectrum(field, distance, wavenumber):
    """One-way paraxial propagation; exactly norm-preserving by construction."""
    n = field.grid_size
    k_axis = 2.0 * np.pi * np.fft.fftfreq(n, field.dx)
    kx, ky = np.meshgrid(k_axis, k_axis, indexing="ij")
    transfer = np.exp(-1j * (kx**2 + ky**2) * distance / (2.0 * wavenumber))
    values = np.fft.ifft2(np.fft.fft2(field.values) * transfer)
    return TransverseField(values, field.extent)


def _mirror_mask(field, curvature_radius, wavenumber):
    # focusing reflector of focal length R/2 in the e^{+ikz} convention
    xx, yy = field.axes()
    return np.exp(-1j * wavenumber * (xx**2 + yy**2) / curvature_radius)


def _absorber_mask(field, inner_fraction=0.82, outer_fraction=0.98):
    xx, yy = field.axes()
    r = np.sqrt(xx**2 + yy**2)
    r0 = inner_fraction * 0.5 * field.extent
    r1 = outer_fraction * 0.5 * field.extent
    mask = np.ones_like(r)
    taper = (r > r0) & (r < r1)
    mask[taper] = np.cos(0.5 * np.pi * (r[taper] - r0) / (r1 - r0)) ** 2
    mask[r >= r1] = 0.0
    return mask


def _check_excitation_resolution(excitation, waist):
    if excitation.dx > waist / 8.0:
        raise ResolutionError(
            f"grid spacing {excitation.dx:.2e} m exceeds waist/8 = {waist / 8.0:.2e} m"
        )
    spec = np.abs(np.fft.fft2(excitation.values)) ** 2
    n = excitation.grid_size
    k_axis = np.fft.fftfreq(n)
    kx, ky = np.meshgrid(k_axis, k_axis, indexing="ij")
    edge = np.sqrt(kx**2 + ky**2) > 0.4  # outer 20 percent of the Nyquist band
    frac = float(spec[edge].sum() / spec.sum())
    if frac > 1e-3:
        raise ResolutionError(
            f"{frac:.2e} of the excitation energy sits at the spatial-frequency "
            "band edge; refine the grid"
        )


@dataclass
class RoundtripSpectrum:
    """Interferometric mode-intensity spectrum from the round-trip simulation."""

    frequencies: np.ndarray
    intensity: np.ndarray
    boundary_loss: float
    n_roundtrips: int

    def peaks(self, rel_height=0.02):
        return spectrum_peaks(self.frequencies, self.intensity, rel_height)


def _roundtrip_fields(geom, mat, center_frequency, excitation, n_roundtrips):
    """Fields after 0..M-1 round trips, plus the total absorbed fraction."""
    k = 2.0 * np.pi * center_frequency / mat.v_l
    mirror = _mirror_mask(excitation, geom.curvature_radius, k)
    absorber = _absorber_mask(excitation)
    length = geom.path_length
    n = excitation.grid_size
    fields = np.empty((n_roundtrips, n * n), dtype=complex)
    current = excitation.normalized()
    power_in = 1.0
    absorbed = 0.0
    for j in range(n_roundtrips):
        fields[j] = current.values.ravel()
        current = propagate_angular_spectrum(current, length, k)
        current = TransverseField(current.values * mirror, current.extent)
        current = propagate_angular_spectrum(current, length, k)
        before = np.sum(np.abs(current.values) ** 2)
        current = TransverseField(current.values * absorber, current.extent)
        after = np.sum(np.abs(current.values) ** 2)
        absorbed += float(before - after) * current.dx**2 / power_in
    return fields, absorbed


def roundtrip_spectrum(
    geom,
    mat,
    band,
    n_roundtrips,
    excitation,
    n_frequencies=2001,
):
    """Total mode intensity of the coherently summed field versus frequency.

    The transverse round-trip operator is evaluated at the band center
    (its Gouy phase is frequency-independent); the longitudinal phase
    advance 2 pi nu (2 L / v) per round trip produces the interference.
    """
    low, high = float(band[0]), float(band[1])
    if not 0 < low < high:
        raise ValidationError(f"invalid frequency band ({low}, {high})")
    center = 0.5 * (low + high)
    waist = fundamental_waist(geom, mat, center)
    _check_excitation_resolution(excitation, waist)
    if n_roundtrips < 8:
        raise ValidationError("n_roundtrips must be >= 8")
    linewidth = free_spectral_range(geom, mat) / n_roundtrips
    if linewidth >= transverse_mode_splitting(geom, mat):
        raise ValidationError(
            f"{n_roundtrips} round trips give a linewidth {linewidth:.3e} Hz that "
            "cannot resolve the transverse mode splitting "
            f"{transverse_mode_splitting(geom, mat):.3e} Hz"
        )
    fields, absorbed = _roundtrip_fields(geom, mat, center, excitation, n_roundtrips)
    gram = (fields.conj() @ fields.T) * excitation.dx**2
    frequencies = np.linspace(low, high, n_frequencies)
    tau = 2.0 * geom.path_length / mat.v_l
    phases = np.exp(
        1j * 2.0 * np.pi * np.outer(np.arange(n_roundtrips), frequencies) * tau
    )
    intensity = np.real(np.einsum("jf,jk,kf->f", phases.conj(), gram, phases))
    intensity = np.clip(intensity, 0.0, None) / n_roundtrips**2
    return RoundtripSpectrum(frequencies, intensity, absorbed, n_roundtrips)


# Converged-profile extraction wants far more round trips than the spectrum
# (the sum must fully dephase every off-resonant mode).
DEFAULT_PROFILE_ROUNDTRIPS = 200_000


def mode_profile(geom, mat, frequency, excitation, n_roundtrips=DEFAULT_PROFILE_ROUNDTRIPS):
    """Coherently summed field at one frequency (the mode profile at a peak)."""
    fields, _ = _roundtrip_fields(geom, mat, frequency, excitation, n_roundtrips)
    tau = 2.0 * geom.path_length / mat.v_l
    phases = np.exp(1j * 2.0 * np.pi * frequency * tau * np.arange(n_roundtrips))
    summed = (phases[:, None] * fields).sum(axis=0)
    n = excitation.grid_size
    return TransverseField(summed.reshape(n, n), excitation.extent)


def spectrum_peaks(frequencies, intensity, rel_height=0.02):
    """Local maxima above ``rel_height`` of the global max, parabolic-refined."""
    frequencies = np.asarray(frequencies, dtype=float)
    intensity = np.asarray(intensity, dtype=float)
    threshold = rel_height * intensity.max()
    peaks = []
    for i in range(1, intensity.size - 1):
        if intensity[i] >= intensity[i - 1] and intensity[i] > intensity[i + 1]:
            if intensity[i] < threshold:
                continue
            y0, y1, y2 = intensity[i - 1 : i + 2]
            denom = y0 - 2.0 * y1 + y2
            shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
            peaks.append(
                (
                    float(frequencies[i] + shift * (frequencies[1] - frequencies[0])),
                    float(y1),
                )
            )
    return peaks


# ---------------------------------------------------------------------------
# Coupling rates
# ---------------------------------------------------------------------------

def coupling_rates(geom, mat, electrode, modes, anchor_g0=None):
    """Fill coupling rates from electrode-mode transverse overlaps.

    ``electrode`` must be L2-normalized (contract).  Couplings are
    proportional to |<electrode|HG_mn(waist)>| times the material's
    transduction strength; if ``anchor_g0`` is given, the whole set is scaled
    so the strongest-coupled fundamental equals it.
    """
    if abs(electrode.norm() - 1.0) > 1e-8:
        raise ValidationError(
            f"electrode profile must be L2-normalized, got norm {electrode.norm():.6f}"
        )
    out = []
    for mode in modes:
        profile = hermite_gaussian_field(
            mode.m, mode.n, mode.waist, electrode.grid_size, electrode.extent
        )
        overlap = abs(electrode.overlap(profile))
        out.append(replace(mode, coupling=mat.piezo_coupling * overlap))
    if anchor_g0 is not None:
        fundamental = [r.coupling for r in out if r.m == 0 and r.n == 0]
        if not fundamental:
            raise ValidationError("cannot anchor: no fundamental (0,0) mode in the list")
        scale = anchor_g0 / max(fundamental)
        out = [replace(r, coupling=r.coupling * scale) for r in out]
    return out
