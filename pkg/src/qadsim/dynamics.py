"""Open-system dynamics of a qubit coupled to one phonon mode.

The model is the resonant/detuned Jaynes-Cummings interaction in the frame
rotating at the phonon frequency,

    H = Delta sigma+ sigma-  +  g0 (sigma+ a + sigma- a^dag)  [+ drive],

with Lindblad dissipation: qubit decay, qubit pure dephasing, phonon decay,
phonon pure dephasing.  Pure-dephasing rates are derived from the
corresponding T2 values via 1/T_phi = 1/T2 - 1/(2 T1).

The joint Hilbert space is qubit (x) phonon with index q * D + n; index 0 of
the qubit is the ground state and Fock index 0 is the vacuum.
"""

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import fockspace as fs
from .errors import (
    ConditioningWarning,
    DimensionError,
    SolverError,
    TruncationError,
    ValidationError,
)

TWO_PI = 2.0 * np.pi

# Gaussian displacement pulse: 1 us RMS width truncated to 4 us total length.
DISPLACEMENT_PULSE_RMS = 1.0e-6
DISPLACEMENT_PULSE_TOTAL = 4.0e-6

# Default probe-trace grid: 6 us of interaction sampled every 10 ns.
DEFAULT_PROBE_TIME = 6.0e-6
DEFAULT_PROBE_STEP = 10.0e-9

DEFAULT_PHONON_DIM = 20

SEGMENT_KINDS = (
    "detuned_idle",
    "resonant_interaction",
    "qubit_pi",
    "qubit_pi_half",
    "phonon_displacement_drive",
    "qubit_reset",
)

_INTEGRATOR_RTOL = 1e-8
_INTEGRATOR_ATOL = 1e-10


@dataclass(frozen=True)
class SystemParams:
    """Device parameters of the coupled qubit-phonon system.

    Defaults are the measured values of the flip-chip device this package
    models: g0/2pi = 350 kHz, qubit T1 = 7 us, phonon T1 = 64 us, phonon
    Ramsey T2 = 38 us, qubit detuned -5 MHz from the phonon when idle.
    ``qubit_t2 = None`` uses the conservative default T2 = T1 (the qubit
    Ramsey T2 was not measured independently).
    """

    g0: float = TWO_PI * 350e3          # rad/s
    qubit_t1: float = 7e-6              # s
    qubit_t2: Optional[float] = None    # s, None -> qubit_t1
    phonon_t1: float = 64e-6            # s
    phonon_t2_ramsey: float = 38e-6     # s
    qubit_thermal_pop: float = 0.06     # initial excited-state probability
    qubit_reset_pop: float = 0.02       # excited-state probability after reset
    nu0_detuning: float = -5e6          # Hz, qubit idle detuning from the phonon
    # Drives and tomography axes are phase-referenced to the dressed phonon
    # frequency at the idle detuning (the frequency one actually measures with
    # the qubit parked there), so detuned segments carry a frame term that
    # keeps the dressed phonon stationary.
    frame_tracking: bool = True

    def __post_init__(self):
        if self.g0 <= 0:
            raise ValidationError(f"g0 must be > 0, got {self.g0}")
        for name in ("qubit_t1", "phonon_t1", "phonon_t2_ramsey"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.qubit_t2 is not None and self.qubit_t2 <= 0:
            raise ValidationError(f"qubit_t2 must be > 0, got {self.qubit_t2}")
        for name in ("qubit_thermal_pop", "qubit_reset_pop"):
            pop = getattr(self, name)
            if not 0.0 <= pop < 0.5:
                raise ValidationError(f"{name} must be in [0, 0.5), got {pop}")
        if self.qubit_t2_effective > 2.0 * self.qubit_t1 + 1e-15:
            raise ValidationError("qubit T2 exceeds 2 T1")
        if self.phonon_t2_ramsey > 2.0 * self.phonon_t1 + 1e-15:
            raise ValidationError("phonon T2 exceeds 2 T1")

    @property
    def qubit_t2_effective(self):
        return self.qubit_t1 if self.qubit_t2 is None else self.qubit_t2

    @property
    def qubit_decay_rate(self):
        return 1.0 / self.qubit_t1

    @property
    def qubit_dephasing_rate(self):
        """Pure dephasing rate 1/T_phi = 1/T2 - 1/(2 T1)."""
        return max(1.0 / self.qubit_t2_effective - 0.5 / self.qubit_t1, 0.0)

    @property
    def phonon_decay_rate(self):
        return 1.0 / self.phonon_t1

    @property
    def phonon_dephasing_rate(self):
        return max(1.0 / self.phonon_t2_ramsey - 0.5 / self.phonon_t1, 0.0)

    @property
    def swap_duration(self):
        """Full single-excitation swap time pi / (2 g0)."""
        return np.pi / (2.0 * self.g0)

    def without_decoherence(self):
        """Copy with all decay/dephasing off and zero thermal populations."""
        return replace(
            self,
            qubit_t1=np.inf,
            qubit_t2=np.inf,
            phonon_t1=np.inf,
            phonon_t2_ramsey=np.inf,
            qubit_thermal_pop=0.0,
            qubit_reset_pop=0.0,
        )

    @classmethod
    def ideal(cls, g0=TWO_PI * 350e3, nu0_detuning=-5e6):
        """Decoherence-free parameter set at the given coupling rate."""
        return cls(
            g0=g0,
            qubit_t1=np.inf,
            qubit_t2=np.inf,
            phonon_t1=np.inf,
            phonon_t2_ramsey=np.inf,
            qubit_thermal_pop=0.0,
            qubit_reset_pop=0.0,
            nu0_detuning=nu0_detuning,
        )


@dataclass(frozen=True)
class PulseSegment:
    """One element of a pulse sequence.

    ``drive_amplitude`` is the complex peak drive strength (rad/s) of the
    Gaussian phonon drive and must be present exactly for
    ``phonon_displacement_drive`` segments.  ``detuning`` (Hz) applies to
    ``detuned_idle`` and ``phonon_displacement_drive`` segments.
    """

    kind: str
    duration: float = 0.0
    drive_amplitude: Optional[complex] = None
    detuning: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ValidationError(
                f"unknown segment kind {self.kind!r}; expected one of {SEGMENT_KINDS}"
            )
        if self.duration < 0:
            raise ValidationError(f"segment duration must be >= 0, got {self.duration}")
        has_drive = self.drive_amplitude is not None
        if has_drive != (self.kind == "phonon_displacement_drive"):
            raise ValidationError(
                "drive_amplitude must be set iff kind == 'phonon_displacement_drive'"
            )

    @classmethod
    def idle(cls, duration, detuning):
        return cls(kind="detuned_idle", duration=duration, detuning=detuning)

    @classmethod
    def resonant(cls, duration):
        return cls(kind="resonant_interaction", duration=duration)

    @classmethod
    def pi(cls):
        return cls(kind="qubit_pi")

    @classmethod
    def pi_half(cls):
        return cls(kind="qubit_pi_half")

    @classmethod
    def displacement_drive(cls, amplitude, duration=DISPLACEMENT_PULSE_TOTAL, detuning=None):
        return cls(
            kind="phonon_displacement_drive",
            duration=duration,
            drive_amplitude=complex(amplitude),
            detuning=detuning,
        )

    @classmethod
    def reset(cls):
        return cls(kind="qubit_reset")


@dataclass
class JointState:
    """Density matrix on qubit (x) phonon with the phonon truncated at D levels."""

    rho: np.ndarray
    phonon_dim: int

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        d = 2 * self.phonon_dim
        if self.rho.shape != (d, d):
            raise DimensionError(
                f"joint density matrix shape {self.rho.shape} != ({d}, {d})"
            )

    def validate(self, eig_tol=1e-7):
        fs.check_density_matrix(self.rho, eig_tol=eig_tol)
        return self

    def qubit_excited_population(self):
        d = self.phonon_dim
        return float(np.real(np.trace(self.rho[d:, d:])))

    def phonon_marginal(self):
        d = self.phonon_dim
        blocks = self.rho.reshape(2, d, 2, d)
        return blocks[0, :, 0, :] + blocks[1, :, 1, :]

    def qubit_marginal(self):
        d = self.phonon_dim
        blocks = self.rho.reshape(2, d, 2, d)
        return np.einsum("qnrn->qr", blocks)

    def phonon_populations(self):
        return np.real(np.diag(self.phonon_marginal())).copy()

    def total_excitation(self):
        d = self.phonon_dim
        n_ph = float(np.real(np.trace(fs.number_operator(d) @ self.phonon_marginal())))
        return self.qubit_excited_population() + n_ph


@dataclass
class TimeTrace:
    """Qubit excited-state probability sampled on a uniform time grid."""

    times: np.ndarray
    pe: np.ndarray
    check_bounds: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.pe = np.asarray(self.pe, dtype=float)
        if self.times.shape != self.pe.shape or self.times.ndim != 1:
            raise ValidationError("times and pe must be 1-d arrays of equal length")
        if len(self.times) >= 2:
            dt = np.diff(self.times)
            if np.any(dt <= 0):
                raise ValidationError("times must be strictly increasing")
            if np.max(np.abs(dt - dt[0])) > 1e-9 * max(abs(self.times[-1]), dt[0]):
                raise ValidationError("times must be uniformly sampled")
        if self.check_bounds:
            eps = 1e-9
            if self.pe.size and (self.pe.min() < -eps or self.pe.max() > 1.0 + eps):
                raise ValidationError(
                    f"pe outside [0, 1]: range [{self.pe.min():.3e}, {self.pe.max():.3e}]"
                )

    def same_grid(self, other, tol=1e-12):
        return self.times.shape == other.times.shape and np.allclose(
            self.times, other.times, rtol=0.0, atol=tol * max(1.0, abs(self.times[-1]))
        )


def default_probe_grid(t_max=DEFAULT_PROBE_TIME, step=DEFAULT_PROBE_STEP):
    n = int(round(t_max / step))
    return np.linspace(0.0, n * step, n + 1)


# ---------------------------------------------------------------------------
# Joint-space operators
# ---------------------------------------------------------------------------

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)

_op_cache = {}


def _joint_ops(phonon_dim):
    ops = _op_cache.get(phonon_dim)
    if ops is None:
        eye_p = np.eye(phonon_dim, dtype=complex)
        a = fs.annihilation_operator(phonon_dim)
        sm = np.kron(_SIGMA_MINUS, eye_p)
        a_joint = np.kron(np.eye(2, dtype=complex), a)
        ops = {
            "sm": sm,
            "sp": sm.conj().T,
            "nq": sm.conj().T @ sm,
            "a": a_joint,
            "ad": a_joint.conj().T,
            "np": a_joint.conj().T @ a_joint,
        }
        ops["jc"] = ops["sp"] @ ops["a"] + ops["sm"] @ ops["ad"]
        _op_cache[phonon_dim] = ops
    return ops


def collapse_operators(params, phonon_dim):
    """Lindblad collapse operators with the rates folded in as sqrt(rate) * op."""
    ops = _joint_ops(phonon_dim)
    out = []
    if params.qubit_decay_rate > 0:
        out.append(np.sqrt(params.qubit_decay_rate) * ops["sm"])
    if params.qubit_dephasing_rate > 0:
        out.append(np.sqrt(2.0 * params.qubit_dephasing_rate) * ops["nq"])
    if params.phonon_decay_rate > 0:
        out.append(np.sqrt(params.phonon_decay_rate) * ops["a"])
    if params.phonon_dephasing_rate > 0:
        out.append(np.sqrt(2.0 * params.phonon_dephasing_rate) * ops["np"])
    return out


def _frame_shift(params, detuning):
    """Phonon frame term keeping the dressed phonon-like state stationary.

    With the qubit parked at detuning Delta the single-excitation phonon-like
    eigenstate of Delta sigma+ sigma- + g (sigma+ a + h.c.) - x a^dag a sits
    exactly at zero energy for x = -g^2 / Delta.  Applied only in the
    dispersive regime |Delta| >= 2 g0, where a phonon frame is meaningful.
    """
    if not params.frame_tracking:
        return 0.0
    delta = TWO_PI * detuning
    if abs(delta) < 2.0 * params.g0:
        return 0.0
    return params.g0**2 / delta  # equals -x, the coefficient of a^dag a in H


def _detuned_h0(params, detuning, ops):
    h = TWO_PI * detuning * ops["nq"] + params.g0 * ops["jc"]
    shift = _frame_shift(params, detuning)
    if shift != 0.0:
        h = h + shift * ops["np"]
    return h


def build_hamiltonian(params, segment, phonon_dim, t=0.0):
    """Rotating-frame Hamiltonian of a segment, evaluated at time ``t``.

    For displacement segments the Gaussian drive envelope is evaluated at
    ``t`` (seconds from the segment start); other segment kinds are
    time-independent.
    """
    ops = _joint_ops(phonon_dim)
    if segment.kind == "resonant_interaction":
        return params.g0 * ops["jc"]
    if segment.kind == "detuned_idle":
        detuning = params.nu0_detuning if segment.detuning is None else segment.detuning
        return _detuned_h0(params, detuning, ops)
    if segment.kind == "phonon_displacement_drive":
        detuning = params.nu0_detuning if segment.detuning is None else segment.detuning
        h0 = _detuned_h0(params, detuning, ops)
        amp = segment.drive_amplitude * _drive_envelope(t, segment.duration)
        return h0 + amp * ops["ad"] + np.conj(amp) * ops["a"]
    raise ValidationError(f"segment kind {segment.kind!r} has no Hamiltonian")


def _drive_envelope(t, total):
    return np.exp(-0.5 * ((t - 0.5 * total) / DISPLACEMENT_PULSE_RMS) ** 2)


# ---------------------------------------------------------------------------
# Master-equation integration
# ---------------------------------------------------------------------------

def _lindblad_rhs(h_of_t, c_ops):
    pairs = [(L, L.conj().T, L.conj().T @ L) for L in c_ops]

    def rhs(t, y, dim):
        rho = y.reshape(dim, dim)
        h = h_of_t(t)
        out = -1j * (h @ rho - rho @ h)
        for L, Ld, LdL in pairs:
            out += L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)
        return out.ravel()

    return rhs


def _solve_lindblad(rho0, h_of_t, c_ops, duration, t_eval=None):
    dim = rho0.shape[0]
    rhs = _lindblad_rhs(h_of_t, c_ops)
    sol = solve_ivp(
        rhs,
        (0.0, duration),
        rho0.ravel(),
        t_eval=t_eval,
        method="DOP853",
        rtol=_INTEGRATOR_RTOL,
        atol=_INTEGRATOR_ATOL,
        args=(dim,),
    )
    if not sol.success:
        raise SolverError(
            f"master-equation integration failed: {sol.message} "
            f"(status {sol.status}, {sol.t.size} accepted steps, t reached {sol.t[-1]:.3e})"
        )
    return sol.y.T.reshape(-1, dim, dim)


def _qubit_rotation(theta, sign=-1.0):
    """exp(sign * i * theta/2 * sigma_x) as a 2x2 unitary."""
    return np.cos(theta / 2.0) * np.eye(2, dtype=complex) + sign * 1j * np.sin(
        theta / 2.0
    ) * _SIGMA_X


def _apply_qubit_unitary(state, u):
    full = np.kron(u, np.eye(state.phonon_dim, dtype=complex))
    return JointState(full @ state.rho @ full.conj().T, state.phonon_dim)


def _apply_reset(state, reset_pop):
    rho_q = np.diag([1.0 - reset_pop, reset_pop]).astype(complex)
    return JointState(np.kron(rho_q, state.phonon_marginal()), state.phonon_dim)


def evolve(state, params, segment):
    """Evolve a joint state through one pulse segment.

    Idle/resonant/displacement segments integrate the Lindblad master
    equation; pi and pi/2 pulses are ideal instantaneous rotations; reset
    replaces the qubit marginal with a thermal mixture at
    ``params.qubit_reset_pop`` (and idles for ``segment.duration`` if > 0).
    """
    kind = segment.kind
    if kind == "qubit_pi":
        # Rx(pi); the resulting -i phase is global once the excitation swaps.
        return _apply_qubit_unitary(state, _qubit_rotation(np.pi))
    if kind == "qubit_pi_half":
        # |g> -> (|g> + i|e>)/sqrt(2): a subsequent full swap leaves the
        # phonon in (|0> + |1>)/sqrt(2) with no residual relative phase.
        return _apply_qubit_unitary(state, _qubit_rotation(np.pi / 2.0, sign=+1.0))
    if kind == "qubit_reset":
        out = _apply_reset(state, params.qubit_reset_pop)
        if segment.duration > 0:
            out = evolve(out, params, PulseSegment.idle(segment.duration, segment.detuning
                                                        if segment.detuning is not None
                                                        else params.nu0_detuning))
        return out
    if segment.duration == 0.0:
        return JointState(state.rho.copy(), state.phonon_dim)

    dim = state.phonon_dim
    if kind == "phonon_displacement_drive":
        ops = _joint_ops(dim)
        detuning = params.nu0_detuning if segment.detuning is None else segment.detuning
        h0 = _detuned_h0(params, detuning, ops)
        amp = segment.drive_amplitude
        v_plus, v_minus = ops["ad"], ops["a"]
        total = segment.duration

        def h_of_t(t):
            f = _drive_envelope(t, total)
            return h0 + (amp * f) * v_plus + (np.conj(amp) * f) * v_minus

    else:
        h_const = build_hamiltonian(params, segment, dim)

        def h_of_t(t):
            return h_const

    rho = _solve_lindblad(
        state.rho, h_of_t, collapse_operators(params, dim), segment.duration
    )[-1]
    return JointState(rho, dim)


def evolve_sequence(state, params, segments):
    for segment in segments:
        state = evolve(state, params, segment)
    return state


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------

def joint_state_from_phonon(phonon, phonon_dim, qubit_excited_pop=0.0):
    """|g>-qubit (with optional thermal excitation) joined to a phonon state.

    ``phonon`` may be a state vector or a density matrix; it is zero-padded
    to ``phonon_dim``.
    """
    phonon = np.asarray(phonon, dtype=complex)
    if phonon.ndim == 1:
        rho_p = fs.density_matrix(fs.embed_state(phonon, phonon_dim))
    else:
        if phonon.shape[0] > phonon_dim:
            raise DimensionError(
                f"phonon state dim {phonon.shape[0]} exceeds phonon_dim {phonon_dim}"
            )
        rho_p = np.zeros((phonon_dim, phonon_dim), dtype=complex)
        rho_p[: phonon.shape[0], : phonon.shape[0]] = phonon
    rho_q = np.diag([1.0 - qubit_excited_pop, qubit_excited_pop]).astype(complex)
    return JointState(np.kron(rho_q, rho_p), phonon_dim)


def fock_joint_state(n, phonon_dim, excited=False):
    """|g, n> (or |e, n>) as a joint state."""
    rho_q = np.zeros((2, 2), dtype=complex)
    rho_q[1 if excited else 0, 1 if excited else 0] = 1.0
    rho_p = fs.density_matrix(fs.fock_state(n, phonon_dim))
    return JointState(np.kron(rho_q, rho_p), phonon_dim)


def thermal_joint_state(params, phonon_dim):
    """Thermal qubit at ``qubit_thermal_pop`` with the phonon in vacuum."""
    return joint_state_from_phonon(
        fs.fock_state(0, phonon_dim), phonon_dim, params.qubit_thermal_pop
    )


# ---------------------------------------------------------------------------
# Probe kernel: Heisenberg-picture resonant qubit-population map
# ---------------------------------------------------------------------------

_probe_cache = {}


def _probe_kernel(params, phonon_dim, t_grid):
    """Adjoint-evolved qubit projector A(t) under resonant interaction.

    The resonant probe applied to any initial state rho0 then reads
    pe(t) = Tr[A(t) rho0], so one adjoint master-equation solve serves every
    probe trace on the same grid (basis traces are its diagonal entries).
    """
    key = (params, phonon_dim, t_grid.tobytes())
    kernel = _probe_cache.get(key)
    if kernel is not None:
        return kernel
    ops = _joint_ops(phonon_dim)
    h = params.g0 * ops["jc"]
    c_ops = collapse_operators(params, phonon_dim)
    pairs = [(L, L.conj().T, L.conj().T @ L) for L in c_ops]
    dim = 2 * phonon_dim

    def rhs(t, y):
        op = y.reshape(dim, dim)
        out = 1j * (h @ op - op @ h)
        for L, Ld, LdL in pairs:
            out += Ld @ op @ L - 0.5 * (LdL @ op + op @ LdL)
        return out.ravel()

    a0 = ops["nq"].astype(complex)
    if t_grid[-1] == 0.0:
        kernel = np.broadcast_to(a0, (t_grid.size, dim, dim)).copy()
    else:
        t_eval = t_grid if t_grid[0] == 0.0 else np.concatenate(([0.0], t_grid))
        sol = solve_ivp(
            rhs,
            (0.0, float(t_grid[-1])),
            a0.ravel(),
            t_eval=t_eval,
            method="DOP853",
            rtol=_INTEGRATOR_RTOL,
            atol=_INTEGRATOR_ATOL,
        )
        if not sol.success:
            raise SolverError(f"probe-kernel integration failed: {sol.message}")
        kernel = sol.y.T.reshape(-1, dim, dim)
        if t_grid[0] != 0.0:
            kernel = kernel[1:]
    if len(_probe_cache) > 8:
        _probe_cache.clear()
    _probe_cache[key] = kernel
    return kernel


def simulate_probe_trace(params, state, t_grid):
    """Resonant-probe trace: pe after interacting for each time on the grid."""
    t_grid = np.asarray(t_grid, dtype=float)
    state.validate()
    kernel = _probe_kernel(params, state.phonon_dim, t_grid)
    pe = np.real(np.einsum("tij,ji->t", kernel, state.rho))
    return TimeTrace(t_grid, np.clip(pe, 0.0, 1.0), check_bounds=True)


def simulate_basis_traces(params, n_max, t_grid, phonon_dim=DEFAULT_PHONON_DIM):
    """Probe traces for ideal initial states |g, n>, n = 1..n_max."""
    if n_max < 1:
        raise ValidationError(f"n_max must be >= 1, got {n_max}")
    if n_max >= phonon_dim:
        raise TruncationError(
            f"n_max {n_max} requires phonon_dim > {n_max}, got {phonon_dim}"
        )
    t_grid = np.asarray(t_grid, dtype=float)
    kernel = _probe_kernel(params, phonon_dim, t_grid)
    traces = []
    for n in range(1, n_max + 1):
        pe = np.real(kernel[:, n, n])
        traces.append(TimeTrace(t_grid, np.clip(pe, 0.0, 1.0)))
    return traces


# ---------------------------------------------------------------------------
# Preparation and measurement protocols
# ---------------------------------------------------------------------------

def _check_truncation(state, limit=1e-4):
    pops = state.phonon_populations()
    if pops[-1] > limit:
        raise TruncationError(
            f"population {pops[-1]:.2e} at the top Fock level exceeds {limit:.0e}; "
            f"increase phonon_dim (currently {state.phonon_dim})"
        )


def simulate_fock_preparation(params, n_phonons, phonon_dim=DEFAULT_PHONON_DIM):
    """Climb the Fock ladder to |N> with decoherence throughout.

    Sequence: thermal qubit init, reset (the auxiliary-mode cooling swap),
    then N repetitions of [qubit pi pulse, resonant swap of duration
    Ts / sqrt(k)] where Ts = pi / (2 g0).
    """
    if n_phonons < 0:
        raise ValidationError(f"N must be >= 0, got {n_phonons}")
    if phonon_dim < n_phonons + 6:
        raise TruncationError(
            f"phonon_dim {phonon_dim} too small for N={n_phonons} (need >= N + 6)"
        )
    state = thermal_joint_state(params, phonon_dim)
    state = evolve(state, params, PulseSegment.reset())
    ts = params.swap_duration
    for k in range(1, n_phonons + 1):
        state = evolve(state, params, PulseSegment.pi())
        state = evolve(state, params, PulseSegment.resonant(ts / np.sqrt(k)))
    _check_truncation(state)
    return state


def simulate_superposition_preparation(params, phonon_dim=DEFAULT_PHONON_DIM):
    """Prepare (|0> + |1>)/sqrt(2) in the phonon: reset, pi/2 pulse, full swap."""
    state = thermal_joint_state(params, phonon_dim)
    state = evolve(state, params, PulseSegment.reset())
    state = evolve(state, params, PulseSegment.pi_half())
    state = evolve(state, params, PulseSegment.resonant(params.swap_duration))
    _check_truncation(state)
    return state


_displacement_response_cache = {}


def _displacement_response(params, phonon_dim, duration):
    """Complex phonon displacement produced per unit drive amplitude.

    Measured once per (coupling, detuning, dim, duration) by a
    decoherence-free unit-scale drive from vacuum; the phonon sector responds
    linearly, so the result calibrates arbitrary target displacements.
    """
    key = (params.g0, params.nu0_detuning, params.frame_tracking, phonon_dim, duration)
    mu = _displacement_response_cache.get(key)
    if mu is None:
        ideal = params.without_decoherence()
        envelope_area = DISPLACEMENT_PULSE_RMS * np.sqrt(2.0 * np.pi)
        probe_amp = 0.5 / envelope_area  # drives |alpha| ~ 0.5, safely linear
        state = joint_state_from_phonon(fs.fock_state(0, phonon_dim), phonon_dim)
        seg = PulseSegment.displacement_drive(probe_amp, duration)
        final = evolve(state, ideal, seg)
        a_exp = np.trace(_joint_ops(phonon_dim)["a"] @ final.rho)
        mu = complex(a_exp) / probe_amp
        _displacement_response_cache[key] = mu
    return mu


def simulate_displacement(params, state, alpha, mode="pulsed", calibrated_range=2.0):
    """Displace the phonon by ``alpha``.

    ``mode='pulsed'`` applies the Gaussian drive (1 us RMS, 4 us total) with
    the qubit detuned at nu0; the drive amplitude is set so the net phonon
    displacement (linear response) equals ``alpha``.  ``mode='ideal'``
    applies D(alpha) instantaneously.
    """
    if abs(alpha) > calibrated_range:
        warnings.warn(
            f"|alpha| = {abs(alpha):.2f} exceeds the calibrated range "
            f"{calibrated_range}; displacement amplitude may be inaccurate",
            ConditioningWarning,
        )
    dim = state.phonon_dim
    if mode == "ideal":
        d = np.kron(np.eye(2, dtype=complex), fs.displacement_operator(alpha, dim))
        out = JointState(d @ state.rho @ d.conj().T, dim)
    elif mode == "pulsed":
        mu = _displacement_response(params, dim, DISPLACEMENT_PULSE_TOTAL)
        seg = PulseSegment.displacement_drive(alpha / mu, DISPLACEMENT_PULSE_TOTAL)
        out = evolve(state, params, seg)
    else:
        raise ValidationError(f"unknown displacement mode {mode!r}")
    _check_truncation(out)
    return out


def simulate_chevron(params, detuning_grid, t_grid, phonon_dim=6):
    """Excited-qubit population vs (detuning, time) from |e, 0>.

    Returns an array of shape (len(detuning_grid), len(t_grid)).
    """
    detuning_grid = np.asarray(detuning_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if detuning_grid.size == 0 or t_grid.size == 0:
        raise ValidationError("detuning and time grids must be non-empty")
    ops = _joint_ops(phonon_dim)
    c_ops = collapse_operators(params, phonon_dim)
    rho0 = fock_joint_state(0, phonon_dim, excited=True).rho
    nq = ops["nq"]
    out = np.empty((detuning_grid.size, t_grid.size))
    t_eval = t_grid if t_grid[0] == 0.0 else np.concatenate(([0.0], t_grid))
    for i, detuning in enumerate(detuning_grid):
        h = TWO_PI * detuning * nq + params.g0 * ops["jc"]
        rhos = _solve_lindblad(rho0, (lambda t, h=h: h), c_ops, float(t_eval[-1]), t_eval)
        pe = np.real(np.einsum("tij,ji->t", rhos, nq))
        out[i] = pe if t_grid[0] == 0.0 else pe[1:]
    return np.clip(out, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Spectral analysis of probe traces
# ---------------------------------------------------------------------------

def trace_spectrum(trace, pad_factor=16):
    """FFT magnitude of a probe trace.

    The trace is mean-subtracted and padded with its resultant final value to
    smooth the transform before the FFT.
    """
    pe = trace.pe - trace.pe.mean()
    n = pe.size
    padded = np.concatenate([pe, np.full(n * (pad_factor - 1), pe[-1])])
    dt = float(trace.times[1] - trace.times[0])
    mag = np.abs(np.fft.rfft(padded))
    freqs = np.fft.rfftfreq(padded.size, dt)
    return freqs, mag


def dominant_frequency(trace, min_frequency=None, pad_factor=16):
    """Location of the dominant FFT peak, refined by parabolic interpolation."""
    freqs, mag = trace_spectrum(trace, pad_factor)
    span = float(trace.times[-1] - trace.times[0])
    if min_frequency is None:
        min_frequency = 2.0 / span
    valid = freqs >= min_frequency
    if not np.any(valid):
        raise ValidationError("no FFT bins above the minimum frequency")
    offset = np.argmax(valid)
    i = offset + int(np.argmax(mag[valid]))
    if 0 < i < freqs.size - 1:
        y0, y1, y2 = mag[i - 1], mag[i], mag[i + 1]
        denom = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        return float(freqs[i] + shift * (freqs[1] - freqs[0]))
    return float(freqs[i])
