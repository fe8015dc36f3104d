"""Finite-dimensional Fock-space linear algebra.

States are complex numpy vectors indexed by phonon number (index 0 is the
vacuum, shared convention for the whole package), operators and density
matrices are dense complex square arrays.  Everything here is a pure function
of its inputs.
"""

import math

import numpy as np
from scipy.linalg import expm

from .errors import DimensionError, TruncationError, ValidationError

# Tolerances used by the physicality validators.
HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
EIGENVALUE_TOL = 1e-8
TRUNCATION_NORM_TOL = 1e-6


def required_dim(n_max, alpha_max):
    """Truncation dimension for mixing Fock states up to ``n_max`` with
    displacements up to ``|alpha_max|``.

    Keeps truncated-norm loss below ~1e-6 over the amplitude ranges used in
    the ladder and tomography workflows.
    """
    return int(n_max) + 1 + math.ceil(4.0 * abs(alpha_max))


def fock_state(n, dim):
    """Unit basis vector |n> in a ``dim``-dimensional Fock space."""
    n = int(n)
    dim = int(dim)
    if dim < 1:
        raise DimensionError(f"dim must be >= 1, got {dim}")
    if not 0 <= n < dim:
        raise DimensionError(f"Fock index {n} out of range for dim {dim}")
    vec = np.zeros(dim, dtype=complex)
    vec[n] = 1.0
    return vec


def coherent_state(alpha, dim):
    """Truncated coherent state with amplitudes ~ alpha^n / sqrt(n!).

    Raises :class:`TruncationError` when the Poisson weight lost to
    truncation exceeds 1e-6; otherwise the vector is renormalized.
    """
    dim = int(dim)
    if dim < 1:
        raise DimensionError(f"dim must be >= 1, got {dim}")
    if alpha == 0:
        return fock_state(0, dim)
    n = np.arange(dim)
    # log-domain to stay finite for larger alpha, n
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, dim)))))
    amp = np.exp(-0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * log_fact)
    phase = np.exp(1j * n * np.angle(alpha))
    vec = amp * phase
    norm_sq = float(np.sum(np.abs(vec) ** 2))
    if 1.0 - norm_sq > TRUNCATION_NORM_TOL:
        raise TruncationError(
            f"coherent state |alpha|={abs(alpha):.3f} loses {1.0 - norm_sq:.2e} "
            f"norm in dim {dim} (tolerance {TRUNCATION_NORM_TOL:.0e})"
        )
    return vec / np.sqrt(norm_sq)


def annihilation_operator(dim):
    """Truncated annihilation operator a with a|n> = sqrt(n)|n-1>."""
    dim = int(dim)
    if dim < 1:
        raise DimensionError(f"dim must be >= 1, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def number_operator(dim):
    """Diagonal phonon-number operator."""
    return np.diag(np.arange(int(dim), dtype=float)).astype(complex)


def displacement_operator(alpha, dim):
    """D(alpha) = expm(alpha a^dag - alpha* a) on the truncated space."""
    dim = int(dim)
    if dim < 2:
        raise DimensionError(f"displacement needs dim >= 2, got {dim}")
    a = annihilation_operator(dim)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def parity_operator(dim):
    """Diagonal parity operator with entries (-1)^n."""
    dim = int(dim)
    if dim < 1:
        raise DimensionError(f"dim must be >= 1, got {dim}")
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def density_matrix(state):
    """Rank-one density matrix |psi><psi| from a state vector."""
    state = np.asarray(state, dtype=complex)
    return np.outer(state, state.conj())


def embed_state(state, dim):
    """Zero-pad (or validate) a state vector into a larger Fock space."""
    state = np.asarray(state, dtype=complex)
    if state.shape[0] > dim:
        raise DimensionError(f"cannot embed dim {state.shape[0]} state into dim {dim}")
    out = np.zeros(dim, dtype=complex)
    out[: state.shape[0]] = state
    return out


def check_density_matrix(rho, trace_tol=TRACE_TOL, eig_tol=EIGENVALUE_TOL):
    """Raise :class:`ValidationError` unless rho is Hermitian, unit-trace, PSD."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"density matrix must be square, got {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITICITY_TOL:
        raise ValidationError(f"density matrix not Hermitian (deviation {herm:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValidationError(f"density matrix trace {tr:.10f} != 1")
    eigs = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if eigs.min() < -eig_tol:
        raise ValidationError(f"density matrix has eigenvalue {eigs.min():.2e} < 0")
    return rho


def fidelity(rho, sigma):
    """Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Both arguments must be physical density matrices of equal dimension.
    Reduces to <psi|rho|psi> when sigma = |psi><psi|.
    """
    rho = check_density_matrix(rho)
    sigma = check_density_matrix(sigma)
    if rho.shape != sigma.shape:
        raise DimensionError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    # eigendecomposition-based matrix square root; clip tiny negative noise
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    sqrt_rho = (v * np.sqrt(w)) @ v.conj().T
    inner = sqrt_rho @ sigma @ sqrt_rho
    eigs = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    f = float(np.sum(np.sqrt(np.clip(eigs, 0.0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


def state_fidelity(rho, target_state):
    """<psi|rho|psi> for a pure target vector."""
    rho = np.asarray(rho, dtype=complex)
    psi = np.asarray(target_state, dtype=complex)
    if rho.shape[0] != psi.shape[0]:
        raise DimensionError(f"dimension mismatch {rho.shape[0]} vs {psi.shape[0]}")
    return float(np.real(psi.conj() @ rho @ psi))


def expectation(operator, state_or_rho):
    """<O> for a state vector or density matrix."""
    op = np.asarray(operator, dtype=complex)
    x = np.asarray(state_or_rho, dtype=complex)
    if x.ndim == 1:
        if op.shape[0] != x.shape[0]:
            raise DimensionError(f"dimension mismatch {op.shape[0]} vs {x.shape[0]}")
        return complex(x.conj() @ op @ x)
    if op.shape != x.shape:
        raise DimensionError(f"dimension mismatch {op.shape} vs {x.shape}")
    return complex(np.trace(op @ x))
