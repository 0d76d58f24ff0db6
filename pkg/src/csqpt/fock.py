"""States and operators on a truncated Fock space.

Kets are 1-D complex arrays of length ``dim``, operators are ``dim x dim``
complex arrays.  Displacements are dense matrix exponentials of the
truncated generator, so they are exactly unitary on the truncated space.
"""

import warnings

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatchError, TruncationWarning, ValidationError

# tail mass above which coherent_state warns about truncation loss
TAIL_WARN = 1e-6


def _check_dim(dim):
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValidationError(f"dim must be a positive integer, got {dim!r}")


def destroy(dim):
    """Annihilation operator a with a|n> = sqrt(n)|n-1>."""
    _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def fock_state(n, dim):
    """Number state |n> as a unit ket."""
    _check_dim(dim)
    if not 0 <= n < dim:
        raise ValidationError(f"Fock index {n} outside [0, {dim})")
    ket = np.zeros(dim, dtype=complex)
    ket[n] = 1.0
    return ket


def coherent_state(alpha, dim):
    """Coherent state |alpha>, truncated at ``dim`` levels and renormalized.

    Amplitudes are computed from the analytic series
    c_n = exp(-|alpha|^2 / 2) alpha^n / sqrt(n!).  Warns if the truncated
    tail carries more than ``TAIL_WARN`` probability.
    """
    _check_dim(dim)
    alpha = complex(alpha)
    amps = np.empty(dim, dtype=complex)
    amps[0] = 1.0
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    amps *= np.exp(-0.5 * abs(alpha) ** 2)
    kept = float(np.sum(np.abs(amps) ** 2))
    tail = 1.0 - kept
    if tail > TAIL_WARN:
        warnings.warn(
            f"coherent_state(|alpha|={abs(alpha):.3f}, dim={dim}) loses "
            f"{tail:.2e} probability to truncation",
            TruncationWarning,
            stacklevel=2,
        )
    return amps / np.sqrt(kept)


def displacement(alpha, dim):
    """Displacement unitary D(alpha) = expm(alpha a^dag - conj(alpha) a)."""
    _check_dim(dim)
    alpha = complex(alpha)
    a = destroy(dim)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def snap(thetas, dim):
    """SNAP unitary diag(exp(i theta_n)); phases beyond len(thetas) are 0."""
    _check_dim(dim)
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 1:
        raise ValidationError("thetas must be a 1-D phase vector")
    if thetas.size > dim:
        raise ValidationError(
            f"phase vector of length {thetas.size} exceeds dim {dim}"
        )
    phases = np.zeros(dim)
    phases[: thetas.size] = thetas
    return np.diag(np.exp(1j * phases))


def parity(dim):
    """Photon-number parity operator diag((-1)^n)."""
    _check_dim(dim)
    return np.diag((-1.0 + 0j) ** np.arange(dim))


def embed(obj, dim_to):
    """Zero-pad a ket or operator into a larger Fock space."""
    obj = np.asarray(obj, dtype=complex)
    d = obj.shape[0]
    if dim_to < d:
        raise DimensionMismatchError(f"cannot embed dim {d} into dim {dim_to}")
    if obj.ndim == 1:
        out = np.zeros(dim_to, dtype=complex)
        out[:d] = obj
        return out
    if obj.ndim == 2 and obj.shape[0] == obj.shape[1]:
        out = np.zeros((dim_to, dim_to), dtype=complex)
        out[:d, :d] = obj
        return out
    raise ValidationError("embed expects a ket or a square operator")


def truncate(obj, dim_to, renormalize=False):
    """Keep the leading ``dim_to`` Fock levels (top-left block).

    With ``renormalize`` the result is rescaled to unit norm (kets) or unit
    trace (density matrices).
    """
    obj = np.asarray(obj, dtype=complex)
    d = obj.shape[0]
    if dim_to > d:
        raise DimensionMismatchError(f"cannot truncate dim {d} to dim {dim_to}")
    if obj.ndim == 1:
        out = obj[:dim_to].copy()
        if renormalize:
            norm = np.linalg.norm(out)
            if norm == 0:
                raise ValidationError("cannot renormalize a zero ket")
            out /= norm
        return out
    if obj.ndim == 2 and obj.shape[0] == obj.shape[1]:
        out = obj[:dim_to, :dim_to].copy()
        if renormalize:
            tr = np.trace(out).real
            if tr <= 0:
                raise ValidationError("cannot renormalize a traceless block")
            out /= tr
        return out
    raise ValidationError("truncate expects a ket or a square operator")
