"""Quantum channels on the truncated Fock space.

Conventions, used consistently everywhere:

* ``vec`` stacks columns, so ``vec(A rho B) = (B.T kron A) vec(rho)``.
* A Kraus set {K_i} acts as ``rho -> sum_i K_i rho K_i^dag`` and is
  trace preserving iff ``sum_i K_i^dag K_i = I``.
* The superoperator of a Kraus set is ``sum_i conj(K_i) kron K_i``.
* The Choi matrix is ``sum_i vec(K_i) vec(K_i)^dag`` with trace equal to
  the Fock dimension; its partial trace over the output factor is the
  identity for trace-preserving channels.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import (
    DimensionMismatchError,
    NotAChannelError,
    ValidationError,
)
from .fock import destroy

# Frobenius defect below which a Kraus set counts as certified CPTP
CPTP_TOL = 1e-6

# Choi eigenvalues below this are dropped when extracting Kraus operators
EIG_CUTOFF = 1e-10


@dataclass
class KrausSet:
    """A channel given by a stack of Kraus operators of shape (rank, dim, dim)."""

    operators: np.ndarray
    certified: bool = field(init=False)

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=complex)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValidationError("operators must have shape (rank, dim, dim)")
        self.operators = ops
        self.certified = cptp_defect(ops) <= CPTP_TOL

    @property
    def dim(self):
        return self.operators.shape[1]

    @property
    def rank(self):
        return self.operators.shape[0]


def cptp_defect(operators):
    """Frobenius norm of sum_i K_i^dag K_i - I."""
    ops = np.asarray(operators)
    d = ops.shape[-1]
    acc = np.einsum("kab,kac->bc", ops.conj(), ops)
    return float(np.linalg.norm(acc - np.eye(d)))


def unitary_channel(u):
    """Wrap a unitary as a rank-1 certified channel."""
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValidationError("expected a square operator")
    defect = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
    if defect > 1e-8:
        raise NotAChannelError(f"operator is not unitary (defect {defect:.2e})")
    return KrausSet(u[None, :, :])


def apply(channel, rho):
    """Apply a KrausSet to a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    d = channel.dim
    if rho.shape != (d, d):
        raise DimensionMismatchError(
            f"state dim {rho.shape} does not match channel dim {d}"
        )
    ops = channel.operators
    return np.einsum("kab,bc,kdc->ad", ops, rho, ops.conj())


def kraus_to_super(channel):
    """Superoperator sum_i conj(K_i) kron K_i acting on column-vec(rho)."""
    ops = channel.operators
    d = channel.dim
    s = np.zeros((d * d, d * d), dtype=complex)
    for k in ops:
        s += np.kron(k.conj(), k)
    return s


def super_to_choi(s):
    """Reshuffle a superoperator into the Choi matrix (involution)."""
    s = np.asarray(s, dtype=complex)
    n = s.shape[0]
    d = int(round(np.sqrt(n)))
    if d * d != n or s.shape != (n, n):
        raise ValidationError("superoperator must be d^2 x d^2")
    return s.reshape(d, d, d, d).transpose(3, 1, 2, 0).reshape(n, n)


def choi_to_super(choi):
    """Inverse reshuffle; same index permutation as super_to_choi."""
    return super_to_choi(choi)


def kraus_to_choi(channel):
    """Choi matrix sum_i vec(K_i) vec(K_i)^dag, trace = dim."""
    ops = channel.operators
    d = channel.dim
    vecs = ops.transpose(0, 2, 1).reshape(channel.rank, d * d)  # column-vec rows
    return np.einsum("ka,kb->ab", vecs, vecs.conj())


def choi_to_kraus(choi, tol=EIG_CUTOFF, rank_cut=None):
    """Extract Kraus operators from a Choi matrix by eigendecomposition.

    Eigenvalues below ``tol`` are dropped; ``rank_cut`` additionally caps the
    number of kept operators (largest eigenvalues first).  Raises
    NotAChannelError if the Choi matrix is not Hermitian positive
    semidefinite within tolerance.
    """
    choi = np.asarray(choi, dtype=complex)
    n = choi.shape[0]
    d = int(round(np.sqrt(n)))
    if d * d != n or choi.shape != (n, n):
        raise ValidationError("Choi matrix must be d^2 x d^2")
    herm_defect = np.linalg.norm(choi - choi.conj().T)
    if herm_defect > 1e-8:
        raise NotAChannelError(f"Choi matrix not Hermitian (defect {herm_defect:.2e})")
    vals, vecs = np.linalg.eigh((choi + choi.conj().T) / 2)
    if vals.min() < -1e-6:
        raise NotAChannelError(f"Choi matrix has negative eigenvalue {vals.min():.2e}")
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    keep = vals > tol
    if rank_cut is not None:
        keep[rank_cut:] = False
    vals, vecs = vals[keep], vecs[:, keep]
    ops = np.empty((vals.size, d, d), dtype=complex)
    for i in range(vals.size):
        ops[i] = np.sqrt(vals[i]) * vecs[:, i].reshape(d, d, order="F")
    return KrausSet(ops)


def compose(after, before):
    """Channel composition: ``compose(a, b)`` applies b first, then a.

    Composition happens at the superoperator level and the Kraus operators
    are re-extracted from the Choi matrix, which keeps the rank minimal.
    """
    if after.dim != before.dim:
        raise DimensionMismatchError(
            f"cannot compose channels of dim {after.dim} and {before.dim}"
        )
    s = kraus_to_super(after) @ kraus_to_super(before)
    return choi_to_kraus(super_to_choi(s))


@dataclass(frozen=True)
class DecoherenceParams:
    """Cavity decay times in microseconds.

    ``t1`` is the photon-loss time, ``t2`` the coherence time of the 0-1
    manifold; the pure-dephasing rate follows as 1/T_phi = 1/T2 - 1/(2 T1)
    and must be non-negative (T2 <= 2 T1).
    """

    t1: float
    t2: float

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValidationError("decay times must be positive")
        if self.dephasing_rate < 0:
            raise ValidationError(
                f"T2={self.t2} exceeds the 2*T1={2 * self.t1} limit"
            )

    @property
    def loss_rate(self):
        return 1.0 / self.t1

    @property
    def dephasing_rate(self):
        rate = 1.0 / self.t2 - 0.5 / self.t1
        # kill the rounding residue when t2 is exactly at the 2*T1 limit
        return 0.0 if abs(rate) < 1e-15 else rate


_DECAY_CACHE = {}


def decay_superoperator(params, duration, dim):
    """exp(duration * L) for the cavity Lindblad generator.

    Collapse operators: sqrt(1/T1) a (photon loss) and sqrt(2/T_phi) a^dag a
    (pure dephasing).  Results are cached per (params, duration, dim).
    """
    if duration < 0:
        raise ValidationError("duration must be non-negative")
    key = (params.t1, params.t2, float(duration), dim)
    if key in _DECAY_CACHE:
        return _DECAY_CACHE[key]
    n2 = dim * dim
    if duration == 0 or (params.loss_rate == 0 and params.dephasing_rate == 0):
        s = np.eye(n2, dtype=complex)
        _DECAY_CACHE[key] = s
        return s
    a = destroy(dim)
    collapse = []
    if params.loss_rate > 0:
        collapse.append(np.sqrt(params.loss_rate) * a)
    if params.dephasing_rate > 0:
        collapse.append(np.sqrt(2.0 * params.dephasing_rate) * (a.conj().T @ a))
    ident = np.eye(dim)
    lind = np.zeros((n2, n2), dtype=complex)
    for c in collapse:
        cdc = c.conj().T @ c
        lind += np.kron(c.conj(), c)
        lind -= 0.5 * np.kron(ident, cdc)
        lind -= 0.5 * np.kron(cdc.T, ident)
    s = expm(duration * lind)
    _DECAY_CACHE[key] = s
    return s


def cavity_decay_channel(params, duration, dim):
    """Kraus set of the free cavity decay over ``duration``."""
    s = decay_superoperator(params, duration, dim)
    return choi_to_kraus(super_to_choi(s))


def random_channel(dim, rank, rng):
    """Random CPTP channel from a Haar-ish random stacked isometry."""
    if rank < 1 or rank > dim * dim:
        raise ValidationError(f"rank {rank} outside [1, dim^2]")
    g = rng.standard_normal((rank * dim, dim)) + 1j * rng.standard_normal(
        (rank * dim, dim)
    )
    q, _ = np.linalg.qr(g)
    return KrausSet(q.reshape(rank, dim, dim))


def kraus_to_json(ks):
    """JSON form {"dim", "rank", "operators"} with row-major [re, im] entries."""
    return {
        "dim": ks.dim,
        "rank": ks.rank,
        "operators": [
            [[[float(z.real), float(z.imag)] for z in row] for row in op]
            for op in ks.operators
        ],
    }


def kraus_from_json(data):
    try:
        arr = np.asarray(data["operators"], dtype=float)
        dim, rank = int(data["dim"]), int(data["rank"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed Kraus JSON: {exc}") from exc
    if arr.ndim != 4 or arr.shape != (rank, dim, dim, 2):
        raise ValidationError(
            f"operators shape {arr.shape} does not match rank {rank}, dim {dim}"
        )
    return KrausSet(arr[..., 0] + 1j * arr[..., 1])
