"""Channel quality analysis: fidelities, leakage, truncation, error budgets.

Fidelity conventions for the logical qubit (d_L = 2):

* process fidelity against the logical partial isometry U,
  F_pro = sum_i |Tr[U^dag K_i]|^2 / 4;
* leakage L = 1 - Tr[P_L E(P_L/2)] with P_L the code projector;
* average gate fidelity F_avg = (2 F_pro + 1 - L) / 3, cross-checked
  against the direct form (sum_i |Tr[U^dag K_i]|^2 + 2 Tr[P_L E(P_L/2)]) / 6.
"""

from dataclasses import dataclass

import numpy as np

from .basis import TransferMatrix, logical_ptm
from .channel import apply, kraus_to_choi
from .errors import (
    DimensionMismatchError,
    NotAChannelError,
    NumericalConsistencyError,
    ValidationError,
)
from .channel import DecoherenceParams
from .gates import ideal_logical_x, noisy_gate_process

# the two average-fidelity computations must agree this tightly
FAVG_CONSISTENCY_TOL = 1e-12

MC_BLOCK = 1024

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True)
class FidelityReport:
    f_pro: float
    leakage: float
    f_avg: float
    f_avg_direct: float
    dim_logical: int = 2


@dataclass(frozen=True)
class ErrorBudget:
    """Per-mechanism infidelity contributions over a decoherence-free baseline.

    Only cavity decoherence channels are modeled; ancilla-qubit error
    channels are outside the scope of this budget.
    """

    baseline: float
    contributions: tuple
    clipped: tuple = ()
    scope: str = "cavity decoherence channels only"


def _unit_interval(x, what):
    if not -1e-12 <= x <= 1 + 1e-12:
        raise NumericalConsistencyError(f"{what} = {x} outside [0, 1]")
    return float(min(max(x, 0.0), 1.0))


def _check_dims(channel, u, code):
    if channel.dim != code.dim or u.shape != (channel.dim, channel.dim):
        raise DimensionMismatchError(
            f"channel dim {channel.dim}, target shape {u.shape}, "
            f"code dim {code.dim} must all agree"
        )


def process_fidelity_kraus(channel, u, code):
    """F_pro = sum_i |Tr[U^dag K_i]|^2 / 4 for a logical-subspace target U."""
    _check_dims(channel, u, code)
    traces = np.einsum("ab,kab->k", u.conj(), channel.operators)
    return _unit_interval(float((np.abs(traces) ** 2).sum()) / 4.0, "f_pro")


def leakage(channel, code):
    """Population leaving the code subspace, 1 - Tr[P_L E(P_L/2)]."""
    if channel.dim != code.dim:
        raise DimensionMismatchError(
            f"channel dim {channel.dim} does not match code dim {code.dim}"
        )
    p = code.projector()
    kept = np.trace(p @ apply(channel, p / 2)).real
    return _unit_interval(1.0 - float(kept), "leakage")


def avg_gate_fidelity(channel, u, code):
    """FidelityReport combining process fidelity and leakage.

    The combined form (2 F_pro + 1 - L)/3 and the direct trace form are
    both computed and must agree to 1e-12; disagreement means the channel
    or target violates the assumptions behind the identity.
    """
    _check_dims(channel, u, code)
    f_pro = process_fidelity_kraus(channel, u, code)
    leak = leakage(channel, code)
    f_avg = (2.0 * f_pro + 1.0 - leak) / 3.0
    p = code.projector()
    kept = np.trace(p @ apply(channel, p / 2)).real
    traces = np.einsum("ab,kab->k", u.conj(), channel.operators)
    direct = (float((np.abs(traces) ** 2).sum()) + 2.0 * float(kept)) / 6.0
    if abs(f_avg - direct) > FAVG_CONSISTENCY_TOL:
        raise NumericalConsistencyError(
            f"avg-fidelity forms disagree: {f_avg} vs {direct}"
        )
    return FidelityReport(
        f_pro=f_pro, leakage=leak, f_avg=_unit_interval(f_avg, "f_avg"),
        f_avg_direct=direct,
    )


def mc_avg_gate_fidelity(channel, u, code, samples=10000, seed=0):
    """Monte-Carlo estimate of the average gate fidelity and its std error.

    Averages <psi|U^dag E(|psi><psi|) U|psi> over Haar-random logical
    states.  Samples are drawn in fixed blocks of 1024, block b from the
    substream (seed, b), so the estimate is reproducible and the blocks
    could be evaluated in parallel with a deterministic reduction.
    """
    _check_dims(channel, u, code)
    if samples < 2:
        raise ValidationError("need at least 2 samples")
    z, o = code.zero_l, code.one_l
    vals = np.empty(samples)
    done = 0
    block = 0
    while done < samples:
        n = min(MC_BLOCK, samples - done)
        rng = np.random.default_rng([seed, block])
        amp = rng.standard_normal((n, 2)) + 1j * rng.standard_normal((n, 2))
        amp /= np.linalg.norm(amp, axis=1)[:, None]
        psi = amp[:, 0][:, None] * z + amp[:, 1][:, None] * o  # (n, d)
        phi = np.einsum("kab,nb->kan", channel.operators, psi)
        target = psi @ u.T  # rows are U|psi_n>
        overlap = np.einsum("na,kan->kn", target.conj(), phi)
        vals[done : done + n] = (np.abs(overlap) ** 2).sum(axis=0)
        done += n
        block += 1
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / np.sqrt(samples))
    return mean, stderr


def _psd_sqrt(rho, what):
    w, v = np.linalg.eigh(rho)
    if w.min() < -1e-8:
        raise NotAChannelError(f"{what} is not PSD: min eigenvalue {w.min():.2e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def process_fidelity_choi(a, b, subspace_cut=None):
    """Uhlmann fidelity of the trace-normalized Choi matrices.

    With ``subspace_cut`` given, both Choi matrices are first compressed
    onto input Fock states 0..subspace_cut and renormalized, comparing the
    processes only on the subspace the probe data can constrain.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"channel dims {a.dim} and {b.dim} differ")
    d = a.dim
    ca, cb = kraus_to_choi(a), kraus_to_choi(b)
    if subspace_cut is not None:
        if not 0 <= subspace_cut < d:
            raise ValidationError(
                f"subspace_cut {subspace_cut} outside [0, {d - 1}]"
            )
        keep = np.zeros(d)
        keep[: subspace_cut + 1] = 1.0
        proj = np.kron(np.diag(keep), np.eye(d))  # input factor comes first
        ca = proj @ ca @ proj
        cb = proj @ cb @ proj
    ta, tb = np.trace(ca).real, np.trace(cb).real
    if min(ta, tb) <= 0:
        raise NotAChannelError("projected Choi matrix has no support")
    ca /= ta
    cb /= tb
    sq = _psd_sqrt(ca, "Choi matrix")
    inner = sq @ cb @ sq
    w = np.linalg.eigvalsh(inner)
    # eigen-noise of the PSD product: sqrt turns O(eps^2) junk into O(eps)
    # per mode, which adds up over d^2 modes; drop it before the sqrt
    w[w < 1e-14 * max(float(w[-1]), 1e-300)] = 0.0
    fid = float(np.sqrt(w).sum() ** 2)
    if not -1e-8 <= fid <= 1 + 1e-8:
        raise NumericalConsistencyError(f"choi fidelity = {fid} outside [0, 1]")
    return float(min(max(fid, 0.0), 1.0))


def truncation_sweep(channel, reference, cuts):
    """(cut, subspace process fidelity) for each requested input Fock cut."""
    cuts = list(cuts)
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise ValidationError("cuts must be strictly ascending")
    return [
        (cut, process_fidelity_choi(channel, reference, subspace_cut=cut))
        for cut in cuts
    ]


def error_budget(seq, params, code):
    """Infidelity contribution of each cavity decoherence mechanism.

    Each mechanism is activated alone (photon loss with dephasing off;
    pure dephasing with loss off) and its composed-gate infidelity
    compared against the decoherence-free baseline.
    """
    dim = code.dim
    target = ideal_logical_x(code)

    def infidelity(p):
        ch = noisy_gate_process(seq, p, dim)
        return 1.0 - avg_gate_fidelity(ch, target, code).f_avg

    baseline = infidelity(None)
    mechanisms = []
    if params.dephasing_rate > 0:
        t_phi = 1.0 / params.dephasing_rate
    else:
        t_phi = np.inf
    mechanisms.append(("photon-loss", DecoherenceParams(params.t1, 2.0 * params.t1)))
    mechanisms.append(("pure-dephasing", DecoherenceParams(np.inf, t_phi)))

    contributions = []
    clipped = []
    for label, p in mechanisms:
        delta = infidelity(p) - baseline
        if delta < -1e-6:
            raise NumericalConsistencyError(
                f"{label} contribution {delta} below -1e-6"
            )
        if delta < 0:
            clipped.append(label)
            delta = 0.0
        contributions.append((label, float(delta)))
    return ErrorBudget(
        baseline=float(baseline), contributions=tuple(contributions),
        clipped=tuple(clipped),
    )


def _cardinal_amplitudes():
    s = 1 / np.sqrt(2)
    return {
        "z+": (1.0, 0.0), "z-": (0.0, 1.0),
        "x+": (s, s), "x-": (s, -s),
        "y+": (s, 1j * s), "y-": (s, -1j * s),
    }


def _decoder_unitary(code):
    """D_min on ancilla (x) cavity: swap |g,1_L> <-> |e,0_L>, fix the rest."""
    d = code.dim
    g1 = np.kron(np.array([1.0, 0.0]), code.one_l)
    e0 = np.kron(np.array([0.0, 1.0]), code.zero_l)
    u = np.eye(2 * d, dtype=complex)
    u += np.outer(g1, e0.conj()) + np.outer(e0, g1.conj())
    u -= np.outer(g1, g1.conj()) + np.outer(e0, e0.conj())
    return u


def decoder_study(channel, code):
    """Ancilla PTM seen through the minimal decoder vs the direct logical PTM.

    For each logical cardinal state the ancilla is prepared in the matching
    two-level state, the cavity in the channel output; the decoder swaps
    logical information onto the ancilla and the cavity is traced out.
    Leakage hides from the decoded picture (its first row always reads
    trace preservation), while the direct PTM records it.
    """
    if channel.dim != code.dim:
        raise DimensionMismatchError(
            f"channel dim {channel.dim} does not match code dim {code.dim}"
        )
    d = code.dim
    z, o = code.zero_l, code.one_l
    u = _decoder_unitary(code)
    measured = {}
    for name, (a, b) in _cardinal_amplitudes().items():
        anc = np.array([a, b], dtype=complex)
        psi = a * z + b * o
        rho_cav = apply(channel, np.outer(psi, psi.conj()))
        rho = np.kron(np.outer(anc, anc.conj()), rho_cav)
        out = u @ rho @ u.conj().T
        measured[name] = np.einsum("aibi->ab", out.reshape(2, d, 2, d))

    lam = {
        1: measured["x+"] - measured["x-"],
        2: measured["y+"] - measured["y-"],
        3: measured["z+"] - measured["z-"],
    }
    lam[0] = (
        measured["x+"] + measured["x-"] + measured["y+"] + measured["y-"]
        + measured["z+"] + measured["z-"]
    ) / 3.0
    r = np.empty((4, 4))
    for i, sigma in enumerate(_PAULIS):
        for j in range(4):
            val = 0.5 * np.trace(sigma @ lam[j])
            if abs(val.imag) > 1e-8:
                raise NumericalConsistencyError(
                    "decoded transfer matrix has imaginary residue"
                )
            r[i, j] = val.real
    decoded = TransferMatrix(r, ("I", "X", "Y", "Z"))
    return decoded, logical_ptm(channel, code)


def fidelity_report_to_json(report):
    return {
        "f_pro": report.f_pro, "leakage": report.leakage,
        "f_avg": report.f_avg, "f_avg_direct": report.f_avg_direct,
        "dim_logical": report.dim_logical,
    }


def error_budget_to_json(budget):
    return {
        "baseline_infidelity": budget.baseline,
        "contributions": {label: val for label, val in budget.contributions},
        "clipped": list(budget.clipped),
        "scope": budget.scope,
    }
