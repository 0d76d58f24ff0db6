"""Kraus-operator learning from Wigner data on the CPTP manifold.

The channel is parametrized by the vertical stack V of its rank Kraus
operators, an (r*d) x d matrix.  Trace preservation is exactly the isometry
constraint V^dag V = I, so the feasible set is a complex Stiefel manifold
and the optimizer is projected gradient descent: Wirtinger gradient,
tangent-space projection, Armijo backtracking, polar retraction.

Gradient convention: for a real loss L the array returned by
``euclidean_gradient`` is G = dL/d(conj V), so the derivative of L along a
perturbation dV is 2 Re<G, dV>.  Finite differences per real coordinate
therefore recover 2*Re(G) and 2*Im(G).
"""

import json
from dataclasses import dataclass

import numpy as np

from .channel import KrausSet, kraus_from_json, kraus_to_json
from .errors import (
    DimensionMismatchError,
    RetractionError,
    ValidationError,
)
from .fock import coherent_state
from .tomography import displaced_parity_ops

RESULT_SCHEMA = "csqpt-result-v1"

# V^dag V may drift this far from I before a point is rejected
ISOMETRY_TOL = 1e-8

INIT_MODES = ("identity-perturbed", "random-isometry")

ARMIJO_FACTOR = 0.5
ARMIJO_SLOPE = 1e-4
MIN_STEP = 1e-14


@dataclass(frozen=True)
class ReconstructionConfig:
    rank: int = 4
    dim: int = 32
    gamma: float = 4e-4
    max_iters: int = 2000
    step_size: float = 0.1
    grad_tol: float = 1e-6
    seed: int = 0
    init: str = "identity-perturbed"

    def __post_init__(self):
        if self.rank < 1:
            raise ValidationError("rank must be at least 1")
        if self.dim < 2:
            raise ValidationError("dim must be at least 2")
        if self.gamma < 0:
            raise ValidationError("gamma must be non-negative")
        if self.max_iters < 0:
            raise ValidationError("max_iters must be non-negative")
        if self.step_size <= 0:
            raise ValidationError("step_size must be positive")
        if self.grad_tol < 0:
            raise ValidationError("grad_tol must be non-negative")
        if self.init not in INIT_MODES:
            raise ValidationError(f"init must be one of {INIT_MODES}")


@dataclass(frozen=True)
class IsometryPoint:
    """Vertical stack of Kraus operators with V^dag V = I within 1e-8."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[1] < 1 or m.shape[0] % m.shape[1] != 0:
            raise DimensionMismatchError(
                f"stack shape {m.shape} is not (r*d, d) for integer r"
            )
        defect = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[1]))
        if defect > ISOMETRY_TOL:
            raise ValidationError(
                f"stack is not an isometry: ||V^dag V - I|| = {defect:.2e}"
            )
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[1]

    @property
    def rank(self):
        return self.matrix.shape[0] // self.matrix.shape[1]

    def kraus(self):
        """The stack split back into its (rank, dim, dim) Kraus operators."""
        return self.matrix.reshape(self.rank, self.dim, self.dim)


@dataclass(frozen=True)
class LossReport:
    l2: float
    l1: float
    total: float
    grad_norm: float
    iters_used: int
    history: tuple
    converged: bool = True


def stack_kraus(operators):
    """IsometryPoint from Kraus operators of shape (rank, dim, dim)."""
    ops = np.asarray(operators, dtype=complex)
    if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
        raise DimensionMismatchError("operators must have shape (rank, dim, dim)")
    return IsometryPoint(ops.reshape(-1, ops.shape[2]))


_PROBE_KET_CACHE = {}


def _probe_kets(alphas, dim):
    alphas = np.asarray(alphas, dtype=complex)
    key = (dim, alphas.tobytes())
    if key not in _PROBE_KET_CACHE:
        _PROBE_KET_CACHE[key] = np.stack(
            [coherent_state(a, dim) for a in alphas]
        )
    return _PROBE_KET_CACHE[key]


def _as_alphas(probes):
    return np.asarray(getattr(probes, "alphas", probes), dtype=complex)


def _as_betas(grid):
    return np.asarray(getattr(grid, "betas", grid), dtype=complex)


def _predict(v, kets, mops):
    """W_pred[i, j] for stack v, probe kets (n_p, d), parity ops (n_b, d, d)."""
    d = v.shape[1]
    r = v.shape[0] // d
    phi = (v @ kets.T).reshape(r, d, -1)  # phi[k, :, i] = K_k |alpha_i>
    z = np.tensordot(mops, phi, axes=([2], [1]))  # z[j, a, k, i]
    y = np.einsum("jaki,kai->ij", z, phi.conj())
    return y.real


def predict_wigner(point, probes, grid):
    """Wigner predictions of the channel encoded by an isometry point.

    Uses pure-state quadratic forms <alpha| K^dag M K |alpha> rather than
    density-matrix evolution; probe kets and displaced-parity observables
    are built once per (grid, dim) and cached.
    """
    kets = _probe_kets(_as_alphas(probes), point.dim)
    mops = displaced_parity_ops(_as_betas(grid), point.dim)
    return _predict(point.matrix, kets, mops)


def _l1_parts(v):
    return float(np.abs(v.real).sum() + np.abs(v.imag).sum())


def _loss_terms(v, kets, mops, y_data, gamma):
    resid = _predict(v, kets, mops) - y_data
    l2 = float((resid * resid).sum())
    l1 = _l1_parts(v)
    return l2, l1, l2 + gamma * l1, resid


def loss(point, ds, gamma):
    """LossReport of an isometry point against a dataset (no optimization)."""
    if ds.dim != point.dim:
        raise DimensionMismatchError(
            f"dataset dim {ds.dim} does not match stack dim {point.dim}"
        )
    kets = _probe_kets(ds.probes, point.dim)
    mops = displaced_parity_ops(ds.betas, point.dim)
    l2, l1, total, _ = _loss_terms(point.matrix, kets, mops, ds.values, gamma)
    return LossReport(
        l2=l2, l1=l1, total=total, grad_norm=0.0, iters_used=0,
        history=(total,),
    )


def _l2_gradient(v, kets, mops, resid):
    """Wirtinger dL2/d(conj V): stack of 2 sum_ij resid_ij M_j K_k rho_i."""
    d = v.shape[1]
    r = v.shape[0] // d
    phi = (v @ kets.T).reshape(r, d, -1)
    n = np.tensordot(resid, mops, axes=([1], [0]))  # N_i = sum_j resid_ij M_j
    w = np.einsum("iab,kbi->kai", n, phi)  # N_i K_k |alpha_i>
    g = 2.0 * np.einsum("kai,ic->kac", w, kets.conj())
    return g.reshape(r * d, d)


def _l1_subgradient(v):
    # d(|Re z| + |Im z|)/d(conj z) = (sign Re + i sign Im) / 2, 0 at 0
    return 0.5 * (np.sign(v.real) + 1j * np.sign(v.imag))


def euclidean_gradient(point, ds, gamma):
    """Wirtinger gradient of the total loss with respect to conj(V)."""
    if ds.dim != point.dim:
        raise DimensionMismatchError(
            f"dataset dim {ds.dim} does not match stack dim {point.dim}"
        )
    kets = _probe_kets(ds.probes, point.dim)
    mops = displaced_parity_ops(ds.betas, point.dim)
    resid = _predict(point.matrix, kets, mops) - ds.values
    g = _l2_gradient(point.matrix, kets, mops, resid)
    if gamma > 0:
        g = g + gamma * _l1_subgradient(point.matrix)
    return g


def tangent_project(point, direction):
    """Project onto the Stiefel tangent space at the point's stack."""
    v = point.matrix if isinstance(point, IsometryPoint) else point
    z = np.asarray(direction, dtype=complex)
    if z.shape != v.shape:
        raise DimensionMismatchError(
            f"direction shape {z.shape} does not match stack shape {v.shape}"
        )
    a = v.conj().T @ z
    return z - v @ ((a + a.conj().T) / 2)


def _polar(w):
    u, s, vh = np.linalg.svd(w, full_matrices=False)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise RetractionError(
            f"rank-deficient stack: smallest singular value {s[-1]:.2e}"
        )
    return u @ vh


def retract(matrix):
    """Nearest isometry V (V^dag V)^(-1/2) via the polar decomposition."""
    w = np.asarray(matrix, dtype=complex)
    if w.ndim != 2 or w.shape[1] < 1 or w.shape[0] % w.shape[1] != 0:
        raise DimensionMismatchError(
            f"stack shape {w.shape} is not (r*d, d) for integer r"
        )
    return IsometryPoint(_polar(w))


def initial_point(cfg):
    """Seeded starting stack for the configured init mode."""
    rng = np.random.default_rng(cfg.seed)
    shape = (cfg.rank * cfg.dim, cfg.dim)
    if cfg.init == "identity-perturbed":
        v = np.zeros(shape, dtype=complex)
        v[: cfg.dim] = np.eye(cfg.dim)
        v += 1e-2 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    else:
        v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return IsometryPoint(_polar(v))


def reconstruct(ds, cfg):
    """Learn a rank-cfg.rank Kraus set from a Wigner dataset.

    Projected gradient descent on the stacked-isometry manifold with
    monotone Armijo backtracking (the accepted trial step doubles as the
    next iteration's first trial).  Stops when the projected gradient norm
    falls to cfg.grad_tol or after cfg.max_iters accepted steps; in the
    latter case the report carries converged=False.

    Returns (KrausSet, LossReport); the KrausSet constructor re-certifies
    the CPTP condition and raising there is a hard error.
    """
    if ds.dim != cfg.dim:
        raise DimensionMismatchError(
            f"dataset dim {ds.dim} does not match config dim {cfg.dim}"
        )
    kets = _probe_kets(ds.probes, cfg.dim)
    mops = displaced_parity_ops(ds.betas, cfg.dim)
    y = ds.values

    v = initial_point(cfg).matrix
    l2, l1, total, resid = _loss_terms(v, kets, mops, y, cfg.gamma)
    history = [total]
    step = cfg.step_size
    grad_norm = np.inf
    converged = False

    for _ in range(cfg.max_iters):
        g = _l2_gradient(v, kets, mops, resid)
        if cfg.gamma > 0:
            g = g + cfg.gamma * _l1_subgradient(v)
        a = v.conj().T @ g
        xi = g - v @ ((a + a.conj().T) / 2)
        grad_norm = float(np.linalg.norm(xi))
        if grad_norm <= cfg.grad_tol:
            converged = True
            break
        # Armijo backtracking along -xi; slope of L at t=0 is -2||xi||^2
        decrease_rate = 2.0 * grad_norm**2
        t = step
        accepted = False
        while t > MIN_STEP:
            try:
                v_new = _polar(v - t * xi)
            except RetractionError:
                t *= ARMIJO_FACTOR
                continue
            l2_new, l1_new, total_new, resid_new = _loss_terms(
                v_new, kets, mops, y, cfg.gamma
            )
            if total_new <= total - ARMIJO_SLOPE * t * decrease_rate:
                accepted = True
                break
            t *= ARMIJO_FACTOR
        if not accepted:
            # line search hit the step floor: no further monotone progress
            break
        v, l2, l1, total, resid = v_new, l2_new, l1_new, total_new, resid_new
        history.append(total)
        step = t / ARMIJO_FACTOR  # carry over, one factor more ambitious
    else:
        # max_iters exhausted; report the gradient at the final point
        g = _l2_gradient(v, kets, mops, resid)
        if cfg.gamma > 0:
            g = g + cfg.gamma * _l1_subgradient(v)
        a = v.conj().T @ g
        xi = g - v @ ((a + a.conj().T) / 2)
        grad_norm = float(np.linalg.norm(xi))
        converged = grad_norm <= cfg.grad_tol

    point = retract(v)
    ks = KrausSet(point.kraus())
    report = LossReport(
        l2=l2, l1=l1, total=total, grad_norm=grad_norm,
        iters_used=len(history) - 1, history=tuple(history),
        converged=converged,
    )
    return ks, report


def config_to_json(cfg):
    return {
        "rank": cfg.rank, "dim": cfg.dim, "gamma": cfg.gamma,
        "max_iters": cfg.max_iters, "step_size": cfg.step_size,
        "grad_tol": cfg.grad_tol, "seed": cfg.seed, "init": cfg.init,
    }


def config_from_json(data):
    try:
        return ReconstructionConfig(**data)
    except TypeError as exc:
        raise ValidationError(f"malformed config JSON: {exc}") from exc


def result_to_json(ks, report, cfg):
    return {
        "schema": RESULT_SCHEMA,
        "config": config_to_json(cfg),
        "kraus": kraus_to_json(ks),
        "loss": {
            "l2": report.l2, "l1": report.l1, "total": report.total,
            "grad_norm": report.grad_norm, "iters_used": report.iters_used,
            "converged": report.converged,
        },
        "history": list(report.history),
    }


def result_from_json(data):
    try:
        if data["schema"] != RESULT_SCHEMA:
            raise ValidationError(f"unknown result schema {data['schema']!r}")
        ks = kraus_from_json(data["kraus"])
        cfg = config_from_json(data["config"])
        lo = data["loss"]
        report = LossReport(
            l2=float(lo["l2"]), l1=float(lo["l1"]), total=float(lo["total"]),
            grad_norm=float(lo["grad_norm"]),
            iters_used=int(lo["iters_used"]),
            history=tuple(float(t) for t in data["history"]),
            converged=bool(lo["converged"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed result JSON: {exc}") from exc
    return ks, report, cfg


def save_result(ks, report, cfg, path):
    with open(path, "w") as fh:
        json.dump(result_to_json(ks, report, cfg), fh, indent=2)
        fh.write("\n")


def load_result(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read result {path}: {exc}") from exc
    return result_from_json(data)
