"""Displaced-parity Wigner measurements of coherent probes.

The Wigner function convention is W(beta) = (2/pi) Tr[D^dag(beta) rho
D(beta) P], which integrates to Tr[rho] over the beta plane.  Datasets hold
W values on a rectangular beta grid for each coherent probe alpha, stored
row-major with Re(beta) varying fastest.
"""

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from .channel import apply
from .errors import DataQualityError, ValidationError
from .fock import coherent_state, displacement, parity

DATASET_SCHEMA = "csqpt-dataset-v1"


@dataclass(frozen=True)
class ProbeGrid:
    alphas: np.ndarray


@dataclass(frozen=True)
class WignerGrid:
    betas: np.ndarray


def _square_grid(n, extent):
    if n < 1 or extent <= 0:
        raise ValidationError("grid needs n >= 1 and a positive extent")
    axis = np.linspace(-extent, extent, n)
    re, im = np.meshgrid(axis, axis, indexing="xy")  # Re varies fastest
    return (re + 1j * im).reshape(-1)


def probe_grid(n=5, alpha_max=1.5):
    """n x n coherent probe amplitudes with corners at +-alpha_max(1+i)."""
    return ProbeGrid(_square_grid(n, alpha_max))


def wigner_grid(n=21, beta_max=2.62):
    """n x n measurement displacements with extent beta_max per axis."""
    return WignerGrid(_square_grid(n, beta_max))


def grid_axes(values):
    """Recover (re_axis, im_axis) from a row-major square-grid complex list.

    Raises DataQualityError when the points do not form a complete
    rectangular grid with Re varying fastest.
    """
    values = np.asarray(values)
    re_axis = np.unique(values.real)
    im_axis = np.unique(values.imag)
    expect = (re_axis[None, :] + 1j * im_axis[:, None]).reshape(-1)
    if expect.size != values.size or np.abs(expect - values).max() > 1e-12:
        raise DataQualityError("points do not form a row-major rectangular grid")
    return re_axis, im_axis


def _axis_spacing(axis):
    if axis.size < 2:
        raise DataQualityError("grid axis needs at least two points")
    steps = np.diff(axis)
    if np.abs(steps - steps[0]).max() > 1e-9:
        raise DataQualityError("grid axis is not uniform")
    return float(steps[0])


@dataclass(frozen=True)
class TomographyDataset:
    """Wigner values (n_probes, n_betas) for coherent probes through a channel."""

    probes: np.ndarray
    betas: np.ndarray
    values: np.ndarray
    dim: int
    shots: int
    seed: int
    normalized: bool

    def __post_init__(self):
        if self.values.shape != (self.probes.size, self.betas.size):
            raise DataQualityError(
                f"values shape {self.values.shape} does not match "
                f"{self.probes.size} probes x {self.betas.size} betas"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataQualityError("dataset contains non-finite values")


_PARITY_CACHE = {}


def displaced_parity_ops(betas, dim):
    """(2/pi) D(beta) P D^dag(beta) for each beta, cached per (betas, dim)."""
    betas = np.asarray(betas, dtype=complex)
    key = (dim, betas.tobytes())
    if key in _PARITY_CACHE:
        return _PARITY_CACHE[key]
    p = parity(dim)
    ops = np.empty((betas.size, dim, dim), dtype=complex)
    for j, beta in enumerate(betas):
        d = displacement(beta, dim)
        ops[j] = (2 / np.pi) * (d @ p @ d.conj().T)
    _PARITY_CACHE[key] = ops
    return ops


def wigner_value(rho, beta):
    """W(beta) = (2/pi) Tr[D^dag(beta) rho D(beta) P]."""
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    d = displacement(beta, dim)
    val = (2 / np.pi) * np.trace(d.conj().T @ rho @ d @ parity(dim))
    return float(val.real)


def simulate_dataset(channel_ks, probes, grid, shots=0, seed=0):
    """Wigner dataset of the channel on the probe/measurement grids.

    With ``shots`` > 0 each (probe, beta) value is replaced by the estimate
    from a binomial parity-bit sample of that size, drawn from an
    independent substream seeded by (seed, probe index, beta index).
    """
    alphas = np.asarray(probes.alphas, dtype=complex)
    betas = np.asarray(grid.betas, dtype=complex)
    dim = channel_ks.dim
    if shots < 0:
        raise ValidationError("shots must be non-negative")
    m = displaced_parity_ops(betas, dim)
    values = np.empty((alphas.size, betas.size))
    for i, alpha in enumerate(alphas):
        ket = coherent_state(alpha, dim)
        out = apply(channel_ks, np.outer(ket, ket.conj()))
        values[i] = np.einsum("jab,ba->j", m, out).real
    if shots > 0:
        # parity bit is +1 with probability (1 + pi W / 2) / 2
        prob = np.clip((1 + values * np.pi / 2) / 2, 0.0, 1.0)
        for i in range(alphas.size):
            for j in range(betas.size):
                rng = np.random.default_rng([seed, i, j])
                k = rng.binomial(shots, prob[i, j])
                values[i, j] = (2 / np.pi) * (2 * k / shots - 1)
    return TomographyDataset(
        probes=alphas, betas=betas, values=values, dim=dim,
        shots=int(shots), seed=int(seed), normalized=False,
    )


def normalize_dataset(ds):
    """Scale each probe slice so its Riemann sum over the grid is 1.

    The raw sum tau_i = sum_j W_ij * dA estimates the unit trace; slices
    with tau below 0.5 indicate unusable data and raise DataQualityError.
    """
    re_axis, im_axis = grid_axes(ds.betas)
    area = _axis_spacing(re_axis) * _axis_spacing(im_axis)
    tau = ds.values.sum(axis=1) * area
    if tau.min() <= 0.5:
        raise DataQualityError(
            f"probe normalization {tau.min():.3f} at or below the 0.5 quality gate"
        )
    return replace(ds, values=ds.values / tau[:, None], normalized=True)


def subsample_grid(ds, stride=2):
    """Keep every stride-th beta along each grid axis (anchored at index 0)."""
    if stride < 1:
        raise ValidationError("stride must be >= 1")
    re_axis, im_axis = grid_axes(ds.betas)
    n_re = len(range(0, re_axis.size, stride))
    n_im = len(range(0, im_axis.size, stride))
    if n_re < 3 or n_im < 3:
        raise ValidationError(
            f"subsampled grid would be {n_re}x{n_im}; need at least 3x3"
        )
    keep_re = np.zeros(re_axis.size, dtype=bool)
    keep_re[::stride] = True
    keep_im = np.zeros(im_axis.size, dtype=bool)
    keep_im[::stride] = True
    re_idx = {v: k for k, v in enumerate(re_axis)}
    im_idx = {v: k for k, v in enumerate(im_axis)}
    mask = np.array([
        keep_re[re_idx[b.real]] and keep_im[im_idx[b.imag]] for b in ds.betas
    ])
    return replace(ds, betas=ds.betas[mask], values=ds.values[:, mask])


def _pairs(arr):
    return [[float(z.real), float(z.imag)] for z in arr]


def dataset_to_json(ds):
    return {
        "schema": DATASET_SCHEMA,
        "dim": ds.dim,
        "shots": ds.shots,
        "seed": ds.seed,
        "normalized": ds.normalized,
        "probes": _pairs(ds.probes),
        "betas": _pairs(ds.betas),
        "values": [[float(v) for v in row] for row in ds.values],
    }


def dataset_from_json(data):
    try:
        if data["schema"] != DATASET_SCHEMA:
            raise DataQualityError(f"unknown dataset schema {data['schema']!r}")
        probes = np.array([complex(re, im) for re, im in data["probes"]])
        betas = np.array([complex(re, im) for re, im in data["betas"]])
        values = np.asarray(data["values"], dtype=float)
        return TomographyDataset(
            probes=probes, betas=betas, values=values,
            dim=int(data["dim"]), shots=int(data["shots"]),
            seed=int(data["seed"]), normalized=bool(data["normalized"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataQualityError(f"malformed dataset JSON: {exc}") from exc


def save_dataset(ds, path):
    with open(path, "w") as fh:
        json.dump(dataset_to_json(ds), fh, indent=2)
        fh.write("\n")


def load_dataset(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataQualityError(f"cannot read dataset {path}: {exc}") from exc
    return dataset_from_json(data)


def slice_to_csv(ds, probe_index, path):
    """Write one probe's Wigner slice as CSV with columns beta_re, beta_im, w."""
    if not 0 <= probe_index < ds.probes.size:
        raise ValidationError(
            f"probe_index {probe_index} out of range for {ds.probes.size} probes"
        )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta_re", "beta_im", "w"])
        for beta, value in zip(ds.betas, ds.values[probe_index]):
            writer.writerow([repr(float(beta.real)), repr(float(beta.imag)),
                             repr(float(value))])
