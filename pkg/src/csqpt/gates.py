"""Binomial-code definitions and the SNAP/displacement gate sequence."""

import json
from dataclasses import dataclass

import numpy as np

from .channel import (
    KrausSet,
    choi_to_kraus,
    decay_superoperator,
    kraus_to_super,
    super_to_choi,
    unitary_channel,
)
from .errors import ValidationError
from .fock import displacement, fock_state, snap

# Calibrated parameters for the binomial-code X gate: four displacement
# amplitudes interleaved with three SNAP phase vectors, applied in listed
# order.  Durations in microseconds.
X_GATE_BETAS = (0.610, 0.612, -0.612, -0.610)
X_GATE_THETAS = (
    np.array([-0.67791071, -0.09477794, -1.38876256, 0.53945346, 0.31723896,
              -1.30273005, 0.10376766, 2.65894245, -1.10789012, 0.50023422]),
    np.array([0.0, 2.7514428, 1.55112927, 2.31904201, -1.11177419,
              1.06874247, 0.33546735, -0.44872477, -0.77601542, -0.73785501]),
    np.array([0.45755119, 1.03469991, -0.22172176, 1.70482232, 1.49607879,
              -0.12840042, 1.27637479, -2.36464223, 0.0, 1.66335354]),
)
DISPLACEMENT_DURATION = 0.1
SNAP_DURATION = 0.7


@dataclass(frozen=True)
class BinomialCode:
    """Lowest-order binomial code: |0_L> = |2>, |1_L> = (|0> + |4>)/sqrt(2)."""

    dim: int

    def __post_init__(self):
        if self.dim < 5:
            raise ValidationError("binomial code needs dim >= 5")

    @property
    def zero_l(self):
        return fock_state(2, self.dim)

    @property
    def one_l(self):
        return (fock_state(0, self.dim) + fock_state(4, self.dim)) / np.sqrt(2)

    @property
    def error_vec(self):
        """The state photon loss maps the code words toward, (|0> - |4>)/sqrt(2)."""
        return (fock_state(0, self.dim) - fock_state(4, self.dim)) / np.sqrt(2)

    def projector(self):
        z, o = self.zero_l, self.one_l
        return np.outer(z, z.conj()) + np.outer(o, o.conj())


@dataclass(frozen=True)
class GateStep:
    """One sequence step: kind 'displace' (complex alpha) or 'snap' (phases)."""

    kind: str
    param: object
    duration: float

    def __post_init__(self):
        if self.kind not in ("displace", "snap"):
            raise ValidationError(f"unknown step kind {self.kind!r}")
        if self.duration < 0:
            raise ValidationError("step duration must be non-negative")


@dataclass(frozen=True)
class GateSequence:
    steps: tuple

    @property
    def total_duration(self):
        return sum(s.duration for s in self.steps)


def x_gate_sequence():
    """The calibrated seven-step logical-X sequence (2.5 us total)."""
    steps = [GateStep("displace", complex(X_GATE_BETAS[0]), DISPLACEMENT_DURATION)]
    for theta, beta in zip(X_GATE_THETAS, X_GATE_BETAS[1:]):
        steps.append(GateStep("snap", np.array(theta), SNAP_DURATION))
        steps.append(GateStep("displace", complex(beta), DISPLACEMENT_DURATION))
    return GateSequence(tuple(steps))


def step_unitary(step, dim):
    if step.kind == "displace":
        return displacement(step.param, dim)
    return snap(step.param, dim)


def compose_unitary(sequence, dim):
    """Product of the step unitaries, first listed step applied first."""
    u = np.eye(dim, dtype=complex)
    for step in sequence.steps:
        u = step_unitary(step, dim) @ u
    return u


def ideal_logical_x(code):
    """|0_L><1_L| + |1_L><0_L| as a dim x dim partial isometry."""
    z, o = code.zero_l, code.one_l
    return np.outer(z, o.conj()) + np.outer(o, z.conj())


def ideal_logical_x_unitary(code):
    """The ideal X extended by the identity on the code complement."""
    return ideal_logical_x(code) + np.eye(code.dim) - code.projector()


def noisy_gate_process(sequence, params, dim):
    """Kraus set of the sequence with cavity decoherence during each step.

    Decay acts for each step's duration before that step's unitary.  With
    ``params=None`` the composition is the pure unitary channel.
    """
    if params is None:
        return unitary_channel(compose_unitary(sequence, dim))
    s = np.eye(dim * dim, dtype=complex)
    for step in sequence.steps:
        u = step_unitary(step, dim)
        s = kraus_to_super(unitary_channel(u)) @ decay_superoperator(
            params, step.duration, dim
        ) @ s
    return choi_to_kraus(super_to_choi(s))


def sequence_to_json(sequence):
    """JSON-serializable dict for a GateSequence."""
    steps = []
    for step in sequence.steps:
        if step.kind == "displace":
            alpha = complex(step.param)
            entry = {"type": "displace", "alpha": [alpha.real, alpha.imag]}
        else:
            entry = {"type": "snap", "thetas": [float(t) for t in step.param]}
        entry["duration"] = step.duration
        steps.append(entry)
    return {"steps": steps}


def sequence_from_json(data):
    if "steps" not in data:
        raise ValidationError("sequence JSON must contain 'steps'")
    steps = []
    for entry in data["steps"]:
        kind = entry.get("type")
        duration = float(entry.get("duration", 0.0))
        if kind == "displace":
            re, im = entry["alpha"]
            steps.append(GateStep("displace", complex(re, im), duration))
        elif kind == "snap":
            steps.append(GateStep("snap", np.asarray(entry["thetas"], float), duration))
        else:
            raise ValidationError(f"unknown step type {kind!r}")
    return GateSequence(tuple(steps))


def load_sequence(path):
    with open(path) as fh:
        return sequence_from_json(json.load(fh))
