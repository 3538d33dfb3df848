"""Joint outcome distributions ``p(a|x) = Tr[rho (M_{a_1|x_1} (x) ... (x) M_{a_N|x_N})]``."""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import ArgumentError
from .linalg import DensityMatrix

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=np.complex128)

LAYOUT = "x-major/a-minor, mixed radix, party 1 most significant"


@dataclass(frozen=True)
class Scenario:
    n_parties: int
    inputs_per_party: tuple[int, ...]
    outputs_per_party: tuple[int, ...]

    def __post_init__(self):
        ins = tuple(int(v) for v in self.inputs_per_party)
        outs = tuple(int(v) for v in self.outputs_per_party)
        object.__setattr__(self, "inputs_per_party", ins)
        object.__setattr__(self, "outputs_per_party", outs)
        if self.n_parties < 1 or len(ins) != self.n_parties or len(outs) != self.n_parties:
            raise ArgumentError("scenario needs one input and one output count per party")
        if min(ins) < 1 or min(outs) < 1:
            raise ArgumentError("input and output counts must be >= 1")

    @classmethod
    def uniform(cls, n: int, inputs: int = 2, outputs: int = 2) -> "Scenario":
        return cls(n, (inputs,) * n, (outputs,) * n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.inputs_per_party + self.outputs_per_party

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def as_dict(self) -> dict:
        return {"n_parties": self.n_parties, "inputs_per_party": list(self.inputs_per_party),
                "outputs_per_party": list(self.outputs_per_party)}


@dataclass(frozen=True, eq=False)
class MeasurementAssignment:
    """Per party an array ``ops[x, a]`` of local measurement operators."""

    ops: tuple[np.ndarray, ...]
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        arrs = []
        for k, party in enumerate(self.ops):
            a = np.array(party, dtype=np.complex128, copy=True)
            if a.ndim != 4 or a.shape[2] != a.shape[3]:
                raise ArgumentError(f"party {k}: expected ops[x, a] of square matrices, got shape {a.shape}")
            eye = np.eye(a.shape[2])
            for x in range(a.shape[0]):
                total = a[x].sum(axis=0)
                if np.max(np.abs(total - eye)) > self.tol.measurement:
                    raise ArgumentError(f"party {k}, input {x}: operators do not sum to identity")
                for out, op in enumerate(a[x]):
                    if np.max(np.abs(op - op.conj().T)) > self.tol.measurement:
                        raise ArgumentError(f"party {k}, input {x}, outcome {out}: operator not Hermitian")
                    if np.linalg.eigvalsh((op + op.conj().T) / 2)[0] < -self.tol.measurement:
                        raise ArgumentError(f"party {k}, input {x}, outcome {out}: operator not PSD")
            a.setflags(write=False)
            arrs.append(a)
        object.__setattr__(self, "ops", tuple(arrs))

    @property
    def scenario(self) -> Scenario:
        return Scenario(len(self.ops), tuple(a.shape[0] for a in self.ops),
                        tuple(a.shape[1] for a in self.ops))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.shape[2] for a in self.ops)

    @classmethod
    def from_bloch(cls, directions: Sequence[Sequence[Sequence[float]]]) -> "MeasurementAssignment":
        """Projective qubit measurements from Bloch vectors ``directions[party][x]``."""
        return cls(tuple(np.stack([projective_qubit(v) for v in party]) for party in directions))


@dataclass(frozen=True, eq=False)
class Behavior:
    """``table[x_1, ..., x_N, a_1, ..., a_N] = p(a|x)``."""

    scenario: Scenario
    table: np.ndarray
    tol: Tolerances = field(default=DEFAULT, repr=False)
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        t = np.array(self.table, dtype=float, copy=True).reshape(self.scenario.shape)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        if self.validate:
            if t.min() < -self.tol.behavior_nonneg:
                raise ArgumentError(f"negative probability {t.min():.3e}")
            n = self.scenario.n_parties
            sums = t.sum(axis=tuple(range(n, 2 * n)))
            if np.max(np.abs(sums - 1)) > self.tol.behavior_norm:
                raise ArgumentError("behavior is not normalized for every input")

    def flat(self) -> np.ndarray:
        return self.table.ravel()

    @classmethod
    def from_flat(cls, scenario: Scenario, probs: Sequence[float], **kw) -> "Behavior":
        return cls(scenario, np.asarray(probs, dtype=float).reshape(scenario.shape), **kw)

    def marginal(self, parties: Sequence[int]) -> np.ndarray:
        """``p(a_S | x)`` with all inputs kept, outcomes of other parties summed."""
        n = self.scenario.n_parties
        drop = tuple(n + k for k in range(n) if k not in parties)
        return self.table.sum(axis=drop)


def projective_qubit(bloch: Sequence[float], atol: float = 1e-10) -> np.ndarray:
    """``(I + n.sigma)/2`` and ``(I - n.sigma)/2`` for a unit Bloch vector."""
    v = np.asarray(bloch, dtype=float)
    if v.shape != (3,) or abs(np.linalg.norm(v) - 1) > atol:
        raise ArgumentError(f"Bloch vector {bloch} is not a unit 3-vector")
    ns = np.einsum("k,kij->ij", v, PAULI)
    eye = np.eye(2)
    return np.stack([(eye + ns) / 2, (eye - ns) / 2])


def bloch_of(op: np.ndarray) -> np.ndarray:
    """Bloch vector ``n`` of a qubit effect ``(I + n.sigma)/2``."""
    return np.real(np.einsum("ij,kji->k", op, PAULI))


def xy_direction(phi: float) -> np.ndarray:
    return np.array([np.cos(phi), np.sin(phi), 0.0])


def quantum_behavior(rho: DensityMatrix, m: MeasurementAssignment) -> Behavior:
    n = rho.n_parties
    if len(m.ops) != n or m.dims != rho.dims:
        raise ArgumentError(f"measurement dims {m.dims} do not match state dims {rho.dims}")
    letters = iter(string.ascii_letters)
    rows = [next(letters) for _ in range(n)]
    cols = [next(letters) for _ in range(n)]
    xs = [next(letters) for _ in range(n)]
    as_ = [next(letters) for _ in range(n)]
    terms = ["".join(rows + cols)] + [f"{xs[k]}{as_[k]}{cols[k]}{rows[k]}" for k in range(n)]
    spec = ",".join(terms) + "->" + "".join(xs + as_)
    p = np.einsum(spec, rho.tensor(), *m.ops, optimize=True)
    if np.max(np.abs(p.imag)) > 1e-10:
        raise ArgumentError("complex probabilities: state or operators not Hermitian")
    return Behavior(m.scenario, p.real, tol=rho.tol)


def correlator(b: Behavior, x: Sequence[int]) -> float:
    """``sum_a (-1)^(a_1 + ... + a_N) p(a|x)`` for binary outcomes."""
    if any(o != 2 for o in b.scenario.outputs_per_party):
        raise ArgumentError("correlators need binary outcomes")
    p = b.table[tuple(x)]
    n = b.scenario.n_parties
    signs = np.ones([2] * n)
    for a in product((0, 1), repeat=n):
        signs[a] = (-1) ** sum(a)
    return float(np.sum(signs * p))


def no_signalling_deviation(b: Behavior) -> float:
    """Largest change of any single-party-removed marginal under that party's input."""
    n = b.scenario.n_parties
    worst = 0.0
    for k in range(n):
        others = [j for j in range(n) if j != k]
        marg = b.marginal(others)
        worst = max(worst, float(np.max(np.abs(marg - marg.take([0], axis=k)))))
    return worst


def uniform_behavior(scenario: Scenario) -> Behavior:
    t = np.ones(scenario.shape) / np.prod(scenario.outputs_per_party)
    return Behavior(scenario, t)
