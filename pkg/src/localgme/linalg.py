"""Dense complex linear algebra for multi-qudit states and operators.

Matrices are plain ``numpy`` arrays; :class:`DensityMatrix` and :class:`Ket`
attach subsystem dimensions and validate the physical invariants once, at
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import ArgumentError, DegenerateError, SizeError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A state on ``H_1 (x) ... (x) H_N`` with local dimensions ``dims``."""

    matrix: np.ndarray
    dims: tuple[int, ...]
    tol: Tolerances = field(default=DEFAULT, repr=False)
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ArgumentError(f"density matrix must be square, got shape {m.shape}")
        if any(d < 2 for d in self.dims):
            raise ArgumentError(f"local dimensions must be >= 2, got {self.dims}")
        if prod(self.dims) != m.shape[0]:
            raise ArgumentError(f"dims {self.dims} do not match matrix side {m.shape[0]}")
        if m.shape[0] > self.tol.max_matrix_side:
            raise SizeError(f"matrix side {m.shape[0]} exceeds cap {self.tol.max_matrix_side}")
        if not np.all(np.isfinite(m)):
            raise ArgumentError("density matrix has non-finite entries")
        if self.validate:
            check_density(m, self.tol)

    @property
    def side(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_parties(self) -> int:
        return len(self.dims)

    def tensor(self) -> np.ndarray:
        """View as a ``2N``-index tensor (row indices first)."""
        return self.matrix.reshape(self.dims + self.dims)


@dataclass(frozen=True, eq=False)
class Ket:
    amplitudes: np.ndarray
    normalized: bool = True
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=np.complex128, copy=True).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)
        if not np.all(np.isfinite(v)):
            raise ArgumentError("ket has non-finite amplitudes")
        if self.normalized and abs(np.vdot(v, v).real - 1.0) > self.tol.ket_norm:
            raise ArgumentError("ket flagged normalized but its norm is not 1")

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())


def check_density(m: np.ndarray, tol: Tolerances = DEFAULT) -> None:
    """Raise :class:`ArgumentError` unless ``m`` is Hermitian, unit-trace and PSD."""
    herm_dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if herm_dev > tol.hermitian:
        raise ArgumentError(f"matrix is not Hermitian (deviation {herm_dev:.3e})")
    tr = np.trace(m).real
    if abs(tr - 1.0) > tol.trace:
        raise ArgumentError(f"trace is {tr!r}, expected 1")
    if not is_psd(m, tol.psd):
        lam = hermitian_eigen_min(m, tol)
        raise ArgumentError(f"matrix is not positive semidefinite (min eigenvalue {lam:.3e})")


def is_psd(m: np.ndarray, atol: float = 1e-9) -> bool:
    """Cheap PSD test: Cholesky of ``m + atol*I``; falls back to Jacobi on failure."""
    h = (m + m.conj().T) / 2
    try:
        np.linalg.cholesky(h + atol * np.eye(h.shape[0]))
        return True
    except np.linalg.LinAlgError:
        return hermitian_eigen_min(h) >= -atol


def kron(a: np.ndarray, b: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    side = max(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
    if side > tol.max_matrix_side:
        raise SizeError(f"Kronecker product side {side} exceeds cap {tol.max_matrix_side}")
    return np.kron(a, b)


def kron_all(mats: Iterable[np.ndarray], tol: Tolerances = DEFAULT) -> np.ndarray:
    out = np.ones((1, 1), dtype=np.complex128)
    for m in mats:
        out = kron(out, m, tol)
    return out


def partial_trace_matrix(m: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Trace out every subsystem not in ``keep``; kept subsystems stay in ascending order."""
    dims = tuple(dims)
    n = len(dims)
    keep = sorted(set(keep))
    if not keep:
        raise ArgumentError("keep must name at least one subsystem")
    if keep[0] < 0 or keep[-1] >= n:
        raise ArgumentError(f"subsystem indices {keep} out of range for {n} parties")
    drop = [i for i in range(n) if i not in keep]
    dk = prod(dims[i] for i in keep)
    dt = prod(dims[i] for i in drop)
    t = np.asarray(m).reshape(dims + dims)
    perm = keep + drop + [n + i for i in keep] + [n + i for i in drop]
    t = t.transpose(perm).reshape(dk, dt, dk, dt)
    return np.einsum("ajbj->ab", t)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = sorted(set(keep))
    out = partial_trace_matrix(rho.matrix, rho.dims, keep)
    return DensityMatrix(out, tuple(rho.dims[i] for i in keep), tol=rho.tol, validate=False)


def permute_subsystems(m: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors so that new factor ``k`` is old factor ``order[k]``."""
    dims = tuple(dims)
    n = len(dims)
    t = np.asarray(m).reshape(dims + dims)
    t = t.transpose(list(order) + [n + i for i in order])
    side = prod(dims)
    return t.reshape(side, side)


def apply_kraus(rho: DensityMatrix | np.ndarray, ops: Sequence[np.ndarray],
                target: Sequence[int], dims: Sequence[int] | None = None,
                tol: Tolerances = DEFAULT) -> tuple[np.ndarray, float]:
    """Apply ``sum_k (I (x) K_k) rho (I (x) K_k)^dagger`` on the ``target`` subsystems.

    The target factors are merged into one output factor of dimension
    ``ops[0].shape[0]`` placed where the first target factor was; an output
    factor of dimension 1 disappears.  Returns the unnormalized matrix and
    its trace.
    """
    if isinstance(rho, DensityMatrix):
        m, dims = rho.matrix, rho.dims
    else:
        if dims is None:
            raise ArgumentError("dims are required for a bare matrix")
        m = np.asarray(rho)
    dims = tuple(dims)
    n = len(dims)
    target = list(target)
    if not target or len(set(target)) != len(target) or min(target) < 0 or max(target) >= n:
        raise ArgumentError(f"invalid target subsystems {target}")
    if not ops:
        raise ArgumentError("at least one Kraus operator is required")
    d_in = prod(dims[i] for i in target)
    ops = [np.asarray(k, dtype=np.complex128) for k in ops]
    d_out = ops[0].shape[0]
    for k in ops:
        if k.ndim != 2 or k.shape != (d_out, d_in):
            raise ArgumentError(f"Kraus operator shape {k.shape} does not map dimension {d_in} to {d_out}")
    rest = [i for i in range(n) if i not in target]
    d_rest = prod(dims[i] for i in rest)
    if d_rest * d_out > tol.max_matrix_side:
        raise SizeError(f"output side {d_rest * d_out} exceeds cap {tol.max_matrix_side}")
    t = permute_subsystems(m, dims, rest + target).reshape(d_rest, d_in, d_rest, d_in)
    out = np.zeros((d_rest, d_out, d_rest, d_out), dtype=np.complex128)
    for k in ops:
        out += np.einsum("ri,aibj,sj->arbs", k, t, k.conj(), optimize=True)
    out = out.reshape(d_rest * d_out, d_rest * d_out)
    if d_out > 1:
        # move the output factor back to the position of the first target factor
        new_dims = [dims[i] for i in rest] + [d_out]
        pos = sum(1 for i in rest if i < target[0])
        order = list(range(pos)) + [len(rest)] + list(range(pos, len(rest)))
        out = permute_subsystems(out, new_dims, order)
    weight = float(np.trace(out).real)
    if weight < tol.kraus_weight or weight < tol.degenerate:
        raise DegenerateError(f"map annihilated the state (weight {weight:.3e})")
    return out, weight


def kraus_output_dims(dims: Sequence[int], target: Sequence[int], d_out: int) -> tuple[int, ...]:
    rest = [i for i in range(len(dims)) if i not in target]
    out = [dims[i] for i in rest]
    if d_out > 1:
        pos = sum(1 for i in rest if i < target[0])
        out.insert(pos, d_out)
    return tuple(out)


def _round_robin(m: int) -> list[list[tuple[int, int]]]:
    # circle method: m-1 rounds of m/2 disjoint pairs covering every pair once
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        rounds.append([(players[i], players[m - 1 - i]) for i in range(m // 2)])
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigvalsh(m: np.ndarray, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    that the disjoint rotations of a round are applied together.  Stops when
    the off-diagonal Frobenius norm drops below ``tol.jacobi_offdiag`` or
    after ``tol.jacobi_max_sweeps`` sweeps.  Returned in ascending order.
    """
    a = np.array(m, dtype=np.complex128, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ArgumentError("eigenvalues need a square matrix")
    n = a.shape[0]
    if n and np.max(np.abs(a - a.conj().T)) > tol.hermitian:
        raise ArgumentError("matrix is not Hermitian")
    a = (a + a.conj().T) / 2
    if n <= 1:
        return np.sort(np.diag(a).real)
    rounds = []
    for r in _round_robin(n + n % 2):
        pairs = np.array([(p, q) for p, q in r if p < n and q < n])
        if len(pairs):
            rounds.append((pairs[:, 0], pairs[:, 1]))
    for _ in range(tol.jacobi_max_sweeps):
        off = np.sqrt(max(np.sum(np.abs(a) ** 2) - np.sum(np.abs(np.diag(a)) ** 2), 0.0))
        if off <= tol.jacobi_offdiag:
            break
        for p, q in rounds:
            apq = a[p, q]
            b = np.abs(apq)
            live = b > 1e-300
            if not live.any():
                continue
            p, q, apq, b = p[live], q[live], apq[live], b[live]
            phase = apq.conj() / b
            theta = (a[q, q].real - a[p, p].real) / (2 * b)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1 / np.sqrt(t ** 2 + 1)
            s = t * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = ap * c - aq * (s * phase)
            a[:, q] = ap * s + aq * (c * phase)
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - (s * phase.conj())[:, None] * rq
            a[q, :] = s[:, None] * rp + (c * phase.conj())[:, None] * rq
        a = (a + a.conj().T) / 2
    return np.sort(np.diag(a).real)


def hermitian_eigen_min(m: np.ndarray, tol: Tolerances = DEFAULT) -> float:
    return float(jacobi_eigvalsh(m, tol)[0])


def fidelity_with_pure(rho: DensityMatrix, psi: Ket) -> float:
    """``<psi| rho |psi>`` for a normalized ket."""
    if psi.dim != rho.side:
        raise ArgumentError(f"ket dimension {psi.dim} does not match state side {rho.side}")
    if not psi.normalized:
        raise ArgumentError("fidelity needs a normalized ket")
    v = psi.amplitudes
    return float(np.vdot(v, rho.matrix @ v).real)
