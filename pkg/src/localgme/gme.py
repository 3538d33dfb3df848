"""Genuine multipartite entanglement certification for N-qubit states."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ArgumentError
from .linalg import DensityMatrix
from .states import FamilyParams, project_qubit_subspace


@dataclass(frozen=True)
class GMEReport:
    score: float
    witness_index: int
    z_abs: float
    w_i: float
    certified: bool

    def as_dict(self) -> dict:
        return asdict(self)


def gme_score(rho: DensityMatrix) -> GMEReport:
    """Concurrence lower bound ``2 max_i (|z_i| - w_i)``.

    Pairs are read along the antidiagonal: for ``i = 1 .. 2^(N-1)``,
    ``c_i = rho[i-1, i-1]``, ``d_i = rho[2^N - i, 2^N - i]`` and
    ``z_i = rho[i-1, 2^N - i]``; ``w_i = sum_{j != i} sqrt(c_j d_j)``.
    Ties go to the smallest ``i``.  Negative scores are returned unclamped.
    """
    if any(d != 2 for d in rho.dims):
        raise ArgumentError(f"GME score needs qubits, got dims {rho.dims}")
    m = rho.matrix
    size = m.shape[0]
    half = size // 2
    i = np.arange(half)
    c = np.clip(m[i, i].real, 0, None)
    d = np.clip(m[size - 1 - i, size - 1 - i].real, 0, None)
    z = np.abs(m[i, size - 1 - i])
    root = np.sqrt(c * d)
    w = root.sum() - root
    vals = z - w
    k = int(np.argmax(vals))
    score = float(2 * vals[k])
    return GMEReport(score, k + 1, float(z[k]), float(w[k]), score > 0)


def gme_margin(n: int, alpha: float) -> float:
    """``alpha^N + ((1+alpha)/2)^N + ((1-alpha)/2)^N - 1``."""
    if n < 2:
        raise ArgumentError("need n >= 2")
    if not 0 <= alpha <= 1:
        raise ArgumentError(f"alpha={alpha} outside [0, 1]")
    return alpha ** n + ((1 + alpha) / 2) ** n + ((1 - alpha) / 2) ** n - 1


def analytic_concurrence(n: int, p: FamilyParams) -> float:
    if n < 2:
        raise ArgumentError("need n >= 2")
    x = p.alpha * np.cos(2 * p.theta)
    num = 2 * np.sin(2 * p.theta) ** n * gme_margin(n, p.alpha)
    return float(num / ((1 + x) ** n + (1 - x) ** n))


def certify_gme(rho: DensityMatrix) -> tuple[GMEReport, float]:
    """Score a state, going through the qubit-subspace projection for higher local dimension.

    A local projection onto span{|0>, |1>} is a stochastic local operation,
    which cannot create GME, so a positive score of the projected state
    certifies the original.  Returns the report and the projection's success
    probability (1 for qubit input).
    """
    if all(d == 2 for d in rho.dims):
        return gme_score(rho), 1.0
    projected, w = project_qubit_subspace(rho, rho.tol)
    return gme_score(projected), w
