"""Constructors for the two-qubit family, star-network states and their filtered forms."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from math import comb, prod
from typing import Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .errors import ArgumentError, DegenerateError, NoSolutionError, SizeError
from .linalg import (DensityMatrix, Ket, apply_kraus, kron_all, partial_trace,
                     partial_trace_matrix, permute_subsystems)

log = logging.getLogger(__name__)

QUARTER_PI = np.pi / 4
# fast path is used when the center map touches at most this many basis states
_FAST_SUPPORT = 256


@dataclass(frozen=True)
class FamilyParams:
    alpha: float
    theta: float

    def __post_init__(self):
        a, t = float(self.alpha), float(self.theta)
        if not (np.isfinite(a) and np.isfinite(t)):
            raise ArgumentError("alpha and theta must be finite")
        if not 0.0 <= a <= 1.0:
            raise ArgumentError(f"alpha={a} outside [0, 1]")
        if not -1e-12 <= t <= QUARTER_PI + 1e-12:
            raise ArgumentError(f"theta={t} outside [0, pi/4]")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "theta", min(max(t, 0.0), QUARTER_PI))


def psi_theta(theta: float) -> Ket:
    c, s = np.cos(theta), np.sin(theta)
    return Ket(np.array([c, 0, 0, s]))


def rho_alpha_theta(p: FamilyParams) -> DensityMatrix:
    """``alpha |psi_theta><psi_theta| + (1 - alpha) rho_A (x) I/2``."""
    pure = psi_theta(p.theta).projector()
    rho_a = partial_trace_matrix(pure, (2, 2), [0])
    m = p.alpha * pure + (1 - p.alpha) * np.kron(rho_a, np.eye(2) / 2)
    return DensityMatrix(m, (2, 2))


def is_entangled_family(p: FamilyParams) -> bool:
    return p.theta > 0 and p.alpha > 1 / 3


def unsteerability_bound(alpha: float) -> float:
    """Right-hand side ``(2a - 1) / ((2 - a) a^3)`` of the unsteerability condition."""
    if alpha <= 0:
        return -np.inf
    return (2 * alpha - 1) / ((2 - alpha) * alpha ** 3)


def is_unsteerable_family(p: FamilyParams, tol: Tolerances = DEFAULT) -> bool:
    """Projective-measurement unsteerability from A to B.

    ``alpha = 0`` is reported unsteerable (the bound tends to -inf and the
    state is a product anyway).
    """
    if p.alpha == 0:
        return True
    return np.cos(2 * p.theta) ** 2 >= unsteerability_bound(p.alpha) - tol.unsteerable_slack


def saturating_theta(alpha: float, tol: Tolerances = DEFAULT) -> float:
    """The theta in [0, pi/4] at which the unsteerability condition holds with equality."""
    bound = unsteerability_bound(alpha)
    if not 0.0 <= bound <= 1.0:
        raise NoSolutionError(f"no saturating theta for alpha={alpha} (bound {bound:.6g})")
    if bound == 0.0:
        return QUARTER_PI
    if bound == 1.0:
        return 0.0
    # bisection on t = cos(2 theta); hi always satisfies t^2 >= bound
    lo, hi = 0.0, 1.0
    for _ in range(tol.bisection_max_iter):
        mid = (lo + hi) / 2
        if mid * mid >= bound:
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol.bisection_tol:
            break
    return float(np.arccos(hi) / 2)


def ghz_ket(n: int) -> Ket:
    if n < 2:
        raise ArgumentError("GHZ state needs n >= 2")
    v = np.zeros(2 ** n, dtype=np.complex128)
    v[0] = v[-1] = 1 / np.sqrt(2)
    return Ket(v)


def ghz_projector_map(n: int, output_qubit: bool = False) -> list[np.ndarray]:
    """Kraus list ``[F]`` with ``F = |0>(<0...0| + <1...1|)``.

    By default ``F`` is the ``1 x 2^n`` row (the output space is trivial and
    disappears from the result).  With ``output_qubit`` the output is a
    qubit, so the center can be kept as a party.
    """
    if n < 2:
        raise ArgumentError("F_B needs n >= 2")
    f = np.zeros((2 if output_qubit else 1, 2 ** n), dtype=np.complex128)
    f[0, 0] = f[0, -1] = 1.0
    return [f]


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Star network: arm ``i`` is a state on ``A_i (x) B_i``; ``center_map`` acts on all ``B``."""

    arm_states: tuple[DensityMatrix, ...]
    center_map: tuple[np.ndarray, ...]
    keep_center: bool = False
    n_parties: int | None = None

    def __post_init__(self):
        arms = tuple(self.arm_states)
        kraus = tuple(np.asarray(k, dtype=np.complex128) for k in self.center_map)
        object.__setattr__(self, "arm_states", arms)
        object.__setattr__(self, "center_map", kraus)
        n = len(arms)
        if self.n_parties is None:
            object.__setattr__(self, "n_parties", n)
        elif self.n_parties != n:
            raise ArgumentError(f"n_parties={self.n_parties} but {n} arm states given")
        if n < 2:
            raise ArgumentError("a star network needs at least 2 arms")
        for rho in arms:
            if rho.n_parties != 2:
                raise ArgumentError("each arm state must be bipartite")
        if not kraus:
            raise ArgumentError("center map needs at least one Kraus operator")
        d_b = self.b_dim
        for k in kraus:
            if k.ndim != 2 or k.shape[1] != d_b or k.shape[0] != kraus[0].shape[0]:
                raise ArgumentError(f"Kraus operator shape {k.shape} incompatible with B dimension {d_b}")
        if self.keep_center and self.out_dim < 2:
            raise ArgumentError("keep_center needs a center map with output dimension >= 2")

    @classmethod
    def uniform(cls, arm: DensityMatrix, n: int, center_map: Sequence[np.ndarray],
                keep_center: bool = False) -> "NetworkSpec":
        return cls(tuple([arm] * n), tuple(center_map), keep_center)

    @property
    def a_dims(self) -> tuple[int, ...]:
        return tuple(r.dims[0] for r in self.arm_states)

    @property
    def b_dims(self) -> tuple[int, ...]:
        return tuple(r.dims[1] for r in self.arm_states)

    @property
    def b_dim(self) -> int:
        return prod(self.b_dims)

    @property
    def out_dim(self) -> int:
        return self.center_map[0].shape[0]


def _center_support(kraus: Sequence[np.ndarray]) -> np.ndarray:
    cols = np.zeros(kraus[0].shape[1], dtype=bool)
    for k in kraus:
        cols |= np.any(k != 0, axis=0)
    return np.flatnonzero(cols)


def _star_fast(spec: NetworkSpec, support: np.ndarray) -> np.ndarray:
    # <b|rho^{(x)N}|b'>_B factorizes into per-arm A-blocks <b_i|rho_i|b'_i>
    blocks = [r.matrix.reshape(r.dims[0], r.dims[1], r.dims[0], r.dims[1])
              for r in spec.arm_states]
    digits = np.array(np.unravel_index(support, spec.b_dims)).T
    cols = np.stack([k[:, support] for k in spec.center_map])  # (kraus, out, S)
    d_a = prod(spec.a_dims)
    d_out = spec.out_dim if spec.keep_center else 1
    out = np.zeros((d_a, d_out, d_a, d_out), dtype=np.complex128)
    for u, bu in enumerate(digits):
        for v, bv in enumerate(digits):
            coeff = np.einsum("kr,ks->rs", cols[:, :, u], cols[:, :, v].conj())
            if not spec.keep_center:
                coeff = np.trace(coeff).reshape(1, 1)
            if not np.any(coeff):
                continue
            a_block = kron_all([blk[:, i, :, j] for blk, i, j in zip(blocks, bu, bv)])
            out += np.einsum("ab,rs->arbs", a_block, coeff)
    return out.reshape(d_a * d_out, d_a * d_out)


def _star_brute(spec: NetworkSpec, tol: Tolerances) -> np.ndarray:
    n = spec.n_parties
    big = kron_all([r.matrix for r in spec.arm_states], tol)
    dims = [d for r in spec.arm_states for d in r.dims]  # A1 B1 A2 B2 ...
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    big = permute_subsystems(big, dims, order)
    dims = [dims[i] for i in order]
    out, _ = apply_kraus(big, list(spec.center_map), list(range(n, 2 * n)), dims=dims, tol=tol)
    if spec.out_dim > 1 and not spec.keep_center:
        out = partial_trace_matrix(out, list(spec.a_dims) + [spec.out_dim], range(n))
    return out


def star_network_state(spec: NetworkSpec, method: str = "auto",
                       tol: Tolerances = DEFAULT) -> tuple[DensityMatrix, float]:
    """Normalized ``Tr_B[(I (x) Lambda_B)(rho_1 (x) ... (x) rho_N)]`` and its normalization.

    Parties are ordered ``A_1 ... A_N`` (then the center, when kept).
    ``method`` is ``"fast"`` (per-arm block products), ``"brute"``
    (materialize the full product state) or ``"auto"``.
    """
    d_a = prod(spec.a_dims)
    d_out = spec.out_dim if spec.keep_center else 1
    if d_a * d_out > tol.max_matrix_side:
        raise SizeError(f"output side {d_a * d_out} exceeds cap {tol.max_matrix_side}")
    support = _center_support(spec.center_map)
    if method == "auto":
        method = "fast" if len(support) <= _FAST_SUPPORT else "brute"
    if method == "fast":
        out = _star_fast(spec, support)
    elif method == "brute":
        out = _star_brute(spec, tol)
    else:
        raise ArgumentError(f"unknown method {method!r}")
    norm = float(np.trace(out).real)
    if norm < tol.degenerate:
        raise DegenerateError(f"center map annihilated the network state (N={norm:.3e})")
    dims = spec.a_dims + ((spec.out_dim,) if spec.keep_center else ())
    return DensityMatrix(out / norm, dims, tol=tol), norm


@dataclass(frozen=True, eq=False)
class XMatrixState:
    """N-qubit state with a real diagonal and one corner coupling ``|0...0><1...1|``."""

    n_qubits: int
    diagonal: np.ndarray
    corner: complex
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        d = np.array(self.diagonal, dtype=float, copy=True)
        d.setflags(write=False)
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "corner", complex(self.corner))
        if d.shape != (2 ** self.n_qubits,):
            raise ArgumentError(f"diagonal needs 2^{self.n_qubits} entries")
        if d.min() < -1e-12:
            raise ArgumentError("negative diagonal entry")
        if abs(d.sum() - 1) > self.tol.trace:
            raise ArgumentError(f"diagonal sums to {d.sum()!r}")
        if abs(self.corner) ** 2 > d[0] * d[-1] + 1e-10:
            raise ArgumentError("corner too large for a positive X-matrix")

    def to_matrix(self) -> np.ndarray:
        m = np.diag(self.diagonal).astype(np.complex128)
        m[0, -1] = self.corner
        m[-1, 0] = np.conj(self.corner)
        return m

    def to_density(self) -> DensityMatrix:
        return DensityMatrix(self.to_matrix(), (2,) * self.n_qubits, tol=self.tol)


def _popcounts(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return np.array([bin(i).count("1") for i in idx])


def gamma_weights(n: int, p: FamilyParams) -> np.ndarray:
    """Unnormalized diagonal weight of a bitstring with ``m`` ones, for m = 0..n."""
    c2, s2 = np.cos(p.theta) ** 2, np.sin(p.theta) ** 2
    hi, lo = (1 + p.alpha) / 2, (1 - p.alpha) / 2
    m = np.arange(n + 1)
    return c2 ** (n - m) * s2 ** m * (hi ** (n - m) * lo ** m + hi ** m * lo ** (n - m))


def filter_trace(n: int, p: FamilyParams) -> float:
    """``Tr[rho_F] = [(1 + a cos 2t)/2]^N + [(1 - a cos 2t)/2]^N``."""
    x = p.alpha * np.cos(2 * p.theta)
    return float(((1 + x) / 2) ** n + ((1 - x) / 2) ** n)


def x_matrix_state(n: int, p: FamilyParams, tol: Tolerances = DEFAULT) -> XMatrixState:
    if n < 2:
        raise ArgumentError("need n >= 2")
    tr = filter_trace(n, p)
    if tr < tol.degenerate:
        raise DegenerateError("zero normalization")
    diag = gamma_weights(n, p)[_popcounts(n)] / tr
    corner = (p.alpha * np.cos(p.theta) * np.sin(p.theta)) ** n / tr
    return XMatrixState(n, diag, corner, tol)


def _qubit_indices_in_qutrits(n: int, positions: Sequence[int]) -> np.ndarray:
    """Qutrit-basis index of each qubit string on ``positions`` with level 2 elsewhere."""
    j = len(positions)
    idx = np.zeros(2 ** j, dtype=np.int64)
    bits = (np.arange(2 ** j)[:, None] >> np.arange(j - 1, -1, -1)[None, :]) & 1
    for party in range(n):
        weight = 3 ** (n - 1 - party)
        if party in positions:
            idx += bits[:, positions.index(party)] * weight
        else:
            idx += 2 * weight
    return idx


def symmetrized_placement(op: np.ndarray, j: int, n: int) -> np.ndarray:
    """Sum of ``op (x) |2><2|^{(x) n-j}`` over the distinct arrangements of the parties.

    ``op`` acts on ``j`` qubits and must be permutation symmetric; each
    distinct arrangement is then fixed by which ``j`` of the ``n`` parties
    carry ``op`` (``C(n, j)`` terms, each counted once).
    """
    out = np.zeros((3 ** n, 3 ** n), dtype=np.complex128)
    for pos in combinations(range(n), j):
        idx = _qubit_indices_in_qutrits(n, list(pos))
        out[np.ix_(idx, idx)] += op
    return out


def rho_gme_qutrit(n: int, p: FamilyParams, tol: Tolerances = DEFAULT) -> DensityMatrix:
    """POVM-local extension of the star-network state onto qutrits (levels 0, 1, 2)."""
    if n < 2:
        raise ArgumentError("need n >= 2")
    if 3 ** n > tol.max_matrix_side:
        raise SizeError(f"3^{n} exceeds cap {tol.max_matrix_side}")
    full = x_matrix_state(n, p, tol).to_density()
    out = symmetrized_placement(full.matrix, n, n)
    for j in range(n):
        marginal = np.ones((1, 1)) if j == 0 else partial_trace(full, range(j)).matrix
        out += symmetrized_placement(marginal, j, n)
    out /= 2 ** n
    tr = np.trace(out).real
    if abs(tr - 1) > tol.trace:
        log.warning("rho_GME trace %.15g under distinct-arrangement symmetrizer; renormalizing", tr)
        out /= tr
    return DensityMatrix(out, (3,) * n, tol=tol)


def qubit_subspace_block(rho: DensityMatrix) -> np.ndarray:
    """Unnormalized block of ``rho`` on span{|0>, |1>} of every party."""
    idx = np.arange(2 ** rho.n_parties)
    bits = (idx[:, None] >> np.arange(rho.n_parties - 1, -1, -1)[None, :]) & 1
    strides = np.array([prod(rho.dims[k + 1:]) for k in range(rho.n_parties)])
    full_idx = bits @ strides
    return rho.matrix[np.ix_(full_idx, full_idx)]


def project_qubit_subspace(rho: DensityMatrix, tol: Tolerances = DEFAULT) -> tuple[DensityMatrix, float]:
    """Local projection of every party onto span{|0>, |1>}; returns state and success probability."""
    block = qubit_subspace_block(rho)
    w = float(np.trace(block).real)
    if w < tol.degenerate:
        raise DegenerateError("state has no weight on the qubit subspace")
    return DensityMatrix(block / w, (2,) * rho.n_parties, tol=tol), w


def local_filter(eps: float, dim: int) -> np.ndarray:
    """``G_eps = eps|0><0| + |1><1|``, zero on any further levels."""
    g = np.zeros((dim, dim))
    g[0, 0], g[1, 1] = eps, 1.0
    return g


def apply_local_filter(rho: DensityMatrix, eps: float,
                       tol: Tolerances = DEFAULT) -> tuple[DensityMatrix, float]:
    """Filter every party with ``G_eps`` and renormalize; returns (state, success probability)."""
    if not 0 < eps <= 1:
        raise ArgumentError(f"eps={eps} outside (0, 1]")
    g = np.ones(1)
    for d in rho.dims:
        g = np.kron(g, np.diag(local_filter(eps, d)))
    out = g[:, None] * rho.matrix * g[None, :]
    w = float(np.trace(out).real)
    if not w > tol.filter_min_success:
        raise DegenerateError(f"filter annihilated the state (success probability {w:.3e})")
    return DensityMatrix(out / w, rho.dims, tol=tol), w


def analytic_filtered_state(n: int, p: FamilyParams, tol: Tolerances = DEFAULT) -> XMatrixState:
    """Closed form of the star-network state filtered with ``eps = tan(theta)``."""
    if n < 2:
        raise ArgumentError("need n >= 2")
    hi, lo = (1 + p.alpha) / 2, (1 - p.alpha) / 2
    m = np.arange(n + 1)
    gp = hi ** (n - m) * lo ** m + hi ** m * lo ** (n - m)
    return XMatrixState(n, gp[_popcounts(n)] / 2, p.alpha ** n / 2, tol)


def ghz_fidelity_formula(n: int, alpha: float) -> float:
    return 0.5 * (alpha ** n + ((1 + alpha) / 2) ** n + ((1 - alpha) / 2) ** n)


def binomial_trace_check(n: int, p: FamilyParams) -> float:
    """``sum_m C(n, m) gamma(m)``, which should equal :func:`filter_trace`."""
    return float(sum(comb(n, m) * g for m, g in enumerate(gamma_weights(n, p))))
