"""Lifting bipartite local-hidden-state models to fully local star-network models.

Each arm ``i`` contributes an LHS model: ``lambda_i ~ q``, a hidden state
``sigma_lambda`` for the center side and a response ``p(a|x, lambda)`` for
party ``A_i``.  The lifted model draws the ``lambda_i`` independently and
reweights them by ``Tr[Lambda_B(sigma_1 (x) ... (x) sigma_N)]``; party
``A_i`` keeps its arm response.  Expectations under the reweighted density
are estimated by self-normalized importance sampling.
"""

from __future__ import annotations

import logging
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .correlations import Behavior, MeasurementAssignment, PAULI, bloch_of, projective_qubit
from .errors import ArgumentError, DegenerateError
from .linalg import DensityMatrix, partial_trace_matrix
from .states import FamilyParams, rho_alpha_theta

log = logging.getLogger(__name__)

DEFAULT_CHUNKS = 64
MIN_ESS = 100


class LHSModel:
    """Plug-in contract for a local-hidden-state model of one bipartite state.

    Subclasses implement :meth:`sample`, :meth:`hidden_states` and
    :meth:`response`.  ``response`` sees only the hidden variables of its own
    arm and the operators of one local measurement, never anything else.
    """

    hidden_dim: int = 2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def hidden_states(self, lam: np.ndarray) -> np.ndarray:
        """``sigma_lambda`` for a batch, shape ``(S, d, d)``."""
        raise NotImplementedError

    def response(self, lam: np.ndarray, ops: np.ndarray) -> np.ndarray:
        """``p(a | x, lambda)`` for a batch and one measurement ``ops[a]``, shape ``(S, n_outcomes)``."""
        raise NotImplementedError


class WernerPointLHS(LHSModel):
    """LHS model of ``rho_{1/2, pi/4} = |phi+><phi+|/2 + I/8``.

    ``lambda`` is uniform on the Bloch sphere, ``sigma_lambda`` the pure
    state along it.  For a projective measurement with Bloch vector ``n``,
    outcome 0 occurs iff ``n' . lambda > 0`` where ``n'`` is ``n`` reflected
    in the x-z plane (``|phi+>`` steers to transposed operators).
    """

    name = "werner"
    reflect = np.array([1.0, -1.0, 1.0])

    def sample(self, rng, size):
        v = rng.standard_normal((size, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def hidden_states(self, lam):
        return (np.eye(2) + np.einsum("sk,kij->sij", lam, PAULI)) / 2

    def response(self, lam, ops):
        ops = np.asarray(ops)
        if ops.shape != (2, 2, 2):
            raise ArgumentError("the built-in model answers two-outcome qubit measurements only")
        n = bloch_of(ops[0])
        if abs(np.linalg.norm(n) - 1) > 1e-9 or np.max(np.abs(ops[0] - projective_qubit(n / np.linalg.norm(n))[0])) > 1e-9:
            raise ArgumentError("the built-in model answers projective measurements only")
        first = (lam @ (self.reflect * n)) > 0
        return np.stack([first, ~first], axis=1).astype(float)


class FiniteLHS(LHSModel):
    """Mixture of finitely many ``(q_k, sigma_k, p_k(a|x))`` for a fixed list of measurements."""

    def __init__(self, weights, hidden_states, measurements, responses, name="finite"):
        self.weights = np.asarray(weights, dtype=float)
        self.states = np.asarray(hidden_states, dtype=np.complex128)
        self.measurements = [np.asarray(m, dtype=np.complex128) for m in measurements]
        self.responses = np.asarray(responses, dtype=float)  # (K, n_inputs, n_outcomes)
        self.name = name
        k = len(self.weights)
        if self.weights.min() < 0 or abs(self.weights.sum() - 1) > 1e-12:
            raise ArgumentError("mixture weights must be a probability vector")
        if self.states.shape[0] != k or self.responses.shape[:2] != (k, len(self.measurements)):
            raise ArgumentError("hidden states and response tables must match the number of weights")
        for s in self.states:
            DensityMatrix(s, (s.shape[0],))
        if np.max(np.abs(self.responses.sum(axis=2) - 1)) > 1e-12 or self.responses.min() < 0:
            raise ArgumentError("response tables must be probability distributions")
        self.hidden_dim = self.states.shape[1]

    def sample(self, rng, size):
        return rng.choice(len(self.weights), size=size, p=self.weights)

    def hidden_states(self, lam):
        return self.states[lam]

    def response(self, lam, ops):
        ops = np.asarray(ops)
        for x, m in enumerate(self.measurements):
            if m.shape == ops.shape and np.max(np.abs(m - ops)) < 1e-9:
                return self.responses[lam, x]
        raise ArgumentError("measurement is not covered by this finite model")

    @classmethod
    def from_dict(cls, d: dict) -> "FiniteLHS":
        def cm(entries):
            a = np.asarray(entries, dtype=float)
            return a[..., 0] + 1j * a[..., 1]
        return cls(d["weights"], cm(d["hidden_states"]), [cm(m) for m in d["measurements"]],
                   d["responses"], d.get("name", "finite"))


@lru_cache(maxsize=None)
def builtin_werner_lhs(validate: bool = True, samples: int = 10 ** 6, seed: int = 20150601) -> WernerPointLHS:
    """The built-in model, checked against ``rho_{1/2, pi/4}`` by sampling on construction."""
    model = WernerPointLHS()
    if validate:
        rho = rho_alpha_theta(FamilyParams(0.5, np.pi / 4))
        dirs = [[0, 0, 1], [1, 0, 0], [0, 1, 0], np.ones(3) / np.sqrt(3)]
        report = check_lhs_identity(model, rho, [projective_qubit(v) for v in dirs], samples, seed)
        if not report["passed"]:
            raise ArgumentError(f"built-in LHS model failed its identity check: {report}")
    return model


def assemblage(rho: DensityMatrix, ops: np.ndarray) -> np.ndarray:
    """``Tr_A[(M_a (x) I) rho]`` for every outcome ``a``."""
    da, db = rho.dims
    t = rho.matrix.reshape(da, db, da, db)
    return np.einsum("aji,ibjc->abc", ops, t)


def check_lhs_identity(model: LHSModel, rho: DensityMatrix, measurements: Sequence[np.ndarray],
                       samples: int, seed: int, n_sigma: float = 3.0) -> dict:
    """Compare ``Tr_A[(M_a (x) I) rho]`` with the sampled ``E[p(a|x, lambda) sigma_lambda]``.

    Every real and imaginary entry must lie within ``n_sigma`` standard
    errors; entries whose sample variance vanishes must match to 1e-12.
    The unconditioned average ``E[sigma_lambda]`` is checked against
    ``Tr_A rho`` the same way.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    lam = model.sample(rng, samples)
    sig = model.hidden_states(lam)
    worst = 0.0
    ok = True

    def compare(target, per_sample):
        nonlocal worst, ok
        for part in (np.real, np.imag):
            vals = part(per_sample)
            mean = vals.mean(axis=0)
            se = vals.std(axis=0, ddof=1) / np.sqrt(samples)
            dev = np.abs(mean - part(target))
            zero = se == 0
            if np.any(dev[zero] > 1e-12):
                ok = False
            z = dev[~zero] / se[~zero]
            if z.size:
                worst = max(worst, float(z.max()))
                ok &= bool(np.all(z <= n_sigma))

    compare(partial_trace_matrix(rho.matrix, rho.dims, [1]), sig)
    for ops in measurements:
        target = assemblage(rho, ops)
        resp = model.response(lam, ops)
        for a in range(len(ops)):
            compare(target[a], resp[:, a, None, None] * sig)
    return {"passed": ok, "max_z": worst, "samples": samples, "seed": seed}


def _letters(k: int) -> list[str]:
    return list(string.ascii_letters[:k])


def _product_trace(op: np.ndarray, sigmas: Sequence[np.ndarray], dims: Sequence[int]) -> np.ndarray:
    """``Tr[(sigma_1 (x) ... (x) sigma_N) op]`` for batches ``sigma_i`` of shape ``(S, d_i, d_i)``."""
    n = len(sigmas)
    ls = _letters(2 * n + 1)
    rows, cols, s = ls[:n], ls[n:2 * n], ls[-1]
    op_t = op.reshape(tuple(dims) * 2)
    terms = [s + rows[k] + cols[k] for k in range(n)] + ["".join(cols + rows)]
    return np.einsum(",".join(terms) + "->" + s, *sigmas, op_t, optimize=True)


@dataclass(frozen=True, eq=False)
class LiftedModel:
    arm_models: tuple[LHSModel, ...]
    center_map: tuple[np.ndarray, ...]
    keep_center: bool = False
    _effect: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        arms = tuple(self.arm_models)
        kraus = tuple(np.asarray(k, dtype=np.complex128) for k in self.center_map)
        object.__setattr__(self, "arm_models", arms)
        object.__setattr__(self, "center_map", kraus)
        if len(arms) < 2:
            raise ArgumentError("lifting needs at least two arms")
        d_b = int(np.prod(self.b_dims))
        for k in kraus:
            if k.ndim != 2 or k.shape[1] != d_b:
                raise ArgumentError(f"Kraus operator shape {k.shape} incompatible with B dimension {d_b}")
        if self.keep_center and self.out_dim < 2:
            raise ArgumentError("keep_center needs an output dimension >= 2")
        object.__setattr__(self, "_effect", sum(k.conj().T @ k for k in kraus))

    @property
    def n_parties(self) -> int:
        return len(self.arm_models)

    @property
    def b_dims(self) -> tuple[int, ...]:
        return tuple(m.hidden_dim for m in self.arm_models)

    @property
    def out_dim(self) -> int:
        return self.center_map[0].shape[0]

    def weight(self, sigmas: Sequence[np.ndarray]) -> np.ndarray:
        """``Tr[Lambda_B(sigma_1 (x) ... (x) sigma_N)]`` per sample."""
        return _product_trace(self._effect, sigmas, self.b_dims).real

    def dual_effect(self, op: np.ndarray) -> np.ndarray:
        """``Lambda_B^*(M) = sum_k K_k^dagger M K_k``."""
        return sum(k.conj().T @ op @ k for k in self.center_map)

    def center_state(self, sigmas: Sequence[np.ndarray]) -> DensityMatrix:
        """Normalized ``Lambda_B(sigma_1 (x) ... (x) sigma_N)`` for a single draw."""
        prod_state = sigmas[0]
        for s in sigmas[1:]:
            prod_state = np.kron(prod_state, s)
        out = sum(k @ prod_state @ k.conj().T for k in self.center_map)
        w = np.trace(out).real
        if w <= 0:
            raise DegenerateError("center map annihilates this hidden-state product")
        return DensityMatrix(out / w, (out.shape[0],))


def lift(arm_models: Sequence[LHSModel], center_map: Sequence[np.ndarray],
         keep_center: bool = False) -> LiftedModel:
    return LiftedModel(tuple(arm_models), tuple(center_map), keep_center)


@dataclass(frozen=True, eq=False)
class SimulationResult:
    behavior: Behavior
    stderr: np.ndarray
    seed: int
    samples: int
    n_chunks: int
    weight_mean: float
    weight_se: float
    ess: float
    warnings: tuple[str, ...] = ()


def _chunk_sizes(samples: int, n_chunks: int) -> list[int]:
    base, extra = divmod(samples, n_chunks)
    return [base + (i < extra) for i in range(n_chunks)]


def _run_chunk(model: LiftedModel, m: MeasurementAssignment, size: int,
               seq: np.random.SeedSequence) -> tuple[np.ndarray, float, float]:
    rng = np.random.Generator(np.random.Philox(seq))
    lams = [arm.sample(rng, size) for arm in model.arm_models]
    sigmas = [arm.hidden_states(lam) for arm, lam in zip(model.arm_models, lams)]
    w = model.weight(sigmas)
    if np.any(w < -1e-12):
        raise DegenerateError("negative importance weight; the center map is not positive")
    # each party's response sees only its own lambda and its own operators
    probs = []
    for arm, lam, ops in zip(model.arm_models, lams, m.ops[:model.n_parties]):
        probs.append(np.stack([arm.response(lam, ops[x]) for x in range(ops.shape[0])], axis=1))
    if model.keep_center:
        center_ops = m.ops[-1]
        c = np.empty((size,) + center_ops.shape[:2])
        for y in range(center_ops.shape[0]):
            for b in range(center_ops.shape[1]):
                c[:, y, b] = _product_trace(model.dual_effect(center_ops[y, b]), sigmas, model.b_dims).real
        probs.append(c)
        acc = np.ones(size)
    else:
        acc = w
    g = acc[:, None] * probs[0].reshape(size, -1)
    for pr in probs[1:-1]:
        g = (g[:, :, None] * pr.reshape(size, 1, -1)).reshape(size, -1)
    if len(probs) > 1:
        cells = g.T @ probs[-1].reshape(size, -1)
    else:
        cells = g.sum(axis=0)
    return cells.ravel(), float(w.sum()), float(w @ w)


def simulate_behavior(model: LiftedModel, m: MeasurementAssignment, samples: int,
                      seed: int = 0, n_chunks: int | None = None, workers: int = 1) -> SimulationResult:
    """Self-normalized importance-sampling estimate of the lifted model's ``p(a|x)``.

    Samples are split into ``n_chunks`` chunks, each with its own Philox
    stream spawned from ``seed``; chunk results are merged in chunk order,
    so the output is bit-reproducible for a fixed seed and chunk plan
    regardless of ``workers``.  Standard errors come from the delete-one-
    chunk jackknife.
    """
    n_meas = model.n_parties + (1 if model.keep_center else 0)
    if len(m.ops) != n_meas:
        raise ArgumentError(f"expected measurements for {n_meas} parties, got {len(m.ops)}")
    if model.keep_center and m.dims[-1] != model.out_dim:
        raise ArgumentError("center measurement dimension does not match the center map output")
    if samples < 2:
        raise ArgumentError("need at least 2 samples")
    warnings = []
    if samples < 10 ** 4:
        warnings.append(f"only {samples} samples; estimates are imprecise")
    n_chunks = n_chunks or min(DEFAULT_CHUNKS, samples)
    sizes = _chunk_sizes(samples, n_chunks)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda a: _run_chunk(model, m, *a), zip(sizes, seqs)))
    else:
        parts = [_run_chunk(model, m, sz, sq) for sz, sq in zip(sizes, seqs)]
    f_blocks = np.stack([p[0] for p in parts])
    w_blocks = np.array([p[1] for p in parts])
    w2 = sum(p[2] for p in parts)
    f_tot, w_tot = f_blocks.sum(axis=0), w_blocks.sum()
    if w_tot <= 0:
        raise DegenerateError("all importance weights vanished within the sampling budget")

    n = m.scenario.n_parties
    shape = []
    for ops in m.ops:
        shape += [ops.shape[0], ops.shape[1]]
    order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
    table = (f_tot / w_tot).reshape(shape).transpose(order)

    if n_chunks > 1:
        loo = (f_tot[None, :] - f_blocks) / (w_tot - w_blocks)[:, None]
        var = (n_chunks - 1) / n_chunks * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0)
        stderr = np.sqrt(var).reshape(shape).transpose(order)
    else:
        stderr = np.full(table.shape, np.nan)

    w_mean = w_tot / samples
    w_var = max(w2 / samples - w_mean ** 2, 0.0) * samples / (samples - 1)
    ess = w_tot ** 2 / w2 if w2 > 0 else 0.0
    if ess < MIN_ESS:
        warnings.append(f"effective sample size {ess:.1f} below {MIN_ESS}")
    for msg in warnings:
        log.warning(msg)
    behavior = Behavior(m.scenario, table, validate=False)
    return SimulationResult(behavior, stderr, seed, samples, n_chunks, float(w_mean),
                            float(np.sqrt(w_var / samples)), float(ess), tuple(warnings))


def compare_behaviors(sim: SimulationResult, target: Behavior, n_sigma: float = 3.0) -> dict:
    """Per-cell z-scores and per-input total-variation distance against the exact behavior.

    Aggregate TV is the mean over inputs ``x`` of ``1/2 sum_a |p_sim - p|``;
    aggregate SE is the mean over ``x`` of ``1/2 sum_a SE``.
    """
    n = target.scenario.n_parties
    dev = np.abs(sim.behavior.table - target.table)
    se = sim.stderr
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, dev / se, np.where(dev > 1e-12, np.inf, 0.0))
    out_axes = tuple(range(n, 2 * n))
    tv = 0.5 * dev.sum(axis=out_axes)
    agg_se = 0.5 * se.sum(axis=out_axes)
    exceed = int(np.sum(z > n_sigma))
    return {
        "max_z": float(z.max()),
        "cells": int(z.size),
        "cells_over": exceed,
        "per_cell_pass": exceed == 0,
        "tv": float(tv.mean()),
        "aggregate_se": float(agg_se.mean()),
        "tv_pass": bool(tv.mean() <= n_sigma * agg_se.mean()),
    }


def random_projective_settings(n_parties: int, n_inputs: int, rng: np.random.Generator) -> MeasurementAssignment:
    v = rng.standard_normal((n_parties, n_inputs, 3))
    v /= np.linalg.norm(v, axis=2, keepdims=True)
    return MeasurementAssignment.from_bloch(v)
