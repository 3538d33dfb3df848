"""Membership of behaviors in the fully local and hybrid (bipartition-local) polytopes.

Both sets are convex hulls of deterministic behaviors.  In the hybrid
class each side of a bipartition responds with an arbitrary deterministic
function of the inputs on its side, so signalling within a group is
allowed.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from math import prod
from typing import Sequence

import numpy as np

from . import simplex
from .config import DEFAULT, Tolerances
from .correlations import Behavior, Scenario, correlator, uniform_behavior
from .errors import ArgumentError, SizeError, SolverError

FULL_LOCAL = "full-local"
HYBRID = "hybrid"
MODEL_CLASSES = (FULL_LOCAL, HYBRID)


@dataclass(frozen=True, eq=False)
class VertexSet:
    scenario: Scenario
    model_class: str
    vertices: np.ndarray  # (K, n_cells) of 0/1, cells in Behavior layout
    bipartition: np.ndarray  # index into ``bipartitions`` per vertex; -1 for full-local
    bipartitions: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...] = ()

    def __len__(self) -> int:
        return self.vertices.shape[0]

    def behavior(self, k: int) -> Behavior:
        return Behavior.from_flat(self.scenario, self.vertices[k])


@dataclass(frozen=True, eq=False)
class LPCertificate:
    model_class: str
    visibility: float
    feasible_at_1: bool
    dual_functional: np.ndarray | None = None
    bound: float | None = None
    value: float | None = None  # functional evaluated on the behavior

    def as_dict(self) -> dict:
        return {
            "mode": self.model_class,
            "visibility": self.visibility,
            "feasible_at_1": self.feasible_at_1,
            "functional": None if self.dual_functional is None else self.dual_functional.tolist(),
            "bound": self.bound,
            "value": self.value,
        }


def bipartitions(n: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """All ``2^(n-1) - 1`` unordered splits into two nonempty groups."""
    out = []
    for size in range(1, n):
        for group in combinations(range(n), size):
            rest = tuple(k for k in range(n) if k not in group)
            if 0 in group:
                out.append((group, rest))
    return out


def _group_strategies(inputs: Sequence[int], outputs: Sequence[int]) -> np.ndarray:
    """All deterministic maps from joint group input to joint group output.

    Returns ``D[s, x_1..x_g, a_1..a_g]`` (one-hot over the outputs).
    """
    n_x, n_a = prod(inputs), prod(outputs)
    count = n_a ** n_x
    choice = np.array(list(product(range(n_a), repeat=n_x)), dtype=np.int64).reshape(count, n_x)
    d = np.zeros((count, n_x, n_a), dtype=np.uint8)
    d[np.arange(count)[:, None], np.arange(n_x)[None, :], choice] = 1
    return d.reshape((count,) + tuple(inputs) + tuple(outputs))


def vertex_count(scenario: Scenario, model_class: str) -> int:
    ins, outs = scenario.inputs_per_party, scenario.outputs_per_party
    if model_class == FULL_LOCAL:
        return prod(o ** x for x, o in zip(ins, outs))
    if model_class == HYBRID:
        total = 0
        for g, h in bipartitions(scenario.n_parties):
            total += prod(prod(outs[k] for k in grp) ** prod(ins[k] for k in grp) for grp in (g, h))
        return total
    raise ArgumentError(f"unknown model class {model_class!r}")


def _join(groups: Sequence[tuple[int, ...]], tables: Sequence[np.ndarray], n: int) -> np.ndarray:
    """Product of group tables ``D_g[s_g, x_g, a_g]`` rearranged into party order."""
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    xs = [next(letters) for _ in range(n)]
    as_ = [next(letters) for _ in range(n)]
    ss = [next(letters) for _ in groups]
    terms = [ss[i] + "".join(xs[k] for k in g) + "".join(as_[k] for k in g)
             for i, g in enumerate(groups)]
    spec = ",".join(terms) + "->" + "".join(ss + xs + as_)
    v = np.einsum(spec, *tables)
    return v.reshape(-1, prod(v.shape[len(groups):]))


def enumerate_vertices(scenario: Scenario, model_class: str, unique: bool = False,
                       tol: Tolerances = DEFAULT) -> VertexSet:
    """Deterministic behaviors spanning the given model class.

    Hybrid vertices are listed per bipartition, so a fully product vertex
    appears once under every bipartition; ``unique=True`` removes those
    repeats.
    """
    count = vertex_count(scenario, model_class)
    if count > tol.max_vertices:
        raise SizeError(f"{count} vertices exceed the cap of {tol.max_vertices}")
    n = scenario.n_parties
    ins, outs = scenario.inputs_per_party, scenario.outputs_per_party
    if model_class == FULL_LOCAL:
        tables = [_group_strategies([ins[k]], [outs[k]]) for k in range(n)]
        verts = _join([(k,) for k in range(n)], tables, n)
        labels = np.full(len(verts), -1)
        splits = ()
    else:
        splits = tuple(bipartitions(n))
        chunks, label_chunks = [], []
        for i, (g, h) in enumerate(splits):
            tables = [_group_strategies([ins[k] for k in grp], [outs[k] for k in grp]) for grp in (g, h)]
            v = _join([g, h], tables, n)
            chunks.append(v)
            label_chunks.append(np.full(len(v), i))
        verts = np.concatenate(chunks)
        labels = np.concatenate(label_chunks)
    if unique:
        _, first = np.unique(verts, axis=0, return_index=True)
        first.sort()
        verts, labels = verts[first], labels[first]
    verts.setflags(write=False)
    return VertexSet(scenario, model_class, verts, labels, splits)


def certify(behavior: Behavior, model_class: str, vertices: VertexSet | None = None,
            tol: Tolerances = DEFAULT) -> LPCertificate:
    """Critical white-noise visibility of ``behavior`` for the chosen polytope.

    Solves ``max v`` over ``v p + (1 - v) p_white = sum_k w_k V_k`` with
    ``w >= 0`` and ``0 <= v <= 1``.  When ``v < 1`` the LP duals give a
    functional ``f`` with ``f . V_k <= bound`` on every vertex and
    ``f . p > bound``.
    """
    scen = behavior.scenario
    if vertices is None:
        vertices = enumerate_vertices(scen, model_class, tol=tol)
    elif vertices.scenario != scen or vertices.model_class != model_class:
        raise ArgumentError("vertex set does not match the behavior's scenario or model class")
    p = behavior.flat()
    pw = uniform_behavior(scen).flat()
    d = p - pw
    verts = vertices.vertices.T.astype(float)  # (cells, K)
    n_cells, k = verts.shape
    # variables: w_1..w_K, v, slack of (v <= 1)
    a = np.zeros((n_cells + 1, k + 2))
    a[:n_cells, :k] = verts
    a[:n_cells, k] = -d
    a[n_cells, k] = a[n_cells, k + 1] = 1.0
    b = np.concatenate([pw, [1.0]])
    c = np.zeros(k + 2)
    c[k] = 1.0
    res = simplex.solve(c, a, b, tol=tol.lp_feasibility)
    if res.status != simplex.OPTIMAL:
        raise SolverError(f"visibility LP ended {res.status}; white noise should always be feasible")
    vis = float(res.x[k])
    feasible = vis >= 1 - tol.lp_feasibility
    if feasible:
        return LPCertificate(model_class, vis, True)
    f = -res.duals[:n_cells]
    scores = vertices.vertices @ f
    bound = float(scores.max())
    value = float(f @ p)
    if not value > bound + tol.lp_feasibility:
        raise SolverError(f"dual functional does not separate (value {value:.3e}, bound {bound:.3e})")
    return LPCertificate(model_class, vis, False, f, bound, value)


def functional_max(functional: np.ndarray, vertices: VertexSet) -> float:
    return float((vertices.vertices @ functional).max())


def svetlichny_sign(x: Sequence[int]) -> int:
    x1, x2, x3 = x
    return (-1) ** (x1 * x2 + x1 * x3 + x2 * x3)


def svetlichny_functional(scenario: Scenario | None = None) -> np.ndarray:
    """Svetlichny coefficients over the cells of the 3-party binary scenario."""
    scenario = scenario or Scenario.uniform(3)
    _check_svetlichny_scenario(scenario)
    coeff = np.zeros(scenario.shape)
    for x in product((0, 1), repeat=3):
        for a in product((0, 1), repeat=3):
            coeff[x + a] = svetlichny_sign(x) * (-1) ** sum(a)
    return coeff.ravel()


def _check_svetlichny_scenario(scenario: Scenario) -> None:
    if scenario != Scenario.uniform(3):
        raise ArgumentError("Svetlichny functional is defined for 3 parties with binary inputs and outputs")


def svetlichny_value(b: Behavior) -> float:
    _check_svetlichny_scenario(b.scenario)
    return float(sum(svetlichny_sign(x) * correlator(b, x) for x in product((0, 1), repeat=3)))


def svetlichny_hybrid_bound(vertices: VertexSet | None = None) -> float:
    """Largest Svetlichny value over all hybrid vertices; must come out as 4."""
    vertices = vertices or enumerate_vertices(Scenario.uniform(3), HYBRID)
    bound = functional_max(svetlichny_functional(), vertices)
    if abs(bound - 4) > 1e-12:
        raise SolverError(f"Svetlichny sign convention gives hybrid bound {bound}, not 4")
    return bound


def _xy_correlation_tensor(rho) -> np.ndarray:
    """``T[k1, k2, k3] = Tr[rho sigma_k1 (x) sigma_k2 (x) sigma_k3]`` for k in {x, y}."""
    from .correlations import PAULI
    t = rho.matrix.reshape((2,) * 6)
    xy = PAULI[:2]
    return np.einsum("abcdef,ida,jeb,kfc->ijk", t, xy, xy, xy, optimize=True).real


def optimize_svetlichny_xy(rho, grid: int = 8) -> tuple[float, np.ndarray]:
    """Maximize the Svetlichny value over x-y plane measurements on a 3-qubit state.

    A coarse grid of ``grid`` angles per setting is searched exhaustively,
    then the best point is refined with BFGS.  Returns the value and the
    angles ``phi[party, input]``.
    """
    from scipy.optimize import minimize

    if rho.dims != (2, 2, 2):
        raise ArgumentError("Svetlichny optimization needs a 3-qubit state")
    tensor = _xy_correlation_tensor(rho)
    sign = np.array([[[svetlichny_sign((a, b, c)) for c in (0, 1)] for b in (0, 1)] for a in (0, 1)])

    def value(phi):
        u = np.stack([np.cos(phi), np.sin(phi)], axis=-1)  # (party, x, k)
        return np.einsum("xyz,ijk,xi,yj,zk->", sign, tensor, u[0], u[1], u[2])

    ang = np.arange(grid) * 2 * np.pi / grid
    pairs = np.array(list(product(ang, ang)))  # (g, x)
    u = np.stack([np.cos(pairs), np.sin(pairs)], axis=-1)  # (g, x, k)
    vals = np.einsum("xyz,ijk,axi,byj,czk->abc", sign, tensor, u, u, u, optimize=True)
    a, b, c = np.unravel_index(np.argmax(vals), vals.shape)
    start = np.stack([pairs[a], pairs[b], pairs[c]])
    res = minimize(lambda p: -value(p.reshape(3, 2)), start.ravel(), method="BFGS",
                   options={"gtol": 1e-12})
    best = res.x.reshape(3, 2)
    return float(value(best)), np.mod(best, 2 * np.pi)
