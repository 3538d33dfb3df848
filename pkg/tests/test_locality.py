from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from localgme.correlations import (Behavior, MeasurementAssignment, Scenario, quantum_behavior,
                                   uniform_behavior, xy_direction)
from localgme.errors import ArgumentError, SizeError
from localgme.linalg import DensityMatrix
from localgme.locality import (FULL_LOCAL, HYBRID, bipartitions, certify, enumerate_vertices,
                               optimize_svetlichny_xy, svetlichny_functional,
                               svetlichny_hybrid_bound, svetlichny_value, vertex_count)
from localgme.config import DEFAULT
from localgme.states import ghz_ket

CHSH = Scenario.uniform(2)
SVET = Scenario.uniform(3)


def ghz_state(n):
    return DensityMatrix(ghz_ket(n).projector(), (2,) * n)


def chsh_behavior():
    z, x = np.array([0, 0, 1.0]), np.array([1.0, 0, 0])
    m = MeasurementAssignment.from_bloch([[z, x], [(z + x) / np.sqrt(2), (z - x) / np.sqrt(2)]])
    return quantum_behavior(ghz_state(2), m)


def svetlichny_behavior(rho=None):
    rows = [[xy_direction(0), xy_direction(np.pi / 2)]] * 2 + [[xy_direction(-np.pi / 4), xy_direction(np.pi / 4)]]
    return quantum_behavior(rho or ghz_state(3), MeasurementAssignment.from_bloch(rows))


def visibility_oracle(b, verts):
    """Same LP through scipy's HiGHS: max v with v p + (1-v) u in conv(V)."""
    p, u = b.flat(), uniform_behavior(b.scenario).flat()
    k = verts.shape[0]
    a_eq = np.hstack([verts.T.astype(float), -(p - u)[:, None]])
    c = np.zeros(k + 1)
    c[-1] = -1
    res = linprog(c, A_eq=a_eq, b_eq=u, bounds=[(0, None)] * k + [(0, 1)], method="highs")
    return res.x[-1]


def test_counts():
    assert len(bipartitions(3)) == 3 and len(bipartitions(4)) == 7
    assert len(enumerate_vertices(CHSH, FULL_LOCAL)) == 16
    assert len(enumerate_vertices(SVET, FULL_LOCAL)) == 64
    hyb = enumerate_vertices(SVET, HYBRID)
    assert len(hyb) == vertex_count(SVET, HYBRID) == 3072
    # product vertices show up under each of the three bipartitions
    assert len(enumerate_vertices(SVET, HYBRID, unique=True)) == 3072 - 2 * 64


def test_vertices_are_valid_behaviors():
    for v in enumerate_vertices(SVET, HYBRID).vertices[::97]:
        Behavior.from_flat(SVET, v)


def test_vertex_cap():
    with pytest.raises(SizeError):
        enumerate_vertices(Scenario.uniform(4), HYBRID)
    with pytest.raises(SizeError):
        enumerate_vertices(SVET, HYBRID, tol=DEFAULT.with_overrides(max_vertices=100))


def test_chsh_visibility():
    cert = certify(chsh_behavior(), FULL_LOCAL)
    assert cert.visibility == pytest.approx(1 / np.sqrt(2), abs=1e-6)
    assert not cert.feasible_at_1


def test_full_local_vertices_are_local():
    verts = enumerate_vertices(CHSH, FULL_LOCAL)
    for k in range(len(verts)):
        cert = certify(verts.behavior(k), FULL_LOCAL, verts)
        assert cert.visibility >= 1 - 1e-9 and cert.feasible_at_1


def test_ghz_svetlichny_visibility():
    b = svetlichny_behavior()
    assert svetlichny_value(b) == pytest.approx(4 * np.sqrt(2))
    cert = certify(b, HYBRID)
    assert cert.visibility == pytest.approx(1 / np.sqrt(2), abs=1e-6)
    assert cert.visibility == pytest.approx(4 / svetlichny_value(b), abs=1e-6)


@pytest.mark.parametrize("seed", range(6))
def test_visibility_against_scipy(seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((2, 2, 3))
    v /= np.linalg.norm(v, axis=2, keepdims=True)
    b = quantum_behavior(ghz_state(2), MeasurementAssignment.from_bloch(v))
    verts = enumerate_vertices(CHSH, FULL_LOCAL)
    cert = certify(b, FULL_LOCAL, verts)
    assert cert.visibility == pytest.approx(visibility_oracle(b, verts.vertices), abs=1e-8)


def test_dual_functional_is_a_valid_inequality():
    b = chsh_behavior()
    verts = enumerate_vertices(CHSH, FULL_LOCAL)
    cert = certify(b, FULL_LOCAL, verts)
    f = cert.dual_functional
    assert np.all(verts.vertices @ f <= cert.bound + 1e-9)
    assert cert.value > cert.bound
    # at the critical visibility the noisy point sits on the face
    u = uniform_behavior(CHSH).flat()
    edge = cert.visibility * b.flat() + (1 - cert.visibility) * u
    assert f @ edge == pytest.approx(cert.bound, abs=1e-9)


def test_relabeling_invariance():
    b = chsh_behavior()
    swapped = Behavior(CHSH, b.table[:, :, ::-1, :])  # flip party 1's outcomes
    inputs = Behavior(CHSH, b.table[::-1])  # swap party 1's inputs
    base = certify(b, FULL_LOCAL).visibility
    assert certify(swapped, FULL_LOCAL).visibility == pytest.approx(base, abs=1e-9)
    assert certify(inputs, FULL_LOCAL).visibility == pytest.approx(base, abs=1e-9)


def test_hybrid_at_least_local():
    rng = np.random.default_rng(11)
    hyb, loc = enumerate_vertices(SVET, HYBRID), enumerate_vertices(SVET, FULL_LOCAL)
    for _ in range(2):
        v = rng.standard_normal((3, 2, 3))
        v /= np.linalg.norm(v, axis=2, keepdims=True)
        b = quantum_behavior(ghz_state(3), MeasurementAssignment.from_bloch(v))
        assert certify(b, HYBRID, hyb).visibility >= certify(b, FULL_LOCAL, loc).visibility - 1e-9


def test_mismatched_vertex_set():
    with pytest.raises(ArgumentError):
        certify(chsh_behavior(), HYBRID, enumerate_vertices(CHSH, FULL_LOCAL))


def test_svetlichny_bounds():
    assert svetlichny_hybrid_bound() == 4
    assert svetlichny_functional() @ uniform_behavior(SVET).flat() == pytest.approx(0)
    with pytest.raises(ArgumentError):
        svetlichny_functional(CHSH)


def test_svetlichny_optimizer_on_ghz():
    value, angles = optimize_svetlichny_xy(ghz_state(3))
    assert value == pytest.approx(4 * np.sqrt(2), abs=1e-6)
    rows = [[xy_direction(t) for t in r] for r in angles]
    b = quantum_behavior(ghz_state(3), MeasurementAssignment.from_bloch(rows))
    assert svetlichny_value(b) == pytest.approx(value, abs=1e-10)


def test_hybrid_visibility_against_scipy_on_degenerate_lps():
    from localgme.states import FamilyParams, analytic_filtered_state, apply_local_filter, \
        project_qubit_subspace, rho_gme_qutrit, saturating_theta

    p = FamilyParams(0.99, saturating_theta(0.99))
    # the numerically filtered state gives a slightly perturbed, highly degenerate LP
    filtered, _ = apply_local_filter(rho_gme_qutrit(3, p), np.tan(p.theta))
    states = [analytic_filtered_state(3, p).to_density(), project_qubit_subspace(filtered)[0]]
    hyb = enumerate_vertices(SVET, HYBRID)
    for rho in states:
        value, angles = optimize_svetlichny_xy(rho)
        m = MeasurementAssignment.from_bloch([[xy_direction(t) for t in r] for r in angles])
        b = quantum_behavior(rho, m)
        cert = certify(b, HYBRID, hyb)
        assert cert.visibility == pytest.approx(visibility_oracle(b, hyb.vertices), abs=1e-9)
        assert cert.visibility == pytest.approx(4 / value, abs=1e-9)
