from __future__ import annotations

import numpy as np
import pytest

from localgme.correlations import MeasurementAssignment, projective_qubit, quantum_behavior
from localgme.errors import ArgumentError
from localgme.lhvnet import (FiniteLHS, WernerPointLHS, builtin_werner_lhs, check_lhs_identity,
                             compare_behaviors, lift, random_projective_settings, simulate_behavior)
from localgme.linalg import DensityMatrix
from localgme.states import FamilyParams, NetworkSpec, ghz_projector_map, rho_alpha_theta, \
    star_network_state

WERNER = rho_alpha_theta(FamilyParams(0.5, np.pi / 4))
Z = [0, 0, 1.0]


def star_target(arm, n, m, keep_center=False):
    spec = NetworkSpec.uniform(arm, n, ghz_projector_map(n, keep_center), keep_center)
    rho, norm = star_network_state(spec)
    return quantum_behavior(rho, m), norm


def test_hemisphere_rule_is_deterministic():
    model = WernerPointLHS()
    p = model.response(np.array([[0, 0, 1.0], [0, 0, -1.0]]), projective_qubit(Z))
    assert np.array_equal(p, [[1, 0], [0, 1]])
    with pytest.raises(ArgumentError):
        model.response(np.array([[0, 0, 1.0]]), np.stack([np.eye(2) / 2, np.eye(2) / 2]))


def test_builtin_model_passes_identity_check():
    model = builtin_werner_lhs()
    dirs = [[0.6, 0.8, 0.0], [0.0, -0.6, 0.8]]
    report = check_lhs_identity(model, WERNER, [projective_qubit(d) for d in dirs], 10 ** 6, seed=5)
    assert report["passed"], report


def test_unreflected_convention_fails():
    class Plain(WernerPointLHS):
        reflect = np.ones(3)

    report = check_lhs_identity(Plain(), WERNER, [projective_qubit([0, 1.0, 0])], 10 ** 5, seed=1)
    assert not report["passed"]
    assert report["max_z"] > 50


def test_hidden_state_average_is_maximally_mixed():
    rng = np.random.default_rng(0)
    model = WernerPointLHS()
    sig = model.hidden_states(model.sample(rng, 10 ** 5))
    mean = sig.mean(axis=0)
    se = sig.real.std(axis=0) / np.sqrt(len(sig))
    assert np.all(np.abs(mean.real - np.eye(2) / 2) <= 3 * se + 1e-15)


def test_two_arm_weight_closed_form():
    rng = np.random.default_rng(2)
    model = WernerPointLHS()
    lifted = lift([model, model], ghz_projector_map(2))
    lam1, lam2 = model.sample(rng, 50), model.sample(rng, 50)
    w = lifted.weight([model.hidden_states(lam1), model.hidden_states(lam2)])

    def ket(v):
        theta, phi = np.arccos(np.clip(v[2], -1, 1)), np.arctan2(v[1], v[0])
        return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])

    want = [abs(ket(a)[0] * ket(b)[0] + ket(a)[1] * ket(b)[1]) ** 2 for a, b in zip(lam1, lam2)]
    assert np.allclose(w, want)
    assert np.all(w >= 0)


def test_identity_center_has_constant_weight():
    model = WernerPointLHS()
    lifted = lift([model, model], [np.eye(4)])
    rng = np.random.default_rng(3)
    sig = [model.hidden_states(model.sample(rng, 20)) for _ in range(2)]
    assert np.allclose(lifted.weight(sig), 1)


def test_identity_center_matches_independent_arms():
    model = builtin_werner_lhs()
    m = random_projective_settings(2, 2, np.random.default_rng(4))
    sim = simulate_behavior(lift([model, model], [np.eye(4)]), m, 2 * 10 ** 5, seed=3)
    rho_a = np.eye(2) / 2
    target = quantum_behavior(DensityMatrix(np.kron(rho_a, rho_a), (2, 2)), m)
    assert compare_behaviors(sim, target)["per_cell_pass"]
    assert sim.weight_mean == pytest.approx(1)


def test_two_arm_zz_matches_star_state():
    model = builtin_werner_lhs()
    m = MeasurementAssignment.from_bloch([[Z], [Z]])
    sim = simulate_behavior(lift([model, model], ghz_projector_map(2)), m, 2 * 10 ** 5, seed=0)
    target, norm = star_target(WERNER, 2, m)
    cmp = compare_behaviors(sim, target)
    assert cmp["per_cell_pass"], cmp
    assert abs(sim.weight_mean - norm) <= 3 * sim.weight_se


def test_three_arm_total_variation():
    model = builtin_werner_lhs()
    m = random_projective_settings(3, 2, np.random.default_rng(0))
    sim = simulate_behavior(lift([model] * 3, ghz_projector_map(3)), m, 10 ** 6, seed=0)
    target, norm = star_target(WERNER, 3, m)
    cmp = compare_behaviors(sim, target)
    assert cmp["tv_pass"], cmp
    assert abs(sim.weight_mean - norm) <= 3 * sim.weight_se


def test_keep_center_matches_three_party_state():
    model = builtin_werner_lhs()
    lifted = lift([model, model], ghz_projector_map(2, output_qubit=True), keep_center=True)
    rng = np.random.default_rng(6)
    sig = [model.hidden_states(model.sample(rng, 1))[0] for _ in range(2)]
    assert lifted.center_state(sig).dims == (2,)
    m = random_projective_settings(3, 2, np.random.default_rng(7))
    sim = simulate_behavior(lifted, m, 2 * 10 ** 5, seed=2)
    target, _ = star_target(WERNER, 2, m, keep_center=True)
    assert compare_behaviors(sim, target)["tv_pass"]


def test_responses_see_only_their_own_arm():
    calls = []

    class Spy(WernerPointLHS):
        def response(self, lam, ops):
            calls.append((lam.shape, np.asarray(ops).shape))
            return super().response(lam, ops)

    m = random_projective_settings(3, 2, np.random.default_rng(0))
    simulate_behavior(lift([Spy()] * 3, ghz_projector_map(3)), m, 1000, seed=0, n_chunks=2)
    assert calls and all(lam[1:] == (3,) and ops == (2, 2, 2) for lam, ops in calls)


def test_finite_plugin_model():
    # classically correlated arms: (|00><00| + |11><11|)/2 with z measurements
    d = {
        "name": "classical",
        "weights": [0.5, 0.5],
        "hidden_states": [[[[1, 0], [0, 0]], [[0, 0], [0, 0]]], [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]],
        "measurements": [[[[[1, 0], [0, 0]], [[0, 0], [0, 0]]], [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]]],
        "responses": [[[1.0, 0.0]], [[0.0, 1.0]]],
    }
    model = FiniteLHS.from_dict(d)
    arm = DensityMatrix(np.diag([0.5, 0, 0, 0.5]), (2, 2))
    assert check_lhs_identity(model, arm, model.measurements, 10 ** 4, seed=0)["passed"]
    m = MeasurementAssignment(tuple(np.array(model.measurements) for _ in range(2)))
    sim = simulate_behavior(lift([model, model], ghz_projector_map(2)), m, 10 ** 4, seed=0)
    target, norm = star_target(arm, 2, m)
    assert compare_behaviors(sim, target)["per_cell_pass"]
    assert sim.behavior.table[0, 0, 0, 1] == 0 == target.table[0, 0, 0, 1]
    assert norm == pytest.approx(0.5)
    with pytest.raises(ArgumentError):
        model.response(np.array([0]), projective_qubit([1.0, 0, 0]))


def test_finite_model_validation():
    with pytest.raises(ArgumentError):
        FiniteLHS([0.7, 0.7], np.stack([np.eye(2) / 2] * 2), [projective_qubit(Z)], np.ones((2, 1, 2)) / 2)


def test_determinism_and_worker_independence():
    model = builtin_werner_lhs()
    lifted = lift([model] * 3, ghz_projector_map(3))
    m = random_projective_settings(3, 2, np.random.default_rng(1))
    a = simulate_behavior(lifted, m, 50_000, seed=9, n_chunks=8)
    b = simulate_behavior(lifted, m, 50_000, seed=9, n_chunks=8, workers=3)
    c = simulate_behavior(lifted, m, 50_000, seed=10, n_chunks=8)
    assert np.array_equal(a.behavior.table, b.behavior.table)
    assert np.array_equal(a.stderr, b.stderr)
    assert not np.array_equal(a.behavior.table, c.behavior.table)


def test_small_runs_warn():
    model = builtin_werner_lhs()
    m = MeasurementAssignment.from_bloch([[Z], [Z]])
    sim = simulate_behavior(lift([model, model], ghz_projector_map(2)), m, 50, seed=0)
    assert any("samples" in w for w in sim.warnings)
    assert any("effective sample size" in w for w in sim.warnings)
    with pytest.raises(ArgumentError):
        simulate_behavior(lift([model, model], ghz_projector_map(2)), m, 1, seed=0)
