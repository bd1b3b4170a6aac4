"""Chip mesh, settings table, and solver tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hdqkd import chipmodel, qstate


def mzi_closed_form(theta):
    """Independent closed form: i e^{i theta/2} [[s, c], [c, -s]]."""
    s, c = math.sin(theta / 2.0), math.cos(theta / 2.0)
    return 1j * np.exp(1j * theta / 2.0) * np.array([[s, c], [c, -s]])


@given(st.floats(-4 * math.pi, 4 * math.pi, allow_nan=False))
def test_mzi_matches_closed_form(theta):
    assert np.allclose(chipmodel.mzi_transfer(theta), mzi_closed_form(theta), atol=1e-12)


def test_mzi_special_points():
    cross = chipmodel.mzi_transfer(0.0)
    assert np.allclose(cross, 1j * np.array([[0, 1], [1, 0]]), atol=1e-15)
    bar = chipmodel.mzi_transfer(math.pi)
    assert np.allclose(np.abs(np.diag(bar)), 1.0, atol=1e-15)
    assert np.allclose(np.abs(bar - np.diag(np.diag(bar))), 0.0, atol=1e-15)
    coupler = chipmodel.mzi_transfer(math.pi / 2.0)
    assert np.allclose(np.abs(coupler), 1.0 / math.sqrt(2.0), atol=1e-15)


def test_chip_unitary_empty_topology_is_identity():
    topo = chipmodel.ChipTopology(elements=(), role="transmitter")
    assert np.array_equal(chipmodel.chip_unitary(topo, {}), np.eye(4))


def test_chip_unitary_block_embedding():
    topo = chipmodel.ChipTopology(
        elements=(chipmodel.CircuitElement("mzi", "m", (0, 1), 0),), role="transmitter"
    )
    u = chipmodel.chip_unitary(topo, {"m": math.pi / 2.0})
    assert np.allclose(u[:2, :2], chipmodel.mzi_transfer(math.pi / 2.0), atol=1e-15)
    assert np.allclose(u[2:, 2:], np.eye(2), atol=1e-15)
    assert np.allclose(u[:2, 2:], 0.0) and np.allclose(u[2:, :2], 0.0)


def test_chip_unitary_missing_setting():
    topo = chipmodel.alice_topology()
    settings = chipmodel.alice_settings_for("M0", 0)
    del settings["phi3"]
    with pytest.raises(chipmodel.ConfigurationError):
        chipmodel.chip_unitary(topo, settings)


def _random_settings(topology, rng):
    out = {}
    for e in topology.elements:
        out[e.element_id] = 0.0 if e.kind == "voa" else rng.uniform(0.0, 2.0 * math.pi)
    return out


@pytest.mark.parametrize("topology", [chipmodel.alice_topology(), chipmodel.bob_topology()])
def test_unitarity_random_settings(topology):
    rng = np.random.default_rng(123)
    eye = np.eye(4)
    for _ in range(1000):
        u = chipmodel.chip_unitary(topology, _random_settings(topology, rng))
        assert np.max(np.abs(u.conj().T @ u - eye)) < 1e-10


def test_voa_linearity():
    topo = chipmodel.alice_topology()
    base = chipmodel.alice_settings_for("M1", 0)
    u0 = chipmodel.chip_unitary(topo, base)
    attenuated = dict(base, voa1=3.0)
    u1 = chipmodel.chip_unitary(topo, attenuated)
    p0 = np.abs(u0[:, 0]) ** 2
    p1 = np.abs(u1[:, 0]) ** 2
    assert np.allclose(p1, p0 * 10 ** (-3.0 / 10.0), atol=1e-15)


def test_alice_settings_hit_all_twelve_states():
    mubs = qstate.mub_set_dim4()
    for b, label in enumerate(chipmodel.MUB_LABELS):
        for i in range(4):
            out = chipmodel.prepared_state(label, i)
            assert qstate.overlap_sq(out, mubs[b].states[i]) >= 1.0 - 1e-10


def test_alice_settings_examples():
    s0 = chipmodel.alice_settings_for("M0", 0)
    s1 = chipmodel.alice_settings_for("M0", 1)
    assert s0["mzi2"] == pytest.approx(math.pi / 2.0)
    assert (s1["phi2"] - s0["phi2"]) % (2 * math.pi) == pytest.approx(math.pi)
    out = chipmodel.prepared_state("M2", 2).amplitudes
    target = np.array([0, 1, 1, 0]) / math.sqrt(2.0)
    assert abs(np.vdot(target, out)) ** 2 >= 1.0 - 1e-10


def test_bob_separates_own_basis_onto_distinct_rails():
    mubs = qstate.mub_set_dim4()
    for b, label in enumerate(chipmodel.MUB_LABELS):
        u = chipmodel.chip_unitary(chipmodel.bob_topology(), chipmodel.bob_settings_for(label))
        perm = chipmodel.bob_rail_permutation(label)
        assert sorted(perm) == [0, 1, 2, 3]
        for i, state in enumerate(mubs[b].states):
            powers = np.abs(u @ state.amplitudes) ** 2
            assert powers[perm[i]] >= 1.0 - 1e-10


def test_wrong_basis_rail_powers_flat():
    mubs = qstate.mub_set_dim4()
    for b, label in enumerate(chipmodel.MUB_LABELS):
        for bp, label_p in enumerate(chipmodel.MUB_LABELS):
            if b == bp:
                continue
            u = chipmodel.chip_unitary(chipmodel.bob_topology(), chipmodel.bob_settings_for(label_p))
            for state in mubs[b].states:
                powers = np.abs(u @ state.amplitudes) ** 2
                assert np.max(np.abs(powers - 0.25)) <= 1e-10


def test_solver_passthrough_target():
    target = qstate.basis_state(0, 4)
    settings = chipmodel.solve_settings(chipmodel.alice_topology(), target)
    u = chipmodel.chip_unitary(chipmodel.alice_topology(), settings)
    assert np.abs(np.vdot(target.amplitudes, u[:, 0])) ** 2 >= 1.0 - 1e-8


def test_solver_agrees_with_settings_table():
    target = qstate.StateVector(np.array([1.0, 1.0, 0.0, 0.0]) / math.sqrt(2.0))
    settings = chipmodel.solve_settings(chipmodel.alice_topology(), target)
    u = chipmodel.chip_unitary(chipmodel.alice_topology(), settings)
    solved = qstate.StateVector(u[:, 0])
    tabled = chipmodel.prepared_state("M0", 0)
    assert qstate.overlap_sq(solved, tabled) >= 1.0 - 1e-8


def test_solver_rejects_wrong_dim():
    bad = qstate.basis_state(0, 3)
    with pytest.raises(ValueError):
        chipmodel.solve_settings(chipmodel.alice_topology(), bad)


def test_solver_reports_infeasible_with_best_fidelity():
    # A phase-only mesh cannot move power off rail 0.
    topo = chipmodel.ChipTopology(
        elements=tuple(
            chipmodel.CircuitElement("phase", f"p{r}", (r,), 0) for r in range(4)
        ),
        role="transmitter",
    )
    with pytest.raises(chipmodel.SolverError) as err:
        chipmodel.solve_settings(topo, qstate.basis_state(1, 4), max_restarts=3)
    assert err.value.best_fidelity <= 1e-6


def test_max_repetition_rate():
    assert chipmodel.max_repetition_rate(180e-6) == pytest.approx(5555.55, rel=1e-3)
    assert chipmodel.max_repetition_rate(66e-6) == pytest.approx(15151.5, rel=1e-3)
    assert chipmodel.max_repetition_rate(1.0) == 1.0
    with pytest.raises(ValueError):
        chipmodel.max_repetition_rate(0.0)


def test_element_validation():
    with pytest.raises(ValueError):
        chipmodel.CircuitElement("mzi", "bad", (0, 0), 0)
    with pytest.raises(ValueError):
        chipmodel.CircuitElement("phase", "bad", (5,), 0)
    with pytest.raises(ValueError):
        chipmodel.CircuitElement("welder", "bad", (0,), 0)
