"""State, basis, and unbiasedness predicate tests."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hdqkd import qstate

SQ2 = 1.0 / math.sqrt(2.0)

# Independent statement of the three bases: every row written out literally.
EXPECTED = {
    "M0": [
        [SQ2, SQ2, 0, 0],
        [SQ2, -SQ2, 0, 0],
        [0, 0, SQ2, SQ2],
        [0, 0, SQ2, -SQ2],
    ],
    "M1": [
        [SQ2, 0, SQ2, 0],
        [SQ2, 0, -SQ2, 0],
        [0, SQ2, 0, SQ2],
        [0, SQ2, 0, -SQ2],
    ],
    "M2": [
        [SQ2, 0, 0, SQ2],
        [SQ2, 0, 0, -SQ2],
        [0, SQ2, SQ2, 0],
        [0, SQ2, -SQ2, 0],
    ],
}


def overlap_oracle(a, b) -> float:
    """Brute-force |<a|b>|^2 with plain Python complex arithmetic."""
    inner = sum(complex(x).conjugate() * complex(y) for x, y in zip(a, b))
    return abs(inner) ** 2


def test_basis_state_examples():
    assert np.array_equal(qstate.basis_state(0, 4).amplitudes, [1, 0, 0, 0])
    assert np.array_equal(qstate.basis_state(3, 4).amplitudes, [0, 0, 0, 1])
    with pytest.raises(ValueError):
        qstate.basis_state(4, 4)
    with pytest.raises(ValueError):
        qstate.basis_state(-1, 4)


def test_state_vector_requires_unit_norm():
    with pytest.raises(ValueError):
        qstate.StateVector(np.array([0.9, 0, 0, 0]))


def test_mub_rows_match_literal_table():
    mubs = qstate.mub_set_dim4()
    assert len(mubs) == 3
    for b, label in enumerate(qstate.MUB_LABELS):
        assert mubs[b].label == label
        got = mubs[b].matrix()
        assert np.allclose(got, np.array(EXPECTED[label]), atol=1e-15)


def test_overlap_examples():
    mubs = qstate.mub_set_dim4()
    m0, m1, m2 = mubs.bases
    assert qstate.overlap_sq(m0.states[0], m0.states[0]) == pytest.approx(1.0, abs=1e-15)
    assert qstate.overlap_sq(m0.states[0], m0.states[1]) == pytest.approx(0.0, abs=1e-15)
    # cross-basis overlaps against the brute-force oracle
    assert overlap_oracle(EXPECTED["M0"][0], EXPECTED["M2"][1]) == pytest.approx(0.25, abs=1e-15)
    assert qstate.overlap_sq(m0.states[0], m2.states[1]) == pytest.approx(0.25, abs=1e-12)
    assert qstate.overlap_sq(m0.states[0], m1.states[0]) == pytest.approx(0.25, abs=1e-12)


def test_overlap_dim_mismatch():
    a = qstate.basis_state(0, 4)
    b = qstate.basis_state(0, 3)
    with pytest.raises(ValueError):
        qstate.overlap_sq(a, b)


def test_all_48_cross_overlaps_quarter():
    mubs = qstate.mub_set_dim4()
    count = 0
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            for a in mubs[i].states:
                for b in mubs[j].states:
                    assert abs(qstate.overlap_sq(a, b) - 0.25) <= 1e-12
                    count += 1
    assert count == 96  # 48 unordered pairs, both orders


def test_is_mutually_unbiased():
    mubs = qstate.mub_set_dim4()
    assert qstate.is_mutually_unbiased(mubs[0], mubs[1], 1e-12)
    assert qstate.is_mutually_unbiased(mubs[1], mubs[2], 1e-12)
    assert not qstate.is_mutually_unbiased(mubs[0], mubs[0], 1e-12)
    assert not qstate.is_mutually_unbiased(qstate.computational_basis(), mubs[0], 1e-12)


def test_is_orthonormal():
    mubs = qstate.mub_set_dim4()
    for b in mubs.bases:
        assert qstate.is_orthonormal(b, 1e-12)
    s = mubs[0].states
    duplicated = qstate.MubBasis((s[0], s[0], s[2], s[3]), "broken")
    assert not qstate.is_orthonormal(duplicated, 1e-12)
    scaled = np.array(EXPECTED["M1"], dtype=complex)
    scaled[0] *= 0.9
    assert not qstate.is_orthonormal(scaled, 1e-12)


def test_mub_set_rejects_invalid_collections():
    mubs = qstate.mub_set_dim4()
    with pytest.raises(ValueError):
        qstate.MubSet((mubs[0], mubs[0]), 4)


@given(st.integers(0, 2), st.integers(0, 3), st.integers(0, 2), st.integers(0, 3))
def test_overlap_symmetric(b0, i0, b1, i1):
    mubs = qstate.mub_set_dim4()
    a, b = mubs[b0].states[i0], mubs[b1].states[i1]
    assert qstate.overlap_sq(a, b) == pytest.approx(qstate.overlap_sq(b, a), abs=1e-15)


@given(
    st.floats(0.0, 2.0 * math.pi),
    st.integers(0, 2),
    st.integers(0, 3),
    st.integers(0, 2),
    st.integers(0, 3),
)
def test_overlap_global_phase_invariant(phase, b0, i0, b1, i1):
    mubs = qstate.mub_set_dim4()
    a, b = mubs[b0].states[i0], mubs[b1].states[i1]
    rotated = qstate.StateVector(a.amplitudes * np.exp(1j * phase))
    assert qstate.overlap_sq(rotated, b) == pytest.approx(qstate.overlap_sq(a, b), abs=1e-12)
