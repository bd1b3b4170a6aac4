"""Four-dimensional quantum states for spatial-mode (core) encoding.

A pure state of the photon is a unit-norm complex amplitude vector over the
four fiber cores.  The protocol encodes ququarts in three mutually unbiased
superposition bases, labelled M0, M1 and M2.  Each basis pairs up the cores
and takes symmetric/antisymmetric combinations:

    M0 pairs (0,1) and (2,3):  (|0> +- |1>)/sqrt(2), (|2> +- |3>)/sqrt(2)
    M1 pairs (0,2) and (1,3)
    M2 pairs (0,3) and (1,2)

Any state from one basis has squared overlap exactly 1/4 with every state of
another basis, so a measurement in the wrong basis is uniformly random.  The
computational basis {|0>..|3>} (single-core states) is constructible here but
is not part of the protocol set: it is not unbiased with M0/M1/M2.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-12

MUB_LABELS = ("M0", "M1", "M2")

# Core pairing per basis; rows 2k, 2k+1 are (|i> + |j>)/sqrt(2), (|i> - |j>)/sqrt(2).
_PAIRINGS = {
    "M0": ((0, 1), (2, 3)),
    "M1": ((0, 2), (1, 3)),
    "M2": ((0, 3), (1, 2)),
}


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm complex amplitude vector over N modes."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must form a non-empty 1-d vector")
        norm_sq = float(np.sum(np.abs(amps) ** 2))
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: squared norm {norm_sq!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return int(self.amplitudes.size)


@dataclass(frozen=True, eq=False)
class MubBasis:
    """An ordered collection of unit-norm states meant to form one basis.

    Orthonormality is a contract checked by :func:`is_orthonormal`, not
    enforced at construction, so that defective bases can be represented
    and rejected by the predicate.
    """

    states: tuple[StateVector, ...]
    label: str

    def __post_init__(self):
        states = tuple(self.states)
        if not states:
            raise ValueError("basis needs at least one state")
        dims = {s.dim for s in states}
        if len(dims) != 1:
            raise ValueError(f"basis states have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    def matrix(self) -> np.ndarray:
        """States as rows of a (len, dim) complex matrix."""
        return np.array([s.amplitudes for s in self.states])


@dataclass(frozen=True, eq=False)
class MubSet:
    """A set of bases that are pairwise mutually unbiased (checked)."""

    bases: tuple[MubBasis, ...]
    dim: int

    def __post_init__(self):
        bases = tuple(self.bases)
        for b in bases:
            if b.dim != self.dim:
                raise ValueError(f"basis {b.label} has dim {b.dim}, expected {self.dim}")
            if not is_orthonormal(b, NORM_TOL):
                raise ValueError(f"basis {b.label} is not orthonormal")
        for i, b0 in enumerate(bases):
            for b1 in bases[i + 1:]:
                if not is_mutually_unbiased(b0, b1, NORM_TOL):
                    raise ValueError(f"bases {b0.label} and {b1.label} are not mutually unbiased")
        object.__setattr__(self, "bases", bases)

    def __getitem__(self, i: int) -> MubBasis:
        return self.bases[i]

    def __len__(self) -> int:
        return len(self.bases)


def basis_state(index: int, dim: int) -> StateVector:
    """Single-mode excitation |index> in a dim-mode space."""
    if not 0 <= index < dim:
        raise ValueError(f"index {index} out of range for dim {dim}")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(amps)


def computational_basis(dim: int = 4) -> MubBasis:
    """The single-core basis {|0>, ..., |dim-1>}."""
    return MubBasis(tuple(basis_state(i, dim) for i in range(dim)), "computational")


@functools.lru_cache(maxsize=1)
def mub_set_dim4() -> MubSet:
    """The three pairwise-unbiased superposition bases M0, M1, M2 for N=4."""
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    bases = []
    for label in MUB_LABELS:
        states = []
        for i, j in _PAIRINGS[label]:
            for sign in (1.0, -1.0):
                amps = np.zeros(4, dtype=np.complex128)
                amps[i] = inv_sqrt2
                amps[j] = sign * inv_sqrt2
                states.append(StateVector(amps))
        bases.append(MubBasis(tuple(states), label))
    return MubSet(tuple(bases), 4)


def _as_matrix(basis) -> np.ndarray:
    """Rows-of-states matrix from a MubBasis, a state sequence, or an array."""
    if isinstance(basis, MubBasis):
        return basis.matrix()
    if isinstance(basis, (list, tuple)) and basis and isinstance(basis[0], StateVector):
        return np.array([s.amplitudes for s in basis])
    return np.asarray(basis, dtype=np.complex128)


def overlap_sq(a, b) -> float:
    """Squared magnitude of the Hermitian inner product <a|b>."""
    av = a.amplitudes if isinstance(a, StateVector) else np.asarray(a, dtype=np.complex128)
    bv = b.amplitudes if isinstance(b, StateVector) else np.asarray(b, dtype=np.complex128)
    if av.shape != bv.shape:
        raise ValueError(f"dimension mismatch: {av.shape} vs {bv.shape}")
    return float(np.abs(np.vdot(av, bv)) ** 2)


def is_mutually_unbiased(b0, b1, tol: float = NORM_TOL) -> bool:
    """True iff every cross overlap_sq between the two bases is 1/N within tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    m0, m1 = _as_matrix(b0), _as_matrix(b1)
    if m0.shape[1] != m1.shape[1]:
        raise ValueError(f"dimension mismatch: {m0.shape[1]} vs {m1.shape[1]}")
    n = m0.shape[1]
    cross = np.abs(m0.conj() @ m1.T) ** 2
    return bool(np.all(np.abs(cross - 1.0 / n) <= tol))


def is_orthonormal(b, tol: float = NORM_TOL) -> bool:
    """True iff the Gram matrix of the basis states is the identity within tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = _as_matrix(b)
    gram = m.conj() @ m.T
    return bool(np.all(np.abs(gram - np.eye(m.shape[0])) <= tol))
