"""Transfer-matrix model of the transmitter and receiver photonic chips.

Both chips are single-pass feed-forward meshes over four waveguide rails,
built from three element kinds:

* ``mzi``   - a Mach-Zehnder interferometer on a rail pair.  Convention:
  two 50/50 directional couplers C = (1/sqrt2) [[1, i], [i, 1]] sandwiching
  an internal phase on the upper arm, U(theta) = C diag(e^{i theta}, 1) C,
  which works out to i e^{i theta/2} [[sin(t/2), cos(t/2)], [cos(t/2), -sin(t/2)]].
  theta = 0 is full cross, theta = pi full bar, theta = pi/2 a 3 dB coupler.
* ``phase`` - a single-rail phase shifter, multiplies the rail by e^{i phi}.
* ``voa``   - a single-rail attenuator; a dB of attenuation multiplies the
  rail amplitude by 10^(-a/20).

The transmitter splits a single input rail into any of the twelve protocol
states; the receiver interferes rail pairs so that the four states of a
chosen basis exit on four distinct rails.  The receiver routing here is a
functional reconstruction (the minimal mesh realizing all three bases):
a pre-switch on rails (2,3), a switch on rails (1,2), then combiners on
(0,1) and (2,3).  Settings for all twelve states and all three measurement
bases are checked-in constants, re-verified by the test suite and
reproducible with :func:`solve_settings`.

Total chip insertion losses are deliberately not modeled per element; they
enter the channel model as lumped dB terms.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .qstate import StateVector, basis_state, mub_set_dim4, MUB_LABELS

RAILS = 4
TRANSMITTER_INPUT_RAIL = 0

UNITARITY_TOL = 1e-10
FIDELITY_TOL = 1e-10
SOLVER_FIDELITY = 1.0 - 1e-8

_PI = math.pi


class ConfigurationError(ValueError):
    """A settings table does not cover the topology it is applied to."""


class SolverError(RuntimeError):
    """Settings solver failed to reach the target fidelity."""

    def __init__(self, message: str, best_fidelity: float):
        super().__init__(message)
        self.best_fidelity = best_fidelity


@dataclass(frozen=True)
class CircuitElement:
    """One settable element of the mesh.

    ``rails`` holds one rail for phase/voa elements and the (upper, lower)
    pair for an MZI.
    """

    kind: str
    element_id: str
    rails: tuple[int, ...]
    stage: int

    def __post_init__(self):
        if self.kind not in ("mzi", "phase", "voa"):
            raise ValueError(f"unknown element kind {self.kind!r}")
        if any(not 0 <= r < RAILS for r in self.rails):
            raise ValueError(f"rail out of range in {self.element_id}: {self.rails}")
        if self.kind == "mzi":
            if len(self.rails) != 2 or self.rails[0] == self.rails[1]:
                raise ValueError(f"MZI {self.element_id} needs two distinct rails")
        elif len(self.rails) != 1:
            raise ValueError(f"{self.kind} {self.element_id} acts on exactly one rail")


@dataclass(frozen=True)
class ChipTopology:
    """Ordered feed-forward element list over four rails."""

    elements: tuple[CircuitElement, ...]
    role: str

    def __post_init__(self):
        ids = [e.element_id for e in self.elements]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate element ids in topology")

    @property
    def element_ids(self) -> tuple[str, ...]:
        return tuple(e.element_id for e in self.elements)


# A settings table maps element id to phase (radians) or attenuation (dB).
ChipSettings = dict


def mzi_transfer(theta: float) -> np.ndarray:
    """2x2 transfer matrix of an MZI with internal phase theta."""
    c = np.array([[1.0, 1.0j], [1.0j, 1.0]], dtype=np.complex128) / np.sqrt(2.0)
    return c @ np.diag([np.exp(1.0j * theta), 1.0]) @ c


def _element_matrix(element: CircuitElement, value: float) -> np.ndarray:
    m = np.eye(RAILS, dtype=np.complex128)
    if element.kind == "mzi":
        a, b = element.rails
        block = mzi_transfer(value)
        m[a, a], m[a, b] = block[0, 0], block[0, 1]
        m[b, a], m[b, b] = block[1, 0], block[1, 1]
    elif element.kind == "phase":
        m[element.rails[0], element.rails[0]] = np.exp(1.0j * value)
    else:  # voa
        if value < 0:
            raise ValueError(f"VOA {element.element_id} attenuation must be >= 0 dB")
        m[element.rails[0], element.rails[0]] = 10.0 ** (-value / 20.0)
    return m


def chip_unitary(topology: ChipTopology, settings: ChipSettings) -> np.ndarray:
    """Compose the 4x4 transfer matrix of the mesh under the given settings.

    Unitary whenever every VOA sits at 0 dB.  Raises ConfigurationError if a
    settable element has no entry.
    """
    u = np.eye(RAILS, dtype=np.complex128)
    for element in topology.elements:
        if element.element_id not in settings:
            raise ConfigurationError(f"no setting for element {element.element_id!r}")
        u = _element_matrix(element, float(settings[element.element_id])) @ u
    return u


def _mk(kind, element_id, rails, stage):
    return CircuitElement(kind, element_id, rails, stage)


@functools.lru_cache(maxsize=1)
def alice_topology() -> ChipTopology:
    """Transmitter mesh: VOA, half-splitter, per-half splitters, output phases.

    mzi1 routes between the two halves (rails 0/2), mzi2 splits the upper
    half onto rails 0-1, mzi3 the lower half onto rails 2-3; phi1..phi4 set
    per-rail output phases.  voa1 is the intensity control used for decoy
    pulses (held at 0 dB in the state tables; pulse intensity is applied in
    the source model instead).
    """
    return ChipTopology(
        elements=(
            _mk("voa", "voa1", (0,), 0),
            _mk("mzi", "mzi1", (0, 2), 1),
            _mk("mzi", "mzi2", (0, 1), 2),
            _mk("mzi", "mzi3", (2, 3), 2),
            _mk("phase", "phi1", (0,), 3),
            _mk("phase", "phi2", (1,), 3),
            _mk("phase", "phi3", (2,), 3),
            _mk("phase", "phi4", (3,), 3),
        ),
        role="transmitter",
    )


@functools.lru_cache(maxsize=1)
def bob_topology() -> ChipTopology:
    """Receiver mesh: per-rail VOAs and phases, two switches, two combiners.

    voa2..voa5 balance per-rail losses (0 dB in the ideal model).  mzi6
    (rails 2-3) and mzi5 (rails 1-2) act as bar/cross switches that bring
    the pair structure of the selected basis onto adjacent rails; mzi4
    (rails 0-1) and mzi7 (rails 2-3) are the interfering combiners.
    """
    return ChipTopology(
        elements=(
            _mk("voa", "voa2", (0,), 0),
            _mk("voa", "voa3", (1,), 0),
            _mk("voa", "voa4", (2,), 0),
            _mk("voa", "voa5", (3,), 0),
            _mk("phase", "phi1", (0,), 1),
            _mk("phase", "phi2", (1,), 1),
            _mk("phase", "phi3", (2,), 1),
            _mk("phase", "phi4", (3,), 1),
            _mk("mzi", "mzi6", (2, 3), 2),
            _mk("mzi", "mzi5", (1, 2), 3),
            _mk("mzi", "mzi4", (0, 1), 4),
            _mk("mzi", "mzi7", (2, 3), 4),
        ),
        role="receiver",
    )


def _alice_base() -> dict:
    return {"voa1": 0.0, "phi1": 0.0, "phi2": 0.0, "phi3": 0.0, "phi4": 0.0}


def _bob_base() -> dict:
    base = {f"voa{k}": 0.0 for k in range(2, 6)}
    base.update({f"phi{k}": 0.0 for k in range(1, 5)})
    base.update({"mzi4": _PI / 2, "mzi7": _PI / 2})
    return base


def _build_alice_settings() -> dict:
    bar, cross, half = _PI, 0.0, _PI / 2
    table = {}
    overrides = {
        # M0: keep/route the input half, then 3 dB split within the pair.
        ("M0", 0): {"mzi1": bar, "mzi2": half, "mzi3": half},
        ("M0", 1): {"mzi1": bar, "mzi2": half, "mzi3": half, "phi2": _PI},
        ("M0", 2): {"mzi1": cross, "mzi2": half, "mzi3": half},
        ("M0", 3): {"mzi1": cross, "mzi2": half, "mzi3": half, "phi4": _PI},
        # M1: 3 dB across the halves, pass (bar) or swap (cross) within each.
        ("M1", 0): {"mzi1": half, "mzi2": bar, "mzi3": bar},
        ("M1", 1): {"mzi1": half, "mzi2": bar, "mzi3": bar, "phi3": _PI},
        ("M1", 2): {"mzi1": half, "mzi2": cross, "mzi3": cross},
        ("M1", 3): {"mzi1": half, "mzi2": cross, "mzi3": cross, "phi4": _PI},
        # M2: mixed bar/cross; phases undo the relative i and sign factors.
        ("M2", 0): {"mzi1": half, "mzi2": bar, "mzi3": cross, "phi4": _PI / 2},
        ("M2", 1): {"mzi1": half, "mzi2": bar, "mzi3": cross, "phi4": 3 * _PI / 2},
        ("M2", 2): {"mzi1": half, "mzi2": cross, "mzi3": bar, "phi3": 3 * _PI / 2},
        ("M2", 3): {"mzi1": half, "mzi2": cross, "mzi3": bar, "phi3": _PI / 2},
    }
    for key, extra in overrides.items():
        settings = _alice_base()
        settings.update(extra)
        table[key] = settings
    return table


def _build_bob_settings() -> dict:
    bar, cross = _PI, 0.0
    table = {}
    overrides = {
        "M0": {"mzi6": bar, "mzi5": bar, "phi2": _PI, "phi3": _PI},
        "M1": {"mzi6": bar, "mzi5": cross, "phi3": _PI / 2, "phi4": _PI / 2},
        "M2": {"mzi6": cross, "mzi5": cross, "phi4": _PI},
    }
    for label, extra in overrides.items():
        settings = _bob_base()
        settings.update(extra)
        table[label] = settings
    return table


_ALICE_SETTINGS = _build_alice_settings()
_BOB_SETTINGS = _build_bob_settings()


def _basis_label(basis) -> str:
    if isinstance(basis, int):
        return MUB_LABELS[basis]
    if basis in MUB_LABELS:
        return basis
    raise ValueError(f"unknown basis {basis!r}")


def alice_settings_for(basis, index: int) -> ChipSettings:
    """Transmitter settings preparing state ``index`` of the given basis."""
    label = _basis_label(basis)
    if not 0 <= index < 4:
        raise ValueError(f"state index {index} out of range")
    return dict(_ALICE_SETTINGS[(label, index)])


def bob_settings_for(basis) -> ChipSettings:
    """Receiver settings measuring in the given basis."""
    return dict(_BOB_SETTINGS[_basis_label(basis)])


def prepared_state(basis, index: int) -> StateVector:
    """The transmitter output for the tabled settings of (basis, index)."""
    u = chip_unitary(alice_topology(), alice_settings_for(basis, index))
    return StateVector(u[:, TRANSMITTER_INPUT_RAIL])


@functools.lru_cache(maxsize=8)
def bob_rail_permutation(basis) -> tuple[int, ...]:
    """Map from state index to output rail when measuring in ``basis``.

    Raises if any basis state fails to concentrate on a single rail, which
    would indicate a broken settings table.
    """
    label = _basis_label(basis)
    u = chip_unitary(bob_topology(), bob_settings_for(label))
    mubs = mub_set_dim4()
    basis_states = mubs[MUB_LABELS.index(label)].states
    rails = []
    for i, state in enumerate(basis_states):
        powers = np.abs(u @ state.amplitudes) ** 2
        rail = int(np.argmax(powers))
        if powers[rail] < 1.0 - FIDELITY_TOL:
            raise ConfigurationError(
                f"{label} state {i} not separated: max rail power {powers[rail]:.12f}"
            )
        rails.append(rail)
    if sorted(rails) != list(range(4)):
        raise ConfigurationError(f"{label} rail map {rails} is not a permutation")
    return tuple(rails)


def _solver_objective(topology, targets_conj, input_rail, phase_ids):
    def infidelity(x):
        settings = dict(zip(phase_ids, x))
        for e in topology.elements:
            if e.kind == "voa":
                settings[e.element_id] = 0.0
        u = chip_unitary(topology, settings)
        out = u[:, input_rail]
        return 1.0 - float(np.abs(targets_conj @ out) ** 2)

    return infidelity


def solve_settings(
    topology: ChipTopology,
    target: StateVector,
    input_rail: int = TRANSMITTER_INPUT_RAIL,
    seed: int = 0,
    max_restarts: int = 32,
) -> ChipSettings:
    """Find phase settings steering the single-rail input onto ``target``.

    Fidelity is counted up to global phase.  VOAs are pinned at 0 dB.
    Raises SolverError (carrying the best fidelity found) when no restart
    reaches fidelity 1 - 1e-8.
    """
    if target.dim != RAILS:
        raise ValueError(f"target must have dim {RAILS}, got {target.dim}")
    phase_ids = [e.element_id for e in topology.elements if e.kind != "voa"]
    objective = _solver_objective(topology, target.amplitudes.conj(), input_rail, phase_ids)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(max_restarts):
        x0 = rng.uniform(0.0, 2.0 * _PI, size=len(phase_ids))
        res = minimize(objective, x0, method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12})
        fidelity = 1.0 - float(res.fun)
        best = max(best, fidelity)
        if fidelity >= SOLVER_FIDELITY:
            settings = {pid: float(v) % (2.0 * _PI) for pid, v in zip(phase_ids, res.x)}
            for e in topology.elements:
                if e.kind == "voa":
                    settings[e.element_id] = 0.0
            return settings
    raise SolverError(f"no settings reached fidelity {SOLVER_FIDELITY}", best_fidelity=best)


def max_repetition_rate(settle_time_s: float) -> float:
    """Largest pulse rate (Hz) leaving a full settle time between reconfigurations."""
    if settle_time_s <= 0:
        raise ValueError("settle time must be positive")
    return 1.0 / settle_time_s
