"""Multicore-fiber channel and threshold-detector model.

Loss budget: fiber attenuation (dB/km) plus lumped transmitter/receiver
insertion losses, multiplied by detector efficiency, gives the end-to-end
transmittance eta.  Detection uses the standard weak-coherent-pulse model:
each detector j sees a Poisson photon stream of mean mu * eta * q_j, where
q_j is the output-rail power fraction, and fires independently with

    p_j = 1 - (1 - p_dark) * exp(-mu * eta * q_j)

Per-core phase drift multiplies core amplitudes by unit phases; inter-core
crosstalk (off by default) mixes rail powers through a row-stochastic
leakage matrix before detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qstate import StateVector

N_CORES = 4

DRIFT_KINDS = ("none", "fixed_offsets", "random_walk")


@dataclass(frozen=True)
class PhaseDriftModel:
    """Per-core phase drift: none, constant offsets, or a per-pulse random walk."""

    kind: str = "none"
    offsets: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    sigma_rad_per_pulse: float = 0.0

    def __post_init__(self):
        if self.kind not in DRIFT_KINDS:
            raise ValueError(f"drift kind must be one of {DRIFT_KINDS}, got {self.kind!r}")
        offsets = tuple(float(x) for x in self.offsets)
        if len(offsets) != N_CORES:
            raise ValueError(f"drift offsets must have length {N_CORES}")
        if self.sigma_rad_per_pulse < 0:
            raise ValueError("drift sigma must be >= 0")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "sigma_rad_per_pulse", float(self.sigma_rad_per_pulse))


@dataclass(frozen=True)
class ChannelParams:
    """Fiber, insertion-loss, and detector parameters.

    ``crosstalk_db`` is the pairwise core-to-core power leakage; +inf (the
    default) disables crosstalk.  Finite values must satisfy
    3 * 10^(-crosstalk_db/10) <= 1 so the leakage matrix stays stochastic.
    """

    length_km: float = 0.003
    alpha_db_per_km: float = 0.2
    alice_insertion_db: float = 0.0
    bob_insertion_db: float = 0.0
    eta_detector: float = 0.1
    p_dark: float = 2e-8
    crosstalk_db: float = math.inf
    drift: PhaseDriftModel = field(default_factory=PhaseDriftModel)

    def __post_init__(self):
        for name in ("length_km", "alpha_db_per_km", "alice_insertion_db", "bob_insertion_db"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("eta_detector", "p_dark"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        leak = 10.0 ** (-self.crosstalk_db / 10.0) if math.isfinite(self.crosstalk_db) else 0.0
        if (N_CORES - 1) * leak > 1.0:
            raise ValueError("crosstalk_db too strong: total leakage exceeds unity")


def transmittance(params: ChannelParams) -> float:
    """End-to-end detection probability per photon."""
    loss_db = (
        params.alpha_db_per_km * params.length_km
        + params.alice_insertion_db
        + params.bob_insertion_db
    )
    return params.eta_detector * 10.0 ** (-loss_db / 10.0)


def crosstalk_matrix(params: ChannelParams) -> np.ndarray:
    """Row-stochastic power-leakage matrix applied to rail powers."""
    if not math.isfinite(params.crosstalk_db):
        return np.eye(N_CORES)
    leak = 10.0 ** (-params.crosstalk_db / 10.0)
    m = np.full((N_CORES, N_CORES), leak)
    np.fill_diagonal(m, 1.0 - (N_CORES - 1) * leak)
    return m


def apply_drift(state: StateVector, drift_phases) -> StateVector:
    """Multiply core k by e^{i drift_phases[k]}; norm is preserved."""
    phases = np.asarray(drift_phases, dtype=float)
    if phases.shape != (state.dim,):
        raise ValueError(f"need {state.dim} drift phases, got shape {phases.shape}")
    return StateVector(state.amplitudes * np.exp(1.0j * phases))


@dataclass(frozen=True, eq=False)
class ClickDistribution:
    """Per-detector click probabilities (independent threshold detectors)."""

    p_click: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p_click, dtype=float)
        if p.shape != (N_CORES,):
            raise ValueError(f"need {N_CORES} click probabilities")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("click probabilities must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "p_click", p)


def click_probabilities(
    sent: StateVector,
    bob_unitary: np.ndarray,
    mu: float,
    params: ChannelParams,
    drift_phases=None,
) -> ClickDistribution:
    """Detector click probabilities for one pulse of mean photon number mu."""
    if mu < 0:
        raise ValueError("mu must be >= 0")
    state = sent if drift_phases is None else apply_drift(sent, drift_phases)
    q = np.abs(np.asarray(bob_unitary) @ state.amplitudes) ** 2
    q = crosstalk_matrix(params) @ q
    eta = transmittance(params)
    p = 1.0 - (1.0 - params.p_dark) * np.exp(-mu * eta * q)
    return ClickDistribution(p)


def sample_clicks(dist: ClickDistribution, rng: np.random.Generator) -> np.ndarray:
    """One Bernoulli draw per detector; boolean click pattern."""
    return rng.random(N_CORES) < dist.p_click
