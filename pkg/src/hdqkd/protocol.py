"""Monte Carlo engine for the prepare-measure-sift protocol.

Each pulse: Alice draws a basis (uniform over the bases in use) and a state
index (uniform over 0..3), the decoy schedule fixes the pulse intensity, an
optional eavesdropper corrupts the state index, Bob draws a basis, and the
channel/detector model produces a click pattern that is squashed to an
outcome (a rail index, ``NO_CLICK`` or ``MULTI_CLICK``).  Sifting keeps
matched-basis single-click events; QBER compares Bob's logical index
(detector permutation inverted) with Alice's preparation.

Two error mechanisms beyond dark counts are modeled at the outcome level:

* the eavesdropper keeps the index with probability 1 - D and otherwise
  moves it to one of the other three uniformly (the Bob-side marginal of
  the symmetric cloning attack; Eve's own information is analytic and
  lives in :mod:`hdqkd.security`);
* ``visibility_noise`` relabels an otherwise-correct matched-basis
  conclusive event onto a uniformly chosen wrong detector, a one-parameter
  stand-in for finite interferometer extinction and residual drift.

Determinism contract: a session is split into fixed-size pulse chunks, each
driven by a generator seeded from (seed, chunk index), with a documented
draw order (alice bases, alice indices, bob bases, eavesdropper, drift
increments, clicks, visibility noise).  Results therefore do not depend on
the worker count, and identical (config, seed) give identical reports.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import chipmodel
from .channel import ChannelParams, crosstalk_matrix, transmittance
from .qstate import mub_set_dim4

NO_CLICK = -1
MULTI_CLICK = -2

SIGNAL = "signal"
DECOY = "decoy"
INTENSITY_CLASSES = (SIGNAL, DECOY)

BIN_SECONDS = 10.0
CHUNK_PULSES = 1 << 18

# Seed-stream domains (spawn_key tags) keeping session, drift, and
# tomography draws independent.
_DOMAIN_SESSION = 1
_DOMAIN_DRIFT = 2
_DOMAIN_TOMOGRAPHY = 3


@dataclass(frozen=True)
class ProtocolConfig:
    """Session parameters; defaults reproduce the reference experiment run
    (5 kHz, 600 s, two bases, signal/decoy intensities 0.26/0.15, a 10 s
    decoy window every 120 s, 13 percent visibility noise)."""

    n_bases_used: int = 2
    dim: int = 4
    pulse_rate_hz: float = 5000.0
    mu_signal: float = 0.26
    mu_decoy: float = 0.15
    decoy_period_s: float = 120.0
    decoy_duration_s: float = 10.0
    session_s: float = 600.0
    seed: int = 0
    eavesdropper_disturbance: float | None = None
    visibility_noise: float = 0.13
    channel: ChannelParams = field(default_factory=ChannelParams)

    def __post_init__(self):
        if self.n_bases_used not in (2, 3):
            raise ValueError("n_bases_used must be 2 or 3")
        if self.dim != 4:
            raise ValueError("only dim 4 is supported")
        if self.pulse_rate_hz <= 0:
            raise ValueError("pulse_rate_hz must be positive")
        if not 0.0 <= self.mu_decoy < self.mu_signal:
            raise ValueError("need 0 <= mu_decoy < mu_signal")
        if self.decoy_duration_s < 0 or self.decoy_period_s < 0:
            raise ValueError("decoy schedule times must be >= 0")
        if self.decoy_duration_s > 0 and self.decoy_period_s < self.decoy_duration_s:
            raise ValueError("decoy_duration_s must not exceed decoy_period_s")
        if self.session_s < 0:
            raise ValueError("session_s must be >= 0")
        if self.eavesdropper_disturbance is not None and not 0.0 <= self.eavesdropper_disturbance <= 1.0:
            raise ValueError("eavesdropper_disturbance must lie in [0, 1]")
        if not 0.0 <= self.visibility_noise <= 1.0:
            raise ValueError("visibility_noise must lie in [0, 1]")

    @property
    def n_pulses(self) -> int:
        return int(round(self.pulse_rate_hz * self.session_s))


@dataclass(frozen=True)
class PulseRecord:
    t_index: int
    alice_basis: int
    alice_index: int
    intensity_class: str
    bob_basis: int
    outcome: int  # 0..3 rail, NO_CLICK, or MULTI_CLICK


@dataclass(frozen=True)
class SiftedKey:
    """Matched-basis conclusive events as (basis, alice_index, bob_rail),
    partitioned by intensity class."""

    signal: tuple
    decoy: tuple

    def symbols(self, intensity_class: str) -> tuple:
        if intensity_class == SIGNAL:
            return self.signal
        if intensity_class == DECOY:
            return self.decoy
        raise ValueError(f"unknown intensity class {intensity_class!r}")


@dataclass(frozen=True, eq=False)
class SessionReport:
    """Time-binned QBER and sifted-count traces plus whole-session tallies."""

    bin_seconds: float
    bin_start_s: np.ndarray
    bin_qber: np.ndarray
    bin_sifted: np.ndarray
    bin_class: tuple[str, ...]
    total_pulses: int
    pulses_by_class: dict
    conclusive_by_class: dict
    sifted_by_class: dict
    errors_by_class: dict
    qber_by_class: dict
    estimated_mu_by_class: dict
    n_decoy_windows: int


def intensity_class_at(t_index: int, config: ProtocolConfig) -> str:
    """Scheduled intensity class of pulse ``t_index``."""
    if config.decoy_duration_s <= 0 or config.decoy_period_s <= 0:
        return SIGNAL
    t_s = t_index / config.pulse_rate_hz
    return DECOY if (t_s % config.decoy_period_s) < config.decoy_duration_s else SIGNAL


def n_decoy_windows(config: ProtocolConfig) -> int:
    """Number of decoy windows starting within the session."""
    if config.decoy_duration_s <= 0 or config.decoy_period_s <= 0 or config.session_s <= 0:
        return 0
    return int(math.ceil(config.session_s / config.decoy_period_s))


def alice_choose(rng: np.random.Generator, config: ProtocolConfig, t_index: int = 0):
    """Draw (basis, state index, intensity class) for one pulse."""
    basis = int(rng.integers(0, config.n_bases_used))
    index = int(rng.integers(0, config.dim))
    return basis, index, intensity_class_at(t_index, config)


def eve_clone_attack(alice_index: int, disturbance: float, rng: np.random.Generator, n_outcomes: int = 4) -> int:
    """Index Bob effectively receives under the symmetric cloning attack."""
    if not 0.0 <= disturbance <= 1.0:
        raise ValueError("disturbance must lie in [0, 1]")
    if rng.random() < disturbance:
        return (alice_index + int(rng.integers(1, n_outcomes))) % n_outcomes
    return alice_index


@dataclass(frozen=True, eq=False)
class _Tables:
    amps: np.ndarray          # (3, 4, 4) prepared-state amplitudes (drift offsets folded in)
    bob_u: np.ndarray         # (3, 4, 4) receiver unitaries per basis
    rail_of: np.ndarray       # (3, 4) state index -> rail
    index_of_rail: np.ndarray # (3, 4) rail -> state index
    q_lut: np.ndarray         # (3, 4, 3, 4) rail powers per (ab, ai, bb)
    eta: float
    xt: np.ndarray            # (4, 4) crosstalk matrix


@lru_cache(maxsize=8)
def _build_tables(config: ProtocolConfig) -> _Tables:
    mubs = mub_set_dim4()
    amps = np.array([[s.amplitudes for s in b.states] for b in mubs.bases])
    drift = config.channel.drift
    if drift.kind == "fixed_offsets":
        amps = amps * np.exp(1.0j * np.asarray(drift.offsets))[None, None, :]
    bob_u = np.array(
        [
            chipmodel.chip_unitary(chipmodel.bob_topology(), chipmodel.bob_settings_for(label))
            for label in chipmodel.MUB_LABELS
        ]
    )
    rail_of = np.array([chipmodel.bob_rail_permutation(label) for label in chipmodel.MUB_LABELS])
    index_of_rail = np.empty_like(rail_of)
    for b in range(3):
        index_of_rail[b, rail_of[b]] = np.arange(4)
    xt = crosstalk_matrix(config.channel)
    flat = amps.reshape(12, 4)
    q_lut = np.empty((3, 4, 3, 4))
    for bb in range(3):
        q = np.abs(flat @ bob_u[bb].T) ** 2
        q_lut[:, :, bb, :] = (q @ xt.T).reshape(3, 4, 4)
    return _Tables(
        amps=amps,
        bob_u=bob_u,
        rail_of=rail_of,
        index_of_rail=index_of_rail,
        q_lut=q_lut,
        eta=transmittance(config.channel),
        xt=xt,
    )


def _decoy_mask(t_indices: np.ndarray, config: ProtocolConfig) -> np.ndarray:
    if config.decoy_duration_s <= 0 or config.decoy_period_s <= 0:
        return np.zeros(t_indices.shape, dtype=bool)
    t_s = t_indices / config.pulse_rate_hz
    return (t_s % config.decoy_period_s) < config.decoy_duration_s


def _chunk_rng(config: ProtocolConfig, domain: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(domain, index)))


def _chunk_bounds(n_pulses: int):
    return [(start, min(start + CHUNK_PULSES, n_pulses)) for start in range(0, n_pulses, CHUNK_PULSES)]


def _walk_offsets(config: ProtocolConfig, chunks) -> list[np.ndarray]:
    """Random-walk phase at each chunk start, from per-chunk drift streams."""
    offsets = [np.zeros(4)]
    sigma = config.channel.drift.sigma_rad_per_pulse
    for i, (start, stop) in enumerate(chunks[:-1]):
        rng = _chunk_rng(config, _DOMAIN_DRIFT, i)
        incr = rng.normal(0.0, sigma, size=(stop - start, 4))
        offsets.append(offsets[-1] + incr.sum(axis=0))
    return offsets


def _simulate_chunk(config: ProtocolConfig, tables: _Tables, chunk_index: int, start: int, stop: int, walk_offset):
    """Simulate pulses [start, stop); returns per-pulse arrays.

    Draw order (the determinism contract): alice bases, alice indices, bob
    bases, eavesdropper (flags, shifts), drift increments, clicks,
    visibility noise (flags, shifts).
    """
    n = stop - start
    rng = _chunk_rng(config, _DOMAIN_SESSION, chunk_index)
    nb = config.n_bases_used
    ab = rng.integers(0, nb, n)
    ai = rng.integers(0, 4, n)
    bb = rng.integers(0, nb, n)

    disturbance = config.eavesdropper_disturbance
    if disturbance is not None:
        flips = rng.random(n) < disturbance
        shifts = rng.integers(1, 4, n)
        ai_eff = np.where(flips, (ai + shifts) % 4, ai)
    else:
        ai_eff = ai

    drift = config.channel.drift
    if drift.kind == "random_walk" and drift.sigma_rad_per_pulse > 0:
        drift_rng = _chunk_rng(config, _DOMAIN_DRIFT, chunk_index)
        incr = drift_rng.normal(0.0, drift.sigma_rad_per_pulse, size=(n, 4))
        phases = walk_offset + np.cumsum(incr, axis=0)
        sent = tables.amps[ab, ai_eff] * np.exp(1.0j * phases)
        q = np.empty((n, 4))
        for b in range(nb):
            mask = bb == b
            if np.any(mask):
                q[mask] = np.abs(sent[mask] @ tables.bob_u[b].T) ** 2
        q = q @ tables.xt.T
    else:
        q = tables.q_lut[ab, ai_eff, bb]

    t_indices = np.arange(start, stop)
    decoy = _decoy_mask(t_indices, config)
    mu_t = np.where(decoy, config.mu_decoy, config.mu_signal)
    p = 1.0 - (1.0 - config.channel.p_dark) * np.exp(-(mu_t * tables.eta)[:, None] * q)

    clicks = rng.random((n, 4)) < p
    n_clicks = clicks.sum(axis=1)
    outcome = np.where(
        n_clicks == 1, clicks.argmax(axis=1), np.where(n_clicks == 0, NO_CLICK, MULTI_CLICK)
    )

    eps = config.visibility_noise
    if eps > 0:
        correct_rail = tables.rail_of[bb, ai_eff]
        eligible = (ab == bb) & (n_clicks == 1) & (outcome == correct_rail)
        vis_flips = rng.random(n) < eps
        vis_shifts = rng.integers(1, 4, n)
        outcome = np.where(eligible & vis_flips, (outcome + vis_shifts) % 4, outcome)

    return {"t": t_indices, "ab": ab, "ai": ai, "bb": bb, "decoy": decoy, "outcome": outcome}


def _aggregate_chunk(arrays, tables: _Tables, config: ProtocolConfig, n_bins: int):
    ab, ai, bb = arrays["ab"], arrays["ai"], arrays["bb"]
    outcome, decoy = arrays["outcome"], arrays["decoy"]
    t_s = arrays["t"] / config.pulse_rate_hz
    bin_idx = np.floor_divide(t_s, BIN_SECONDS).astype(np.int64)

    conclusive = outcome >= 0
    sifted = (ab == bb) & conclusive
    logical = tables.index_of_rail[bb, np.clip(outcome, 0, 3)]
    errors = sifted & (logical != ai)

    out = {
        "pulse_bins": np.zeros((2, n_bins), dtype=np.int64),
        "sift_bins": np.zeros((2, n_bins), dtype=np.int64),
        "err_bins": np.zeros((2, n_bins), dtype=np.int64),
        "pulses": np.zeros(2, dtype=np.int64),
        "conclusive": np.zeros(2, dtype=np.int64),
    }
    for cls, mask in ((0, ~decoy), (1, decoy)):
        out["pulse_bins"][cls] = np.bincount(bin_idx[mask], minlength=n_bins)
        out["sift_bins"][cls] = np.bincount(bin_idx[sifted & mask], minlength=n_bins)
        out["err_bins"][cls] = np.bincount(bin_idx[errors & mask], minlength=n_bins)
        out["pulses"][cls] = int(np.count_nonzero(mask))
        out["conclusive"][cls] = int(np.count_nonzero(conclusive & mask))
    return out


def _estimate_mu(conclusive: int, pulses: int, eta: float) -> float:
    """Invert the conclusive rate to a mean photon number (nan if no data)."""
    if pulses == 0 or eta <= 0:
        return math.nan
    rate = conclusive / pulses
    if rate >= 1.0:
        return math.inf
    return -math.log1p(-rate) / eta


def run_session(config: ProtocolConfig, n_workers: int = 1) -> SessionReport:
    """Simulate a full session and bin QBER / sifted counts in 10 s slices."""
    n_pulses = config.n_pulses
    n_bins = int(math.ceil(config.session_s / BIN_SECONDS)) if n_pulses > 0 else 0
    chunks = _chunk_bounds(n_pulses)
    tables = _build_tables(config)

    if config.channel.drift.kind == "random_walk" and chunks:
        offsets = _walk_offsets(config, chunks)
    else:
        offsets = [np.zeros(4)] * len(chunks)

    def job(args):
        i, (start, stop) = args
        arrays = _simulate_chunk(config, tables, i, start, stop, offsets[i])
        return _aggregate_chunk(arrays, tables, config, n_bins)

    tasks = list(enumerate(chunks))
    if n_workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(job, tasks))
    else:
        results = [job(t) for t in tasks]

    agg = {
        "pulse_bins": np.zeros((2, n_bins), dtype=np.int64),
        "sift_bins": np.zeros((2, n_bins), dtype=np.int64),
        "err_bins": np.zeros((2, n_bins), dtype=np.int64),
        "pulses": np.zeros(2, dtype=np.int64),
        "conclusive": np.zeros(2, dtype=np.int64),
    }
    for r in results:
        for key in agg:
            agg[key] += r[key]

    sift_tot = agg["sift_bins"].sum(axis=0)
    err_tot = agg["err_bins"].sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        bin_qber = np.where(sift_tot > 0, err_tot / np.maximum(sift_tot, 1), 0.0)
    bin_class = tuple(
        DECOY if agg["pulse_bins"][1, b] > agg["pulse_bins"][0, b] else SIGNAL
        for b in range(n_bins)
    )

    sifted_by_class = {c: int(agg["sift_bins"][i].sum()) for i, c in enumerate(INTENSITY_CLASSES)}
    errors_by_class = {c: int(agg["err_bins"][i].sum()) for i, c in enumerate(INTENSITY_CLASSES)}
    qber_by_class = {
        c: (errors_by_class[c] / sifted_by_class[c] if sifted_by_class[c] else math.nan)
        for c in INTENSITY_CLASSES
    }
    estimated_mu = {
        c: _estimate_mu(int(agg["conclusive"][i]), int(agg["pulses"][i]), tables.eta)
        for i, c in enumerate(INTENSITY_CLASSES)
    }
    return SessionReport(
        bin_seconds=BIN_SECONDS,
        bin_start_s=np.arange(n_bins) * BIN_SECONDS,
        bin_qber=bin_qber,
        bin_sifted=sift_tot,
        bin_class=bin_class,
        total_pulses=n_pulses,
        pulses_by_class={c: int(agg["pulses"][i]) for i, c in enumerate(INTENSITY_CLASSES)},
        conclusive_by_class={c: int(agg["conclusive"][i]) for i, c in enumerate(INTENSITY_CLASSES)},
        sifted_by_class=sifted_by_class,
        errors_by_class=errors_by_class,
        qber_by_class=qber_by_class,
        estimated_mu_by_class=estimated_mu,
        n_decoy_windows=n_decoy_windows(config),
    )


def simulate_records(config: ProtocolConfig, n_pulses: int | None = None) -> list[PulseRecord]:
    """Materialize per-pulse records (same streams as :func:`run_session`)."""
    if n_pulses is None:
        n_pulses = config.n_pulses
    chunks = _chunk_bounds(n_pulses)
    tables = _build_tables(config)
    if config.channel.drift.kind == "random_walk" and chunks:
        offsets = _walk_offsets(config, chunks)
    else:
        offsets = [np.zeros(4)] * len(chunks)
    records = []
    for i, (start, stop) in enumerate(chunks):
        arrays = _simulate_chunk(config, tables, i, start, stop, offsets[i])
        cls = np.where(arrays["decoy"], DECOY, SIGNAL)
        records.extend(
            PulseRecord(int(t), int(a), int(x), str(c), int(b), int(o))
            for t, a, x, c, b, o in zip(
                arrays["t"], arrays["ab"], arrays["ai"], cls, arrays["bb"], arrays["outcome"]
            )
        )
    return records


def sift(records) -> SiftedKey:
    """Keep matched-basis single-click events, split by intensity class."""
    signal, decoy = [], []
    for r in records:
        if r.alice_basis == r.bob_basis and r.outcome >= 0:
            symbol = (r.alice_basis, r.alice_index, r.outcome)
            (decoy if r.intensity_class == DECOY else signal).append(symbol)
    return SiftedKey(signal=tuple(signal), decoy=tuple(decoy))


def qber(key: SiftedKey, intensity_class: str = SIGNAL) -> float:
    """Error fraction of the sifted symbols in one intensity class.

    Bob's rail is mapped back to a logical state index through the
    receiver's per-basis permutation before comparing with Alice's index.
    """
    symbols = key.symbols(intensity_class)
    if not symbols:
        raise ValueError(f"no sifted symbols in class {intensity_class!r}")
    inverse = {}
    for b in range(3):
        perm = chipmodel.bob_rail_permutation(b)
        inverse[b] = {rail: idx for idx, rail in enumerate(perm)}
    wrong = sum(1 for b, a, rail in symbols if inverse[b][rail] != a)
    return wrong / len(symbols)


def bob_measure(prep, bob_basis: int, config: ProtocolConfig, rng: np.random.Generator, drift_phases=None, mu: float | None = None) -> int:
    """Measure one pulse prepared as (basis, index) in Bob's chosen basis.

    Returns a rail index for a single click, else NO_CLICK / MULTI_CLICK.
    ``drift_phases`` applies explicit extra per-core phases on top of any
    constant offsets already folded into the configuration tables.
    """
    basis, index = prep
    tables = _build_tables(config)
    amp = tables.amps[basis, index]
    if drift_phases is not None:
        amp = amp * np.exp(1.0j * np.asarray(drift_phases, dtype=float))
    q = tables.xt @ (np.abs(tables.bob_u[bob_basis] @ amp) ** 2)
    if mu is None:
        mu = config.mu_signal
    p = 1.0 - (1.0 - config.channel.p_dark) * np.exp(-mu * tables.eta * q)
    clicks = rng.random(4) < p
    n_clicks = int(clicks.sum())
    if n_clicks == 0:
        return NO_CLICK
    if n_clicks > 1:
        return MULTI_CLICK
    outcome = int(np.argmax(clicks))
    if config.visibility_noise > 0:
        flip = rng.random() < config.visibility_noise
        shift = int(rng.integers(1, 4))
        if flip and basis == bob_basis and outcome == int(tables.rail_of[bob_basis, index]):
            outcome = (outcome + shift) % 4
    return outcome


def theory_tomography_matrix() -> np.ndarray:
    """Expected conclusive-outcome matrix: identity blocks on the diagonal,
    flat 1/4 blocks across bases."""
    m = np.full((12, 12), 0.25)
    for b in range(3):
        m[b * 4:(b + 1) * 4, b * 4:(b + 1) * 4] = np.eye(4)
    return m


def tomography_labels() -> tuple[str, ...]:
    return tuple(f"{label}_{i}" for label in chipmodel.MUB_LABELS for i in range(4))


def tomography(config: ProtocolConfig, pulses_per_cell: int, n_workers: int = 1) -> np.ndarray:
    """Estimated conditional outcome probabilities (12 states x 12 outcomes).

    Row (b, i), column block b': probability of conclusive logical outcome
    j when state i of basis b is measured in basis b', estimated from
    4 * pulses_per_cell pulses per block; all three bases are scanned
    regardless of ``n_bases_used``.  Blocks with no conclusive event come
    out as NaN.
    """
    if pulses_per_cell < 1:
        raise ValueError("pulses_per_cell must be >= 1")
    tables = _build_tables(config)
    n_block = 4 * pulses_per_cell
    mu = config.mu_signal
    eps = config.visibility_noise

    def job(block):
        row, bcol = divmod(block, 3)
        b, i = divmod(row, 4)
        rng = _chunk_rng(config, _DOMAIN_TOMOGRAPHY, block)
        q = tables.xt @ (np.abs(tables.bob_u[bcol] @ tables.amps[b, i]) ** 2)
        p = 1.0 - (1.0 - config.channel.p_dark) * np.exp(-mu * tables.eta * q)
        clicks = rng.random((n_block, 4)) < p
        n_clicks = clicks.sum(axis=1)
        outcome = clicks.argmax(axis=1)
        conclusive = n_clicks == 1
        if eps > 0 and b == bcol:
            correct_rail = int(tables.rail_of[b, i])
            vis_flips = rng.random(n_block) < eps
            vis_shifts = rng.integers(1, 4, n_block)
            redirect = conclusive & vis_flips & (outcome == correct_rail)
            outcome = np.where(redirect, (outcome + vis_shifts) % 4, outcome)
        hist = np.bincount(outcome[conclusive], minlength=4)
        total = hist.sum()
        if total == 0:
            return row, bcol, np.full(4, np.nan)
        return row, bcol, hist[tables.rail_of[bcol]] / total

    blocks = range(36)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(job, blocks))
    else:
        results = [job(b) for b in blocks]

    matrix = np.empty((12, 12))
    for row, bcol, probs in results:
        matrix[row, bcol * 4:(bcol + 1) * 4] = probs
    return matrix
