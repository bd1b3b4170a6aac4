"""Simulator and security toolkit for four-dimensional multicore-fiber QKD."""

from .qstate import (
    MubBasis,
    MubSet,
    StateVector,
    basis_state,
    computational_basis,
    is_mutually_unbiased,
    is_orthonormal,
    mub_set_dim4,
    overlap_sq,
)
from .chipmodel import (
    ChipTopology,
    alice_settings_for,
    alice_topology,
    bob_settings_for,
    bob_topology,
    chip_unitary,
    max_repetition_rate,
    mzi_transfer,
    solve_settings,
)
from .channel import (
    ChannelParams,
    ClickDistribution,
    PhaseDriftModel,
    apply_drift,
    click_probabilities,
    sample_clicks,
    transmittance,
)
from .protocol import (
    ProtocolConfig,
    PulseRecord,
    SessionReport,
    SiftedKey,
    alice_choose,
    bob_measure,
    eve_clone_attack,
    qber,
    run_session,
    sift,
    simulate_records,
    tomography,
)
from .security import (
    KeyRateCurve,
    RateParams,
    ThresholdTable,
    decoy_bounds,
    eve_fidelity,
    gain_and_error,
    key_rate_vs_distance,
    mutual_info_ab,
    mutual_info_ae,
    mutual_info_curves,
    secret_rate_ideal,
    threshold_coherent,
    threshold_individual_2mub,
    threshold_table,
)

__version__ = "0.1.0"
