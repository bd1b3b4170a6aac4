"""Command-line front end: config ingestion and CSV/JSON emission.

Subcommands: mubs | circuit verify | circuit solve | tomography | simulate |
thresholds | keyrate | mi-curves.  Every subcommand accepts --config,
--seed, --out, --format and --workers; all randomness flows from the seed,
so repeated runs write byte-identical files.

The JSON config document holds the protocol fields at the top level plus
nested "channel" and "rate" sections; unknown keys are rejected.  Exit
status: 0 on success, 1 on validation/usage errors, 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import chipmodel, protocol, qstate, security
from .channel import ChannelParams, PhaseDriftModel
from .protocol import ProtocolConfig
from .security import RateParams


class ConfigError(ValueError):
    """Config document rejected; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    """Validated superset document driving every subcommand."""

    seed: int = 0
    out: str | None = None
    distance_max_km: float = 400.0
    distance_step_km: float = 2.0
    protocol: ProtocolConfig = ProtocolConfig()
    rate: RateParams = RateParams()

    def __post_init__(self):
        if self.distance_max_km < 0 or self.distance_step_km <= 0:
            raise ValueError("distance grid must have max >= 0 and step > 0")


_PROTOCOL_KEYS = (
    "n_bases_used",
    "dim",
    "pulse_rate_hz",
    "mu_signal",
    "mu_decoy",
    "decoy_period_s",
    "decoy_duration_s",
    "session_s",
    "visibility_noise",
    "eavesdropper",
)
_CHANNEL_KEYS = (
    "length_km",
    "alpha_db_per_km",
    "alice_insertion_db",
    "bob_insertion_db",
    "eta_detector",
    "p_dark",
    "crosstalk_db",
    "drift",
)
_DRIFT_KEYS = ("kind", "offsets", "sigma_rad_per_pulse")
_RATE_KEYS = (
    "n_dim",
    "n_bases",
    "mu",
    "nu",
    "error_correction_efficiency",
    "intrinsic_error_rate",
)
_TOP_KEYS = ("seed", "out", "distance_max_km", "distance_step_km", "channel", "rate") + _PROTOCOL_KEYS


def _reject_unknown(doc: dict, allowed, where: str):
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _number(doc: dict, key: str, default, where: str) -> float:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    return float(value)


def _integer(doc: dict, key: str, default, where: str) -> int:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key} must be an integer")
    return value


def _parse_drift(doc, where: str) -> PhaseDriftModel:
    if doc is None:
        return PhaseDriftModel()
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be an object")
    _reject_unknown(doc, _DRIFT_KEYS, where)
    kind = doc.get("kind", "none")
    if not isinstance(kind, str):
        raise ConfigError(f"{where}.kind must be a string")
    offsets = doc.get("offsets", (0.0, 0.0, 0.0, 0.0))
    if not isinstance(offsets, (list, tuple)) or len(offsets) != 4:
        raise ConfigError(f"{where}.offsets must be a list of 4 phases")
    try:
        return PhaseDriftModel(
            kind=kind,
            offsets=tuple(float(x) for x in offsets),
            sigma_rad_per_pulse=_number(doc, "sigma_rad_per_pulse", 0.0, where),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_channel(doc, where: str = "channel") -> ChannelParams:
    if doc is None:
        return ChannelParams()
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be an object")
    _reject_unknown(doc, _CHANNEL_KEYS, where)
    crosstalk = doc.get("crosstalk_db")
    if crosstalk is None:
        crosstalk_db = math.inf
    elif isinstance(crosstalk, bool) or not isinstance(crosstalk, (int, float)):
        raise ConfigError(f"{where}.crosstalk_db must be a number or null")
    else:
        crosstalk_db = float(crosstalk)
    try:
        return ChannelParams(
            length_km=_number(doc, "length_km", 0.003, where),
            alpha_db_per_km=_number(doc, "alpha_db_per_km", 0.2, where),
            alice_insertion_db=_number(doc, "alice_insertion_db", 0.0, where),
            bob_insertion_db=_number(doc, "bob_insertion_db", 0.0, where),
            eta_detector=_number(doc, "eta_detector", 0.1, where),
            p_dark=_number(doc, "p_dark", 2e-8, where),
            crosstalk_db=crosstalk_db,
            drift=_parse_drift(doc.get("drift"), f"{where}.drift"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config document; defaults fill omissions."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "config")

    seed = _integer(doc, "seed", 0, "config")
    out = doc.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("config.out must be a string or null")

    channel = _parse_channel(doc.get("channel"))

    eavesdropper = doc.get("eavesdropper")
    if eavesdropper is not None:
        if isinstance(eavesdropper, bool) or not isinstance(eavesdropper, (int, float)):
            raise ConfigError("config.eavesdropper must be a number or null")
        eavesdropper = float(eavesdropper)

    try:
        proto = ProtocolConfig(
            n_bases_used=_integer(doc, "n_bases_used", 2, "config"),
            dim=_integer(doc, "dim", 4, "config"),
            pulse_rate_hz=_number(doc, "pulse_rate_hz", 5000.0, "config"),
            mu_signal=_number(doc, "mu_signal", 0.26, "config"),
            mu_decoy=_number(doc, "mu_decoy", 0.15, "config"),
            decoy_period_s=_number(doc, "decoy_period_s", 120.0, "config"),
            decoy_duration_s=_number(doc, "decoy_duration_s", 10.0, "config"),
            session_s=_number(doc, "session_s", 600.0, "config"),
            seed=seed,
            eavesdropper_disturbance=eavesdropper,
            visibility_noise=_number(doc, "visibility_noise", 0.13, "config"),
            channel=channel,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    rate_doc = doc.get("rate") or {}
    if not isinstance(rate_doc, dict):
        raise ConfigError("config.rate must be an object")
    _reject_unknown(rate_doc, _RATE_KEYS, "rate")
    try:
        rate = RateParams(
            n_dim=_integer(rate_doc, "n_dim", 4, "rate"),
            n_bases=_integer(rate_doc, "n_bases", 2, "rate"),
            mu=_number(rate_doc, "mu", 0.45, "rate"),
            nu=_number(rate_doc, "nu", 0.15, "rate"),
            channel=channel,
            error_correction_efficiency=_number(rate_doc, "error_correction_efficiency", 1.0, "rate"),
            intrinsic_error_rate=_number(rate_doc, "intrinsic_error_rate", 0.0, "rate"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"rate: {exc}") from exc

    try:
        return RunConfig(
            seed=seed,
            out=out,
            distance_max_km=_number(doc, "distance_max_km", 400.0, "config"),
            distance_step_km=_number(doc, "distance_step_km", 2.0, "config"),
            protocol=proto,
            rate=rate,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of parse_config: parse_config(serialize_config(cfg)) == cfg."""
    channel = cfg.protocol.channel
    doc = {
        "seed": cfg.seed,
        "out": cfg.out,
        "distance_max_km": cfg.distance_max_km,
        "distance_step_km": cfg.distance_step_km,
        "n_bases_used": cfg.protocol.n_bases_used,
        "dim": cfg.protocol.dim,
        "pulse_rate_hz": cfg.protocol.pulse_rate_hz,
        "mu_signal": cfg.protocol.mu_signal,
        "mu_decoy": cfg.protocol.mu_decoy,
        "decoy_period_s": cfg.protocol.decoy_period_s,
        "decoy_duration_s": cfg.protocol.decoy_duration_s,
        "session_s": cfg.protocol.session_s,
        "visibility_noise": cfg.protocol.visibility_noise,
        "eavesdropper": cfg.protocol.eavesdropper_disturbance,
        "channel": {
            "length_km": channel.length_km,
            "alpha_db_per_km": channel.alpha_db_per_km,
            "alice_insertion_db": channel.alice_insertion_db,
            "bob_insertion_db": channel.bob_insertion_db,
            "eta_detector": channel.eta_detector,
            "p_dark": channel.p_dark,
            "crosstalk_db": None if math.isinf(channel.crosstalk_db) else channel.crosstalk_db,
            "drift": {
                "kind": channel.drift.kind,
                "offsets": list(channel.drift.offsets),
                "sigma_rad_per_pulse": channel.drift.sigma_rad_per_pulse,
            },
        },
        "rate": {
            "n_dim": cfg.rate.n_dim,
            "n_bases": cfg.rate.n_bases,
            "mu": cfg.rate.mu,
            "nu": cfg.rate.nu,
            "error_correction_efficiency": cfg.rate.error_correction_efficiency,
            "intrinsic_error_rate": cfg.rate.intrinsic_error_rate,
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_safe(obj):
    """Replace non-finite floats with null so the output is strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def _json_text(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_mubs(cfg: RunConfig, args) -> str:
    mubs = qstate.mub_set_dim4()
    payload = [
        [[[float(a.real), float(a.imag)] for a in s.amplitudes] for s in basis.states]
        for basis in mubs.bases
    ]
    return _json_text(payload)


def _cmd_circuit_verify(cfg: RunConfig, args) -> str:
    mubs = qstate.mub_set_dim4()
    rows = []
    for b, label in enumerate(chipmodel.MUB_LABELS):
        perm = chipmodel.bob_rail_permutation(label)
        bob_u = chipmodel.chip_unitary(chipmodel.bob_topology(), chipmodel.bob_settings_for(label))
        for i in range(4):
            prepared = chipmodel.prepared_state(label, i)
            fidelity = qstate.overlap_sq(prepared, mubs[b].states[i])
            power = float(np.abs(bob_u @ mubs[b].states[i].amplitudes)[perm[i]] ** 2)
            rows.append((label, i, fidelity, perm[i], power))
    if args.format == "json":
        return _json_text(
            [
                {"basis": b, "index": i, "alice_fidelity": f, "bob_rail": r, "bob_rail_power": p}
                for b, i, f, r, p in rows
            ]
        )
    return _csv_text(("basis", "index", "alice_fidelity", "bob_rail", "bob_rail_power"), rows)


def _parse_target(text: str) -> qstate.StateVector:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--target is not valid JSON: {exc.msg}") from exc
    if not isinstance(raw, list) or len(raw) != 4:
        raise ConfigError("--target must be a JSON array of 4 amplitudes")
    amps = []
    for entry in raw:
        if isinstance(entry, (int, float)) and not isinstance(entry, bool):
            amps.append(complex(entry))
        elif isinstance(entry, list) and len(entry) == 2:
            amps.append(complex(float(entry[0]), float(entry[1])))
        else:
            raise ConfigError("--target entries must be numbers or [re, im] pairs")
    try:
        return qstate.StateVector(np.array(amps))
    except ValueError as exc:
        raise ConfigError(f"--target: {exc}") from exc


def _cmd_circuit_solve(cfg: RunConfig, args) -> str:
    target = _parse_target(args.target)
    settings = chipmodel.solve_settings(chipmodel.alice_topology(), target, seed=cfg.seed)
    return _json_text({k: settings[k] for k in sorted(settings)})


def _cmd_tomography(cfg: RunConfig, args) -> str:
    matrix = protocol.tomography(cfg.protocol, args.pulses_per_cell, n_workers=args.workers)
    labels = protocol.tomography_labels()
    if args.format == "json":
        return _json_text({"labels": list(labels), "matrix": [list(map(float, row)) for row in matrix]})
    rows = [(labels[i],) + tuple(float(x) for x in matrix[i]) for i in range(12)]
    return _csv_text(("state",) + labels, rows)


def _cmd_simulate(cfg: RunConfig, args) -> str:
    report = protocol.run_session(cfg.protocol, n_workers=args.workers)
    bins = [
        (float(t), float(q), int(s), c)
        for t, q, s, c in zip(report.bin_start_s, report.bin_qber, report.bin_sifted, report.bin_class)
    ]
    if args.format == "json":
        return _json_text(
            {
                "bins": [
                    {"time_s": t, "qber": q, "sifted_count": s, "intensity_class": c}
                    for t, q, s, c in bins
                ],
                "totals": {
                    "total_pulses": report.total_pulses,
                    "pulses_by_class": report.pulses_by_class,
                    "sifted_by_class": report.sifted_by_class,
                    "errors_by_class": report.errors_by_class,
                    "qber_by_class": report.qber_by_class,
                    "estimated_mu_by_class": report.estimated_mu_by_class,
                    "n_decoy_windows": report.n_decoy_windows,
                },
            }
        )
    return _csv_text(("time_s", "qber", "sifted_count", "intensity_class"), bins)


def _cmd_thresholds(cfg: RunConfig, args) -> str:
    table = security.threshold_table()
    rows = [
        (n,) + table.row(n)
        for n in table.dims
    ]
    if args.format == "json":
        return _json_text(
            [
                {"N": n, "D_2_ind": d2, "D_Np1_ind": dn, "D_coh": dc}
                for n, d2, dn, dc in rows
            ]
        )
    return _csv_text(("N", "D_2_ind", "D_Np1_ind", "D_coh"), rows)


def _cmd_keyrate(cfg: RunConfig, args) -> str:
    params = cfg.rate if args.dim is None else replace(cfg.rate, n_dim=args.dim)
    distances = np.arange(0.0, cfg.distance_max_km + 1e-9, cfg.distance_step_km)
    curve = security.key_rate_vs_distance(params, args.mode, distances)
    rows = [(d, r, curve.mode) for d, r in zip(curve.distances_km, curve.rates_bits_per_pulse)]
    if args.format == "json":
        return _json_text(
            [{"distance_km": d, "rate_bits_per_pulse": r, "mode": m} for d, r, m in rows]
        )
    return _csv_text(("distance_km", "rate_bits_per_pulse", "mode"), rows)


def _cmd_mi_curves(cfg: RunConfig, args) -> str:
    try:
        dims = [int(x) for x in args.dims.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--dims must be comma-separated integers: {args.dims!r}") from exc
    if not dims:
        raise ConfigError("--dims must name at least one dimension")
    rows = security.mutual_info_curves(dims)
    if args.format == "json":
        return _json_text(
            [{"N": n, "D": d, "I_AB": iab, "I_AE": iae} for n, d, iab, iae in rows]
        )
    return _csv_text(("N", "D", "I_AB", "I_AE"), rows)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> _ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--workers", type=int, default=1, help="simulation worker threads")

    parser = _ArgumentParser(prog="hdqkd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("mubs", parents=[common], help="emit the three protocol bases (JSON)")
    p.set_defaults(handler=_cmd_mubs)

    circuit = sub.add_parser("circuit", help="chip-model tools")
    csub = circuit.add_subparsers(dest="circuit_command", required=True, parser_class=_ArgumentParser)
    p = csub.add_parser("verify", parents=[common], help="fidelity table of the settings tables")
    p.set_defaults(handler=_cmd_circuit_verify)
    p = csub.add_parser("solve", parents=[common], help="solve transmitter settings for a target state")
    p.add_argument("--target", required=True, help="JSON state, e.g. [[0.7071,0],[0.7071,0],0,0]")
    p.set_defaults(handler=_cmd_circuit_solve)

    p = sub.add_parser("tomography", parents=[common], help="Monte Carlo outcome-probability matrix")
    p.add_argument("--pulses-per-cell", type=int, default=10000)
    p.set_defaults(handler=_cmd_tomography)

    p = sub.add_parser("simulate", parents=[common], help="run a full session, emit binned report")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("thresholds", parents=[common], help="disturbance-threshold table")
    p.set_defaults(handler=_cmd_thresholds)

    p = sub.add_parser("keyrate", parents=[common], help="key rate vs distance curve")
    p.add_argument("--mode", choices=security.RATE_MODES, default="decoy")
    p.add_argument("--dim", type=int, help="override the rate Hilbert dimension")
    p.set_defaults(handler=_cmd_keyrate)

    p = sub.add_parser("mi-curves", parents=[common], help="mutual information vs disturbance")
    p.add_argument("--dims", default="2,3,4,5,8", help="comma-separated dimensions")
    p.set_defaults(handler=_cmd_mi_curves)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as exc:
                print(f"hdqkd: error: cannot read config: {exc}", file=sys.stderr)
                return 2
            cfg = parse_config(text)
        else:
            cfg = RunConfig()
        if args.seed is not None:
            cfg = replace(
                cfg, seed=args.seed, protocol=replace(cfg.protocol, seed=args.seed)
            )
        text = args.handler(cfg, args)
        _emit(text, args.out or cfg.out)
        return 0
    except (ConfigError, ValueError) as exc:
        print(f"hdqkd: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError) as exc:
        print(f"hdqkd: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))
