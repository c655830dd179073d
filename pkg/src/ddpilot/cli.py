"""Command-line entry point: YAML experiment files, figure presets, CSV output.

Config grammar (YAML, every section and key optional)::

    frame:     {M: 128, N: 32, delta_f: 30000.0, T_cp: 5.0e-6, f_c: 5.9e9}
    pilot:     {m_p: null, n_p: null}      # null selects the grid centre (M/2, N/2)
    ep:        {K_f: 4, K_t: 4}
    ce:        {P_max: 8, epsilon: 3.0, refine_window: 0.5, refine_stages: 2, refine_points: 41}
    equalizer: {T_iters: 50, eta: auto, tol: 1.0e-6}
    channel:   {kind: fractional, delays: [0.0, 0.9e-6, 2.7e-6, 4.0e-6]}
    sweep:
      mode: link                # or papr
      pipelines: [PropCE+IMFC, PerfCSI+FullMMSE]
      Q: [4]
      snr_db: [15.0]
      pdr_db: [30.0]
      v_max_kmh: [1000.0]
      trials: 200
      base_seed: 0

Sweep axes accept a scalar in place of a one-element list. Unknown keys are
rejected. Command-line flags override file values, which override presets.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import io
import json
import logging
import os
import sys
import tempfile
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from .estimation import CeConfig
from .harness import (
    DEFAULT_SPEEDS,
    ConfigError,
    ExperimentConfig,
    run_sweep,
)
from .metrics import MetricsRecord
from .waveform import EpPilotConfig, FrameConfig

log = logging.getLogger(__name__)

CSV_HEADER = (
    "scheme", "Q", "snr_db", "pdr_db", "vmax_kmh", "channel", "trials",
    "ber", "eff_throughput", "nmse_db", "papr_db",
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_FRAME_KEYS = ("M", "N", "delta_f", "T_cp", "f_c")
_CE_KEYS = ("P_max", "epsilon", "refine_window", "refine_stages", "refine_points")
_SWEEP_AXES = ("pipelines", "Q", "snr_db", "pdr_db", "v_max_kmh")
_SECTIONS = {
    "frame": set(_FRAME_KEYS),
    "pilot": {"m_p", "n_p"},
    "ep": {"K_f", "K_t"},
    "ce": set(_CE_KEYS),
    "equalizer": {"T_iters", "eta", "tol"},
    "channel": {"kind", "delays"},
    "sweep": set(_SWEEP_AXES) | {"trials", "base_seed", "mode"},
}


# -- config ------------------------------------------------------------------

def _as_list(value, key: str) -> list:
    items = value if isinstance(value, (list, tuple)) else [value]
    if not items:
        raise ConfigError(f"{key}: sweep list must be nonempty")
    return list(items)


def _number(value, key: str, kind=float):
    if isinstance(value, str):
        # YAML 1.1 reads exponent forms such as 1e-6 as strings
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def config_from_dict(doc: dict | None, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay a parsed config document on ``base`` (Table I defaults if None)."""
    base = base or ExperimentConfig()
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping of sections")
    for section, body in doc.items():
        if section not in _SECTIONS:
            raise ConfigError(f"{section}: unknown section; expected one of {sorted(_SECTIONS)}")
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{section}: section must be a mapping")
        for key in body:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}: unknown key")

    def sec(name: str) -> dict:
        return doc.get(name) or {}

    kw: dict = {}
    try:
        frame = sec("frame")
        if frame:
            fields = {k: getattr(base.frame, k) for k in _FRAME_KEYS}
            for k, v in frame.items():
                fields[k] = _number(v, f"frame.{k}", int if k in ("M", "N") else float)
            kw["frame"] = FrameConfig(**fields)

        pilot = sec("pilot")
        for k in ("m_p", "n_p"):
            if k in pilot:
                kw[k] = None if pilot[k] is None else _number(pilot[k], f"pilot.{k}", int)

        ep = sec("ep")
        if ep:
            kw["ep"] = EpPilotConfig(
                K_f=_number(ep.get("K_f", base.ep.K_f), "ep.K_f", int),
                K_t=_number(ep.get("K_t", base.ep.K_t), "ep.K_t", int),
                pilot_value=base.ep.pilot_value,
            )

        ce = sec("ce")
        if ce:
            fields = {k: getattr(base.ce, k) for k in _CE_KEYS}
            for k, v in ce.items():
                fields[k] = _number(v, f"ce.{k}", float if k in ("epsilon", "refine_window") else int)
            kw["ce"] = CeConfig(**fields)

        eq = sec("equalizer")
        if "T_iters" in eq:
            kw["imfc_iters"] = _number(eq["T_iters"], "equalizer.T_iters", int)
        if "eta" in eq:
            eta = eq["eta"]
            kw["imfc_eta"] = None if eta in (None, "auto") else _number(eta, "equalizer.eta")
        if "tol" in eq:
            kw["imfc_tol"] = _number(eq["tol"], "equalizer.tol")

        ch = sec("channel")
        if "kind" in ch:
            kw["channel"] = str(ch["kind"])
        if "delays" in ch:
            kw["delays"] = tuple(_number(d, "channel.delays") for d in _as_list(ch["delays"], "channel.delays"))

        sw = sec("sweep")
        if "pipelines" in sw:
            kw["pipelines"] = tuple(str(p) for p in _as_list(sw["pipelines"], "sweep.pipelines"))
        if "Q" in sw:
            kw["Q"] = tuple(_number(q, "sweep.Q", int) for q in _as_list(sw["Q"], "sweep.Q"))
        for k in ("snr_db", "pdr_db", "v_max_kmh"):
            if k in sw:
                kw[k] = tuple(_number(x, f"sweep.{k}") for x in _as_list(sw[k], f"sweep.{k}"))
        if "trials" in sw:
            kw["trials"] = _number(sw["trials"], "sweep.trials", int)
        if "base_seed" in sw:
            kw["base_seed"] = _number(sw["base_seed"], "sweep.base_seed", int)
        if "mode" in sw:
            kw["mode"] = str(sw["mode"])
        return dataclasses.replace(base, **kw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        # constructor invariants from FrameConfig, CeConfig, EpPilotConfig
        raise ConfigError(str(exc)) from exc


def parse_config(path: str | os.PathLike, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Read a YAML experiment file; omitted fields keep Table I defaults."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: malformed YAML in {path}: {exc}") from exc
    return config_from_dict(doc, base)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-data form of ``cfg``; ``config_from_dict`` inverts it."""
    return {
        "frame": {k: getattr(cfg.frame, k) for k in _FRAME_KEYS},
        "pilot": {"m_p": cfg.m_p, "n_p": cfg.n_p},  # null means grid centre
        "ep": {"K_f": cfg.ep.K_f, "K_t": cfg.ep.K_t},
        "ce": {k: getattr(cfg.ce, k) for k in _CE_KEYS},
        "equalizer": {
            "T_iters": cfg.imfc_iters,
            "eta": "auto" if cfg.imfc_eta is None else cfg.imfc_eta,
            "tol": cfg.imfc_tol,
        },
        "channel": {"kind": cfg.channel, "delays": list(cfg.delays)},
        "sweep": {
            "mode": cfg.mode,
            "pipelines": list(cfg.pipelines),
            "Q": list(cfg.Q),
            "snr_db": list(cfg.snr_db),
            "pdr_db": list(cfg.pdr_db),
            "v_max_kmh": list(cfg.v_max_kmh),
            "trials": cfg.trials,
            "base_seed": cfg.base_seed,
        },
    }


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


# -- presets -----------------------------------------------------------------

def preset(name: str) -> ExperimentConfig:
    """Canonical sweeps behind the PAPR, PDR, SNR and speed figures."""
    if name == "papr":
        return ExperimentConfig(mode="papr", pdr_db=tuple(float(p) for p in range(0, 41, 2)), trials=10_000)
    if name == "pdr-sweep":
        return ExperimentConfig(
            pipelines=("TM+FullMMSE", "PropCE+FullMMSE", "PerfCSI+FullMMSE", "TM+SingleTap", "PropCE+IMFC"),
            snr_db=(15.0,), Q=(4,), v_max_kmh=(1000.0,),
            pdr_db=(10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0),
        )
    if name == "snr-sweep":
        return ExperimentConfig(
            pdr_db=(30.0,), v_max_kmh=(100.0, 1000.0), Q=(4, 16),
            snr_db=tuple(float(s) for s in range(0, 31, 5)),
        )
    if name == "speed-sweep":
        return ExperimentConfig(pdr_db=(30.0,), snr_db=(15.0,), Q=(4,), v_max_kmh=DEFAULT_SPEEDS)
    raise ConfigError(f"preset: unknown preset {name!r}; choose from {sorted(PRESETS)}")


PRESETS = ("papr", "pdr-sweep", "snr-sweep", "speed-sweep")


# -- output ------------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        # repr gives the shortest string that round-trips
        return repr(float(x))
    return str(x)


def records_to_csv(records: list[MetricsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([_fmt(v) for v in (
            r.scheme, r.Q, r.snr_db, r.pdr_db, r.v_max_kmh, r.channel_kind, r.trials,
            r.ber, r.eff_throughput, r.nmse_db, r.papr_db,
        )])
    return buf.getvalue()


def emit_csv(records: list[MetricsRecord], path: str | os.PathLike) -> Path:
    path = Path(path)
    _atomic_write(path, records_to_csv(records))
    return path


@dataclasses.dataclass(frozen=True)
class RunManifest:
    config: dict
    version: str
    timestamp: str
    outputs: tuple[str, ...]

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"


def _version() -> str:
    try:
        return metadata.version("ddpilot")
    except metadata.PackageNotFoundError:
        return "unknown"


def manifest_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.name + ".manifest.json")


def write_manifest(cfg: ExperimentConfig, csv_path: Path) -> Path:
    m = RunManifest(
        config=config_to_dict(cfg),
        version=_version(),
        timestamp=dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        outputs=(str(csv_path),),
    )
    path = manifest_path(csv_path)
    _atomic_write(path, m.to_json())
    return path


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ddpilot",
        description="Monte Carlo link simulation of superimposed-pilot OFDM over doubly-dispersive channels.",
    )
    p.add_argument("--config", type=Path, help="YAML experiment file")
    p.add_argument("--preset", choices=PRESETS, help="start from a canonical figure sweep")
    p.add_argument("--out", type=Path, default=Path("results.csv"), help="CSV output path (default: %(default)s)")
    p.add_argument("--trials", type=int, help="trials (or PAPR frames) per sweep point")
    p.add_argument("--seed", type=int, help="base seed, unsigned 64-bit")
    p.add_argument("--threads", type=int, default=1, help="worker processes (default: %(default)s)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = preset(args.preset) if args.preset else ExperimentConfig()
    if args.config is not None:
        cfg = parse_config(args.config, base=cfg)
    overrides = {}
    if args.trials is not None:
        overrides["sweep"] = {"trials": args.trials}
    if args.seed is not None:
        overrides.setdefault("sweep", {})["base_seed"] = args.seed
    if overrides:
        cfg = config_from_dict(overrides, base=cfg)
    if args.threads < 1:
        raise ConfigError(f"threads: must be >= 1, got {args.threads}")
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; keep --help at 0
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        n_points = len(cfg.points())
        log.info("running %d point(s) x %d trial(s), pipelines: %s", n_points, cfg.trials, ", ".join(cfg.pipelines))
        records = run_sweep(cfg, threads=args.threads)
        out = emit_csv(records, args.out)
        man = write_manifest(cfg, out)
    except Exception as exc:  # noqa: BLE001 - anything past validation is a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %s and %s", out, man)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
