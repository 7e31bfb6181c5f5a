"""Command-line front door: validate a flat JSON configuration, run the
requested analyses, and write CSV/JSON artifacts plus a consolidated claims
report.

Exit codes: 0 on success, 1 on configuration errors, 2 when any checked
claim fails its tolerance.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import __version__
from .analyses import (ClaimCheck, constraint_claims, density_discrepancy_claims,
                       equivariance_claims, global_constraint_claims,
                       oracle_crosscheck, trajectory_ensemble, uniqueness_claims)
from .ensemble import build_ensemble, write_ensemble_csv, write_metadata
from .errors import ConfigurationError
from .numerics import IntegratorConfig
from .planewave import PlaneWavePair
from .spherical import SlitPair

ANALYSES = ("trajectories", "constraints", "uniqueness", "equivariance",
            "global_constraint", "oracle_crosscheck", "density_discrepancy")
PLANEWAVE_ONLY = frozenset({"uniqueness", "global_constraint", "density_discrepancy"})
MODELS = ("planewave", "spherical")


@dataclass
class RunConfig:
    """Fully validated, default-filled run configuration (flat schema).

    Defaults: hbar = mass = 1, box_length of 20 hbar/p (plane-wave) or 40/k
    (spherical) when left null, adaptive integrator at rel_tol 1e-9.
    """

    model: str = "planewave"
    a: float = 1.0
    b: float = 0.0
    momentum: float = 1.0
    wavenumber: float = 1.0
    slit_offset: float = 0.5
    mass: float = 1.0
    hbar: float = 1.0
    box_length: float | None = None
    n: int = 1000
    seed: int = 0
    t0: float = 0.0
    t_end: float = 3.0
    sample_times: list[float] | None = None
    trajectory_count: int = 8
    trajectory_samples: int = 101
    method: str = "rk45"
    step: float = 0.01
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_steps: int = 1_000_000
    analyses: list[str] = field(default_factory=lambda: ["trajectories"])
    output_dir: str = "runs/latest"

    def to_dict(self) -> dict:
        return asdict(self)

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}


def _check_number(name: str, value, *, positive=False, nonnegative=False,
                  integer=False, minimum=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{name}: expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigurationError(f"{name}: expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigurationError(f"{name}: must be > 0 (got {value})")
    if nonnegative and value < 0:
        raise ConfigurationError(f"{name}: must be >= 0 (got {value})")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{name}: must be >= {minimum} (got {value})")
    return int(value) if integer else float(value)


def validate_config(raw) -> RunConfig:
    """Parse and validate a configuration given as JSON text or a mapping.

    Fills defaults, rejects unknown keys, range-checks every field, and
    refuses analyses that do not apply to the chosen model.
    """
    if isinstance(raw, (str, bytes)):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a JSON object")

    unknown = set(raw) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")

    cfg = RunConfig()
    data = {**cfg.to_dict(), **raw}

    if data["model"] not in MODELS:
        raise ConfigurationError(f"model: must be one of {MODELS}, got {data['model']!r}")
    data["a"] = _check_number("a", data["a"], nonnegative=True)
    data["b"] = _check_number("b", data["b"], nonnegative=True)
    if data["model"] == "planewave" and data["a"] + data["b"] <= 0:
        raise ConfigurationError("a, b: at least one amplitude must be positive")
    for name in ("momentum", "wavenumber", "slit_offset", "mass", "hbar"):
        data[name] = _check_number(name, data[name], positive=True)
    if data["box_length"] is not None:
        data["box_length"] = _check_number("box_length", data["box_length"], positive=True)
    data["n"] = _check_number("n", data["n"], integer=True, minimum=1)
    data["seed"] = _check_number("seed", data["seed"], integer=True)
    data["t0"] = _check_number("t0", data["t0"])
    data["t_end"] = _check_number("t_end", data["t_end"])
    data["trajectory_count"] = _check_number("trajectory_count", data["trajectory_count"],
                                             integer=True, minimum=1)
    data["trajectory_samples"] = _check_number("trajectory_samples", data["trajectory_samples"],
                                               integer=True, minimum=2)
    if data["method"] not in ("rk45", "rk4"):
        raise ConfigurationError(f"method: must be 'rk45' or 'rk4', got {data['method']!r}")
    data["step"] = _check_number("step", data["step"], positive=True)
    data["rel_tol"] = _check_number("rel_tol", data["rel_tol"], positive=True)
    data["abs_tol"] = _check_number("abs_tol", data["abs_tol"], positive=True)
    data["max_steps"] = _check_number("max_steps", data["max_steps"], integer=True, minimum=1)

    if data["sample_times"] is not None:
        if not isinstance(data["sample_times"], (list, tuple)):
            raise ConfigurationError("sample_times: expected a list of numbers")
        data["sample_times"] = [_check_number("sample_times", v) for v in data["sample_times"]]
        lo, hi = sorted((data["t0"], data["t_end"]))
        for v in data["sample_times"]:
            if v < lo or v > hi:
                raise ConfigurationError(
                    f"sample_times: {v} lies outside [{lo}, {hi}]")

    analyses = data["analyses"]
    if isinstance(analyses, str):
        analyses = [s.strip() for s in analyses.split(",") if s.strip()]
    if not isinstance(analyses, (list, tuple)) or not analyses:
        raise ConfigurationError("analyses: expected a non-empty list")
    for name in analyses:
        if name not in ANALYSES:
            raise ConfigurationError(
                f"analyses: unknown analysis {name!r}; valid: {', '.join(ANALYSES)}")
        if name in PLANEWAVE_ONLY and data["model"] != "planewave":
            raise ConfigurationError(
                f"analyses: {name!r} applies to the planewave model only")
    data["analyses"] = list(analyses)

    if not isinstance(data["output_dir"], str) or not data["output_dir"]:
        raise ConfigurationError("output_dir: expected a non-empty string")
    return RunConfig(**data)


def build_model(config: RunConfig):
    if config.model == "planewave":
        return PlaneWavePair(a=config.a, b=config.b, momentum=config.momentum,
                             mass=config.mass, hbar=config.hbar,
                             box_length=config.box_length)
    return SlitPair(wavenumber=config.wavenumber, slit_offset=config.slit_offset,
                    mass=config.mass, hbar=config.hbar, box_length=config.box_length)


def integrator_config(config: RunConfig) -> IntegratorConfig:
    return IntegratorConfig(method=config.method, step=config.step,
                            rel_tol=config.rel_tol, abs_tol=config.abs_tol,
                            max_steps=config.max_steps)


def run(config: RunConfig) -> int:
    """Execute the configured analyses and write artifacts to ``output_dir``:
    ``claims_report.json`` always, ``trajectories.csv`` for trajectory-level
    analyses, ``ensemble.csv`` plus ``meta.json`` for ensemble-level ones."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(config)
    cfg = integrator_config(config)
    claims: list[ClaimCheck] = []
    ensemble_for_meta = None

    needs_probe = {"trajectories", "constraints"} & set(config.analyses)
    probe = None
    if needs_probe:
        probe = trajectory_ensemble(model, config.trajectory_count, config.seed,
                                    config.t0, config.t_end, cfg,
                                    samples=config.trajectory_samples,
                                    sample_times=config.sample_times)
    if probe is not None:
        write_ensemble_csv(out / "trajectories.csv", probe)
    if "constraints" in config.analyses:
        claims.extend(constraint_claims(model, probe))
    if "oracle_crosscheck" in config.analyses:
        claims.extend(oracle_crosscheck(model, seed=config.seed + 1_000_003))
    if "uniqueness" in config.analyses:
        claims.extend(uniqueness_claims(model, t=config.t0, t0=config.t0))
    if "density_discrepancy" in config.analyses:
        claims.extend(density_discrepancy_claims(model))

    if {"equivariance", "global_constraint"} & set(config.analyses):
        ens0 = build_ensemble(model, config.n, config.seed, t0=config.t0)
        ensemble_for_meta = ens0
        if "global_constraint" in config.analyses:
            claims.extend(global_constraint_claims(ens0))
        if "equivariance" in config.analyses:
            eq_claims, evolved = equivariance_claims(ens0, config.t_end, cfg,
                                                     sample_times=config.sample_times)
            claims.extend(eq_claims)
            ensemble_for_meta = evolved
        write_ensemble_csv(out / "ensemble.csv", ensemble_for_meta)

    with open(out / "claims_report.json", "w") as fh:
        json.dump([c.to_dict() for c in claims], fh, indent=2, sort_keys=True)
        fh.write("\n")

    if ensemble_for_meta is not None:
        write_metadata(out / "meta.json", ensemble_for_meta,
                       extra={"config": config.to_dict(),
                              "package_version": __version__})
    else:
        meta = {"config": config.to_dict(), "package_version": __version__,
                "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat()}
        with open(out / "meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")

    failed = [c for c in claims if c.status == "fail"]
    for c in claims:
        marker = {"pass": "ok ", "fail": "FAIL", "measured": "meas"}[c.status]
        print(f"[{marker}] {c.claim_id}: {c.value}"
              + (f" (tol {c.tolerance})" if c.tolerance is not None else ""))
    if failed:
        print(f"{len(failed)} claim(s) failed; see claims_report.json", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bohmpair",
        description="Guided two-particle pair models: simulate, verify, report.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run analyses from a config file and/or flag overrides")
    p.add_argument("--config", help="path to a flat JSON config file")
    p.add_argument("--model", choices=MODELS)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--wavenumber", type=float)
    p.add_argument("--slit-offset", dest="slit_offset", type=float)
    p.add_argument("--mass", type=float)
    p.add_argument("--hbar", type=float)
    p.add_argument("--box-length", dest="box_length", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--t0", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--trajectory-count", dest="trajectory_count", type=int)
    p.add_argument("--trajectory-samples", dest="trajectory_samples", type=int)
    p.add_argument("--method", choices=("rk45", "rk4"))
    p.add_argument("--step", type=float)
    p.add_argument("--rel-tol", dest="rel_tol", type=float)
    p.add_argument("--abs-tol", dest="abs_tol", type=float)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--analysis", dest="analyses",
                   help="comma-separated subset of: " + ", ".join(ANALYSES))
    p.add_argument("--output-dir", dest="output_dir")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw: dict = {}
        if args.config:
            path = Path(args.config)
            if not path.exists():
                raise ConfigurationError(f"config: file not found: {path}")
            raw = json.loads(path.read_text()) if path.read_text().strip() else {}
            if not isinstance(raw, dict):
                raise ConfigurationError("config: file must contain a JSON object")
        overrides = {k: v for k, v in vars(args).items()
                     if k not in ("command", "config") and v is not None}
        config = validate_config({**raw, **overrides})
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"configuration error: config is not valid JSON: {exc}", file=sys.stderr)
        return 1
    try:
        return run(config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
