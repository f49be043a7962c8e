"""Command-line entry point: ``fieldrecon {simulate,estimate,pipeline,gramian,energy}``.

Every command writes plot-ready CSV/JSON under ``--out`` together with the
resolved configuration (``config.json``) and the tool version.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dc_field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    NetworkSystem,
    StabilityError,
    TrajectoryFormatError,
    load_trajectory,
    save_trajectory,
    simulate,
)
from .estimator import (
    Backtracking,
    EstimationConfig,
    ShapeError,
    StepSizeError,
    estimate,
    save_result,
)
from .field import (
    EmptyDataError,
    FieldFormatError,
    ScalarField,
    constant_field,
    error_map,
    field_to_csv,
    gaussian_field,
    load_gridded_csv,
    save_gridded_csv,
    state_to_field,
    synthetic_salinity,
    field_to_state,
)
from .graph import Graph, build_chain, build_grid, load_graph, save_graph
from .observability import compare_topologies, comparison_to_csv, default_ratios
from .robustness import DEFAULT_SIZES, energy_sweep, energy_sweep_to_csv

log = logging.getLogger("fieldrecon")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    topology: str | None = None
    n: int | None = None
    l1: int | None = None
    l2: int | None = None
    graph: str | None = None
    k: int | None = None
    horizon: float = 50.0
    rate: float = 10.0
    lam: float = 1e-6
    seed: int = 0
    field: str = "gaussian"
    field_shape: list[int] | None = None
    gaussian: dict = dc_field(default_factory=lambda: dict(_reference()["gaussian"]))
    noise_std: float = 0.0
    max_iters: int = 5000
    accessible: str = "prefix"

    def resolved(self) -> dict:
        d = asdict(self)
        d["version"] = __version__
        return d


def _reference() -> dict:
    text = resources.files("fieldrecon").joinpath("data/reference.json").read_text()
    return json.loads(text)


def _load_config_file(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    return {k: v for k, v in doc.items() if k in known}


def _config_from_args(args) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(_load_config_file(args.config))
    for name in ("topology", "n", "l1", "l2", "graph", "k", "horizon", "rate", "lam", "seed",
                 "field", "noise_std", "max_iters"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "l", None) is not None:
        values["l1"] = values["l2"] = args.l
    if getattr(args, "field_shape", None):
        values["field_shape"] = _parse_shape(args.field_shape)
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def _parse_shape(text: str) -> list[int]:
    try:
        a, b = text.lower().split("x")
        return [int(a), int(b)]
    except ValueError as exc:
        raise ConfigError(f"--field-shape expects L1xL2, got {text!r}") from exc


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.graph is None:
        if cfg.topology not in ("chain", "grid"):
            raise ConfigError("--topology chain|grid (or --graph FILE) is required")
        if cfg.topology == "chain" and not cfg.n:
            raise ConfigError("chain topology needs --n")
        if cfg.topology == "grid" and not (cfg.l1 and cfg.l2):
            raise ConfigError("grid topology needs --l (or --l1 and --l2)")
    if cfg.k is None or cfg.k < 1:
        raise ConfigError("--k (number of accessible robots, >= 1) is required")
    if cfg.horizon <= 0 or cfg.rate <= 0:
        raise ConfigError("--T and --rate must be positive")
    if cfg.lam < 0:
        raise ConfigError("--lambda must be nonnegative")
    if cfg.noise_std < 0:
        raise ConfigError("--noise-std must be nonnegative")
    if cfg.max_iters < 1:
        raise ConfigError("--max-iters must be positive")


def _build_graph(cfg: ExperimentConfig) -> Graph:
    try:
        if cfg.graph is not None:
            return load_graph(cfg.graph)
        if cfg.topology == "chain":
            return build_chain(cfg.n)
        return build_grid(cfg.l1, cfg.l2)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read graph: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _field_shape(cfg: ExperimentConfig, g: Graph) -> tuple[int, int]:
    if cfg.field_shape:
        shape = tuple(cfg.field_shape)
    elif g.topology == "grid":
        shape = tuple(g.dims)
    else:
        side = math.isqrt(g.num_nodes)
        if side * side != g.num_nodes:
            raise ConfigError(
                f"{g.num_nodes} robots do not form a square field; pass --field-shape L1xL2"
            )
        shape = (side, side)
    if shape[0] * shape[1] != g.num_nodes:
        raise ConfigError(f"field shape {shape} does not match {g.num_nodes} robots")
    return shape


def _build_field(cfg: ExperimentConfig, shape) -> ScalarField:
    spec = cfg.field
    l1, l2 = shape
    try:
        if spec == "gaussian":
            p = cfg.gaussian
            return gaussian_field(l1, l2, tuple(p["center"]), tuple(p["sigma"]),
                                  float(p["amplitude"]), tuple(p.get("extent", (0, 1, 0, 1))))
        if spec.startswith("constant:"):
            return constant_field(l1, l2, float(spec.split(":", 1)[1]))
        if spec == "salinity":
            return synthetic_salinity(l1, l2)
        if spec.startswith("csv:"):
            f = load_gridded_csv(spec.split(":", 1)[1])
            if f.shape != (l1, l2):
                raise DataError(f"field file has shape {f.shape}, expected {(l1, l2)}")
            return f
    except DataError:
        raise
    except (FieldFormatError, EmptyDataError, OSError) as exc:
        raise DataError(str(exc)) from exc
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad field spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown field spec {spec!r} (gaussian, constant:C, salinity, csv:PATH)")


def _write_config(out: Path, cfg: ExperimentConfig, **extra) -> None:
    doc = cfg.resolved()
    doc.update(extra)
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_state(path: Path, x) -> None:
    lines = ["node,value"] + [f"{i + 1},{v:.17g}" for i, v in enumerate(x)]
    path.write_text("\n".join(lines) + "\n")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_simulate(cfg: ExperimentConfig, out: Path):
    g = _build_graph(cfg)
    if cfg.k > g.num_nodes:
        raise ConfigError(f"k = {cfg.k} exceeds the {g.num_nodes} robots")
    shape = _field_shape(cfg, g)
    truth = _build_field(cfg, shape)
    x0 = field_to_state(truth, g)
    sys_ = NetworkSystem.from_graph(g, cfg.k)
    traj = simulate(sys_, x0, cfg.horizon, cfg.rate, cfg.noise_std, cfg.seed)
    save_trajectory(traj, out / "trajectory.csv")
    _write_state(out / "x0.csv", x0)
    save_gridded_csv(truth, out / "field.csv")
    save_graph(g, out / "graph.json")
    return g, sys_, truth, traj


def _run_estimate(cfg: ExperimentConfig, out: Path, traj, truth: ScalarField | None,
                  g: Graph | None = None):
    g = g or _build_graph(cfg)
    if cfg.k > g.num_nodes:
        raise ConfigError(f"k = {cfg.k} exceeds the {g.num_nodes} robots")
    if traj.k != cfg.k:
        raise DataError(f"trajectory has {traj.k} outputs but the system declares k = {cfg.k}")
    sys_ = NetworkSystem.from_graph(g, cfg.k)
    est_cfg = EstimationConfig(lam=cfg.lam, max_iters=cfg.max_iters, step_rule=Backtracking())
    try:
        res = estimate(sys_, traj, est_cfg)
    except ShapeError as exc:
        raise DataError(str(exc)) from exc
    save_result(res, out / "result.json")
    _write_state(out / "x0_hat.csv", res.x0_hat)
    summary = {"iterations": res.iterations, "converged": res.converged,
               "objective": res.objective_history[-1]}
    if g.topology in ("chain", "grid"):
        shape = truth.shape if truth is not None else _field_shape(cfg, g)
        extent = truth.extent if truth is not None else (0.0, 1.0, 0.0, 1.0)
        (out / "estimate_field.csv").write_text(
            field_to_csv(state_to_field(res.x0_hat, shape, g), extent,
                         truth.units if truth is not None else "")
        )
        if truth is not None:
            em = error_map(truth, res.x0_hat, g)
            save_gridded_csv(em, out / "error_map.csv", extent=truth.extent, units=truth.units)
            summary.update(em.summary)
    return res, summary


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args)
    g, _, _, traj = _run_simulate(cfg, out)
    _write_config(out, cfg)
    print(json.dumps(cfg.resolved(), sort_keys=True))
    log.info("wrote %d x %d trajectory to %s", len(traj), traj.k, out / "trajectory.csv")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args)
    try:
        traj = load_trajectory(args.trajectory)
    except OSError as exc:
        raise DataError(f"cannot read trajectory: {exc}") from exc
    except TrajectoryFormatError as exc:
        raise DataError(str(exc)) from exc
    truth = None
    if args.truth:
        try:
            truth = load_gridded_csv(args.truth)
        except (OSError, FieldFormatError, EmptyDataError) as exc:
            raise DataError(f"cannot read truth field: {exc}") from exc
    _, summary = _run_estimate(cfg, out, traj, truth)
    _write_config(out, cfg, trajectory=str(args.trajectory))
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_pipeline(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args)
    g, _, truth, traj = _run_simulate(cfg, out)
    _, summary = _run_estimate(cfg, out, traj, truth, g)
    _write_config(out, cfg)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_gramian(args) -> int:
    out = _outdir(args)
    ratios = args.ratios or default_ratios(args.points)
    rows = []
    for n in args.n:
        try:
            rows.extend(compare_topologies(n, ratios, args.T))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    (out / "gramian.csv").write_text(comparison_to_csv(rows))
    doc = {"command": "gramian", "n": args.n, "ratios": ratios, "horizon": args.T,
           "accessible": "prefix", "version": __version__}
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_energy(args) -> int:
    out = _outdir(args)
    try:
        pairs = energy_sweep(args.sizes)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    (out / "energy.csv").write_text(energy_sweep_to_csv(pairs))
    doc = {"command": "energy", "sizes": list(args.sizes), "version": __version__}
    (out / "config.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _add_system_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config; flags override its values")
    p.add_argument("--topology", choices=["chain", "grid"])
    p.add_argument("--n", type=int, help="number of robots (chain)")
    p.add_argument("--l", type=int, help="side of a square grid")
    p.add_argument("--l1", type=int, help="grid rows")
    p.add_argument("--l2", type=int, help="grid columns")
    p.add_argument("--graph", help="graph JSON file (custom topology)")
    p.add_argument("--k", type=int, help="accessible robots, numbered 1..k")
    p.add_argument("--T", dest="horizon", type=float, help="observation horizon [s]")
    p.add_argument("--rate", type=float, help="sampling rate [Hz]")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")


def _add_field_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--field", help="gaussian | constant:C | salinity | csv:PATH")
    p.add_argument("--field-shape", help="field grid as L1xL2 (chains only)")
    p.add_argument("--noise-std", type=float, help="std of Gaussian measurement noise")


def _add_estimator_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, help="Tikhonov weight")
    p.add_argument("--max-iters", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fieldrecon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate ground truth and an observed trajectory")
    _add_system_args(p)
    _add_field_args(p)
    p.set_defaults(func=cmd_simulate, subparser=p)

    p = sub.add_parser("estimate", help="reconstruct the initial field from a trajectory")
    _add_system_args(p)
    _add_field_args(p)
    _add_estimator_args(p)
    p.add_argument("--trajectory", required=True, help="trajectory CSV (t,y1,...,yk)")
    p.add_argument("--truth", help="ground-truth field CSV for the error map")
    p.set_defaults(func=cmd_estimate, subparser=p)

    p = sub.add_parser("pipeline", help="simulate then estimate in one run")
    _add_system_args(p)
    _add_field_args(p)
    _add_estimator_args(p)
    p.set_defaults(func=cmd_pipeline, subparser=p)

    p = sub.add_parser("gramian", help="Gramian trace bounds, chain vs grid")
    p.add_argument("--n", type=int, nargs="+", default=[100, 10000])
    p.add_argument("--ratios", type=float, nargs="+")
    p.add_argument("--points", type=int, default=10, help="number of evenly spaced ratios")
    p.add_argument("--T", type=float, default=50.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gramian, subparser=p)

    p = sub.add_parser("energy", help="first-order Laplacian energy, chain vs grid")
    p.add_argument("--sizes", type=int, nargs="+", default=list(DEFAULT_SIZES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_energy, subparser=p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        args.subparser.print_usage(sys.stderr)
        print(f"fieldrecon: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"fieldrecon: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (StepSizeError, StabilityError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"fieldrecon: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
