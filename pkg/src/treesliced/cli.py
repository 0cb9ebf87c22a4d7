"""Command-line front end.

Subcommands: dist, flow, color-transfer, exact, bench, selftest. Every run
writes a manifest JSON recording the fully resolved configuration, so a run
can be reproduced bitwise (timings aside) by passing the manifest back via
--config. Flag precedence: explicit flags > config file > defaults.

Exit codes: 0 success, 1 selftest failure, 2 configuration error, 3 data
error, 4 flow divergence.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
import tracemalloc
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .colortransfer import (
    TransferConfig,
    kmeans_palette,
    load_image,
    palette_measure,
    recolor,
    save_image,
    transfer_curve,
    transfer_estimator_config,
)
from .core import SeedSpec, load_measure_csv, make_measure, save_measure_csv
from .errors import (
    ConfigError,
    DivergenceError,
    InvalidMeasure,
    MassError,
    ScaleError,
    SizeError,
    TreeSlicedError,
)
from .estimators import EstimatorConfig, estimate, sample_systems
from .exactot import exact_w1_lp, exact_wp_assignment
from .flows import (
    FlowConfig,
    Gaussians25,
    GaussianShift,
    SwissRoll,
    run_flow,
)
from .projection import SplittingConfig, project
from .selftest import SUITES, run_suites
from .trees import DataCenteredRoot, TreeSamplerConfig, UniformCube, resolve_root

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_manifest(out_base: Path, subcommand: str, resolved: dict, outputs: list[str]) -> Path:
    manifest = {
        "subcommand": subcommand,
        "resolved_config": resolved,
        "seed": resolved.get("seed"),
        "library_version": __version__,
        "created_utc": _utc_now(),
        "outputs": outputs,
    }
    path = out_base.with_suffix(".manifest.json")
    _write_json(path, manifest)
    return path


def _resolve_config(defaults: dict, config_path: str | None, args: argparse.Namespace) -> dict:
    resolved = dict(defaults)
    if config_path:
        try:
            with open(config_path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise InvalidMeasure(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from None
        if "resolved_config" in data:
            data = data["resolved_config"]
        unknown = set(data) - set(defaults)
        if unknown:
            raise ConfigError(f"config file {config_path} has unknown keys: {sorted(unknown)}")
        resolved.update(data)
    for key in defaults:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            resolved[key] = value
    return resolved


def _sampler_from(resolved: dict, data_mean: np.ndarray | None) -> TreeSamplerConfig:
    if resolved["root"] == "cube":
        root = UniformCube(resolved["root_scale"])
    elif resolved["root"] == "data":
        root = DataCenteredRoot(resolved["root_scale"])
    else:
        raise ConfigError(f"--root must be 'cube' or 'data', got {resolved['root']!r}")
    sampler = TreeSamplerConfig(k=int(resolved["lines"]), root=root)
    if data_mean is not None:
        sampler = resolve_root(sampler, data_mean)
    return sampler


def _estimator_from(resolved: dict, data_mean: np.ndarray | None) -> EstimatorConfig:
    return EstimatorConfig(
        variant=resolved["variant"],
        L=int(resolved["trees"]),
        sampler=_sampler_from(resolved, data_mean),
        splitting=SplittingConfig(delta=float(resolved["delta"]), mode=resolved["split"]),
        seed=SeedSpec(int(resolved["seed"])),
        p=float(resolved["p"]),
    )


_DIST_DEFAULTS = {
    "variant": "dbtsw",
    "trees": 100,
    "lines": 4,
    "delta": 10.0,
    "split": "distance-softmax",
    "p": 1.0,
    "seed": 0,
    "root": "cube",
    "root_scale": 1.0,
    "threads": 1,
    "out": "dist_report.json",
}


def cmd_dist(args: argparse.Namespace) -> int:
    resolved = _resolve_config(_DIST_DEFAULTS, args.config, args)
    mu = load_measure_csv(args.mu)
    nu = load_measure_csv(args.nu)
    data_mean = np.concatenate([mu.supports, nu.supports]).mean(axis=0)
    cfg = _estimator_from(resolved, data_mean)
    report = estimate(mu, nu, cfg, threads=int(resolved["threads"]))
    print(repr(report.value))
    out = Path(resolved["out"])
    _write_json(out, report.to_jsonable())
    outputs = [str(out)]
    if args.dump_projections:
        system = sample_systems(cfg, mu.dim)[0]
        dump = {
            "mu": json.loads(project(mu, system, cfg.splitting).to_json()),
            "nu": json.loads(project(nu, system, cfg.splitting).to_json()),
            "tree": json.loads(system.to_json()),
        }
        _write_json(Path(args.dump_projections), dump)
        outputs.append(args.dump_projections)
    _write_manifest(out, "dist", resolved, outputs)
    return EXIT_OK


_FLOW_DEFAULTS = {
    "dataset": "swiss-roll",
    "n": 100,
    "noise": 0.0,
    "d": 20,
    "target_norm": 18.0,
    "variant": "dbtsw",
    "trees": 25,
    "lines": 4,
    "delta": 10.0,
    "split": "distance-softmax",
    "p": 1.0,
    "lr": 5e-3,
    "iters": 2500,
    "stride": 100,
    "optimizer": "adam",
    "tail_average": 0.2,
    "seed": 0,
    "root": None,  # per-dataset default: 'data' for gaussian-20d, else 'cube'
    "root_scale": 1.0,
    "save_final": 0,
    "out": "flow",
}


def _dataset_from(resolved: dict):
    name = resolved["dataset"]
    if name == "swiss-roll":
        return SwissRoll(n=int(resolved["n"]), noise=float(resolved["noise"]))
    if name == "gaussians-25":
        return Gaussians25(n=int(resolved["n"]))
    if name == "gaussian-20d":
        return GaussianShift(
            d=int(resolved["d"]), n=int(resolved["n"]), target_norm=float(resolved["target_norm"])
        )
    raise ConfigError(f"unknown dataset {name!r}")


def cmd_flow(args: argparse.Namespace) -> int:
    resolved = _resolve_config(_FLOW_DEFAULTS, args.config, args)
    if resolved["root"] is None:
        resolved["root"] = "data" if resolved["dataset"] == "gaussian-20d" else "cube"
    dataset = _dataset_from(resolved)
    flow_cfg = FlowConfig(
        distance=_estimator_from(resolved, None),
        dataset=dataset,
        learning_rate=float(resolved["lr"]),
        iterations=int(resolved["iters"]),
        eval_stride=int(resolved["stride"]),
        seed=SeedSpec(int(resolved["seed"])),
        optimizer=resolved["optimizer"],
        tail_average_fraction=float(resolved["tail_average"]),
    )
    trace = run_flow(flow_cfg)
    out_base = Path(resolved["out"])
    trace_path = out_base.with_suffix(".trace.csv")
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    with open(trace_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "w2", "estimate", "seconds"])
        for rec in trace.records:
            writer.writerow([rec.iteration, repr(rec.w2), repr(rec.estimate), repr(rec.seconds)])
    summary = {
        "final_w2": trace.final_w2,
        "final_estimate": trace.records[-1].estimate,
        "records": len(trace.records),
        "iterations": int(resolved["iters"]),
    }
    summary_path = out_base.with_suffix(".summary.json")
    _write_json(summary_path, summary)
    outputs = [str(trace_path), str(summary_path)]
    if int(resolved["save_final"]):
        final_path = out_base.with_suffix(".final.csv")
        save_measure_csv(make_measure(trace.final_supports), final_path)
        outputs.append(str(final_path))
    _write_manifest(out_base, "flow", resolved, outputs)
    print(f"final W2 {trace.final_w2!r} after {resolved['iters']} iterations")
    return EXIT_OK


_COLOR_DEFAULTS = {
    "colors": 1000,
    "iters": 2000,
    "step": 17.0,
    "trees": 33,
    "lines": 3,
    "delta": 10.0,
    "round_fraction": 0.1,
    "seed": 0,
    "out": "transferred.png",
}


def cmd_color_transfer(args: argparse.Namespace) -> int:
    resolved = _resolve_config(_COLOR_DEFAULTS, args.config, args)
    source_img = load_image(args.source)
    target_img = load_image(args.target)
    seed = SeedSpec(int(resolved["seed"]))
    colors = int(resolved["colors"])
    colors_src = min(colors, source_img.shape[0] * source_img.shape[1])
    colors_tgt = min(colors, target_img.shape[0] * target_img.shape[1])
    source_palette = kmeans_palette(source_img, colors_src, seed.child("kmeans", 0))
    target_palette = kmeans_palette(target_img, colors_tgt, seed.child("kmeans", 1))
    cfg = TransferConfig(
        step_size=float(resolved["step"]),
        iterations=int(resolved["iters"]),
        L=int(resolved["trees"]),
        k=int(resolved["lines"]),
        delta=float(resolved["delta"]),
        rounding_fraction=float(resolved["round_fraction"]),
        seed=seed.child("transfer"),
    )
    endpoint, history = transfer_curve(source_palette, target_palette, cfg)
    out_path = Path(resolved["out"])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_image(recolor(source_img, endpoint), out_path)
    history_path = out_path.with_suffix(".history.csv")
    with open(history_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "estimate"])
        for i, v in enumerate(history):
            writer.writerow([i, repr(float(v))])
    eval_cfg = transfer_estimator_config(source_palette, target_palette, cfg, seed.child("eval"))
    initial = estimate(palette_measure(source_palette), palette_measure(target_palette), eval_cfg).value
    final = estimate(palette_measure(endpoint), palette_measure(target_palette), eval_cfg).value
    _write_manifest(out_path, "color-transfer", resolved, [str(out_path), str(history_path)])
    print(f"palette distance {initial!r} -> {final!r}")
    return EXIT_OK


def cmd_exact(args: argparse.Namespace) -> int:
    mu = load_measure_csv(args.mu)
    nu = load_measure_csv(args.nu)
    p = float(args.p if args.p is not None else 2.0)
    uniform = (
        mu.n == nu.n
        and np.allclose(mu.weights, 1.0 / mu.n)
        and np.allclose(nu.weights, 1.0 / nu.n)
    )
    if args.method == "assignment" or (args.method == "auto" and uniform):
        if not uniform:
            raise ConfigError("--method assignment requires uniform equal-size measures")
        value = exact_wp_assignment(mu.supports, nu.supports, p=p)
        method = "assignment"
    else:
        diff = mu.supports[:, None, :] - nu.supports[None, :, :]
        cost = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))
        value = exact_w1_lp(mu.weights, nu.weights, cost)
        method = "lp"
        p = 1.0
    print(repr(value))
    if args.out:
        out = Path(args.out)
        _write_json(out, {"value": value, "method": method, "p": p})
        _write_manifest(out, "exact", {"method": method, "p": p, "seed": None}, [str(out)])
    return EXIT_OK


_BENCH_DEFAULTS = {
    "n": "1000,2000,4000",
    "d": "50,100",
    "trees": 20,
    "lines": 4,
    "delta": 10.0,
    "repeats": 5,
    "seed": 0,
    "out": "bench.csv",
}


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in str(text).split(",") if part != ""]
    except ValueError as exc:
        raise ConfigError(f"invalid size list {text!r}: {exc}") from None
    if not values or any(v < 1 for v in values):
        raise ConfigError(f"size list {text!r} must hold positive integers")
    return values


def cmd_bench(args: argparse.Namespace) -> int:
    resolved = _resolve_config(_BENCH_DEFAULTS, args.config, args)
    ns = _int_list(resolved["n"])
    ds = _int_list(resolved["d"])
    L = int(resolved["trees"])
    k = int(resolved["lines"])
    repeats = int(resolved["repeats"])
    if repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    seed = SeedSpec(int(resolved["seed"]))
    rows = []
    for n in ns:
        for d in ds:
            rng = seed.child("bench-data", n, d).generator()
            mu = make_measure(rng.normal(size=(n, d)))
            nu = make_measure(rng.normal(size=(n, d)))
            cfg = EstimatorConfig(
                "dbtsw",
                L=L,
                sampler=TreeSamplerConfig(k=k),
                splitting=SplittingConfig(delta=float(resolved["delta"])),
                seed=seed.child("bench-trees", n, d),
            )
            tracemalloc.start()
            estimate(mu, nu, cfg)
            _, peak = tracemalloc.get_traced_memory()
            tracemalloc.stop()
            times = []
            value = None
            for _ in range(repeats):
                t0 = time.perf_counter()
                value = estimate(mu, nu, cfg).value
                times.append(time.perf_counter() - t0)
            rows.append(
                {
                    "n": n,
                    "d": d,
                    "L": L,
                    "k": k,
                    "seconds": float(np.median(times)),
                    "peak_bytes": int(peak),
                    "value": value,
                }
            )
    out = Path(resolved["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    _write_manifest(out, "bench", resolved, [str(out)])
    for row in rows:
        print(
            f"n={row['n']} d={row['d']} L={row['L']} k={row['k']} "
            f"time={row['seconds']:.4f}s peak={row['peak_bytes']}B value={row['value']!r}"
        )
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    names = [args.suite] if args.suite else None
    if args.suite and args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}, options: {sorted(SUITES)}")
    results = run_suites(names, SeedSpec(int(args.seed or 2024)))
    if args.json:
        print(json.dumps([dataclasses.asdict(r) for r in results], indent=2))
    else:
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            print(f"[{status}] {r.suite}: {r.name} - {r.detail}")
    failed = [r for r in results if not r.passed]
    if failed:
        first = failed[0]
        print(f"selftest failed: {first.suite}/{first.name}", file=sys.stderr)
        return EXIT_SELFTEST
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treesliced",
        description="Tree-sliced Wasserstein distances, flows, and color transfer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, defaults):
        p.add_argument("--config", help="JSON config or manifest from a previous run")
        for key, value in defaults.items():
            if key in ("root",):
                p.add_argument("--root", choices=["cube", "data"], default=None)
                continue
            flag = "--" + key.replace("_", "-")
            if isinstance(value, bool):
                p.add_argument(flag, type=lambda s: s.lower() in ("1", "true", "yes"), default=None)
            elif isinstance(value, int):
                p.add_argument(flag, type=int, default=None)
            elif isinstance(value, float):
                p.add_argument(flag, type=float, default=None)
            else:
                p.add_argument(flag, default=None)

    p_dist = sub.add_parser("dist", help="distance between two measure CSVs")
    p_dist.add_argument("--mu", required=True, help="source measure CSV")
    p_dist.add_argument("--nu", required=True, help="target measure CSV")
    p_dist.add_argument("--dump-projections", help="write one tree's projections as JSON")
    add_common(p_dist, _DIST_DEFAULTS)
    p_dist.set_defaults(func=cmd_dist)

    p_flow = sub.add_parser("flow", help="gradient flow toward a synthetic dataset")
    add_common(p_flow, _FLOW_DEFAULTS)
    p_flow.set_defaults(func=cmd_flow)

    p_color = sub.add_parser("color-transfer", help="palette-space color transfer")
    p_color.add_argument("--source", required=True, help="source PNG")
    p_color.add_argument("--target", required=True, help="target PNG")
    add_common(p_color, _COLOR_DEFAULTS)
    p_color.set_defaults(func=cmd_color_transfer)

    p_exact = sub.add_parser("exact", help="exact OT between two measure CSVs")
    p_exact.add_argument("--mu", required=True)
    p_exact.add_argument("--nu", required=True)
    p_exact.add_argument("--p", type=float, default=None, help="order for the assignment path")
    p_exact.add_argument(
        "--method", choices=["auto", "assignment", "lp"], default="auto",
        help="assignment needs uniform equal-size inputs; lp uses Euclidean W1",
    )
    p_exact.add_argument("--out", help="write a JSON report here")
    p_exact.set_defaults(func=cmd_exact)

    p_bench = sub.add_parser("bench", help="wall time and memory over a size grid")
    add_common(p_bench, _BENCH_DEFAULTS)
    p_bench.set_defaults(func=cmd_bench)

    p_self = sub.add_parser("selftest", help="run the built-in verification suites")
    p_self.add_argument("--suite", help="run one suite only")
    p_self.add_argument("--json", action="store_true", help="machine-readable results")
    p_self.add_argument("--seed", type=int, default=None)
    p_self.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SizeError, ScaleError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except FileNotFoundError as exc:
        print(f"data error: missing file {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    except (InvalidMeasure, MassError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TreeSlicedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
