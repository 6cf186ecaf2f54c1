"""Command-line interface: generate, train, evaluate, ablate, sweep, plot.

Exit codes: 0 success, 2 usage/parameter error, 3 numerical error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .datasets import (add_gaussian_noise, load_csv, load_json, normalize_unit_cube, save_csv,
                       spheres_dataset, swiss_roll_with_hole)
from .errors import DataIOError, MforgeError, NumericalError, ParameterError
from .metrics import metric_report
from .mrl import MrlParams
from .plotting import render_svg
from .serialization import dump_json, dumps
from .sweeps import grid, sweep
from .training import ABLATIONS, PRESETS, TrainConfig, ablation_suite, preset_config, train

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("mforge")


def _versions() -> dict:
    import scipy
    import torch

    return {"mforge": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "torch": torch.__version__}


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _manifest(out: Path, command: str, config: dict, artifacts: List[str], seconds: float) -> None:
    dump_json({"command": command, "config": config, "artifacts": sorted(artifacts),
               "versions": _versions(), "seconds": seconds}, out / "manifest.json")


def _load_cloud(path, label_column=None):
    path = Path(path)
    if path.suffix.lower() == ".json":
        return load_json(path)
    return load_csv(path, label_column)


def _load_labels(path) -> Optional[np.ndarray]:
    if path is None:
        return None
    cloud = load_csv(path)
    return cloud.points[:, 0]


# --- commands -----------------------------------------------------------------

def cmd_generate(args) -> int:
    start = time.perf_counter()
    if args.kind == "swiss-roll":
        cloud = swiss_roll_with_hole(args.n, args.seed)
        info = {"kind": "swiss_roll_hole", "n_samples": args.n}
    else:
        cloud = spheres_dataset(args.dim, args.n_small, args.n_per_sphere, args.seed)
        info = {"kind": "spheres", "ambient_dim": args.dim, "n_small_spheres": args.n_small,
                "n_per_sphere": args.n_per_sphere}
    if not args.no_normalize:
        cloud = normalize_unit_cube(cloud)
    cloud = add_gaussian_noise(cloud, args.sigma, args.seed)
    info.update(noise_sigma=args.sigma, seed=args.seed, normalized=not args.no_normalize)

    out = _out_dir(args.out)
    save_csv(out / "points.csv", cloud.points)
    save_csv(out / "clean.csv", cloud.clean)
    save_csv(out / "labels.csv", cloud.labels)
    dump_json(info, out / "dataset.json")
    _manifest(out, "generate", info, ["points.csv", "clean.csv", "labels.csv", "dataset.json"],
              time.perf_counter() - start)
    print(dumps(info))
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    settings: dict = {}
    if args.preset:
        settings = preset_config(args.preset).to_dict()
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                settings.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataIOError(f"cannot read config {args.config}: {exc}") from exc
    overrides = {
        "seed": args.seed, "epochs": args.epochs, "batch_size": args.batch_size, "lr": args.lr,
        "lambda_ae": args.lambda_ae, "lambda_topo": args.lambda_topo, "lambda_geom": args.lambda_geom,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    mrl = dict(settings.get("mrl") or {})
    for key in ("r0", "r1", "r2", "k"):
        value = getattr(args, key)
        if value is not None:
            mrl[key] = value
    if mrl:
        settings["mrl"] = MrlParams(**mrl)
    if args.no_mrl:
        settings["mrl_enabled"] = False
    if args.freeze_radii:
        settings["mrl_trainable"] = False
    if args.no_topo:
        settings["topo_enabled"] = False
    if args.no_geom:
        settings["geom_enabled"] = False
    if args.h1:
        settings["h1_enabled"] = True
    return TrainConfig.from_dict(settings)


def _fit_architecture(config: TrainConfig, dim: int) -> TrainConfig:
    if config.encoder_dims[0] == dim and config.decoder_dims[-1] == dim:
        return config
    enc = (dim,) + config.encoder_dims[1:]
    dec = config.decoder_dims[:-1] + (dim,)
    log.warning("adapting architecture to data dimension %d: %s / %s", dim, enc, dec)
    return replace(config, encoder_dims=enc, decoder_dims=dec)


def cmd_train(args) -> int:
    start = time.perf_counter()
    cloud = _load_cloud(args.dataset, args.label_column)
    config = _fit_architecture(_train_config(args), cloud.dim)
    out = _out_dir(args.out)
    dump_json(config.to_dict(), out / "config.json")

    result = train(cloud.points, config,
                   on_epoch=lambda r: print(f"epoch {r.epoch:4d} total {r.total:.6g} ae {r.ae:.6g} "
                                            f"topo {r.topo:.6g} geom {r.geom:.6g}", file=sys.stderr))
    y, z = result.transform(cloud.points)
    dump_json(result.report.to_dict(), out / "report.json")
    result.model.save(out / "model.json")
    save_csv(out / "embedding.csv", z)
    save_csv(out / "manifold.csv", y)
    artifacts = ["config.json", "report.json", "model.json", "embedding.csv", "manifold.csv"]
    if cloud.labels is not None:
        save_csv(out / "labels.csv", cloud.labels)
        artifacts.append("labels.csv")
    manifest_config = dict(config.to_dict(), dataset=str(args.dataset),
                           epoch_seconds=result.report.epoch_seconds)
    _manifest(out, "train", manifest_config, artifacts, time.perf_counter() - start)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    a = _load_cloud(args.cloud_a)
    b = _load_cloud(args.cloud_b)
    k_range = range(args.k_min, args.k_max + 1, args.k_step)
    report = metric_report(a.points, b.points, k_range).to_dict()
    text = dumps(report) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise DataIOError(f"cannot write {args.out}: {exc}") from exc
    sys.stdout.write(text)
    return EXIT_OK


def cmd_ablate(args) -> int:
    start = time.perf_counter()
    cloud = _load_cloud(args.dataset, args.label_column)
    config = _fit_architecture(_train_config(args), cloud.dim)
    entries = ablation_suite(cloud.points, config, args.only or None)
    table = {name: {"metrics": e.metrics, "final_radii": e.report.final_radii,
                    "final_epoch": e.report.to_dict()["epochs"][-1]} for name, e in entries.items()}
    out = _out_dir(args.out)
    dump_json({"base_config": config.to_dict(), "configurations": table}, out / "ablation.json")
    _manifest(out, "ablate", config.to_dict(), ["ablation.json"], time.perf_counter() - start)
    return EXIT_OK


def _sweep_values(args):
    if args.axis == "lambda-grid":
        vals = args.values or [0.0, 0.1, 1.0, 5.0]
        return [(t, g) for t in vals for g in vals]
    if args.values:
        return [int(v) for v in args.values] if args.axis in ("size", "dim") else list(args.values)
    if args.start is None or args.stop is None or args.step is None:
        raise ParameterError("sweep needs --values or --start/--stop/--step")
    vals = grid(args.start, args.stop, args.step)
    return [int(round(v)) for v in vals] if args.axis in ("size", "dim") else vals


def cmd_sweep(args) -> int:
    start = time.perf_counter()
    values = _sweep_values(args)
    if not (args.preset or args.config):
        args.preset = "swiss-roll"
    base = _train_config(args)
    records = sweep(args.axis, values, base, n=args.n, sigma=args.sigma, seed=args.seed or 0)
    timing = [{"index": r["index"], "train_seconds": r.pop("train_seconds"),
               "seconds_per_point": r.pop("seconds_per_point")} for r in records]
    out = _out_dir(args.out)
    dump_json({"axis": args.axis, "base_config": base.to_dict(), "records": records}, out / "sweep.json")
    dump_json({"timing": timing}, out / "timing.json")
    _manifest(out, "sweep", base.to_dict(), ["sweep.json", "timing.json"], time.perf_counter() - start)
    return EXIT_OK


def cmd_plot(args) -> int:
    emb = _load_cloud(args.embedding)
    labels = _load_labels(args.labels)
    svg = render_svg(emb.points, labels, size=args.size, title=args.title)
    try:
        Path(args.out).write_text(svg, encoding="utf-8")
    except OSError as exc:
        raise DataIOError(f"cannot write {args.out}: {exc}") from exc
    return EXIT_OK


# --- argument parsing ---------------------------------------------------------------

def _add_train_flags(p: argparse.ArgumentParser, dataset: bool = True) -> None:
    if dataset:
        p.add_argument("--dataset", required=True, help="points file (.csv or .json)")
        p.add_argument("--label-column", default=None, help="CSV column holding labels (index or name)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda-ae", type=float)
    p.add_argument("--lambda-topo", type=float)
    p.add_argument("--lambda-geom", type=float)
    p.add_argument("--r0", type=float)
    p.add_argument("--r1", type=float)
    p.add_argument("--r2", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--no-mrl", action="store_true")
    p.add_argument("--freeze-radii", action="store_true", help="contract with fixed MRL radii")
    p.add_argument("--no-topo", action="store_true")
    p.add_argument("--no-geom", action="store_true")
    p.add_argument("--h1", action="store_true", help="add H1 pairs to the topological loss")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset")
    g.add_argument("kind", choices=["swiss-roll", "spheres"])
    g.add_argument("--n", type=int, default=2000)
    g.add_argument("--dim", type=int, default=101)
    g.add_argument("--n-small", type=int, default=8)
    g.add_argument("--n-per-sphere", type=int, default=500)
    g.add_argument("--sigma", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--no-normalize", action="store_true")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a model and write a run directory")
    _add_train_flags(t)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="quality metrics between two clouds")
    e.add_argument("cloud_a")
    e.add_argument("cloud_b")
    e.add_argument("--k-min", type=int, default=10)
    e.add_argument("--k-max", type=int, default=100)
    e.add_argument("--k-step", type=int, default=10)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    a = sub.add_parser("ablate", help="train all ablation variants and compare")
    _add_train_flags(a)
    a.add_argument("--only", nargs="*", choices=sorted(ABLATIONS))
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_ablate)

    s = sub.add_parser("sweep", help="noise / size / dimension / loss-weight sweeps")
    s.add_argument("axis", choices=["noise", "size", "dim", "lambda-grid"])
    s.add_argument("--values", type=float, nargs="*")
    s.add_argument("--start", type=float)
    s.add_argument("--stop", type=float)
    s.add_argument("--step", type=float)
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--sigma", type=float, default=0.02)
    _add_train_flags(s, dataset=False)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render a 2-D embedding as SVG")
    p.add_argument("embedding")
    p.add_argument("--labels")
    p.add_argument("--size", type=int, default=480)
    p.add_argument("--title")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataIOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
