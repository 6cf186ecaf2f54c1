"""Robustness sweeps over noise level, sample size, input dimension and loss weights.

Every grid point trains the full model on a freshly generated dataset and
records how far the manifold Y and the embedding Z are from the noisy
input ("loss") and from the clean ground truth ("error").
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import List, Optional, Sequence

import numpy as np

from .datasets import add_gaussian_noise, normalize_unit_cube, spheres_dataset, swiss_roll_with_hole
from .errors import ParameterError
from .metrics import kl_sigma
from .training import TrainConfig, preset_config, train

AXES = ("noise", "size", "dim", "lambda-grid")
THREADS_ENV = "MFORGE_THREADS"


def grid(start: float, stop: float, step: float) -> List[float]:
    """Inclusive arithmetic grid, rounded to suppress float drift."""
    if step <= 0 or stop < start:
        raise ParameterError(f"bad grid start={start} stop={stop} step={step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(count)]


def spheres_architecture(dim: int):
    hidden = [64, 32, 16, 8, 4]
    return (dim, *hidden, 2), (2, *reversed(hidden), dim)


def _rms(a, b) -> float:
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=1))))


def _run_point(task) -> dict:
    axis, value, base, n, sigma, seed = task
    if axis == "dim":
        dim = int(value)
        # ~n points in total; one extra share goes to the enclosing sphere
        cloud = normalize_unit_cube(spheres_dataset(dim, 8, max(n // 16, 2), seed))
        enc, dec = spheres_architecture(dim)
        config = replace(base, encoder_dims=enc, decoder_dims=dec)
        x, clean = cloud.points, None
    else:
        size = int(value) if axis == "size" else n
        noise = float(value) if axis == "noise" else sigma
        cloud = add_gaussian_noise(normalize_unit_cube(swiss_roll_with_hole(size, seed)), noise, seed)
        config = base
        if axis == "lambda-grid":
            config = replace(base, lambda_topo=float(value[0]), lambda_geom=float(value[1]))
        x, clean = cloud.points, cloud.clean

    config = replace(config, batch_size=min(config.batch_size, x.shape[0]))
    start = time.perf_counter()
    result = train(x, config)
    seconds = time.perf_counter() - start
    y, z = result.transform(x)

    record = {
        "axis": axis,
        "value": list(value) if isinstance(value, tuple) else value,
        "n": int(x.shape[0]),
        "dim": int(x.shape[1]),
        "train_seconds": seconds,
        "seconds_per_point": seconds / x.shape[0],
        "manifold_loss": _rms(y, x),
        "embedding_local_loss": kl_sigma(x, z, 0.1),
        "embedding_global_loss": kl_sigma(x, z, 100.0),
        "final_radii": result.report.final_radii,
    }
    if clean is not None:
        record.update(
            input_error=_rms(x, clean),
            manifold_error=_rms(y, clean),
            embedding_local_error=kl_sigma(clean, z, 0.1),
            embedding_global_error=kl_sigma(clean, z, 100.0),
        )
    return record


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        raise ParameterError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def sweep(axis: str, values: Sequence, base: Optional[TrainConfig] = None, n: int = 2000,
          sigma: float = 0.02, seed: int = 0, workers: Optional[int] = None) -> List[dict]:
    """One record per grid value, in grid order.

    ``values`` are noise levels, sample sizes, ambient dimensions, or
    (lambda_topo, lambda_geom) pairs depending on ``axis``.
    """
    if axis not in AXES:
        raise ParameterError(f"unknown sweep axis {axis!r}; choose from {AXES}")
    if base is None:
        base = preset_config("swiss-roll")
    if axis == "lambda-grid":
        values = [tuple(v) for v in values]
    tasks = [(axis, v, base, n, sigma, seed) for v in values]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        records = [_run_point(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            records = list(pool.map(_run_point, tasks))
    for i, rec in enumerate(records):
        rec["index"] = i
    return records
