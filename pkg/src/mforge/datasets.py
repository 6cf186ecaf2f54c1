"""Synthetic point clouds, noise injection, normalisation and file loaders.

Generators draw from ``numpy.random.default_rng(seed)`` so a given
``(arguments, seed)`` pair always yields bit-identical output.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DataIOError, ParameterError
from .geometry import PointCloud

T_MIN = 1.5 * math.pi
T_MAX = 4.5 * math.pi
HEIGHT = 21.0
# hole = centred rectangle whose sides are this fraction of each parameter range
HOLE_FRACTION = 0.25


def swiss_roll_surface(t, y) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.stack([t * np.cos(t), y, t * np.sin(t)], axis=-1)


def in_swiss_roll_hole(t, y) -> np.ndarray:
    t_mid, y_mid = 0.5 * (T_MIN + T_MAX), 0.5 * HEIGHT
    half_t = 0.5 * HOLE_FRACTION * (T_MAX - T_MIN)
    half_y = 0.5 * HOLE_FRACTION * HEIGHT
    return (np.abs(np.asarray(t) - t_mid) <= half_t) & (np.abs(np.asarray(y) - y_mid) <= half_y)


def swiss_roll_with_hole(n: int, seed: int = 0) -> PointCloud:
    """Swiss roll surface with a rectangular hole; labels are the roll angle t."""
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    ts, ys, have = [], [], 0
    while have < n:
        m = max(2 * (n - have), 16)
        t = T_MIN + (T_MAX - T_MIN) * rng.random(m)
        y = HEIGHT * rng.random(m)
        keep = ~in_swiss_roll_hole(t, y)
        ts.append(t[keep])
        ys.append(y[keep])
        have += int(keep.sum())
    t = np.concatenate(ts)[:n]
    y = np.concatenate(ys)[:n]
    return PointCloud(swiss_roll_surface(t, y), labels=t)


def spheres_dataset(ambient_dim: int = 101, n_small: int = 8, n_per_sphere: int = 500,
                    seed: int = 0, big_radius: float = 5.0, max_center_norm: float = 2.5) -> PointCloud:
    """Unit spheres nested inside one large sphere centred at the origin.

    Small-sphere centres are Gaussian draws (std 10/sqrt(ambient_dim) per
    coordinate) shrunk onto the ball of radius ``max_center_norm``. The large
    sphere receives ``n_small * n_per_sphere`` points and label ``n_small``.
    """
    if ambient_dim < 2:
        raise ParameterError(f"ambient_dim must be >= 2, got {ambient_dim}")
    if n_small < 0 or n_per_sphere < 1:
        raise ParameterError("need n_small >= 0 and n_per_sphere >= 1")
    rng = np.random.default_rng(seed)

    def unit_sphere(m):
        g = rng.standard_normal((m, ambient_dim))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    centers = rng.normal(0.0, 10.0 / math.sqrt(ambient_dim), size=(n_small, ambient_dim))
    norms = np.linalg.norm(centers, axis=1, keepdims=True)
    centers *= np.minimum(1.0, max_center_norm / np.maximum(norms, 1e-300))

    parts, labels = [], []
    for s in range(n_small):
        parts.append(centers[s] + unit_sphere(n_per_sphere))
        labels.append(np.full(n_per_sphere, float(s)))
    n_big = max(n_small, 1) * n_per_sphere
    parts.append(big_radius * unit_sphere(n_big))
    labels.append(np.full(n_big, float(n_small)))
    return PointCloud(np.concatenate(parts), labels=np.concatenate(labels))


def add_gaussian_noise(cloud: PointCloud, sigma: float, seed: int = 0) -> PointCloud:
    """Add i.i.d. N(0, sigma^2) noise per coordinate; the input becomes ``clean``."""
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    clean = cloud.points.copy()
    if sigma == 0:
        return PointCloud(clean.copy(), cloud.labels, clean)
    rng = np.random.default_rng(seed)
    noisy = clean + rng.normal(0.0, sigma, size=clean.shape)
    return PointCloud(noisy, cloud.labels, clean)


def normalize_unit_cube(cloud: PointCloud) -> PointCloud:
    """Per-axis min-max scaling to [0, 1]; constant axes map to 0.5.

    ``clean`` (if any) goes through the same affine map, so the two stay
    comparable.
    """
    pts = cloud.points
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    degenerate = span <= 0
    scale = np.where(degenerate, 1.0, span)

    def apply(a):
        out = (a - lo) / scale
        out[:, degenerate] = 0.5
        return out

    clean = None if cloud.clean is None else apply(cloud.clean)
    return PointCloud(apply(pts), cloud.labels, clean)


def _parse_float(cell: str, row: int, col: int, path) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataIOError(f"{path}: row {row}, column {col}: non-numeric cell {cell!r}") from None


def load_csv(path: Union[str, Path], label_column: Optional[Union[int, str]] = None) -> PointCloud:
    """Read a comma-separated point file (header optional).

    ``label_column`` is a 0-based index or a header name; that column is
    removed from the coordinates and returned as labels.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataIOError(f"{path}: no data rows")

    header = None
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise DataIOError(f"{path}: no data rows after header")

    width = len(rows[0])
    first_row = 2 if header is not None else 1
    data = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataIOError(f"{path}: row {r + first_row} has {len(row)} cells, expected {width}")
        for c, cell in enumerate(row):
            data[r, c] = _parse_float(cell.strip(), r + first_row, c, path)

    labels = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if header is None or label_column not in header:
                raise DataIOError(f"{path}: label column {label_column!r} not found in header")
            col = header.index(label_column)
        else:
            col = int(label_column)
        if not -width <= col < width:
            raise DataIOError(f"{path}: label column {col} out of range for width {width}")
        col %= width
        labels = data[:, col]
        data = np.delete(data, col, axis=1)
    try:
        return PointCloud(data, labels)
    except ParameterError as exc:
        raise DataIOError(f"{path}: {exc}") from exc


def load_json(path: Union[str, Path]) -> PointCloud:
    """Read a JSON array of equal-length numeric arrays."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise DataIOError(f"{path}: expected a non-empty array of arrays")
    width = None
    for r, row in enumerate(raw):
        if not isinstance(row, list):
            raise DataIOError(f"{path}: row {r} is not an array")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataIOError(f"{path}: row {r} has {len(row)} values, expected {width}")
        for c, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise DataIOError(f"{path}: row {r}, column {c}: non-numeric value {v!r}")
    try:
        return PointCloud(np.asarray(raw, dtype=np.float64))
    except ParameterError as exc:
        raise DataIOError(f"{path}: {exc}") from exc


def format_number(x: float) -> str:
    """17 significant digits: enough for an exact float64 round trip."""
    return "%.17g" % x


def save_csv(path: Union[str, Path], array, header: Optional[list] = None) -> None:
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            if header:
                fh.write(",".join(header) + "\n")
            for row in arr:
                fh.write(",".join(format_number(v) for v in row) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc
