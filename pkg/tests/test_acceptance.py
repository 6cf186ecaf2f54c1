"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Criterion 6 trains 15 models for 100 epochs and takes around ten minutes
on one core; everything else finishes in well under two minutes.
"""
import math
import statistics
import time
import warnings
from dataclasses import replace

import numpy as np
import pytest
import torch

from mforge.cli import main
from mforge.datasets import add_gaussian_noise, normalize_unit_cube, swiss_roll_with_hole
from mforge.geometry import pairwise_distances
from mforge.metrics import kl_sigma, metric_report
from mforge.mrl import MrlParams, mrl_forward, mrl_radii_gradient
from mforge.nn import Mlp
from mforge.persistence import vr_h0_pairing, vr_h1_pairing
from mforge.regularizers import geometric_loss, topo_signature_loss
from mforge.sweeps import sweep
from mforge.training import ABLATIONS, TrainConfig, preset_config, total_loss, train

from oracles import prim_mst_lengths, rips_h1_diagram


def _noisy_roll(seed, n=2000, sigma=0.02):
    return add_gaussian_noise(normalize_unit_cube(swiss_roll_with_hole(n, seed)), sigma, seed)


def test_criterion_1_persistence_oracles(verdict):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    h0_bad = 0
    for _ in range(200):
        x = rng.normal(size=(int(rng.integers(2, 65)), int(rng.integers(1, 6))))
        d = pairwise_distances(x)
        lengths = sorted(e.length for e in vr_h0_pairing(d)[0].dim0_edges)
        h0_bad += lengths != prim_mst_lengths(d)
    h1_bad = 0
    for _ in range(100):
        x = rng.normal(size=(int(rng.integers(3, 9)), int(rng.integers(1, 6))))
        d = pairwise_distances(x)
        h1_bad += sorted(map(tuple, vr_h1_pairing(d)[1][1].tolist())) != rips_h1_diagram(d)
    seconds = time.perf_counter() - start
    verdict(1, "persistence oracle equivalence", h0_bad == 0 and h1_bad == 0 and seconds < 60,
            f"H0 mismatches {h0_bad}/200, H1 mismatches {h1_bad}/100, {seconds:.1f}s")


def _rel_ok(g, fd, rtol, floor):
    return abs(g - fd) <= rtol * max(abs(g), abs(fd), floor)


def _fd_params(fn, params, picks, h):
    out = []
    for pi, k in picks:
        flat = params[pi].detach().view(-1)
        old = float(flat[k])
        with torch.no_grad():
            flat[k] = old + h
            up = fn()
            flat[k] = old - h
            down = fn()
            flat[k] = old
        out.append((up - down) / (2 * h))
    return out


def test_criterion_2_gradients(verdict):
    start = time.perf_counter()
    worst = {"ae": 0.0, "topo": 0.0, "geom": 0.0, "radii": 0.0}
    failures = {key: 0 for key in worst}
    floor = 1e-6

    def track(key, g, fd, rtol):
        err = abs(g - fd) / max(abs(g), abs(fd), floor)
        worst[key] = max(worst[key], err)
        failures[key] += not _rel_ok(g, fd, rtol, floor)

    for inst in range(50):
        rng = np.random.default_rng(1000 + inst)
        x = rng.random((12, 3))
        model = Mlp((3, 4, 2), (2, 4, 3), seed=inst)
        params = model.parameters()
        picks = []
        for _ in range(4):
            pi = int(rng.integers(len(params)))
            picks.append((pi, int(rng.integers(params[pi].numel()))))

        # autoencoder term (first-order path)
        def ae():
            return torch.mean((torch.from_numpy(x) - model.forward(x)[1]) ** 2).item()

        grads = torch.autograd.grad(torch.mean((torch.from_numpy(x) - model.forward(x)[1]) ** 2), params)
        for (pi, k), fd in zip(picks, _fd_params(ae, params, picks, 1e-6)):
            track("ae", float(grads[pi].reshape(-1)[k]), fd, 1e-4)

        # geometric term (differentiates a Jacobian: second-order path)
        def geom():
            return geometric_loss(model, x).value.item()

        # the decoder and the last encoder bias do not enter the Jacobian
        enc = len(model.encoder) * 2 - 1
        geom_picks = []
        for _ in range(4):
            pi = int(rng.integers(enc))
            geom_picks.append((pi, int(rng.integers(params[pi].numel()))))
        grads = torch.autograd.grad(geometric_loss(model, x).value, params[:enc])
        for (pi, k), fd in zip(geom_picks, _fd_params(geom, params, geom_picks, 1e-6)):
            track("geom", float(grads[pi].reshape(-1)[k]), fd, 1e-3)

        # topological term w.r.t. embedding coordinates, pairings held fixed
        y = x
        z = rng.random((12, 2))
        zt = torch.tensor(z, requires_grad=True)
        (gz,) = torch.autograd.grad(topo_signature_loss(y, zt).total, zt)
        for _ in range(4):
            i, j = int(rng.integers(12)), int(rng.integers(2))
            zp, zm = z.copy(), z.copy()
            zp[i, j] += 1e-6
            zm[i, j] -= 1e-6
            fd = (topo_signature_loss(y, zp).total.item() - topo_signature_loss(y, zm).total.item()) / 2e-6
            track("topo", float(gz[i, j]), fd, 1e-4)

        # MRL radii path (first-order)
        pool = rng.random((10, 3))
        mp = MrlParams(float(rng.uniform(0.6, 1.0)), float(rng.uniform(0.3, 0.6)), float(rng.uniform(0.5, 0.9)), 3)
        up = rng.normal(size=(10, 3))
        g = mrl_radii_gradient(pool, pool, mp, up)
        for r in range(3):
            radii = list(mp.radii)
            h = 1e-5 * radii[r]
            vals = []
            for s in (1, -1):
                rr = list(radii)
                rr[r] += s * h
                vals.append(float((mrl_forward(pool, pool, MrlParams(*rr, 3)).points * up).sum()))
            track("radii", g[r], (vals[0] - vals[1]) / (2 * h), 1e-4)

    seconds = time.perf_counter() - start
    ok = not any(failures.values()) and seconds < 120
    detail = ", ".join(f"{k} worst rel {worst[k]:.1e} ({failures[k]} fail)" for k in worst)
    verdict(2, "gradient correctness", ok, f"{detail}, {seconds:.1f}s")


def _linear(w):
    w = np.asarray(w, dtype=float)
    m = Mlp((w.shape[1], w.shape[0]), (w.shape[0], w.shape[1]))
    with torch.no_grad():
        m.encoder[0][0].copy_(torch.tensor(w))
    return m


def test_criterion_3_geometric_closed_forms(verdict):
    rng = np.random.default_rng(3)
    y3 = rng.random((20, 3))
    q3, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    square = geometric_loss(_linear(q3), y3).value.item()
    rows = geometric_loss(_linear(q3[:2]), y3).value.item()
    scaled = [geometric_loss(_linear(c * q3[:2]), y3).value.item() for c in (1e-3, 0.5, 7.0, 1e3)]
    w = rng.normal(size=(2, 3))
    base = geometric_loss(_linear(w), y3).value.item()
    rescaled = geometric_loss(_linear(13.0 * w), y3).value.item()
    ok = (abs(square) < 1e-9 and abs(rows - 1.5) < 1e-9 and all(abs(v - 1.5) < 1e-9 for v in scaled)
          and abs(base - rescaled) < 1e-9)
    verdict(3, "geometric-loss closed forms", ok,
            f"orthogonal {square:.2e}, orthonormal rows {rows:.15f}, rescale diff {abs(base - rescaled):.1e}")


def test_criterion_4_topological_closed_form(verdict):
    line = topo_signature_loss([[0.0], [1.0], [3.0]], [[0.0], [1.0], [2.0]]).total.item()
    y = np.random.default_rng(4).normal(size=(30, 3))
    same = topo_signature_loss(y, y.copy()).total.item()
    verdict(4, "topological-loss closed form", abs(line - 1.0) <= 1e-12 and same == 0.0,
            f"line example {line!r}, identical clouds {same!r}")


def test_criterion_5_mrl_denoising(verdict):
    start = time.perf_counter()
    params = MrlParams(1.0, 0.01, 1.0, 3)
    wins, rows = 0, []
    for seed in range(10):
        cloud = _noisy_roll(seed)
        y = mrl_forward(cloud.points, cloud.points, params).points
        before = math.sqrt(np.mean(np.sum((cloud.points - cloud.clean) ** 2, axis=1)))
        after = math.sqrt(np.mean(np.sum((y - cloud.clean) ** 2, axis=1)))
        wins += after < before
        rows.append(f"{before:.4f}->{after:.4f}")
    seconds = time.perf_counter() - start
    verdict(5, "MRL denoising with preset radii", wins >= 9 and seconds < 60,
            f"{wins}/10 seeds improve; RMSE to clean {', '.join(rows)}; {seconds:.1f}s")


@pytest.mark.slow
def test_criterion_6_ablation_ordering(verdict):
    start = time.perf_counter()
    base = preset_config("swiss-roll")
    kl_z = {"final": [], "vanilla_ae": []}
    kl_y = {"final": [], "mr_ae": []}
    for seed in range(5):
        x = _noisy_roll(seed).points
        for name in ("final", "vanilla_ae", "mr_ae"):
            result = train(x, replace(base, seed=seed, **ABLATIONS[name]))
            y, z = result.transform(x)
            if name in kl_z:
                kl_z[name].append(kl_sigma(x, z, 0.1))
            if name in kl_y:
                kl_y[name].append(kl_sigma(x, y, 0.1))
    med = {k: statistics.median(v) for k, v in {**kl_z, **{k + "_y": v for k, v in kl_y.items()}}.items()}
    embed_ok = med["final"] < med["vanilla_ae"]
    manifold_ok = med["final_y"] < med["mr_ae_y"]
    seconds = time.perf_counter() - start
    verdict(6, "ablation ordering", embed_ok and manifold_ok and seconds < 1800,
            f"median KL0.1(X,Z) final {med['final']:.4g} vs vanilla {med['vanilla_ae']:.4g}; "
            f"median KL0.1(X,Y) final {med['final_y']:.4g} vs MR-AE {med['mr_ae_y']:.4g}; {seconds:.0f}s")


def test_criterion_7_metric_identities(verdict):
    worst = 0.0
    rng = np.random.default_rng(7)
    for n in (150, 500):
        for _ in range(2):
            a = rng.normal(size=(n, int(rng.integers(2, 6))))
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # Trust truncates k at N=150
                r = metric_report(a, a)
            target = {"kl_01": 0.0, "knn": 1.0, "trust": 1.0, "kl_100": 0.0, "rmse": 0.0, "spear": 1.0}
            worst = max(worst, max(abs(getattr(r, k) - v) for k, v in target.items()))
    verdict(7, "metric identities", worst <= 1e-9, f"largest deviation {worst:.1e}")


def _snapshot(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name not in ("manifest.json", "timing.json")}


def test_criterion_8_determinism(verdict, tmp_path):
    runs = []
    for rep in ("a", "b"):
        root = tmp_path / rep
        data, run = root / "data", root / "run"
        codes = [
            main(["generate", "swiss-roll", "--n", "300", "--sigma", "0.02", "--seed", "5", "--out", str(data)]),
            main(["train", "--dataset", str(data / "points.csv"), "--preset", "swiss-roll", "--epochs", "3",
                  "--seed", "5", "--out", str(run)]),
            main(["evaluate", str(data / "points.csv"), str(run / "embedding.csv"), "--k-max", "50",
                  "--out", str(root / "metrics.json")]),
            main(["plot", str(run / "embedding.csv"), "--labels", str(data / "labels.csv"),
                  "--out", str(root / "plot.svg")]),
        ]
        files = {f"data/{k}": v for k, v in _snapshot(data).items()}
        files.update({f"run/{k}": v for k, v in _snapshot(run).items()})
        files["metrics.json"] = (root / "metrics.json").read_bytes()
        files["plot.svg"] = (root / "plot.svg").read_bytes()
        runs.append((codes, files))
    (codes_a, a), (codes_b, b) = runs
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    ok = codes_a == codes_b == [0, 0, 0, 0] and not differing
    verdict(8, "byte-identical artifacts", ok, f"{len(a)} artifacts compared, differing: {differing or 'none'}")


def test_criterion_9_scale(verdict):
    base = replace(preset_config("swiss-roll"), epochs=5)
    records = sweep("size", [500, 1000, 2000], base, sigma=0.02, workers=1)
    per_point = [r["seconds_per_point"] for r in records]
    ratios = [b / a for a, b in zip(per_point, per_point[1:])]
    verdict(9, "sub-quadratic scaling", all(r < 2.5 for r in ratios),
            "per-point seconds " + ", ".join(f"{p:.2e}" for p in per_point)
            + "; ratios " + ", ".join(f"{r:.2f}" for r in ratios))
