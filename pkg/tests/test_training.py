import math
from dataclasses import replace

import numpy as np
import pytest
import torch

from mforge.datasets import add_gaussian_noise, normalize_unit_cube, swiss_roll_with_hole
from mforge.errors import NumericalError, ParameterError
from mforge.mrl import MrlParams
from mforge.nn import Adam, Mlp
from mforge.training import (ABLATIONS, COMPARISON_GROUPS, PRESETS, TrainConfig, ablation_suite,
                             preset_config, total_loss, train)


@pytest.fixture(scope="module")
def roll():
    c = normalize_unit_cube(swiss_roll_with_hole(300, 0))
    return add_gaussian_noise(c, 0.02, 0).points


def _small(**kw):
    base = dict(epochs=2, batch_size=64, mrl=MrlParams(0.3, 0.05, 0.2, 3))
    base.update(kw)
    return TrainConfig(**base)


def test_presets():
    c = preset_config("swiss-roll")
    assert (c.lambda_ae, c.lambda_topo, c.lambda_geom) == (1.0, 1.0, 5.0)
    assert c.mrl.radii == (1.0, 0.01, 1.0) and c.mrl.k == 3
    assert (c.lr, c.epochs, c.batch_size) == (1e-3, 100, 128)
    assert preset_config("spheres").encoder_dims == (101, 64, 32, 16, 8, 4, 2)
    assert set(PRESETS) == {"swiss-roll", "mammoth", "partnet", "spheres"}
    with pytest.raises(ParameterError):
        preset_config("moons")


def test_config_round_trip():
    c = preset_config("mammoth", seed=4, h1_enabled=True)
    assert TrainConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ParameterError):
        TrainConfig.from_dict({"bogus": 1})
    with pytest.raises(ParameterError):
        TrainConfig(lambda_topo=-1.0)
    with pytest.raises(ParameterError):
        TrainConfig(lambda_ae=0.0, topo_enabled=False, geom_enabled=False)


def test_loss_zero_for_perfect_isometry(rng):
    y = rng.random((20, 2))
    rot = np.array([[0.6, -0.8], [0.8, 0.6]])
    z = y @ rot.T
    cfg = TrainConfig(encoder_dims=(2, 2), decoder_dims=(2, 2), geom_enabled=False)
    assert total_loss(y, y, y, z, cfg).total.item() == pytest.approx(0.0, abs=1e-24)


def test_vanilla_loss_is_mse(rng):
    x, xhat = rng.random((10, 3)), rng.random((10, 3))
    cfg = TrainConfig(lambda_topo=0.0, lambda_geom=0.0)
    parts = total_loss(x, xhat, x, x[:, :2], cfg)
    assert parts.total.item() == pytest.approx(np.mean((x - xhat) ** 2), rel=1e-15)
    assert parts.topo == 0.0 and parts.geom == 0.0


def test_loss_bookkeeping(rng):
    x = rng.random((16, 3))
    m = Mlp((3, 2, 2), (2, 2, 3), seed=3)
    z, xhat = m.forward(x)
    cfg = TrainConfig(lambda_ae=0.7, lambda_topo=1.3, lambda_geom=2.1)
    p = total_loss(x, xhat, x, z, cfg, m)
    assert p.total.item() == pytest.approx(0.7 * p.ae + 1.3 * p.topo + 2.1 * p.geom, abs=1e-12)
    assert min(p.ae, p.topo, p.geom) >= 0


def test_geom_term_needs_model(rng):
    x = rng.random((5, 3))
    with pytest.raises(ParameterError):
        total_loss(x, x, x, x[:, :2], TrainConfig())


def test_vanilla_step_equals_plain_autoencoder_step(roll):
    cfg = TrainConfig(lambda_topo=0.0, lambda_geom=0.0, mrl_enabled=False, epochs=1,
                      batch_size=len(roll), clip_norm=1e9)
    trained = train(roll, cfg)
    # the same step by hand
    m = Mlp(cfg.encoder_dims, cfg.decoder_dims, seed=cfg.seed)
    x = torch.from_numpy(roll[np.random.default_rng(cfg.seed).permutation(len(roll))])
    _, xhat = m.forward(x)
    grads = torch.autograd.grad(torch.mean((x - xhat) ** 2), m.parameters())
    Adam(m.parameters(), lr=cfg.lr).step(grads)
    for a, b in zip(trained.model.parameters(), m.parameters()):
        assert torch.equal(a, b)


def test_report_is_deterministic(roll):
    a = train(roll, _small()).report.to_dict()
    b = train(roll, _small()).report.to_dict()
    assert a == b


def test_epoch_records_and_radii(roll):
    seen = []
    res = train(roll, _small(epochs=3), on_epoch=seen.append)
    assert [e.epoch for e in res.report.epochs] == [0, 1, 2] and len(seen) == 3
    for e in res.report.epochs:
        assert min(e.ae, e.topo, e.geom) >= 0
        assert all(r > 0 for r in e.radii)
        assert len(e.radii) == 3
    assert len(res.report.epoch_seconds) == 3
    assert "epoch_seconds" not in res.report.to_dict()


def test_frozen_radii_do_not_move(roll):
    res = train(roll, _small(mrl_trainable=False))
    assert res.report.final_radii == pytest.approx([0.3, 0.05, 0.2], rel=1e-15)
    moving = train(roll, _small())
    assert moving.report.final_radii != res.report.final_radii


def test_vanilla_training_reduces_mse(roll):
    cfg = TrainConfig(mrl_enabled=False, topo_enabled=False, geom_enabled=False, epochs=100)
    res = train(roll, cfg)
    assert res.report.epochs[-1].ae < res.report.epochs[0].ae


def test_mr_ae_has_zero_regularisers(roll):
    res = train(roll, replace(_small(), **ABLATIONS["mr_ae"]))
    assert all(e.topo == 0.0 and e.geom == 0.0 for e in res.report.epochs)


def test_vanilla_transform_passes_input_through(roll):
    res = train(roll, replace(_small(), **ABLATIONS["vanilla_ae"]))
    y, z = res.transform(roll)
    np.testing.assert_array_equal(y, roll)
    assert z.shape == (len(roll), 2)


def test_batch_size_and_architecture_checks(roll):
    with pytest.raises(ParameterError):
        train(roll, _small(batch_size=len(roll) + 1))
    with pytest.raises(ParameterError):
        train(roll[:, :2], _small())


def test_partial_last_batch_is_kept(roll):
    # 300 points, batch 128 -> 3 batches; the report averages over all of them
    res = train(roll, _small(batch_size=128, epochs=1, topo_enabled=False, geom_enabled=False,
                             mrl_enabled=False))
    assert math.isfinite(res.report.epochs[0].ae)


def test_non_finite_input_rejected():
    with pytest.raises(ParameterError):
        train(np.array([[np.inf, 0.0, 0.0]] * 8), _small(batch_size=4))


def test_ablation_suite_shape(roll):
    out = ablation_suite(roll, _small(epochs=1), k_range=[5, 10])
    assert list(out) == list(ABLATIONS)
    for name, entry in out.items():
        assert entry.name == name
        assert set(entry.metrics) == set(COMPARISON_GROUPS)
    vanilla = out["vanilla_ae"].metrics["pc_vs_manifold"]
    assert vanilla["kl_01"] == 0.0 and vanilla["knn"] == 1.0
