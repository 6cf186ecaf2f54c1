"""End-to-end training: MRL -> encoder -> decoder under the three-term loss.

The autoencoder term compares the decoder output with the *raw* input X;
the two regularisers compare the reconstructed manifold Y with the
embedding Z. Gradients reach the network weights and the MRL radii.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from .errors import NumericalError, ParameterError
from .geometry import PointCloud, as_points
from .metrics import metric_report
from .mrl import ManifoldReconstructionLayer, MrlParams
from .nn import Adam, DTYPE, Mlp, clip_global_norm
from .regularizers import geometric_loss, topo_signature_loss

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lambda_ae: float = 1.0
    lambda_topo: float = 1.0
    lambda_geom: float = 5.0
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 128
    seed: int = 0
    encoder_dims: Tuple[int, ...] = (3, 2, 2)
    decoder_dims: Tuple[int, ...] = (2, 2, 3)
    mrl: MrlParams = field(default_factory=MrlParams)
    mrl_enabled: bool = True
    mrl_trainable: bool = True
    topo_enabled: bool = True
    geom_enabled: bool = True
    h1_enabled: bool = False
    clip_norm: float = 10.0

    def __post_init__(self):
        self.encoder_dims = tuple(int(v) for v in self.encoder_dims)
        self.decoder_dims = tuple(int(v) for v in self.decoder_dims)
        if isinstance(self.mrl, dict):
            self.mrl = MrlParams(**self.mrl)
        if min(self.lambda_ae, self.lambda_topo, self.lambda_geom) < 0:
            raise ParameterError("loss weights must be non-negative")
        if self.lr <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ParameterError("lr, epochs and batch_size must be positive")
        if not self.lambda_ae > 0 and not (self.topo_active or self.geom_active):
            raise ParameterError("lambda_ae must be positive when no regulariser is enabled")

    @property
    def topo_active(self) -> bool:
        return self.topo_enabled and self.lambda_topo > 0

    @property
    def geom_active(self) -> bool:
        return self.geom_enabled and self.lambda_geom > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder_dims"] = list(self.encoder_dims)
        d["decoder_dims"] = list(self.decoder_dims)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# dataset presets: architecture and loss weights per dataset, MRL radii shared
PRESETS: Dict[str, dict] = {
    "swiss-roll": dict(lambda_ae=1.0, lambda_topo=1.0, lambda_geom=5.0,
                       encoder_dims=(3, 2, 2), decoder_dims=(2, 2, 3)),
    "mammoth": dict(lambda_ae=1.0, lambda_topo=0.5, lambda_geom=0.5,
                    encoder_dims=(3, 2, 2), decoder_dims=(2, 2, 3)),
    "partnet": dict(lambda_ae=1.0, lambda_topo=0.01, lambda_geom=0.01,
                    encoder_dims=(3, 2, 2), decoder_dims=(2, 2, 3)),
    "spheres": dict(lambda_ae=1.0, lambda_topo=1.0, lambda_geom=1.0,
                    encoder_dims=(101, 64, 32, 16, 8, 4, 2), decoder_dims=(2, 4, 8, 16, 32, 64, 101)),
}


def preset_config(name: str, **overrides) -> TrainConfig:
    if name not in PRESETS:
        raise ParameterError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    settings = dict(PRESETS[name], mrl=MrlParams(1.0, 0.01, 1.0, 3), lr=1e-3, epochs=100, batch_size=128)
    settings.update(overrides)
    return TrainConfig(**settings)


ABLATIONS: Dict[str, dict] = {
    "final": dict(mrl_enabled=True, topo_enabled=True, geom_enabled=True),
    "topo_ae": dict(mrl_enabled=False, topo_enabled=True, geom_enabled=False),
    "geom_ae": dict(mrl_enabled=False, topo_enabled=False, geom_enabled=True),
    "topo_geom_ae": dict(mrl_enabled=False, topo_enabled=True, geom_enabled=True),
    "mr_ae": dict(mrl_enabled=True, topo_enabled=False, geom_enabled=False),
    "vanilla_ae": dict(mrl_enabled=False, topo_enabled=False, geom_enabled=False),
}


@dataclass
class LossComponents:
    total: torch.Tensor
    ae: float
    topo: float
    geom: float


def total_loss(X, X_hat, Y, Z, config: TrainConfig, model: Optional[Mlp] = None) -> LossComponents:
    """Weighted sum of the MSE reconstruction loss and the enabled regularisers.

    Disabled terms are skipped entirely and reported as 0. ``model`` is only
    needed for the geometric term (it differentiates the encoder).
    """
    X, X_hat = torch.as_tensor(X, dtype=DTYPE), torch.as_tensor(X_hat, dtype=DTYPE)
    if X.shape != X_hat.shape:
        raise ParameterError(f"X {tuple(X.shape)} and X_hat {tuple(X_hat.shape)} differ in shape")
    ae = torch.mean((X - X_hat) ** 2)
    total = config.lambda_ae * ae
    topo_v = geom_v = 0.0
    if config.topo_active:
        topo = topo_signature_loss(Y, Z, h1=config.h1_enabled).total
        total = total + config.lambda_topo * topo
        topo_v = float(topo.detach())
    if config.geom_active:
        if model is None:
            raise ParameterError("geometric loss requires the model")
        geom = geometric_loss(model, Y).value
        total = total + config.lambda_geom * geom
        geom_v = float(geom.detach())
    parts = {"ae": float(ae.detach()), "topo": topo_v, "geom": geom_v}
    bad = [name for name, v in parts.items() if not math.isfinite(v)]
    if bad:
        raise NumericalError(f"non-finite loss component(s) {bad}: {parts}")
    return LossComponents(total, **parts)


@dataclass
class EpochRecord:
    epoch: int
    total: float
    ae: float
    topo: float
    geom: float
    radii: List[float]


@dataclass
class TrainReport:
    config: dict
    epochs: List[EpochRecord] = field(default_factory=list)
    final_radii: List[float] = field(default_factory=list)
    epoch_seconds: List[float] = field(default_factory=list)

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {"config": self.config, "epochs": [asdict(e) for e in self.epochs],
             "final_radii": self.final_radii}
        if include_timing:
            d["epoch_seconds"] = self.epoch_seconds
        return d


@dataclass
class TrainResult:
    model: Mlp
    layer: Optional[ManifoldReconstructionLayer]
    report: TrainReport
    config: TrainConfig

    @property
    def mrl_params(self) -> Optional[MrlParams]:
        return None if self.layer is None else self.layer.params

    def transform(self, cloud, pool=None) -> Tuple[np.ndarray, np.ndarray]:
        """(Y, Z) for ``cloud``: manifold points (pool defaults to the cloud) and embedding."""
        x = torch.from_numpy(as_points(cloud))
        with torch.no_grad():
            if self.layer is not None:
                p = x if pool is None else torch.from_numpy(as_points(pool))
                y = self.layer(x, p)
            else:
                y = x
            z = self.model.encode(y)
        return y.numpy(), z.numpy()


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    return [perm[s:s + batch_size] for s in range(0, n, batch_size)]


def train(dataset, config: TrainConfig, on_epoch: Optional[Callable[[EpochRecord], None]] = None) -> TrainResult:
    x_all = as_points(dataset)
    n, dim = x_all.shape
    if config.batch_size > n:
        raise ParameterError(f"batch_size {config.batch_size} exceeds dataset size {n}")
    if config.encoder_dims[0] != dim or config.decoder_dims[-1] != dim:
        raise ParameterError(f"architecture {config.encoder_dims}/{config.decoder_dims} does not match data dimension {dim}")

    model = Mlp(config.encoder_dims, config.decoder_dims, seed=config.seed)
    layer = ManifoldReconstructionLayer(config.mrl) if config.mrl_enabled else None
    # frozen radii still contract, they are just left out of the optimiser
    trainable_radii = layer is not None and config.mrl_trainable
    params = model.parameters() + (layer.parameters() if trainable_radii else [])
    opt = Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    pool = torch.from_numpy(x_all)
    report = TrainReport(config=config.to_dict())

    for epoch in range(config.epochs):
        start = time.perf_counter()
        sums = {"total": 0.0, "ae": 0.0, "topo": 0.0, "geom": 0.0}
        batches = _batches(n, config.batch_size, rng)
        for b, idx in enumerate(batches):
            xb = pool[torch.from_numpy(idx)]
            yb = layer(xb, pool) if layer is not None else xb
            zb, xhat = model.forward(yb)
            try:
                parts = total_loss(xb, xhat, yb, zb, config, model)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch}, batch {b}: {exc}") from exc
            grads = torch.autograd.grad(parts.total, params, allow_unused=True)
            grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
            grads, _ = clip_global_norm(grads, config.clip_norm)
            opt.step(grads)
            sums["total"] += float(parts.total.detach())
            sums["ae"] += parts.ae
            sums["topo"] += parts.topo
            sums["geom"] += parts.geom
        nb = len(batches)
        radii = [] if layer is None else [float(r) for r in layer.radii.detach()]
        record = EpochRecord(epoch, sums["total"] / nb, sums["ae"] / nb, sums["topo"] / nb, sums["geom"] / nb, radii)
        report.epochs.append(record)
        report.epoch_seconds.append(time.perf_counter() - start)
        logger.info("epoch %d total %.6g ae %.6g topo %.6g geom %.6g", epoch, record.total,
                    record.ae, record.topo, record.geom)
        if on_epoch is not None:
            on_epoch(record)

    report.final_radii = [] if layer is None else [float(r) for r in layer.radii.detach()]
    return TrainResult(model, layer, report, config)


COMPARISON_GROUPS = ("pc_vs_embedding", "manifold_vs_embedding", "pc_vs_manifold")


@dataclass
class AblationEntry:
    name: str
    report: TrainReport
    metrics: Dict[str, dict]


def evaluate_groups(X, Y, Z, k_range=None) -> Dict[str, dict]:
    """Metric reports for the three comparisons (point cloud / manifold / embedding)."""
    return {
        "pc_vs_embedding": metric_report(X, Z, k_range).to_dict(),
        "manifold_vs_embedding": metric_report(Y, Z, k_range).to_dict(),
        "pc_vs_manifold": metric_report(X, Y, k_range).to_dict(),
    }


def ablation_suite(dataset, base_config: TrainConfig, names: Optional[Sequence[str]] = None,
                   k_range=None) -> Dict[str, AblationEntry]:
    """Train every ablation variant with the same seed and evaluate it."""
    x = as_points(dataset)
    out = {}
    for name in (names or ABLATIONS):
        if name not in ABLATIONS:
            raise ParameterError(f"unknown ablation {name!r}")
        result = train(x, replace(base_config, **ABLATIONS[name]))
        y, z = result.transform(x)
        out[name] = AblationEntry(name, result.report, evaluate_groups(x, y, z, k_range))
    return out
