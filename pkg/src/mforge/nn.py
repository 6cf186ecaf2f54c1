"""Small MLP autoencoder, exact-GELU activations, Adam, and a PCA baseline.

Reverse-mode gradients come from torch autograd (float64 throughout). The
encoder Jacobian is built by pushing D forward-mode tangents through the
layers with ordinary tensor ops, so anything computed from it (the
distortion measure) can itself be back-propagated: reverse over forward.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from .errors import DataIOError, NumericalError, ParameterError
from .geometry import as_points

DTYPE = torch.float64
CHECKPOINT_FORMAT = "mforge-mlp/1"
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x if x.dtype == DTYPE else x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def normal_cdf(x):
    return 0.5 * (1.0 + torch.erf(x * _INV_SQRT2))


def gelu(x):
    """x * Phi(x) with the exact normal CDF. Accepts floats or tensors."""
    if isinstance(x, torch.Tensor):
        return x * normal_cdf(x)
    return float(x) * 0.5 * (1.0 + math.erf(float(x) * _INV_SQRT2))


def gelu_derivative(x):
    """d/dx gelu = Phi(x) + x * phi(x)."""
    if isinstance(x, torch.Tensor):
        return normal_cdf(x) + x * torch.exp(-0.5 * x * x) * _INV_SQRT2PI
    x = float(x)
    return 0.5 * (1.0 + math.erf(x * _INV_SQRT2)) + x * math.exp(-0.5 * x * x) * _INV_SQRT2PI


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


class Mlp:
    """Encoder/decoder pair of fully connected layers.

    Hidden layers are affine + GELU. The encoder's last layer is affine only;
    the decoder's last layer is affine + sigmoid so reconstructions live in
    (0, 1) like the normalised inputs. Weights are stored (out, in).
    """

    def __init__(self, encoder_dims: Sequence[int], decoder_dims: Sequence[int], seed: int = 0):
        encoder_dims, decoder_dims = list(map(int, encoder_dims)), list(map(int, decoder_dims))
        if len(encoder_dims) < 2 or len(decoder_dims) < 2:
            raise ParameterError("encoder and decoder need at least an input and an output size")
        if encoder_dims[-1] != decoder_dims[0]:
            raise ParameterError(
                f"encoder output {encoder_dims[-1]} != decoder input {decoder_dims[0]}")
        if min(encoder_dims + decoder_dims) < 1:
            raise ParameterError("layer sizes must be positive")
        self.encoder_dims = encoder_dims
        self.decoder_dims = decoder_dims
        rng = np.random.default_rng(seed)
        self.encoder = [self._layer(rng, a, b) for a, b in zip(encoder_dims, encoder_dims[1:])]
        self.decoder = [self._layer(rng, a, b) for a, b in zip(decoder_dims, decoder_dims[1:])]

    @staticmethod
    def _layer(rng, fan_in, fan_out):
        w = torch.tensor(glorot_uniform(rng, fan_in, fan_out), dtype=DTYPE, requires_grad=True)
        b = torch.zeros(fan_out, dtype=DTYPE, requires_grad=True)
        return [w, b]

    @property
    def input_dim(self) -> int:
        return self.encoder_dims[0]

    @property
    def latent_dim(self) -> int:
        return self.encoder_dims[-1]

    def parameters(self) -> List[torch.Tensor]:
        return [p for layer in self.encoder + self.decoder for p in layer]

    def _check(self, x: torch.Tensor, width: int, what: str) -> torch.Tensor:
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != width:
            raise ParameterError(f"{what} expects rows of width {width}, got shape {tuple(x.shape)}")
        return x

    def encode(self, y) -> torch.Tensor:
        h = self._check(_tensor(y), self.input_dim, "encoder")
        last = len(self.encoder) - 1
        for i, (w, b) in enumerate(self.encoder):
            h = h @ w.T + b
            if i < last:
                h = gelu(h)
        return h

    def decode(self, z) -> torch.Tensor:
        h = self._check(_tensor(z), self.latent_dim, "decoder")
        last = len(self.decoder) - 1
        for i, (w, b) in enumerate(self.decoder):
            h = h @ w.T + b
            h = torch.sigmoid(h) if i == last else gelu(h)
        return h

    def forward(self, y) -> Tuple[torch.Tensor, torch.Tensor]:
        z = self.encode(y)
        return z, self.decode(z)

    def encoder_jacobian(self, y) -> torch.Tensor:
        """Batched Jacobians dz/dy, shape (B, d, D); differentiable in the weights."""
        h = self._check(_tensor(y), self.input_dim, "encoder")
        batch, dim = h.shape
        tangent = torch.eye(dim, dtype=DTYPE).expand(batch, dim, dim)  # (B, D, width)
        last = len(self.encoder) - 1
        for i, (w, b) in enumerate(self.encoder):
            a = h @ w.T + b
            tangent = tangent @ w.T
            if i < last:
                tangent = tangent * gelu_derivative(a)[:, None, :]
                h = gelu(a)
            else:
                h = a
        return tangent.transpose(1, 2)

    # --- checkpoints -------------------------------------------------------

    def to_dict(self) -> dict:
        def dump(layers):
            return [{"weight": w.detach().numpy().ravel().tolist(),
                     "bias": b.detach().numpy().tolist()} for w, b in layers]

        return {"format": CHECKPOINT_FORMAT, "encoder_dims": self.encoder_dims,
                "decoder_dims": self.decoder_dims, "encoder": dump(self.encoder),
                "decoder": dump(self.decoder)}

    @classmethod
    def from_dict(cls, data: dict) -> "Mlp":
        if data.get("format") != CHECKPOINT_FORMAT:
            raise DataIOError(f"unsupported checkpoint format {data.get('format')!r}")
        model = cls(data["encoder_dims"], data["decoder_dims"])
        for layers, dumped in ((model.encoder, data["encoder"]), (model.decoder, data["decoder"])):
            if len(layers) != len(dumped):
                raise DataIOError("checkpoint layer count does not match its dims")
            with torch.no_grad():
                for (w, b), d in zip(layers, dumped):
                    w.copy_(torch.tensor(d["weight"], dtype=DTYPE).reshape(w.shape))
                    b.copy_(torch.tensor(d["bias"], dtype=DTYPE).reshape(b.shape))
        return model

    def save(self, path) -> None:
        from .serialization import dump_json

        dump_json(self.to_dict(), path)

    @classmethod
    def load(cls, path) -> "Mlp":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise DataIOError(f"cannot load checkpoint {path}: {exc}") from exc


def encode(model: Mlp, batch) -> np.ndarray:
    with torch.no_grad():
        return model.encode(as_points(batch)).numpy()


def decode(model: Mlp, embedding) -> np.ndarray:
    with torch.no_grad():
        return model.decode(as_points(embedding)).numpy()


def forward(model: Mlp, batch) -> Tuple[np.ndarray, np.ndarray]:
    with torch.no_grad():
        z, xhat = model.forward(as_points(batch))
    return z.numpy(), xhat.numpy()


def encoder_jacobian(model: Mlp, y) -> np.ndarray:
    """Exact d x D Jacobian of the encoder at a single point ``y``."""
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    with torch.no_grad():
        return model.encoder_jacobian(y)[0].numpy()


# --- optimiser -------------------------------------------------------------

@dataclass
class AdamState:
    t: int = 0
    m: List[torch.Tensor] = field(default_factory=list)
    v: List[torch.Tensor] = field(default_factory=list)


def adam_step(params: Sequence[torch.Tensor], grads: Sequence[torch.Tensor], state: AdamState,
              lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ParameterError("params and grads differ in length")
    if not state.m:
        state.m = [torch.zeros_like(p, dtype=DTYPE) for p in params]
        state.v = [torch.zeros_like(p, dtype=DTYPE) for p in params]
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            if g is None:
                continue
            if g.shape != p.shape:
                raise ParameterError(f"gradient shape {tuple(g.shape)} != parameter shape {tuple(p.shape)}")
            m.mul_(beta1).add_(g, alpha=1.0 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
            p.sub_(lr * (m / bc1) / (torch.sqrt(v / bc2) + eps))
    return state


class Adam:
    def __init__(self, params: Sequence[torch.Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state = AdamState()

    def step(self, grads: Sequence[torch.Tensor]) -> None:
        adam_step(self.params, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)


def clip_global_norm(grads: Sequence[torch.Tensor], max_norm: float) -> Tuple[List[torch.Tensor], float]:
    total = math.sqrt(sum(float((g * g).sum()) for g in grads if g is not None))
    if not math.isfinite(total):
        raise NumericalError("non-finite gradient norm")
    if total <= max_norm:
        return list(grads), total
    scale = max_norm / total
    return [None if g is None else g * scale for g in grads], total


# --- PCA baseline ------------------------------------------------------------

@dataclass
class PcaProjection:
    mean: np.ndarray
    components: np.ndarray  # (d, D), orthonormal rows
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    def transform(self, cloud) -> np.ndarray:
        return (as_points(cloud) - self.mean) @ self.components.T

    def inverse_transform(self, embedding) -> np.ndarray:
        return np.asarray(embedding) @ self.components + self.mean


def pca_fit(cloud, d: int) -> PcaProjection:
    """Top-d principal directions of the sample covariance."""
    x = as_points(cloud)
    n, dim = x.shape
    if not (1 <= d <= dim) or n <= d:
        raise ParameterError(f"need 1 <= d <= D and N > d (N={n}, D={dim}, d={d})")
    mean = x.mean(axis=0)
    cov = np.cov(x - mean, rowvar=False).reshape(dim, dim)
    try:
        evals, evecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance eigendecomposition failed: {exc}") from exc
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    comps = evecs[:, order[:d]].T
    # sign convention: largest-magnitude loading positive
    signs = np.sign(comps[np.arange(d), np.argmax(np.abs(comps), axis=1)])
    comps *= np.where(signs == 0, 1.0, signs)[:, None]
    total = evals.sum()
    ratio = evals[:d] / total if total > 0 else np.zeros(d)
    return PcaProjection(mean, comps, evals[:d], ratio)
