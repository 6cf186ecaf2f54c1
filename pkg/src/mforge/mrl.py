"""Manifold Reconstruction Layer: contract noisy points towards the latent manifold.

Each point x is handled in two weighted-averaging steps over a neighbour pool:

1. a ball of radius r0 around x gives a smooth local mean F(x); the unit
   vector from x to F(x) is the contraction direction;
2. a cylinder around x (axial half-length r2 along that direction,
   cross-section radius r1) gives a second smooth mean, which is the
   contracted point y.

All weights vanish smoothly at their support boundaries (exponent k >= 3),
so y is differentiable in the radii. Neighbour membership is recomputed on
every call and treated as constant for differentiation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
import torch

from .errors import ParameterError
from .geometry import PointCloud, as_points
from .nn import DTYPE, _tensor


@dataclass(frozen=True)
class MrlParams:
    r0: float = 1.0
    r1: float = 0.01
    r2: float = 1.0
    k: int = 3
    eps_dir: float = 1e-9

    def __post_init__(self):
        if min(self.r0, self.r1, self.r2) <= 0 or not all(map(math.isfinite, (self.r0, self.r1, self.r2))):
            raise ParameterError(f"radii must be positive and finite, got {(self.r0, self.r1, self.r2)}")
        if int(self.k) != self.k or self.k < 3:
            raise ParameterError(f"smoothness exponent k must be an integer >= 3, got {self.k}")
        if self.eps_dir <= 0:
            raise ParameterError("eps_dir must be positive")

    @classmethod
    def from_noise_level(cls, sigma: float, c0: float, c1: float, c2: float, k: int = 3) -> "MrlParams":
        """Radii scaled to the noise level: r0 = c0*s, r1 = c1*s, r2 = c2*s*sqrt(log(1/s))."""
        if not 0 < sigma < 1:
            raise ParameterError(f"sigma must lie in (0, 1), got {sigma}")
        return cls(c0 * sigma, c1 * sigma, c2 * sigma * math.sqrt(math.log(1.0 / sigma)), k)

    @property
    def radii(self) -> Tuple[float, float, float]:
        return (self.r0, self.r1, self.r2)


# --- weight kernels (tensors in, tensors out) ------------------------------

def ball_weight(sq_dist, r0, k: int):
    """(1 - |x - x_i|^2 / r0^2)^k inside the ball, 0 outside."""
    r0sq = r0 * r0
    inside = sq_dist <= r0sq
    return torch.where(inside, torch.clamp(1.0 - sq_dist / r0sq, min=0.0) ** k, torch.zeros_like(sq_dist))


def axial_weight(abs_u, r2, k: int):
    """1 on |u| <= r2/2, smooth falloff to 0 at |u| = r2."""
    half = 0.5 * r2
    t = (2.0 * abs_u - r2) / r2
    falloff = torch.clamp(1.0 - t * t, min=0.0) ** k
    zero = torch.zeros_like(abs_u)
    return torch.where(abs_u <= half, torch.ones_like(abs_u), torch.where(abs_u < r2, falloff, zero))


def radial_weight(sq_v, r1, k: int):
    """(1 - |v|^2 / r1^2)^k for |v| <= r1, else 0."""
    r1sq = r1 * r1
    return torch.where(sq_v <= r1sq, torch.clamp(1.0 - sq_v / r1sq, min=0.0) ** k, torch.zeros_like(sq_v))


class _Contraction(NamedTuple):
    y: torch.Tensor            # (B, D) contracted points
    f_x: torch.Tensor          # (B, D) ball means
    direction: torch.Tensor    # (B, D) unit directions (zero rows when degenerate)
    alpha: torch.Tensor        # (B, N) unnormalised ball weights
    beta: torch.Tensor         # (B, N) unnormalised cylinder weights
    degenerate: torch.Tensor   # (B,) bool: direction undefined
    fallback: torch.Tensor     # (B,) bool: y = x was used


def _contract(batch: torch.Tensor, pool: torch.Tensor, r0, r1, r2, k: int, eps: float) -> _Contraction:
    # centre on the pool mean: translation-invariant and keeps the Gram trick accurate
    centre = pool.mean(dim=0).detach()
    x = batch - centre
    p = pool - centre
    gram = x @ p.T
    sq = torch.clamp((x * x).sum(1)[:, None] + (p * p).sum(1)[None, :] - 2.0 * gram, min=0.0)

    alpha = ball_weight(sq, r0, k)
    a_sum = alpha.sum(1)
    no_ball = a_sum <= 0
    f_x = (alpha @ p) / torch.where(no_ball, torch.ones_like(a_sum), a_sum)[:, None]
    offset = f_x - x
    sq_off = (offset * offset).sum(1)
    # masked sqrt: a zero offset must not send NaN back through the radii
    pos = sq_off > 0
    norm = torch.where(pos, torch.sqrt(torch.where(pos, sq_off, torch.ones_like(sq_off))), torch.zeros_like(sq_off))
    degenerate = no_ball | (norm < eps)
    direction = offset / torch.where(degenerate, torch.ones_like(norm), norm)[:, None]
    direction = torch.where(degenerate[:, None], torch.zeros_like(direction), direction)

    # u_j = <x_j - x, dir>, |v_j|^2 = |x_j - x|^2 - u_j^2
    u = p @ direction.T
    u = u.T - (x * direction).sum(1)[:, None]
    sq_v = torch.clamp(sq - u * u, min=0.0)
    beta = axial_weight(torch.abs(u), r2, k) * radial_weight(sq_v, r1, k)
    b_sum = beta.sum(1)
    fallback = degenerate | (b_sum < eps)
    contracted = (beta @ p) / torch.where(fallback, torch.ones_like(b_sum), b_sum)[:, None]
    y = torch.where(fallback[:, None], x, contracted) + centre
    return _Contraction(y, f_x + centre, direction, alpha, beta, degenerate, fallback)


class ManifoldReconstructionLayer:
    """Trainable contraction layer; the radii are optimised as unconstrained logs."""

    def __init__(self, params: MrlParams = MrlParams()):
        self.k = int(params.k)
        self.eps_dir = params.eps_dir
        self.log_radii = torch.tensor([math.log(r) for r in params.radii], dtype=DTYPE, requires_grad=True)

    @property
    def radii(self) -> torch.Tensor:
        return torch.exp(self.log_radii)

    @property
    def params(self) -> MrlParams:
        r0, r1, r2 = (float(v) for v in self.radii.detach())
        return MrlParams(r0, r1, r2, self.k, self.eps_dir)

    def parameters(self):
        return [self.log_radii]

    def __call__(self, batch, pool) -> torch.Tensor:
        r = self.radii
        return _contract(_tensor(batch), _tensor(pool), r[0], r[1], r[2], self.k, self.eps_dir).y


# --- per-point API -----------------------------------------------------------

@dataclass
class ContractionState:
    f_x: np.ndarray
    direction: Optional[np.ndarray]
    proj: Optional[np.ndarray]
    alpha_indices: np.ndarray
    alpha_weights: np.ndarray
    beta_indices: np.ndarray
    beta_weights: np.ndarray
    degenerate: bool
    y: np.ndarray


def _single(x, pool, params: MrlParams) -> _Contraction:
    pts = as_points(pool)
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != pts.shape[1]:
        raise ParameterError(f"point has dimension {x.shape[1]}, pool has {pts.shape[1]}")
    with torch.no_grad():
        return _contract(torch.from_numpy(x), torch.from_numpy(pts), params.r0, params.r1,
                         params.r2, params.k, params.eps_dir)


def _normalised(w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    idx = np.nonzero(w > 0)[0]
    total = w[idx].sum()
    return idx, (w[idx] / total if total > 0 else w[idx])


def alpha_weights(x, pool, params: MrlParams) -> Tuple[np.ndarray, np.ndarray]:
    """Pool indices inside the r0-ball of x and their normalised weights.

    Empty arrays signal that no pool point lies within r0.
    """
    c = _single(x, pool, params)
    return _normalised(c.alpha[0].numpy())


def contraction_direction(x, pool, params: MrlParams) -> ContractionState:
    c = _single(x, pool, params)
    a_idx, a_w = _normalised(c.alpha[0].numpy())
    b_idx, b_w = _normalised(c.beta[0].numpy())
    degenerate = bool(c.degenerate[0])
    direction = None if degenerate else c.direction[0].numpy()
    proj = None if degenerate else np.outer(direction, direction)
    return ContractionState(c.f_x[0].numpy(), direction, proj, a_idx, a_w,
                            b_idx, b_w, degenerate, c.y[0].numpy())


def contract_point(x, pool, params: MrlParams) -> np.ndarray:
    return _single(x, pool, params).y[0].numpy()


def mrl_forward(batch, pool, params: MrlParams) -> PointCloud:
    """Contract every batch point against ``pool``; labels/clean carried over."""
    pts = as_points(batch)
    with torch.no_grad():
        y = _contract(torch.from_numpy(pts), torch.from_numpy(as_points(pool)), params.r0,
                      params.r1, params.r2, params.k, params.eps_dir).y.numpy()
    if isinstance(batch, PointCloud):
        return PointCloud(y, batch.labels, batch.clean)
    return PointCloud(y)


def mrl_radii_gradient(batch, pool, params: MrlParams, upstream_grad) -> Tuple[float, float, float]:
    """(dL/dr0, dL/dr1, dL/dr2) for L = sum(upstream_grad * y)."""
    radii = torch.tensor(params.radii, dtype=DTYPE, requires_grad=True)
    y = _contract(_tensor(as_points(batch)), _tensor(as_points(pool)), radii[0], radii[1], radii[2],
                  params.k, params.eps_dir).y
    upstream = _tensor(upstream_grad)
    if upstream.shape != y.shape:
        raise ParameterError(f"upstream gradient shape {tuple(upstream.shape)} != output shape {tuple(y.shape)}")
    (g,) = torch.autograd.grad((y * upstream).sum(), radii, allow_unused=True)
    if g is None:
        return (0.0, 0.0, 0.0)
    return tuple(float(v) for v in g)
