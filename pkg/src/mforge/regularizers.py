"""Topological signature loss and relaxed distortion (geometric) loss.

Both return torch scalars that can be back-propagated. For the topological
loss the persistence pairings are computed from detached distances and then
held fixed, so the gradient flows only through the selected edge lengths.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import torch

from .errors import NumericalError, ParameterError
from .geometry import pairwise_distances
from .nn import Mlp, _tensor
from .persistence import H1_DEFAULT_CAP, PersistencePairing, vr_pairing

MIN_MEAN_TRACE = 1e-12


def edge_lengths(points: torch.Tensor, i, j) -> torch.Tensor:
    """|points[i] - points[j]| with a zero (not NaN) gradient at coincident points."""
    diff = points[torch.as_tensor(i)] - points[torch.as_tensor(j)]
    sq = (diff * diff).sum(-1)
    pos = sq > 0
    return torch.where(pos, torch.sqrt(torch.where(pos, sq, torch.ones_like(sq))), torch.zeros_like(sq))


@dataclass
class TopoLossParts:
    loss_y_to_z: torch.Tensor
    loss_z_to_y: torch.Tensor
    pairing_y: PersistencePairing
    pairing_z: PersistencePairing

    @property
    def total(self) -> torch.Tensor:
        return self.loss_y_to_z + self.loss_z_to_y


def topo_signature_loss(Y, Z, h1: bool = False, cap: int = H1_DEFAULT_CAP) -> TopoLossParts:
    """0.5*|A_Y[pi_Y] - A_Z[pi_Y]|^2 + 0.5*|A_Z[pi_Z] - A_Y[pi_Z]|^2."""
    Y, Z = _tensor(Y), _tensor(Z)
    if Y.ndim != 2 or Z.ndim != 2 or Y.shape[0] != Z.shape[0]:
        raise ParameterError(f"Y and Z must have the same number of rows, got {tuple(Y.shape)} and {tuple(Z.shape)}")
    pi_y, _ = vr_pairing(pairwise_distances(Y.detach().numpy()), h1=h1, cap=cap)
    pi_z, _ = vr_pairing(pairwise_distances(Z.detach().numpy()), h1=h1, cap=cap)
    iy, jy = pi_y.edge_indices()
    iz, jz = pi_z.edge_indices()
    y_to_z = 0.5 * ((edge_lengths(Y, iy, jy) - edge_lengths(Z, iy, jy)) ** 2).sum()
    z_to_y = 0.5 * ((edge_lengths(Z, iz, jz) - edge_lengths(Y, iz, jz)) ** 2).sum()
    return TopoLossParts(y_to_z, z_to_y, pi_y, pi_z)


def topo_loss_gradient(Y, Z, h1: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Gradients of the total topological loss w.r.t. Y and Z (pairings fixed)."""
    Y = _tensor(Y).detach().clone().requires_grad_(True)
    Z = _tensor(Z).detach().clone().requires_grad_(True)
    total = topo_signature_loss(Y, Z, h1=h1).total
    gy, gz = torch.autograd.grad(total, (Y, Z))
    return gy.numpy(), gz.numpy()


@dataclass
class GeomLossParts:
    mean_trace: torch.Tensor
    mean_trace_sq: torch.Tensor
    value: torch.Tensor


def geometric_loss(model: Mlp, Y) -> GeomLossParts:
    """Relaxed distortion of the encoder over a batch, with Euclidean metrics on both sides.

    With H = J^T J the pullback metric, Tr H = |J|_F^2 and Tr H^2 = |J J^T|_F^2;
    the batch mean stands in for the expectation over the data distribution.
    """
    Y = _tensor(Y)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise ParameterError("geometric loss needs a non-empty batch")
    dim = Y.shape[1]
    jac = model.encoder_jacobian(Y)
    trace = (jac * jac).sum(dim=(1, 2))
    gram = jac @ jac.transpose(1, 2)
    trace_sq = (gram * gram).sum(dim=(1, 2))
    mean_trace = trace.mean()
    mean_trace_sq = trace_sq.mean()
    if not float(mean_trace.detach()) > MIN_MEAN_TRACE:
        raise NumericalError(f"encoder Jacobian vanished (mean trace {float(mean_trace.detach()):.3g}); degenerate encoder")
    value = dim * dim * mean_trace_sq / mean_trace ** 2 - dim
    return GeomLossParts(mean_trace, mean_trace_sq, value)


def geom_loss_gradient(model: Mlp, Y) -> List[np.ndarray]:
    """Gradient of the geometric loss w.r.t. each model parameter."""
    params = model.parameters()
    grads = torch.autograd.grad(geometric_loss(model, Y).value, params, allow_unused=True)
    return [np.zeros(tuple(p.shape)) if g is None else g.numpy() for p, g in zip(params, grads)]
