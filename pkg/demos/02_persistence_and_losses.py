"""Small hand-checkable cases for the persistence pairing and both regularisers.

Run:  python demos/02_persistence_and_losses.py
"""
# %%
import math

import numpy as np
import torch

from mforge import Mlp, geometric_loss, pairwise_distances, topo_signature_loss, vr_h0_pairing, vr_h1_pairing

# %% H0: three points on a line at 0, 1, 3 merge at lengths 1 and 2
pairing, diagram = vr_h0_pairing(pairwise_distances([[0.0], [1.0], [3.0]]))
print("H0 death edges:", [(e.i, e.j, e.length) for e in pairing.dim0_edges])

# %% H1: the unit square has one loop, born at 1 and filled at sqrt(2)
pairs, dgm = vr_h1_pairing(pairwise_distances([[0, 0], [1, 0], [1, 1], [0, 1]]))
print("square H1 diagram:", dgm[1].tolist(), " sqrt(2) =", math.sqrt(2))

# %% Topological loss: Y on {0,1,3}, Z on {0,1,2}. Each side's long edge
# disagrees by 1, so each direction contributes 0.5.
parts = topo_signature_loss([[0.0], [1.0], [3.0]], [[0.0], [1.0], [2.0]])
print("topo loss:", parts.loss_y_to_z.item(), "+", parts.loss_z_to_y.item(), "=", parts.total.item())

# %% Geometric loss for linear encoders. An orthonormal-row 2x3 map has
# J^T J with eigenvalues (1, 1, 0), giving 3^2 * 2 / 2^2 - 3 = 1.5.
q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))
for name, w in (("orthogonal 3x3", q), ("orthonormal rows 2x3", q[:2]), ("scaled rows x10", 10 * q[:2])):
    m = Mlp((3, w.shape[0]), (w.shape[0], 3))
    with torch.no_grad():
        m.encoder[0][0].copy_(torch.tensor(w))
    print(f"geom loss, {name:22s}: {geometric_loss(m, np.random.default_rng(1).random((8, 3))).value.item():.12f}")
