"""Manifold reconstruction + topologically and geometrically regularised autoencoders."""

__version__ = "0.1.0"

from .errors import CapacityError, DataIOError, MforgeError, NumericalError, ParameterError
from .geometry import PointCloud, knn_indices, pairwise_distances, rank_matrix
from .datasets import (add_gaussian_noise, load_csv, load_json, normalize_unit_cube, spheres_dataset,
                       swiss_roll_with_hole)
from .mrl import (ManifoldReconstructionLayer, MrlParams, alpha_weights, contract_point,
                  contraction_direction, mrl_forward, mrl_radii_gradient)
from .nn import Adam, Mlp, adam_step, encoder_jacobian, gelu, pca_fit
from .persistence import Diagram, FiltrationEdge, PersistencePairing, select_distances, vr_h0_pairing, vr_h1_pairing
from .regularizers import geometric_loss, topo_signature_loss
from .metrics import MetricReport, metric_report
from .training import TrainConfig, ablation_suite, preset_config, total_loss, train
