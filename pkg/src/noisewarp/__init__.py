"""Distribution-preserving warping of Gaussian white noise.

The main entry points are :func:`make_prior_noise`, the record builders
:func:`build_grid_partition` and :func:`build_particle_partition`, and
:func:`warp_noise`. :func:`hiwyn_warp` is the finite-resolution upsampling
reference.
"""
from . import _backend
from .bridge import BridgeState, bridge_prefix_path, bridge_step, sample_upsampled_subimage
from .core import (FormatError, InvariantError, PartitionRecord, RngKey, derive_seed, make_prior_noise,
                   standard_normal, uniform)
from .evaluation import (StatReport, convergence_experiment, ks_test_standard_normal, morans_i,
                         warp_interpolated, wasserstein2_1d)
from .hiwyn import UpsampledImage, hiwyn_owner, hiwyn_warp, hiwyn_warp_eulerian, upsample_noise
from .io import export_pgm, read_flo, read_tensor, write_flo, write_tensor
from .partition_grid import build_grid_partition, clip_polygon_to_cell, polygon_area, warp_square_to_octagon
from .partition_particle import (bilinear_weights, build_particle_partition, build_particle_partition_3d,
                                 trilinear_weights)
from .warp import WarpOutput, warp_flow, warp_noise, warp_sequence

__version__ = "0.1.0"


def backend() -> str:
    """Name of the active kernel backend, ``"compiled"`` or ``"python"``."""
    return _backend.name()
