"""Partition records from explicitly clipped deformed pixel polygons.

Each destination pixel square is sent through the deformation as an octagon
(its 4 corners and 4 edge midpoints), and the octagon is clipped against every
grid cell its bounding box touches. The overlap area becomes an entry in the
source list of that cell.
"""
from __future__ import annotations

import numpy as np

from . import _backend
from .core import PartitionRecord, check_flow, num_threads

__all__ = [
    "warp_square_to_octagon",
    "clip_polygon_to_cell",
    "polygon_area",
    "build_grid_partition",
    "destination_octagons",
]


def warp_square_to_octagon(flow, i: int, j: int) -> np.ndarray:
    """Deformed octagon of pixel ``(i, j)`` as an ``(8, 2)`` vertex array.

    Vertices are the corners and edge midpoints of ``[i, i+1] x [j, j+1]``
    displaced by the bilinearly interpolated flow (edge clamped), in cyclic
    order starting at ``(i, j)`` and walking along axis 0 first.
    """
    flow = check_flow(flow)
    if flow.shape[-1] != 2:
        raise ValueError("octagons are defined for 2D flows only")
    H, W = flow.shape[:2]
    if not (0 <= i < H and 0 <= j < W):
        raise IndexError(f"pixel ({i}, {j}) outside grid {H}x{W}")
    return destination_octagons(flow)[i * W + j]


def destination_octagons(flow) -> np.ndarray:
    """Octagons of all pixels, shape ``(H*W, 8, 2)`` in row-major pixel order."""
    flow = check_flow(flow)
    return _backend.kernels.octagons(flow)


def clip_polygon_to_cell(poly, u: int, v: int) -> np.ndarray:
    """Sutherland-Hodgman clip of ``poly`` against cell ``[u, u+1] x [v, v+1]``.

    Returns the clipped vertex array, possibly with zero rows.
    """
    poly = np.ascontiguousarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(poly) > 8:
        # the compiled clipper keeps fixed-size scratch; larger inputs go through numpy
        verts, _ = _backend.get("python").clip_area(poly, int(u), int(v))
    else:
        verts, _ = _backend.kernels.clip_area(poly, int(u), int(v))
    return verts


def polygon_area(poly) -> float:
    """Absolute shoelace area."""
    p = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0] - p[0, 0], p[:, 1] - p[0, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def build_grid_partition(flow) -> PartitionRecord:
    """Grid-based partition record for a 2D flow.

    Entries of each source cell are listed by increasing destination index;
    overlaps smaller than 1e-12 are dropped. Per-source sums may exceed 1 when
    the deformation folds over itself; the warp clamps bridge time instead.
    """
    flow = check_flow(flow)
    if flow.shape[-1] != 2:
        raise ValueError("grid partition needs a 2D flow of shape (H, W, 2)")
    offsets, areas, dests = _backend.kernels.grid_partition(flow, num_threads())
    return PartitionRecord(flow.shape[:2], offsets, areas, dests)
