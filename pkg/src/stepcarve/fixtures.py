"""Bundled deterministic instances for the aggregation stage.

Two extremes of spectral complexity, built in closed form (no RNG):

* ``smooth_ellipsoid``: a filled silhouette ellipse plus a soft-edged
  occupancy ellipsoid. Nearly all power sits at low frequencies, so the
  analysis should choose the coarsest aggregation factor.
* ``checkerboard``: a period-2 lattice of isolated cells in both views.
  Power concentrates at the folding frequencies, so the analysis should
  keep the finest factor.

Each instance is (mask2d, voxels, tokens): tokens sit at occupied voxel
cells with the occupancy value as their single feature channel.
"""

from __future__ import annotations

import numpy as np

from .spectralagg import TokenSet

__all__ = ["smooth_ellipsoid", "checkerboard", "FIXTURES", "tokens_from_voxels"]


def tokens_from_voxels(voxels: np.ndarray) -> TokenSet:
    """One token per occupied cell; features are the occupancy values."""
    grid = np.asarray(voxels, dtype=np.float64)
    if grid.ndim != 3:
        raise ValueError(f"voxel grid must be 3-d, got shape {grid.shape}")
    occupied = np.argwhere(grid > 0.0)
    if occupied.shape[0] == 0:
        raise ValueError("voxel grid has no occupied cells")
    values = grid[tuple(occupied.T)][:, None]
    return TokenSet(positions=occupied.astype(np.int64), features=values)


def smooth_ellipsoid(
    mask_dims: tuple[int, int] = (64, 64),
    voxel_dims: tuple[int, int, int] = (32, 32, 32),
) -> tuple[np.ndarray, np.ndarray, TokenSet]:
    h, w = mask_dims
    yy, xx = np.mgrid[0:h, 0:w]
    # silhouette: filled ellipse with semi-axes ~0.35 of each extent
    r2 = ((yy - (h - 1) / 2) / (0.35 * h)) ** 2 + ((xx - (w - 1) / 2) / (0.35 * w)) ** 2
    mask = (r2 <= 1.0).astype(np.float64)

    gx, gy, gz = np.mgrid[0 : voxel_dims[0], 0 : voxel_dims[1], 0 : voxel_dims[2]]
    centers = [(d - 1) / 2 for d in voxel_dims]
    radii = [0.35 * d for d in voxel_dims]
    rho = np.sqrt(
        ((gx - centers[0]) / radii[0]) ** 2
        + ((gy - centers[1]) / radii[1]) ** 2
        + ((gz - centers[2]) / radii[2]) ** 2
    )
    # soft occupancy edge: full inside, linear falloff over a ~30% shell
    voxels = np.clip((1.3 - rho) / 0.3, 0.0, 1.0)
    return mask, voxels, tokens_from_voxels(voxels)


def checkerboard(
    mask_dims: tuple[int, int] = (64, 64),
    voxel_dims: tuple[int, int, int] = (32, 32, 32),
) -> tuple[np.ndarray, np.ndarray, TokenSet]:
    h, w = mask_dims
    yy, xx = np.mgrid[0:h, 0:w]
    mask = ((yy % 2 == 0) & (xx % 2 == 0)).astype(np.float64)

    gx, gy, gz = np.mgrid[0 : voxel_dims[0], 0 : voxel_dims[1], 0 : voxel_dims[2]]
    voxels = ((gx % 2 == 0) & (gy % 2 == 0) & (gz % 2 == 0)).astype(np.float64)
    return mask, voxels, tokens_from_voxels(voxels)


FIXTURES = {
    "smooth-ellipsoid": smooth_ellipsoid,
    "checkerboard": checkerboard,
}
