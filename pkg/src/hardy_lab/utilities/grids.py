from __future__ import annotations

import numpy as np

EIGHTH_OCTAVE = 2.0 ** (1.0 / 8.0)
QUARTER_OCTAVE = 2.0 ** (1.0 / 4.0)
GRID_RTOL = 1e-9


def geometric_grid(top: float, bottom: float, ratio: float = EIGHTH_OCTAVE) -> np.ndarray:
    """
    Geometric grid anchored at `top`, descending by `ratio` while the value
    stays >= `bottom`. Returned in increasing order.
    """
    if top <= 0 or ratio <= 1:
        raise ValueError(f"Invalid geometric grid (top={top}, ratio={ratio})")
    if bottom > top:
        return np.array([top], dtype=float)

    n_steps = int(np.floor(np.log(top / bottom) / np.log(ratio) + GRID_RTOL))
    k = np.arange(n_steps, -1, -1, dtype=float)
    grid = top * ratio ** (-k)
    #   The lowest node may land a few ulps under `bottom`
    return np.maximum(grid, bottom)


def t_grid(resolution: float, t_min: float | None = None, top: float = 1.0) -> np.ndarray:
    """Time grid for sup-over-t computations: ratio 2^{1/8} from max(t_min, 2*resolution) to 1."""
    bottom = 2.0 * resolution
    if t_min is not None:
        bottom = max(bottom, t_min)
    return geometric_grid(top, bottom, EIGHTH_OCTAVE)


def r_grid(R: float, resolution: float) -> np.ndarray:
    """
    Radius grid for ball averages: ratio 2^{1/8} below R, plus a sub-cell
    radius so the single-point ball is always present.
    """
    radii = geometric_grid(R, resolution, EIGHTH_OCTAVE)
    return np.concatenate([[0.5 * resolution], radii])


def ahlfors_radii(resolution: float, diameter: float) -> np.ndarray:
    """Radii strictly inside (2*resolution, diameter/2) on a 2^{1/4} grid."""
    low = 2.0 * resolution
    high = 0.5 * diameter * (1.0 - GRID_RTOL)
    if low <= 0 or high <= low:
        return np.array([], dtype=float)
    n_steps = int(np.floor(np.log(high / low) / np.log(QUARTER_OCTAVE)))
    k = np.arange(1, n_steps + 1, dtype=float)
    radii = low * QUARTER_OCTAVE**k
    return radii[radii < high]
