"""NumPy/SciPy implementations of the hot image kernels.

This is the fallback backend used when the compiled extension is not
available (or is disabled via ``SANDSHAPE_PURE_PYTHON=1``). Both backends
must return identical values: the kernels are integer algorithms, so
equality is exact and is enforced by the backend-equivalence tests.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

_EIGHT_CONNECTED = np.ones((3, 3), dtype=np.uint8)

# Moore neighbourhood, clockwise on screen (rows grow downward), from West.
_CW = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
# Same ring counterclockwise, also from West.
_CCW = ((0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1))
_CCW_INDEX = {d: i for i, d in enumerate(_CCW)}


def joint_hist(codes_a: np.ndarray, codes_b: np.ndarray, n_bins: int) -> np.ndarray:
    """Joint count table of two equally long bin-code vectors."""
    flat = codes_a.astype(np.int64) * n_bins + codes_b.astype(np.int64)
    counts = np.bincount(flat, minlength=n_bins * n_bins)
    return counts.reshape(n_bins, n_bins)


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connected component labelling; labels are 1..n, 0 is background."""
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    return labels.astype(np.int32), int(n)


def trace_border(mask: np.ndarray, start_r: int, start_c: int) -> np.ndarray:
    """Follow the outer border of the region containing (start_r, start_c).

    Single-border variant of the Suzuki-Abe following scheme. ``start`` must
    be the topmost-then-leftmost pixel of its 8-connected region (so its West
    neighbour is background). Thin appendages are walked down and back, so a
    pixel may appear more than once. Returns an (M, 2) array of (row, col)
    pixels forming a closed walk (the final return to the start is implied).
    """
    h, w = mask.shape

    # clockwise scan around the start, beginning at its West neighbour
    first = None
    for dr, dc in _CW:
        r, c = start_r + dr, start_c + dc
        if 0 <= r < h and 0 <= c < w and mask[r, c]:
            first = (r, c)
            break
    if first is None:
        return np.array([(start_r, start_c)], dtype=np.int64)

    border = []
    prev = first          # (i2, j2): pixel the scan pivots from
    cur = (start_r, start_c)  # (i3, j3): current border pixel
    max_steps = 8 * int(mask.sum()) + 8
    for _ in range(max_steps):
        # counterclockwise scan around cur, from the element after prev
        pivot = _CCW_INDEX[(prev[0] - cur[0], prev[1] - cur[1])]
        nxt = None
        for k in range(1, 9):
            dr, dc = _CCW[(pivot + k) % 8]
            r, c = cur[0] + dr, cur[1] + dc
            if 0 <= r < h and 0 <= c < w and mask[r, c]:
                nxt = (r, c)
                break
        border.append(cur)
        if nxt == (start_r, start_c) and cur == first:
            break
        prev = cur
        cur = nxt
    return np.array(border, dtype=np.int64)
