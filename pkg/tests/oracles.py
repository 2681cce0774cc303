"""Independent reference implementations the tests check the package against.

These deliberately use the most literal definition of each operation, not
the vectorized path the package takes.
"""
from __future__ import annotations

import math

import numpy as np

from restorelab.geometry import BinaryMask


def _shifted(a: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """out[y, x] = a[y + dy, x + dx], zero where that index leaves the mask."""
    h, w = a.shape
    out = np.zeros_like(a)
    y0, y1 = max(0, -dy), h - max(0, dy)
    x0, x1 = max(0, -dx), w - max(0, dx)
    if y0 >= y1 or x0 >= x1:
        return out
    out[y0:y1, x0:x1] = a[y0 + dy : y1 + dy, x0 + dx : x1 + dx]
    return out


def morph_bruteforce(mask: BinaryMask, kind: str, radius: int) -> BinaryMask:
    """Set-definition morphology: double loop over the square structuring
    element, OR for dilation, AND for erosion, zeros outside the mask."""
    if kind == "open":
        return morph_bruteforce(morph_bruteforce(mask, "erode", radius), "dilate", radius)
    if kind == "close":
        return morph_bruteforce(morph_bruteforce(mask, "dilate", radius), "erode", radius)

    a = mask.to_bool()
    if kind == "dilate":
        out = np.zeros_like(a)
    elif kind == "erode":
        out = np.ones_like(a)
    else:
        raise ValueError(kind)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if kind == "dilate":
                out |= _shifted(a, dy, dx)
            else:
                out &= _shifted(a, dy, dx)
    return BinaryMask.from_array(out)


def drop_bruteforce(records) -> float:
    contributions = []
    for rec in records:
        contributions.append((rec.g - rec.d) * 100.0)
    return math.fsum(contributions) / len(contributions)


def gain_bruteforce(records, method: str, class_filter: str | None = None) -> float:
    contributions = []
    for rec in records:
        if class_filter is not None and rec.true_class != class_filter:
            continue
        contributions.append((rec.r[method] - rec.d) * 100.0)
    return math.fsum(contributions) / len(contributions)


def variation_bruteforce(records, method: str, class_filter: str | None = None) -> float:
    contributions = []
    for rec in records:
        if class_filter is not None and rec.true_class != class_filter:
            continue
        contributions.append(abs(rec.r[method] - rec.g) * 100.0)
    return math.fsum(contributions) / len(contributions)
