"""Seeds for complex roots from marching-squares zero contours.

The zero-level lines of Re f and Im f of an analytic f only meet at zeros
of f.  Both families of lines are traced cell by cell with linear
interpolation along cell edges, and every pair of segments that cross
inside a cell (with a small tolerance, so a zero sitting on a cell edge is
not lost) yields a seed.
"""

from __future__ import annotations

import numpy as np

NODE_ZERO_RATIO = 1e-12

# corner order: (0,0) (1,0) (1,1) (0,1); edge e joins corner e and e+1
_CORNERS = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


def _cell_segments(v):
    """Zero-level segments of bilinear data with corner values ``v``."""
    pts = []
    for e in range(4):
        v0, v1 = v[e], v[(e + 1) % 4]
        if (v0 > 0) != (v1 > 0):
            s = v0 / (v0 - v1)
            pts.append(_CORNERS[e] + s * (_CORNERS[(e + 1) % 4] - _CORNERS[e]))
    if len(pts) == 2:
        return [(pts[0], pts[1])]
    if len(pts) == 4:
        # saddle: if the center shares corner 0's sign, corners 1 and 3 are cut off
        if (np.mean(v) > 0) == (v[0] > 0):
            return [(pts[0], pts[1]), (pts[2], pts[3])]
        return [(pts[0], pts[3]), (pts[1], pts[2])]
    return []


def _intersect(p, q, slack):
    (a, b), (c, d) = p, q
    r, s = b - a, d - c
    den = r[0] * s[1] - r[1] * s[0]
    if abs(den) < 1e-14:
        return None
    w = c - a
    u = (w[0] * s[1] - w[1] * s[0]) / den
    v = (w[0] * r[1] - w[1] * r[0]) / den
    if -slack <= u <= 1 + slack and -slack <= v <= 1 + slack:
        return a + u * r
    return None


def zero_crossing_seeds(x, y, values, *, slack: float = 0.25) -> np.ndarray:
    """Approximate zeros of a complex field sampled on a rectangular grid.

    Parameters
    ----------
    x, y : 1-D arrays
        Grid coordinates; ``values[j, i]`` is the field at ``x[i] + 1j*y[j]``.
    values : complex array, shape (len(y), len(x))
        Only signs and relative sizes matter, so any positive rescaling of
        the field (e.g. ``f/|f|``) gives the same seeds.
    slack : float
        Segments may be extended by this fraction of their length.

    Returns
    -------
    Complex array of seed points ``x + 1j*y``.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    re, im = np.real(values), np.imag(values)
    # a zero sitting on a node (to roundoff against its neighbours) is a seed
    # by itself; elsewhere an exact zero in one component would give
    # zero-length segments
    mag = np.abs(values)
    padded = np.pad(mag, 1, constant_values=0.0)
    neighbours = np.maximum.reduce([padded[:-2, 1:-1], padded[2:, 1:-1],
                                    padded[1:-1, :-2], padded[1:-1, 2:]])
    at_node = mag <= NODE_ZERO_RATIO * neighbours
    on_node = [complex(x[i], y[j]) for j, i in np.argwhere(at_node)]
    tiny = np.finfo(float).tiny
    re, im = np.where(re == 0, tiny, re), np.where(im == 0, tiny, im)

    def changes(f):
        pos = f > 0
        corners = [pos[:-1, :-1], pos[:-1, 1:], pos[1:, 1:], pos[1:, :-1]]
        return np.logical_or.reduce([c != corners[0] for c in corners[1:]])

    candidates = np.argwhere(changes(re) & changes(im))
    seeds = on_node
    for j, i in candidates:
        cell = lambda f: np.array([f[j, i], f[j, i + 1], f[j + 1, i + 1], f[j + 1, i]])
        hx, hy = x[i + 1] - x[i], y[j + 1] - y[j]
        for sr in _cell_segments(cell(re)):
            for si in _cell_segments(cell(im)):
                p = _intersect(sr, si, slack)
                if p is not None:
                    seeds.append(complex(x[i] + p[0] * hx, y[j] + p[1] * hy))
    return np.array(seeds, dtype=complex)


def dedupe(points, tol: float) -> list[int]:
    """Indices of points kept after merging neighbours closer than ``tol``
    (relative to max(1, |point|))."""
    kept: list[int] = []
    for n, z in enumerate(points):
        if all(abs(z - points[m]) > tol * max(1.0, abs(z)) for m in kept):
            kept.append(n)
    return kept
