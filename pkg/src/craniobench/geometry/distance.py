"""Exact closest-point-on-triangle kernels (vectorized)."""

from __future__ import annotations

import numpy as np


def _dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    if u.ndim == 2 and v.ndim == 2:
        return np.einsum("ij,ij->i", u, v)
    return np.einsum("...i,...i->...", u, v)


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=np.abs(den) > 1e-300)
    return np.clip(out, 0.0, 1.0)


def closest_point_on_triangles(p: np.ndarray, a: np.ndarray, b: np.ndarray,
                               c: np.ndarray) -> np.ndarray:
    """Closest point to p on triangle (a, b, c), elementwise over rows.

    Region classification follows the standard Voronoi-region walk
    (vertex / edge / face cases), fully vectorized.
    """
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    bp = p - b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    cp = p - c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    t_ab = _safe_div(d1, d1 - d3)
    t_ac = _safe_div(d2, d2 - d6)
    t_bc = _safe_div(d4 - d3, (d4 - d3) + (d5 - d6))
    denom = va + vb + vc
    v = _safe_div(vb, denom)
    w = _safe_div(vc, denom)

    cond_a = (d1 <= 0) & (d2 <= 0)
    cond_b = (d3 >= 0) & (d4 <= d3)
    cond_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    cond_c = (d6 >= 0) & (d5 <= d6)
    cond_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    cond_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)

    out = a + v[..., None] * ab + w[..., None] * ac  # face region default
    # apply in reverse priority; the first-match region must win
    for cond, q in ((cond_bc, b + t_bc[..., None] * (c - b)),
                    (cond_ac, a + t_ac[..., None] * ac),
                    (cond_c, c),
                    (cond_ab, a + t_ab[..., None] * ab),
                    (cond_b, b),
                    (cond_a, a)):
        out = np.where(cond[..., None], q, out)
    return out


def point_triangle_distances(p: np.ndarray, a: np.ndarray, b: np.ndarray,
                             c: np.ndarray) -> np.ndarray:
    q = closest_point_on_triangles(p, a, b, c)
    return np.linalg.norm(p - q, axis=-1)


def brute_force_unsigned_distances(points: np.ndarray, corners: np.ndarray,
                                   block: int = 256) -> np.ndarray:
    """Min distance from each point to any triangle by full O(V*F) scan.

    corners: (F, 3, 3). Used as the independent oracle for accelerated paths.
    """
    points = np.asarray(points, dtype=np.float64)
    corners = np.asarray(corners, dtype=np.float64)
    best = np.full(len(points), np.inf)
    for start in range(0, len(corners), block):
        tri = corners[start:start + block]
        d = point_triangle_distances(points[:, None, :], tri[None, :, 0, :],
                                     tri[None, :, 1, :], tri[None, :, 2, :])
        best = np.minimum(best, d.min(axis=1))
    return best
