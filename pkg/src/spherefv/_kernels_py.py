"""Vectorized numpy versions of the hot grid kernels.

These are the reference implementations; ``_ckernels`` mirrors them in
Cython and must agree to rounding.
"""

import numpy as np


def circumcenters(x, tris):
    """Circumcenters and geodesic circumradii of all triangles."""
    a = x[tris[:, 0]]
    b = x[tris[:, 1]]
    c = x[tris[:, 2]]
    n = np.cross(b - a, c - a)
    nn = np.sqrt(np.einsum("ij,ij->i", n, n))
    s = np.einsum("ij,ij->i", n, a + b + c)
    nn = np.where(s < 0.0, -nn, nn)
    q = n / nn[:, None]
    r = np.arctan2(np.linalg.norm(np.cross(q, a), axis=1), np.einsum("ij,ij->i", q, a))
    return q, r


def dual_measures(x, tris, edges, edge_tris):
    """Circumcenters, circumradii, cell areas and cell first moments.

    Cell ``i`` is the polygon of circumcenters around vertex ``i``. Its area
    is the sum of signed fan triangles ``(x_i, q_t2, q_t1)`` over incident
    edges; its moment ``int y ds`` is half the sum of arc angle times unit
    edge-plane normal over the polygon edges ``q_t2 -> q_t1``.
    """
    n = x.shape[0]
    q, r = circumcenters(x, tris)
    q1 = q[edge_tris[:, 0]]
    q2 = q[edge_tris[:, 1]]
    i = edges[:, 0]
    j = edges[:, 1]

    cr = np.cross(q2, q1)
    s = np.sqrt(np.einsum("ij,ij->i", cr, cr))
    theta = np.arctan2(s, np.einsum("ij,ij->i", q2, q1))
    w = np.where(s > 0.0, 0.5 * theta / np.where(s > 0.0, s, 1.0), 0.0)
    mvec = w[:, None] * cr
    moments = np.zeros((n, 3))
    for k in range(3):
        moments[:, k] = np.bincount(i, mvec[:, k], minlength=n) - np.bincount(j, mvec[:, k], minlength=n)

    q12 = np.einsum("ij,ij->i", q1, q2)
    xi, xj = x[i], x[j]
    trip_i = np.einsum("ij,ij->i", xi, cr)
    den_i = 1.0 + np.einsum("ij,ij->i", xi, q2) + q12 + np.einsum("ij,ij->i", q1, xi)
    trip_j = -np.einsum("ij,ij->i", xj, cr)
    den_j = 1.0 + np.einsum("ij,ij->i", xj, q1) + q12 + np.einsum("ij,ij->i", q2, xj)
    areas = (np.bincount(i, 2.0 * np.arctan2(trip_i, den_i), minlength=n)
             + np.bincount(j, 2.0 * np.arctan2(trip_j, den_j), minlength=n))
    return q, r, areas, moments


def lloyd_step(x, tris, edges, edge_tris):
    """One Lloyd update with fixed connectivity.

    Returns ``(x_new, max_move, energy)`` where ``energy`` is the quantization
    energy of the input generators, ``sum_i 2 m_a(V_i) - 2 x_i . int_Vi y ds``.
    """
    _, _, areas, moments = dual_measures(x, tris, edges, edge_tris)
    mnorm = np.sqrt(np.einsum("ij,ij->i", moments, moments))
    if np.any(mnorm == 0.0):
        raise ZeroDivisionError("centroid undefined")
    x_new = moments / mnorm[:, None]
    energy = float(np.sum(2.0 * areas - 2.0 * np.einsum("ij,ij->i", x, moments)))
    move = np.arctan2(np.linalg.norm(np.cross(x, x_new), axis=1), np.einsum("ij,ij->i", x, x_new))
    return x_new, float(move.max()), energy
