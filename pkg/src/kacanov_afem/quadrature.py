"""Quadrature rules on triangles.

Rules are returned in barycentric form: ``bary`` has shape ``(Q, 3)`` and
``weights`` sum to one, so that ``|T| * sum(w * g(x_q))`` approximates the
integral of ``g`` over a triangle ``T``.  Every node lies strictly inside
the triangle, which matters for integrands that are singular at a vertex.
"""
from functools import lru_cache

import numpy as np

_S15 = np.sqrt(15.0)


def _strang_fix_7():
    a1 = (6.0 - _S15) / 21.0
    b1 = (9.0 + 2.0 * _S15) / 21.0
    a2 = (6.0 + _S15) / 21.0
    b2 = (9.0 - 2.0 * _S15) / 21.0
    w1 = (155.0 - _S15) / 1200.0
    w2 = (155.0 + _S15) / 1200.0
    bary = np.array([
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [b1, a1, a1], [a1, b1, a1], [a1, a1, b1],
        [b2, a2, a2], [a2, b2, a2], [a2, a2, b2],
    ])
    weights = np.array([9.0 / 40.0, w1, w1, w1, w2, w2, w2])
    return bary, weights


def _collapsed_gauss(degree):
    # Duffy map of the unit square; the Jacobian (1 - s) adds one degree in s.
    n = degree // 2 + 2
    g, gw = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (g + 1.0)
    sw = 0.5 * gw
    S, T = np.meshgrid(s, s, indexing="ij")
    W = np.outer(sw, sw) * (1.0 - S)
    x = S.ravel()
    y = (T * (1.0 - S)).ravel()
    bary = np.column_stack([1.0 - x - y, x, y])
    return bary, 2.0 * W.ravel()


@lru_cache(maxsize=None)
def _rule(degree):
    if degree <= 1:
        bary, w = np.array([[1.0 / 3.0] * 3]), np.array([1.0])
    elif degree == 2:
        bary = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
        w = np.full(3, 1.0 / 3.0)
    elif degree <= 5:
        bary, w = _strang_fix_7()
    else:
        bary, w = _collapsed_gauss(degree)
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def triangle_rule(degree=5):
    """Return ``(bary, weights)`` of a rule exact for polynomials of ``degree``.

    Degrees up to 5 use classical symmetric rules (1, 3 and 7 points); higher
    degrees fall back to a collapsed Gauss-Legendre product rule.
    """
    degree = int(degree)
    if degree < 0:
        raise ValueError(f"quadrature degree must be non-negative, got {degree}")
    return _rule(degree)


def map_points(points, elements, bary):
    """Physical quadrature nodes, shape ``(M, Q, 2)``."""
    corners = points[elements]  # (M, 3, 2)
    return np.einsum("qi,mid->mqd", bary, corners)
