"""Benchmark problems ``-div(alpha(|grad u|^2) grad u) = f``, ``u = g`` on the boundary.

The four L-shape examples share the singular solution
``u = r^(2/3) sin(2 phi / 3)`` with ``phi`` in ``[0, 3 pi / 2]`` measured from
the positive x-axis; the notch is the fourth quadrant.  Since ``u`` is
harmonic and ``|grad u|^2 = (4/9) r^(-2/3)`` is radial,

    f = -alpha'(q) dq/dr du/dr = alpha'(q) (16/81) r^(-2) sin(2 phi / 3).
"""
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .mesh import make_lshape_mesh, make_square_mesh

PROBLEM_NAMES = ("ex1", "ex2", "ex3", "ex4", "curvature", "poisson")


class UnknownProblem(KeyError):
    pass


@dataclass(frozen=True)
class Problem:
    name: str
    alpha: Callable
    d_alpha: Callable
    primitive: Optional[Callable]
    f: Callable
    g: Callable
    domain: str
    exact: Optional[Callable] = None
    exact_grad: Optional[Callable] = None
    c_a: Optional[float] = None
    C_a: Optional[float] = None
    satisfies_ellipticity: bool = True
    is_decreasing: bool = True
    homogeneous: bool = False

    def make_mesh(self):
        return {"lshape": make_lshape_mesh, "square": make_square_mesh}[self.domain]()

    def ellipticity_function(self, t):
        """``alpha(t^2) + 2 t^2 alpha'(t^2)``; must stay in ``[c, C]`` with ``c > 0``."""
        s = np.asarray(t, float) ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            # s alpha'(s) -> 0 as s -> 0 even where alpha' is singular at 0
            slope = np.where(s > 0, s * self.d_alpha(np.where(s > 0, s, 1.0)), 0.0)
        return self.alpha(s) + 2.0 * slope


# -- the manufactured L-shape solution ---------------------------------

def _polar(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return np.hypot(x, y), np.mod(np.arctan2(y, x), 2.0 * np.pi)


def exact_u(x, y):
    r, phi = _polar(x, y)
    return r ** (2.0 / 3.0) * np.sin(2.0 * phi / 3.0)


def exact_grad(x, y):
    r, phi = _polar(x, y)
    with np.errstate(divide="ignore"):
        scale = (2.0 / 3.0) * r ** (-1.0 / 3.0)
    return -scale * np.sin(phi / 3.0), scale * np.cos(phi / 3.0)


def exact_polar(point):
    """``(u, grad)`` at a point of the closed L-shape; ``grad`` is None at the corner."""
    x, y = point
    if x == 0.0 and y == 0.0:
        return 0.0, None
    gx, gy = exact_grad(x, y)
    return float(exact_u(x, y)), np.array([float(gx), float(gy)])


def manufactured_f(alpha_prime, x, y):
    """Right-hand side reproducing the singular solution for a given ``alpha'``."""
    r, phi = _polar(x, y)
    if np.any(r < 1e-14):
        raise ValueError("manufactured right-hand side is singular at the re-entrant corner")
    q = (4.0 / 9.0) * r ** (-2.0 / 3.0)
    return alpha_prime(q) * (16.0 / 81.0) * np.sin(2.0 * phi / 3.0) / r ** 2


# -- coefficient functions ---------------------------------------------

def _ex1():
    return (lambda t: 1.0 / (1.0 + t) + 0.5,
            lambda t: -1.0 / (1.0 + t) ** 2,
            lambda s: np.log1p(s) + 0.5 * s)


def _ex2():
    return (lambda t: 1.0 / (1.0 + t) + 0.1,
            lambda t: -1.0 / (1.0 + t) ** 2,
            lambda s: np.log1p(s) + 0.1 * s)


def _ex3():
    return (lambda t: 1.0 - 0.5 * np.exp(-1.5 * t),
            lambda t: 0.75 * np.exp(-1.5 * t),
            lambda s: np.exp(-1.5 * s) / 3.0 + s - 1.0 / 3.0)


def _ex4_dalpha(t):
    t = np.asarray(t, float)
    st = np.sqrt(t)
    with np.errstate(divide="ignore"):
        return -1.0 / (2.0 * st * (1.0 + st) ** 2)


def _ex4():
    return (lambda t: 2.0 - np.sqrt(t) / (1.0 + np.sqrt(t)),
            _ex4_dalpha,
            lambda s: s + 2.0 * np.sqrt(s) - 2.0 * np.log1p(np.sqrt(s)))


def _curvature():
    return (lambda t: 1.0 / np.sqrt(1.0 + t),
            lambda t: -0.5 * (1.0 + t) ** -1.5,
            lambda s: 2.0 * (np.sqrt(1.0 + s) - 1.0))


def _constant(c):
    return (lambda t: np.full(np.shape(t), c, dtype=float),
            lambda t: np.zeros(np.shape(t)),
            lambda s: c * np.asarray(s, float))


def curvature_rhs(x, y):
    r = np.hypot(np.asarray(x, float), np.asarray(y, float))
    return np.where(r <= 1.0 / 3.0, 5.0, np.where(r <= 2.0 / 3.0, -3.0, 0.0))


def _zero(x, y):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)


def _one(x, y):
    return np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)


# name: (coefficients, c_a = inf alpha, C_a = sup alpha, elliptic, decreasing)
_LSHAPE = {
    "ex1": (_ex1, 0.5, 1.5, True, True),
    "ex2": (_ex2, 0.1, 1.1, False, True),
    "ex3": (_ex3, 0.5, 1.0, True, False),
    "ex4": (_ex4, 1.0, 2.0, True, True),
}


def catalog(name, homogeneous=False):
    """Return the named benchmark problem.

    With ``homogeneous=True`` the Dirichlet data is replaced by zero (same
    ``f``); the exact solution is then unknown and dropped.
    """
    if name in _LSHAPE:
        coeffs, c_a, C_a, elliptic, decreasing = _LSHAPE[name]
        alpha, d_alpha, prim = coeffs()

        def f(x, y, _d=d_alpha):
            return manufactured_f(_d, x, y)

        prob = Problem(name, alpha, d_alpha, prim, f, exact_u, "lshape",
                       exact_u, exact_grad, c_a, C_a, elliptic, decreasing)
    elif name == "curvature":
        alpha, d_alpha, prim = _curvature()
        prob = Problem(name, alpha, d_alpha, prim, curvature_rhs, _zero, "square",
                       c_a=None, C_a=1.0, satisfies_ellipticity=False, is_decreasing=True,
                       homogeneous=True)
    elif name == "poisson":
        alpha, d_alpha, prim = _constant(1.0)
        prob = Problem(name, alpha, d_alpha, prim, _one, _zero, "square",
                       c_a=1.0, C_a=1.0, homogeneous=True)
    else:
        raise UnknownProblem(f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}")
    if homogeneous and not prob.homogeneous:
        prob = replace(prob, g=_zero, exact=None, exact_grad=None, homogeneous=True)
    return prob
