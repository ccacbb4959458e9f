"""Invariant checks on small instances, shared by ``kacanov-afem audit`` and the tests.

Every check yields :class:`CheckResult` rows; ``status`` is ``PASS``,
``FAIL`` or ``SKIP`` (hypothesis of the property not met by the subject).
"""
from dataclasses import dataclass

import numpy as np

from .assembly import apply_form, assemble, energy, load_functional, potential
from .driver import RunConfig, run_adaptive
from .mesh import (audit_shape_regularity, barycentric, bisect, check_conformity,
                   closure_is_compatible, make_lshape_mesh, make_square_mesh, uniform_refine)
from .problems import PROBLEM_NAMES, catalog, exact_grad
from .space import P1Function, prolong

PASS, FAIL, SKIP = "PASS", "FAIL", "SKIP"


@dataclass(frozen=True)
class CheckResult:
    check: str
    subject: str
    status: str
    detail: str = ""

    def line(self):
        return f"{self.status:4s}  {self.check}[{self.subject}]  {self.detail}".rstrip()


def _random_adaptive_meshes(mesh, rng, steps, max_elements=1000):
    """Sequence of meshes obtained by refining random subsets."""
    out = [(mesh, None)]
    for _ in range(steps):
        m = out[-1][0]
        k = max(1, int(rng.integers(1, max(2, m.n_elements // 4))))
        marked = rng.choice(m.n_elements, size=k, replace=False)
        new, rmap = bisect(m, marked, 1)
        if new.n_elements > max_elements:
            break
        out.append((new, rmap))
    return out


def check_mesh(samples=5, seed=0):
    """Conformity, area, nestedness, shape regularity, labeling compatibility."""
    rng = np.random.default_rng(seed)
    results = []
    for name, make in (("lshape", make_lshape_mesh), ("square", make_square_mesh)):
        base = make()
        results.append(CheckResult("closure-compatible", name,
                                   PASS if closure_is_compatible(base) else FAIL))
        area0 = base.total_area()
        kappa0 = audit_shape_regularity(base)
        worst = {"conformity": None, "area": 0.0, "nested": 0.0, "kappa": 0.0}
        for _ in range(samples):
            seq = _random_adaptive_meshes(base, rng, steps=25)
            for (coarse, _), (fine, rmap) in zip(seq, seq[1:]):
                probs = check_conformity(fine)
                if probs and worst["conformity"] is None:
                    worst["conformity"] = probs[0]
                worst["area"] = max(worst["area"], abs(fine.total_area() - area0) / area0)
                worst["kappa"] = max(worst["kappa"], audit_shape_regularity(fine) / kappa0)
                lam = barycentric(coarse, fine.points[fine.elements].reshape(-1, 2),
                                  np.repeat(rmap.parent, 3))
                worst["nested"] = max(worst["nested"], float(-lam.min()))
        results.append(CheckResult("conformity", name, FAIL if worst["conformity"] else PASS,
                                   worst["conformity"] or ""))
        results.append(CheckResult("area", name, PASS if worst["area"] <= 1e-12 else FAIL,
                                   f"max relative deviation {worst['area']:.2e}"))
        results.append(CheckResult("nestedness", name, PASS if worst["nested"] <= 1e-12 else FAIL,
                                   f"min barycentric {-worst['nested']:.2e}"))
        results.append(CheckResult("shape-regularity", name, PASS if worst["kappa"] <= 2.0 else FAIL,
                                   f"max kappa / initial kappa {worst['kappa']:.6f}"))
    return results


def check_prolongation(samples=5, seed=0, points_per_element=100):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        mesh = make_lshape_mesh()
        for _ in range(3):
            mesh, _ = uniform_refine(mesh)
        u = P1Function(mesh, rng.standard_normal(mesh.n_vertices))
        marked = rng.choice(mesh.n_elements, size=mesh.n_elements // 5, replace=False)
        fine, rmap = bisect(mesh, marked, int(rng.integers(1, 3)))
        uf = prolong(u, mesh, fine, rmap)
        elems = np.repeat(np.arange(fine.n_elements), points_per_element)
        lam = rng.dirichlet(np.ones(3), size=len(elems))
        pts = np.einsum("ni,nid->nd", lam, fine.points[fine.elements[elems]])
        worst = max(worst, float(np.max(np.abs(u.evaluate(pts, rmap.parent[elems])
                                                 - uf.evaluate(pts, elems)))))
    return [CheckResult("prolongation", "lshape", PASS if worst < 1e-12 else FAIL,
                        f"max pointwise deviation {worst:.2e}")]


def _random_function(mesh, rng):
    scale = 10.0 ** rng.uniform(-2, 1)
    return P1Function(mesh, scale * rng.uniform(-1, 1, mesh.n_vertices))


def check_key_property(samples=500, seed=0, problems=("ex1", "ex2", "ex3", "ex4")):
    """``J(v) - J(w) <= (a(w; v, v) - a(w; w, w)) / 2`` for decreasing alpha."""
    rng = np.random.default_rng(seed)
    mesh, _ = uniform_refine(make_lshape_mesh(), 5)  # at least 200 elements
    while mesh.n_elements < 200:
        mesh, _ = bisect(mesh, [0])
    results = []
    for name in problems:
        prob = catalog(name)
        if not prob.is_decreasing:
            results.append(CheckResult("lemma-key-property", name, SKIP,
                                       "alpha is increasing; inequality not claimed"))
            continue
        worst, example = -np.inf, None
        for _ in range(samples):
            v, w = _random_function(mesh, rng), _random_function(mesh, rng)
            lhs = potential(mesh, v, prob) - potential(mesh, w, prob)
            rhs = 0.5 * (apply_form(mesh, w, v, v, prob) - apply_form(mesh, w, w, w, prob))
            if lhs - rhs > worst:
                worst, example = lhs - rhs, (lhs, rhs)
        ok = worst <= 1e-10
        results.append(CheckResult(
            "lemma-key-property", name, PASS if ok else FAIL,
            f"{samples} pairs, max violation {worst:.3e}" + ("" if ok else f" (lhs={example[0]:.6e}, rhs={example[1]:.6e})")))
    return results


def check_energy_monotonicity(iterations=25, problems=("ex1", "ex2", "ex4", "curvature"),
                              mark="max:0.7"):
    """Energy of the adaptive iterates never increases (decreasing alpha, g = 0).

    ``energy-step`` compares ``F(u_k)`` with ``F(u_{k-1})`` on the mesh where
    both live, i.e. with the same discrete load functional.
    ``energy-monotonicity`` checks the recorded sequence, each value taken on
    its own mesh; it is skipped for discontinuous ``f``, where re-quadrature
    of the load on every mesh moves the energy by more than one step gains.
    """
    results = []
    for name in problems:
        prob = catalog(name, homogeneous=True)
        if not prob.is_decreasing:
            results.append(CheckResult("energy-monotonicity", name, SKIP, "alpha is increasing"))
            continue
        recorded = [0.0]  # F(u_0) with u_0 = 0
        steps = []

        def collect(s):
            recorded.append(s.record.energy)
            before = energy(s.mesh, s.u_prev, s.problem)
            steps.append(s.record.energy - before - 1e-10 * (1.0 + abs(before)))

        run_adaptive(RunConfig(name, mark, max_iterations=iterations, homogeneous=True), callback=collect)
        worst_step = max(steps)
        results.append(CheckResult(
            "energy-step", f"{name}-hom", PASS if worst_step <= 0 else FAIL,
            f"{len(steps)} steps, worst increase beyond slack {worst_step:.3e}"))
        if prob.domain != "lshape":
            results.append(CheckResult(
                "energy-monotonicity", f"{name}-hom", SKIP,
                "discontinuous f: recorded energies use a different load quadrature per mesh"))
            continue
        worst, at = -np.inf, None
        for k in range(1, len(recorded)):
            slack = recorded[k] - recorded[k - 1] - 1e-10 * (1.0 + abs(recorded[k - 1]))
            if slack > worst:
                worst, at = slack, k
        results.append(CheckResult(
            "energy-monotonicity", f"{name}-hom", PASS if worst <= 0 else FAIL,
            f"{len(recorded) - 1} iterations, worst increase beyond slack {worst:.3e} at k={at}"))
    return results


def galerkin_defect(mesh, u_prev, u, prob, rng, samples=20, quad_order=5):
    """Largest ``|a(u_prev; u, v) - L(v)| / (||A|| ||u|| + ||L||)`` over random unit ``v``."""
    system = assemble(mesh, u_prev, prob, quad_order)
    free = system.dofs.free
    if not len(free):
        return 0.0
    scale = (abs(system.full_matrix).sum(axis=1).max() * np.linalg.norm(u.coeffs)
             + np.linalg.norm(system.full_load))
    worst = 0.0
    for _ in range(samples):
        c = np.zeros(mesh.n_vertices)
        c[free] = rng.standard_normal(len(free))
        c /= np.linalg.norm(c)
        v = P1Function(mesh, c)
        r = apply_form(mesh, u_prev, u, v, prob) - load_functional(mesh, v, prob, quad_order)
        worst = max(worst, abs(r) / scale)
    return float(worst)


def check_galerkin(iterations=12, samples=20, seed=0, problems=("ex1", "curvature")):
    rng = np.random.default_rng(seed)
    results = []
    for name in problems:
        defects = []
        run_adaptive(RunConfig(name, "max:0.7", max_iterations=iterations),
                     callback=lambda s: defects.append(
                         galerkin_defect(s.mesh, s.u_prev, s.u, s.problem, rng, samples)))
        worst = max(defects)
        results.append(CheckResult("galerkin-orthogonality", name, PASS if worst <= 1e-8 else FAIL,
                                   f"{len(defects)} steps x {samples} test functions, max defect {worst:.2e}"))
    return results


def _fd_flux_divergence(prob, x, y, h=1e-5):
    def flux(px, py):
        gx, gy = exact_grad(px, py)
        a = prob.alpha(gx * gx + gy * gy)
        return a * gx, a * gy
    fxp, _ = flux(x + h, y)
    fxm, _ = flux(x - h, y)
    _, fyp = flux(x, y + h)
    _, fym = flux(x, y - h)
    return -((fxp - fxm) + (fyp - fym)) / (2.0 * h)


def random_lshape_points(rng, count, r_min=0.1, margin=1e-3):
    """Interior points of the L-shape away from the corner and the boundary."""
    pts = []
    while len(pts) < count:
        x, y = rng.uniform(-1 + margin, 1 - margin, 2)
        if (x > -margin and y < margin) or np.hypot(x, y) < r_min:
            continue
        pts.append((x, y))
    return np.array(pts)


def check_problems(samples=100, seed=0):
    """Primitive, derivative and manufactured right-hand side against finite differences."""
    rng = np.random.default_rng(seed)
    results = []
    for name in PROBLEM_NAMES:
        prob = catalog(name)
        tau = 10.0 ** rng.uniform(-2, 2, samples)
        h = 1e-5 * tau
        fd_prim = (prob.primitive(tau + h) - prob.primitive(tau - h)) / (2 * h)
        e1 = float(np.max(np.abs(fd_prim - prob.alpha(tau)) / np.abs(prob.alpha(tau))))
        fd_alpha = (prob.alpha(tau + h) - prob.alpha(tau - h)) / (2 * h)
        e2 = float(np.max(np.abs(fd_alpha - prob.d_alpha(tau)) / np.maximum(np.abs(prob.d_alpha(tau)), 1e-3)))
        ok = e1 <= 1e-6 and e2 <= 1e-6
        results.append(CheckResult("problem-consistency", name, PASS if ok else FAIL,
                                   f"primitive' vs alpha {e1:.1e}, alpha' vs FD {e2:.1e}"))
        if prob.exact is not None:
            pts = random_lshape_points(rng, samples)
            fd = _fd_flux_divergence(prob, pts[:, 0], pts[:, 1])
            f = prob.f(pts[:, 0], pts[:, 1])
            err = float(np.max(np.abs(fd - f) / np.maximum(1.0, np.abs(f))))
            results.append(CheckResult("manufactured-rhs", name, PASS if err <= 1e-4 else FAIL,
                                       f"max deviation from FD flux divergence {err:.1e}"))
    return results


def ellipticity_range(prob, t_max=10.0, n=200_001):
    t = np.linspace(0.0, t_max, n)[1:]
    b = prob.ellipticity_function(t)
    return float(b.min()), float(b.max())


def check_ellipticity():
    """Scan ``alpha(t^2) + 2 t^2 alpha'(t^2)`` and compare with each problem's flag."""
    results = []
    for name in PROBLEM_NAMES:
        prob = catalog(name)
        lo, hi = ellipticity_range(prob, 10.0)
        lo_far, _ = ellipticity_range(prob, 1e3)
        holds = lo > 0 and lo_far > 1e-3
        verdict = "holds" if holds else "VIOLATED"
        expected = holds == prob.satisfies_ellipticity
        detail = f"{verdict}: range [{lo:.4f}, {hi:.4f}] on (0, 10]"
        if not holds:
            detail += " (expected, problem flagged non-elliptic)" if expected else " (unexpected)"
        results.append(CheckResult("ellipticity", name, PASS if expected else FAIL, detail))
    ex3 = catalog("ex3")
    t = np.linspace(0.0, 20.0, 2001)
    results.append(CheckResult("monotonicity", "ex3", PASS if np.all(ex3.d_alpha(t) > 0) else FAIL,
                               "alpha' > 0 on sampled t (increasing)"))
    curv = catalog("curvature")
    a = float(curv.alpha(1e8))
    results.append(CheckResult("alpha-decay", "curvature", PASS if a < 1e-3 else FAIL,
                               f"alpha(1e8) = {a:.2e}"))
    return results


CHECKS = {
    "mesh": lambda samples, seed: check_mesh(max(1, min(samples, 5)), seed),
    "prolongation": lambda samples, seed: check_prolongation(3, seed),
    "lemma-key-property": lambda samples, seed: check_key_property(samples, seed),
    "energy-monotonicity": lambda samples, seed: check_energy_monotonicity(),
    "galerkin-orthogonality": lambda samples, seed: check_galerkin(seed=seed),
    "problem-consistency": lambda samples, seed: check_problems(seed=seed),
    "ellipticity": lambda samples, seed: check_ellipticity(),
}


def run_checks(only=None, samples=500, seed=0):
    names = list(CHECKS) if not only else list(only)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown audit check(s): {', '.join(unknown)}; choose from {', '.join(CHECKS)}")
    for name in names:
        yield from CHECKS[name](samples, seed)

