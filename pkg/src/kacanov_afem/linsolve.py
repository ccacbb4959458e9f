"""Jacobi-preconditioned conjugate gradients and the Kacanov step built on it."""
from dataclasses import dataclass

import numpy as np

from .assembly import assemble

DEFAULT_TOL = 1e-10


class SolverError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_relative_residual: float
    converged: bool


def pcg(A, b, tol=DEFAULT_TOL, max_iter=None, x0=None):
    """Solve ``A x = b`` for SPD ``A`` until ``||b - A x|| <= tol ||b||``.

    Returns ``(x, SolveReport)``; hitting ``max_iter`` (default ``10 n``)
    yields ``converged=False`` rather than an exception.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    if max_iter is None:
        max_iter = max(10 * n, 1)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("matrix has a non-positive diagonal entry; it is not SPD")
    inv_diag = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x if x0 is not None else b.copy()
    target = tol * bnorm
    rnorm = float(np.linalg.norm(r))
    it = 0
    # restart from the true residual if the recursive one drifted
    for _ in range(4):
        if rnorm <= target or it >= max_iter:
            break
        z = inv_diag * r
        p = z.copy()
        rz = float(r @ z)
        while it < max_iter:
            Ap = A @ p
            pAp = float(p @ Ap)
            if pAp <= 0.0:
                raise SolverError("non-positive curvature in CG; matrix is not SPD")
            step = rz / pAp
            x += step * p
            r -= step * Ap
            it += 1
            if np.linalg.norm(r) <= target:
                break
            z = inv_diag * r
            rz_new = float(r @ z)
            p *= rz_new / rz
            p += z
            rz = rz_new
        r = b - A @ x
        rnorm = float(np.linalg.norm(r))
    rel = rnorm / bnorm
    return x, SolveReport(it, rel, rel <= tol)


def cg_solve(system, tol=DEFAULT_TOL, max_iter=None, x0=None):
    """CG on the free-dof system; returns ``(x, SolveReport)``."""
    return pcg(system.matrix, system.rhs, tol, max_iter, x0)


def kacanov_step(mesh, u_prev, problem, tol=DEFAULT_TOL, quad_order=5, max_iter=None,
                 initial_guess=None):
    """One Kacanov step: solve ``a(u_prev; u, v) = L(v)`` for all discrete ``v``.

    ``initial_guess`` (a P1 function on ``mesh``, typically ``u_prev``) seeds
    CG on the free dofs.  Returns ``(u_next, SolveReport)``; raises
    :class:`SolverError` if CG does not converge.
    """
    system = assemble(mesh, u_prev, problem, quad_order)
    x0 = None
    if initial_guess is not None:
        x0 = initial_guess.coeffs[system.dofs.free] - system.lift.coeffs[system.dofs.free]
    x, report = cg_solve(system, tol, max_iter, x0)
    if not report.converged:
        raise SolverError(
            f"CG stopped after {report.iterations} iterations at relative residual "
            f"{report.final_relative_residual:.3e}", report)
    return system.expand(x), report


def kacanov_iterate(mesh, u0, problem, steps, tol=DEFAULT_TOL, quad_order=5):
    """Fixed-mesh Kacanov sequence ``[u0, u1, ..., u_steps]``."""
    seq = [u0]
    for _ in range(steps):
        u, _ = kacanov_step(mesh, seq[-1], problem, tol, quad_order, initial_guess=seq[-1])
        seq.append(u)
    return seq
