"""The adaptive loop SOLVE -> ESTIMATE -> MARK -> REFINE with one Kacanov step per mesh."""
import csv
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from types import SimpleNamespace
from typing import Optional

import numpy as np

from .assembly import energy
from .estimator import estimate
from .linsolve import DEFAULT_TOL, SolverError, kacanov_step
from .marking import MarkingRule, mark
from .mesh import bisect, dump_mesh
from .problems import catalog
from .space import dump_p1, h1_seminorm, h1_seminorm_error, prolong, zero

log = logging.getLogger(__name__)

CSV_COLUMNS = ("k", "dofs", "elements", "eta", "energy", "h1_error", "succ_diff", "solve_iters", "max_u")


@dataclass
class RunConfig:
    problem: str = "ex1"
    mark: MarkingRule = field(default_factory=lambda: MarkingRule("maximum", 0.7))
    n_bisect: int = 2
    eta_tol: float = 1e-6
    max_dofs: int = 500_000
    max_iterations: int = 200
    quad_order: int = 5
    cg_tol: float = DEFAULT_TOL
    homogeneous: bool = False
    out_dir: Optional[Path] = None
    dump_iterations: tuple = ()

    def __post_init__(self):
        if isinstance(self.mark, str):
            self.mark = MarkingRule.parse(self.mark)
        for name in ("eta_tol", "cg_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("n_bisect", "max_dofs", "max_iterations", "quad_order"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    dofs: int
    elements: int
    eta: float
    energy: float
    h1_error: Optional[float]
    succ_diff: float
    solve_iters: int
    max_u: float


class RunAborted(RuntimeError):
    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


def _format(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


class _CsvSink:
    def __init__(self, path):
        self.fh = open(path, "w", newline="")
        self.fh.write(",".join(CSV_COLUMNS) + "\n")

    def write(self, rec):
        self.fh.write(",".join(_format(getattr(rec, c)) for c in CSV_COLUMNS) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()


def run_adaptive(config, callback=None):
    """Run the adaptive loop and return the list of :class:`IterationRecord`.

    ``callback(state)`` is invoked after every ESTIMATE/MARK step with a
    namespace holding ``mesh``, ``u_prev``, ``u``, ``est``, ``marked``,
    ``record`` and ``problem``.  When ``config.out_dir`` is set, rows are
    appended to ``records.csv`` as they are produced, so a solver failure
    leaves the completed iterations on disk.
    """
    problem = catalog(config.problem, homogeneous=config.homogeneous)
    mesh = problem.make_mesh()
    u_prev = zero(mesh)
    records = []
    sink = None
    out = None
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sink = _CsvSink(out / "records.csv")
    try:
        k = 1
        while True:
            try:
                u, report = kacanov_step(mesh, u_prev, problem, config.cg_tol, config.quad_order,
                                         initial_guess=u_prev)
            except SolverError as exc:
                raise RunAborted(f"iteration {k}: {exc}", records) from exc
            est = estimate(mesh, u_prev, u, problem, config.quad_order)
            err = None
            if problem.exact_grad is not None:
                err = h1_seminorm_error(u, problem.exact_grad, config.quad_order)
            rec = IterationRecord(
                k=k, dofs=mesh.n_free, elements=mesh.n_elements, eta=est.global_,
                energy=energy(mesh, u, problem, config.quad_order), h1_error=err,
                succ_diff=h1_seminorm(u - u_prev), solve_iters=report.iterations,
                max_u=float(np.max(u.coeffs)))
            records.append(rec)
            if sink:
                sink.write(rec)
            log.info("k=%d dofs=%d eta=%.3e err=%s", k, rec.dofs, rec.eta,
                     "-" if err is None else f"{err:.3e}")
            if out is not None and k in config.dump_iterations:
                dump_mesh(mesh, out / f"mesh_{k:03d}.txt")
                dump_p1(u, out / f"u_{k:03d}.txt")

            done = (rec.eta <= config.eta_tol or rec.dofs > config.max_dofs
                    or k >= config.max_iterations)
            marked = None if done else mark(est.eta, config.mark)
            if callback is not None:
                callback(SimpleNamespace(mesh=mesh, u_prev=u_prev, u=u, est=est, marked=marked,
                                         record=rec, problem=problem, k=k))
            if done:
                return records
            new_mesh, rmap = bisect(mesh, marked, config.n_bisect)
            u_prev = prolong(u, mesh, new_mesh, rmap)
            mesh = new_mesh
            k += 1
    finally:
        if sink:
            sink.close()


# -- CSV -----------------------------------------------------------------

_INT_COLUMNS = {"k", "dofs", "elements", "solve_iters"}


class MalformedCsv(ValueError):
    pass


def write_csv(records, path):
    sink = _CsvSink(path)
    try:
        for r in records:
            sink.write(r)
    finally:
        sink.close()


def read_csv(path):
    records = []
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames[:8]) != CSV_COLUMNS[:8]:
                raise MalformedCsv(f"unexpected header {reader.fieldnames}")
            for row in reader:
                kw = {}
                for name in CSV_COLUMNS:
                    raw = row.get(name)
                    if raw is None or raw == "":
                        if name in ("h1_error", "max_u"):
                            kw[name] = None
                            continue
                        raise MalformedCsv(f"missing value for {name!r}")
                    kw[name] = int(raw) if name in _INT_COLUMNS else float(raw)
                records.append(IterationRecord(**kw))
    except (ValueError, TypeError) as exc:
        if isinstance(exc, MalformedCsv):
            raise
        raise MalformedCsv(str(exc)) from None
    return records


# -- rates ---------------------------------------------------------------

def fit_rate(records, window=None, last_decade=False, column="h1_error"):
    """Least-squares slope of ``log(column)`` against ``log(dofs)``.

    ``window`` keeps only the last ``window`` usable records; ``last_decade``
    keeps those with ``dofs >= max(dofs) / 10``.
    """
    pts = [(r.dofs, getattr(r, column)) for r in records]
    pts = [(d, e) for d, e in pts if d > 0 and e is not None and e > 0 and math.isfinite(e)]
    if last_decade and pts:
        top = max(d for d, _ in pts)
        pts = [(d, e) for d, e in pts if d >= top / 10.0]
    if window is not None:
        pts = pts[-int(window):]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 records with positive dofs and {column}, got {len(pts)}")
    x = np.log([d for d, _ in pts])
    y = np.log([e for _, e in pts])
    if np.ptp(x) == 0.0:
        raise ValueError("all records have the same number of dofs")
    return float(np.polyfit(x, y, 1)[0])
