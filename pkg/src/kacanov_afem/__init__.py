"""Adaptive P1 finite elements for quasi-linear elliptic problems with one
Kacanov linearisation step per mesh."""
from .driver import IterationRecord, RunConfig, fit_rate, read_csv, run_adaptive, write_csv
from .linsolve import kacanov_step
from .marking import MarkingRule, mark
from .mesh import Mesh, bisect, make_lshape_mesh, make_square_mesh, uniform_refine
from .problems import PROBLEM_NAMES, Problem, catalog
from .space import P1Function

__version__ = "0.1.0"

__all__ = [
    "IterationRecord", "MarkingRule", "Mesh", "P1Function", "PROBLEM_NAMES", "Problem",
    "RunConfig", "bisect", "catalog", "fit_rate", "kacanov_step", "make_lshape_mesh",
    "make_square_mesh", "mark", "read_csv", "run_adaptive", "uniform_refine", "write_csv",
]
