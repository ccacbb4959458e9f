"""Marking strategies.  Every rule returns a set containing an element with the
largest indicator, so all of them are admissible for the adaptive loop."""
from dataclasses import dataclass

import numpy as np

KINDS = ("global", "maximum", "doerfler")
_ALIASES = {"global": "global", "max": "maximum", "maximum": "maximum",
            "doerfler": "doerfler", "dorfler": "doerfler"}


@dataclass(frozen=True)
class MarkingRule:
    kind: str
    theta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown marking kind {self.kind!r}")
        if not (0.0 < self.theta <= 1.0):
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")

    @classmethod
    def parse(cls, spec):
        """Parse ``global``, ``max:0.7`` or ``doerfler:0.5``."""
        name, _, value = spec.partition(":")
        kind = _ALIASES.get(name.strip().lower())
        if kind is None:
            raise ValueError(f"unknown marking strategy {spec!r}")
        if kind == "global":
            if value:
                raise ValueError("global marking takes no parameter")
            return cls("global")
        if not value:
            raise ValueError(f"marking strategy {name!r} needs a parameter, e.g. {name}:0.5")
        try:
            theta = float(value)
        except ValueError:
            raise ValueError(f"bad theta in marking spec {spec!r}") from None
        return cls(kind, theta)

    def __str__(self):
        return "global" if self.kind == "global" else f"{'max' if self.kind == 'maximum' else 'doerfler'}:{self.theta:g}"


def mark(eta, rule):
    """Indices of marked elements, sorted ascending.

    * global: every element;
    * maximum: ``eta_T >= theta * max eta``;
    * doerfler: the shortest prefix of the indicators sorted descending (ties
      by ascending index) whose squared sum reaches ``theta^2 * sum eta^2``.

    All-zero indicators mark the single element 0.
    """
    eta = np.asarray(getattr(eta, "eta", eta), dtype=float)
    if eta.size == 0:
        raise ValueError("cannot mark an empty set of indicators")
    if rule.kind == "global":
        return np.arange(eta.size)
    top = eta.max()
    if top <= 0.0:
        return np.array([0])
    if rule.kind == "maximum":
        return np.flatnonzero(eta >= rule.theta * top)
    order = np.argsort(-eta, kind="stable")
    mass = np.cumsum(eta[order] ** 2)
    k = int(np.searchsorted(mass, rule.theta ** 2 * mass[-1], side="left")) + 1
    return np.sort(order[:min(k, eta.size)])
