"""Fixed-step integration and trajectory-level synchrony checks."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dynamics import VirtualField, check_related, pullback_field, realize
from .graphs import GraphMorphism, is_etale
from .groupoid import NotEtale
from .phase import DimensionMismatch, apply, pushforward


class NonFiniteState(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"state became non-finite at step {step}")
        self.step = step


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray     # (steps + 1, dim)
    labels: tuple[str, ...] = ()

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def integrate_rk4(f: Callable[[np.ndarray], np.ndarray], x0: Sequence[float], dt: float, steps: int,
                  labels: Sequence[str] = ()) -> Trajectory:
    """Classical fixed-step Runge-Kutta for an autonomous field."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.array(x0, dtype=float)
    dim = getattr(f, "dim", None)
    if x.ndim != 1 or (dim is not None and x.shape[0] != dim):
        raise DimensionMismatch(f"initial state has shape {x.shape}, field dimension is {dim}")
    out = np.empty((steps + 1, x.shape[0]))
    out[0] = x
    h2 = dt / 2
    with np.errstate(all="ignore"):
        for n in range(steps):
            k1 = f(x)
            k2 = f(x + h2 * k1)
            k3 = f(x + h2 * k2)
            k4 = f(x + dt * k3)
            x = x + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(n + 1)
            out[n + 1] = x
    return Trajectory(np.arange(steps + 1) * dt, out, tuple(labels))


@dataclass(frozen=True)
class SyncReport:
    morphism: str
    max_point_defect: float
    max_flow_defect: float
    dt: float
    steps: int
    seed: int
    tol: float
    defect_by_step: np.ndarray = field(repr=False, default=None)

    @property
    def ok(self) -> bool:
        return self.max_flow_defect <= self.tol

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {"morphism": self.morphism, "pass": self.ok,
                "max_point_defect": self.max_point_defect, "max_flow_defect": self.max_flow_defect,
                "dt": self.dt, "steps": self.steps, "seed": self.seed, "tol": self.tol}


def flow_sync_check(phi: GraphMorphism, w: VirtualField, x0: Sequence[float], dt: float, steps: int,
                    tol: float = 1e-6, seed: int = 42, samples: int = 64, name: str = "phi") -> SyncReport:
    """Integrate on both graphs and compare ``Pphi(y'(t))`` with ``y(t)`` on the whole grid.

    ``x0`` is the initial state on the codomain; the domain starts at its image.
    """
    cert = is_etale(phi)
    if not cert:
        raise NotEtale(f"not étale at node {cert.node!r}: {cert.reason}")
    point = check_related(phi, w, samples=samples, seed=seed)
    P = pushforward(phi, w.phase)
    X_cod = realize(w)
    X_dom = realize(pullback_field(phi, w))
    y_cod = integrate_rk4(X_cod, x0, dt, steps)
    y_dom = integrate_rk4(X_dom, apply(P, np.asarray(x0, dtype=float)), dt, steps)
    per_step = np.abs(apply(P, y_cod.states) - y_dom.states).max(axis=-1, initial=0.0)
    return SyncReport(name, point.max_defect, float(per_step.max()), dt, steps, seed, tol, per_step)


# ---------------------------------------------------------------------------
# CSV

# float() also accepts "1_0", which is a column label here
_NUMBER = re.compile(r"\s*[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?\s*|\s*[-+]?(inf|nan)\s*", re.I)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_trajectory(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", *traj.labels])
        for t, row in zip(traj.times, traj.states):
            wr.writerow([_fmt(t), *(_fmt(v) for v in row)])


def read_trajectory(path: str | Path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    labels = tuple(rows[0][1:])
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(labels) + 1)
    return Trajectory(data[:, 0], data[:, 1:], labels)


def read_state(path: str | Path, labels: Sequence[str] | None = None) -> np.ndarray:
    """Read an initial state: one numeric row, optionally under a header of column labels.

    With a header and ``labels``, columns are reordered to ``labels``; a
    leading ``t`` column is ignored.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path} holds no state")
    header = None
    if not all(_NUMBER.fullmatch(c) for c in rows[0]):
        header, rows = [c.strip() for c in rows[0]], rows[1:]
    if not rows:
        raise ValueError(f"{path} holds no state")
    values = [float(c) for c in rows[0]]
    if header is None:
        return np.array(values)
    if len(header) != len(values):
        raise ValueError(f"{path}: header and row lengths differ")
    named = dict(zip(header, values))
    named.pop("t", None)
    if labels is None:
        return np.array(list(named.values()))
    missing = [lab for lab in labels if lab not in named]
    if missing:
        raise ValueError(f"{path} lacks columns {missing}")
    return np.array([named[lab] for lab in labels])


def write_state(x: Sequence[float], labels: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(list(labels))
        wr.writerow([_fmt(v) for v in x])
