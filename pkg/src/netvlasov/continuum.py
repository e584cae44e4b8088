"""Graph-limit solver on the uniform grid of [0, 1].

Fields are piecewise constant: x(t, .) on n cells and w(t, ., .) on n^2 cells.
Integrals over identities use the rectangle rule at cell midpoints.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from math import lcm
from typing import Callable

import numpy as np

from . import _network
from .errors import DomainError
from .integrate import rk4_integrate
from .kernels import KernelSpec, WeightDynamicsSpec
from .quadrature import cell_nodes


@dataclass
class GridSolution:
    t: float
    x: np.ndarray  # (n, d)
    w: np.ndarray  # (n, n)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.w = np.asarray(self.w, dtype=float)
        n = self.x.shape[0]
        if n < 1 or self.w.shape != (n, n):
            raise DomainError(f"inconsistent grid shapes {self.x.shape}, {self.w.shape}")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.w))):
            raise DomainError("non-finite grid values")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def refined(self, m: int) -> "GridSolution":
        """The same step functions on a grid of n*m cells."""
        return GridSolution(self.t, np.repeat(self.x, m, axis=0), np.repeat(np.repeat(self.w, m, 0), m, 1))


@dataclass
class GridTrajectory:
    times: np.ndarray
    x: np.ndarray  # (K, n, d)
    w: np.ndarray  # (K, n, n)
    dt: float

    def state(self, k: int) -> GridSolution:
        return GridSolution(self.times[k], self.x[k], self.w[k])

    @property
    def final(self) -> GridSolution:
        return self.state(-1)


def project_initial(
    x0: Callable[[np.ndarray], np.ndarray],
    w0: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n: int,
    quadrature: str = "gauss2",
    zero_diagonal: bool = False,
) -> GridSolution:
    """Cell averages of x0 and w0, approximated with a per-cell tensor rule.

    x0 maps an array of identities to states (scalar or trailing d axis);
    w0 maps two broadcast identity arrays to weights.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    nodes, wts = cell_nodes(n, quadrature)
    xv = np.asarray(x0(nodes), dtype=float)
    if xv.ndim == 2:
        xv = xv[..., None]
    x = np.einsum("iqd,q->id", xv, wts)
    wv = np.asarray(w0(nodes[:, None, :, None], nodes[None, :, None, :]), dtype=float)
    wv = np.broadcast_to(wv, (n, n, len(wts), len(wts)))
    w = np.einsum("ijab,a,b->ij", wv, wts, wts)
    if zero_diagonal:
        w = _network.zero_diagonal(w.copy())
    return GridSolution(0.0, x, w)


def graph_limit_rhs_arrays(
    t: float,
    x: np.ndarray,
    w: np.ndarray,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    freeze_diagonal: bool = True,
    path: str = "auto",
):
    n = x.shape[-2]
    mid = _network.cell_midpoints(n)
    dx = _network.state_drift(t, x, w, phi)
    dw = _network.weight_drift(mid, mid, x, w, lam, restricted=False, path=path)
    if freeze_diagonal:
        dw = _network.zero_diagonal(dw)
    return dx, dw


def graph_limit_rhs(
    sol: GridSolution,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    freeze_diagonal: bool = True,
    path: str = "auto",
):
    """(dx, dw) of the discretized graph limit.

    With ``freeze_diagonal`` the diagonal cells follow the no-loop convention
    of the finite network and do not evolve.
    """
    return graph_limit_rhs_arrays(sol.t, sol.x, sol.w, phi, lam, freeze_diagonal, path)


def integrate_graph_limit(
    sol0: GridSolution,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    T: float,
    dt: float,
    record_every: int = 1,
    freeze_diagonal: bool = True,
    path: str = "auto",
) -> GridTrajectory:
    def rhs(t, y):
        return graph_limit_rhs_arrays(t, y[0], y[1], phi, lam, freeze_diagonal, path)

    times, states = rk4_integrate(rhs, (sol0.x, sol0.w), sol0.t, T, dt, record_every)
    return GridTrajectory(times, np.stack([s[0] for s in states]), np.stack([s[1] for s in states]), dt)


def l2_gap_parts(a: GridSolution, b: GridSolution) -> tuple[float, float]:
    """(||x_a - x_b||_{L2(I)}, ||w_a - w_b||_{L2(I^2)}) for step functions on any two grids."""
    n = lcm(a.n, b.n)
    fa, fb = a.refined(n // a.n), b.refined(n // b.n)
    ex = float(np.sqrt(np.mean(np.sum((fa.x - fb.x) ** 2, axis=-1))))
    ew = float(np.sqrt(np.mean((fa.w - fb.w) ** 2)))
    return ex, ew


def l2_gap(a: GridSolution, b: GridSolution) -> float:
    ex, ew = l2_gap_parts(a, b)
    return ex + ew


def write_grid_csv(traj: GridTrajectory, states_path, weights_path) -> None:
    K, n, d = traj.x.shape
    header = f"# n={n} d={d} snapshots={K} dt={traj.dt!r}"
    with open(states_path, "w", newline="") as fh:
        fh.write(header + "\n")
        out = csv.writer(fh)
        out.writerow(["t", "i"] + [f"x{c}" for c in range(d)])
        for k in range(K):
            for i in range(n):
                out.writerow([repr(traj.times[k]), i] + [repr(v) for v in traj.x[k, i]])
    with open(weights_path, "w", newline="") as fh:
        fh.write(header + "\n")
        out = csv.writer(fh)
        out.writerow(["t", "i", "j", "w"])
        for k in range(K):
            for i in range(n):
                for j in range(n):
                    out.writerow([repr(traj.times[k]), i, j, repr(traj.w[k, i, j])])
