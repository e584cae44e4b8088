"""Replica-ensemble simulation of the intermediate (McKean-type) network.

Each replica is one realization of the intermediate system.  The expectations
that drive it are replaced by averages across all R replicas, and every replica
advances on the same RK4 clock, so the ensemble is one closed ODE system.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _network
from .errors import ConfigurationError, DomainError
from .integrate import rk4_integrate
from .kernels import KernelSpec, WeightDynamicsSpec
from .particle import Trajectory



@dataclass
class ReplicaEnsemble:
    """x has shape (R, N, d), w has shape (R, N, N)."""

    t: float
    x: np.ndarray
    w: np.ndarray
    seed: int | None = None
    stream_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.x.ndim == 2:
            self.x = self.x[..., None]
        R, N, _ = self.x.shape
        if self.w.shape != (R, N, N):
            raise DomainError(f"w must have shape {(R, N, N)}, got {self.w.shape}")
        if np.any(np.diagonal(self.w, axis1=1, axis2=2) != 0.0):
            raise DomainError("every replica needs a zero diagonal")

    @property
    def R(self) -> int:
        return self.x.shape[0]

    @property
    def N(self) -> int:
        return self.x.shape[1]


@dataclass
class ReplicaTrajectory:
    times: np.ndarray
    x: np.ndarray  # (K, R, N, d)
    w: np.ndarray  # (K, R, N, N)
    dt: float
    seed: int | None = None

    def index_of(self, t: float, tol: float = 1e-12) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise DomainError(f"time {t} is not a recorded snapshot")
        return k

    def replica(self, r: int) -> Trajectory:
        return Trajectory(self.times, self.x[:, r], self.w[:, r], self.dt)


def random_initial_data(
    N: int,
    R: int,
    d: int = 1,
    seed: int = 0,
    state_radius: float = 1.0,
    weight_max: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """iid uniform states on [-r, r]^d and iid uniform weights on [0, weight_max].

    Replica r draws from its own stream keyed by (seed, r), so enlarging R
    leaves earlier replicas unchanged.
    """
    if N < 1 or R < 1 or d < 1:
        raise DomainError("N, R and d must be positive")
    x = np.empty((R, N, d))
    w = np.empty((R, N, N))
    for r in range(R):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        x[r] = rng.uniform(-state_radius, state_radius, size=(N, d))
        w[r] = rng.uniform(0.0, weight_max, size=(N, N))
    return x, _network.zero_diagonal(w)


def init_replicas(N: int, R: int, d: int = 1, seed: int = 0, state_radius=1.0, weight_max=1.0) -> ReplicaEnsemble:
    x, w = random_initial_data(N, R, d, seed, state_radius, weight_max)
    return ReplicaEnsemble(0.0, x, w, seed=seed, stream_ids=[(seed, r) for r in range(R)])


def _check(lam: WeightDynamicsSpec):
    if not lam.x_independent:
        raise ConfigurationError(f"the intermediate system needs x-independent weight dynamics; {lam.name} is not")


def _state_drift(t, x, w, phi):
    # dx[s, i] = 1/(N R) sum_{r, j} w[r, i, j] phi(x[s, i], x[r, j])
    R, N, d = x.shape
    out = np.empty_like(x)
    for i in range(N):
        pull = phi.evaluator(t, x[:, i][:, None, None, :], x[None, :, :, :])
        out[:, i] = np.sum(w[None, :, i, :, None] * pull, axis=(1, 2)) / (N * R)
    return out


def _weight_drift_separable(xi, zeta, x, w, lam):
    R, N, _ = x.shape
    xl, yl = x[:, :, None, :], x[:, None, :, :]
    out = np.zeros(w.shape)
    for a, b in lam.separable_form:
        remote = np.broadcast_to(b(xl, yl, w), w.shape).mean(axis=0)
        excl = remote.sum() - remote.sum(axis=1) - remote.sum(axis=0) + np.diagonal(remote)
        out = out + a(xi[:, None], zeta[None, :], xl, yl, w) * excl[None, :, None]
    return out / (N * N)


def _weight_drift_generic(xi, zeta, x, w, lam):
    R, N, d = x.shape
    out = np.empty(w.shape)
    keep = np.ones((N, N), dtype=bool)
    for s in range(R):
        for i in range(N):
            vals = lam.evaluator(
                xi[i], zeta[:, None, None, None],
                x[s, i][None, None, None, :], x[s][:, None, None, None, :],
                w[s, i][:, None, None, None],
                x[None, :, :, None, :], x[None, :, None, :, :], w[None],
            )
            vals = np.broadcast_to(vals, (N, R, N, N))
            mask = keep.copy()
            mask[i, :] = False
            mask[:, i] = False
            out[s, i] = np.where(mask, vals, 0.0).sum(axis=(2, 3)).mean(axis=1)
    return out / (N * N)


def intermediate_rhs_arrays(t, x, w, phi: KernelSpec, lam: WeightDynamicsSpec, path: str = "auto"):
    _check(lam)
    N = x.shape[1]
    mid = _network.cell_midpoints(N)
    dx = _state_drift(t, x, w, phi)
    if path == "auto":
        path = "separable" if lam.separable_form is not None else "generic"
    if path == "separable":
        dw = _weight_drift_separable(mid, mid, x, w, lam)
    elif path == "generic":
        dw = _weight_drift_generic(mid, mid, x, w, lam)
    else:
        raise ValueError(f"unknown path {path!r}")
    return dx, _network.zero_diagonal(dw)


def intermediate_rhs(ens: ReplicaEnsemble, phi: KernelSpec, lam: WeightDynamicsSpec, path: str = "auto"):
    return intermediate_rhs_arrays(ens.t, ens.x, ens.w, phi, lam, path)


def integrate_intermediate(
    ens0: ReplicaEnsemble,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    T: float,
    dt: float,
    record_every: int = 1,
    path: str = "auto",
) -> ReplicaTrajectory:
    _check(lam)

    def rhs(t, y):
        return intermediate_rhs_arrays(t, y[0], y[1], phi, lam, path)

    times, states = rk4_integrate(rhs, (ens0.x, ens0.w), ens0.t, T, dt, record_every)
    return ReplicaTrajectory(
        times, np.stack([s[0] for s in states]), np.stack([s[1] for s in states]), dt, ens0.seed
    )


def _particle_arrays(particle_runs):
    if isinstance(particle_runs, ReplicaTrajectory):
        return particle_runs.times, particle_runs.x, particle_runs.w
    runs = list(particle_runs)
    if not runs:
        raise DomainError("no particle runs")
    times = runs[0].times
    for r in runs[1:]:
        if r.x.shape != runs[0].x.shape or not np.array_equal(r.times, times):
            raise DomainError("particle runs do not share a grid")
    return times, np.stack([r.x for r in runs], axis=1), np.stack([r.w for r in runs], axis=1)


def coupling_error_parts(particle_runs, intermediate_runs: ReplicaTrajectory, t: float) -> tuple[float, float]:
    """(sup_i avg_r |x_i - xbar_i|, sup_ij avg_r |w_ij - wbar_ij|) at time t."""
    times, px, pw = _particle_arrays(particle_runs)
    if px.shape[1:] != intermediate_runs.x.shape[1:] or pw.shape[1:] != intermediate_runs.w.shape[1:]:
        raise DomainError("particle and intermediate runs have different shapes")
    k = intermediate_runs.index_of(t)
    kp = int(np.argmin(np.abs(times - t)))
    if abs(times[kp] - t) > 1e-12 * max(1.0, abs(t)):
        raise DomainError(f"time {t} is not a recorded particle snapshot")
    ex = np.linalg.norm(px[kp] - intermediate_runs.x[k], axis=-1).mean(axis=0).max()
    ew = np.abs(pw[kp] - intermediate_runs.w[k]).mean(axis=0).max()
    return float(ex), float(ew)


def coupling_error(particle_runs, intermediate_runs: ReplicaTrajectory, t: float) -> float:
    ex, ew = coupling_error_parts(particle_runs, intermediate_runs, t)
    return ex + ew


def write_coupling_csv(path, rows) -> None:
    """rows: iterable of dicts with keys t, error_x, error_w, R, N, seed."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "error_x", "error_w", "R", "N", "seed"])
        for r in rows:
            out.writerow([repr(float(r["t"])), repr(float(r["error_x"])), repr(float(r["error_w"])),
                          r["R"], r["N"], r["seed"]])
