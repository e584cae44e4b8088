"""Finite-N adaptive network: agents x_i in R^d coupled through evolving weights w_ij."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _network
from .errors import ConfigurationError, DomainError
from .integrate import rk4_integrate
from .kernels import KernelSpec, WeightDynamicsSpec
from .quadrature import cell_nodes

MODES = ("general", "restricted")


def _as_states(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DomainError("x must have shape (N,) or (N, d)")
    return x


@dataclass(frozen=True)
class ParticleState:
    t: float
    x: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        x = _as_states(self.x)
        w = np.asarray(self.w, dtype=float)
        if w.shape != (x.shape[0], x.shape[0]):
            raise DomainError(f"w must be {x.shape[0]}x{x.shape[0]}, got {w.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise DomainError("non-finite particle state")
        if np.any(np.diagonal(w) != 0.0):
            raise DomainError("weight matrix must have a zero diagonal (no loops)")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "t", float(self.t))

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass
class Trajectory:
    """Recorded snapshots; x has shape (K, N, d) and w (K, N, N)."""

    times: np.ndarray
    x: np.ndarray
    w: np.ndarray
    dt: float
    scheme: str = "rk4"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("trajectory times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def state(self, k: int) -> ParticleState:
        return ParticleState(self.times[k], self.x[k], self.w[k])

    @property
    def final(self) -> ParticleState:
        return self.state(-1)

    @property
    def snapshots(self) -> list[ParticleState]:
        return [self.state(k) for k in range(len(self))]

    def index_of(self, t: float, tol: float = 1e-12) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise DomainError(f"time {t} is not a recorded snapshot")
        return k


def _check_mode(mode: str, lam: WeightDynamicsSpec) -> bool:
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    restricted = mode == "restricted"
    if restricted and not lam.x_independent:
        raise ConfigurationError(f"restricted mode needs x-independent weight dynamics; {lam.name} is not")
    return restricted


def lambda_cell_average(
    lam: WeightDynamicsSpec,
    i: int,
    j: int,
    N: int,
    args,
    quadrature: str = "midpoint",
) -> float:
    """N^2 times the integral of Lambda over the cell I_i x I_j (0-based indices).

    ``args`` is the tuple (x, y, w, xt, yt, wt).
    """
    if not (0 <= i < N and 0 <= j < N):
        raise DomainError(f"cell ({i}, {j}) outside a grid of {N}")
    nodes, weights = cell_nodes(N, quadrature)
    x, y, w, xt, yt, wt = (np.asarray(a, dtype=float) for a in args)
    x, y, xt, yt = (np.atleast_1d(a) for a in (x, y, xt, yt))
    total = 0.0
    for a, wa in zip(nodes[i], weights):
        for b, wb in zip(nodes[j], weights):
            total += wa * wb * float(lam.evaluator(a, b, x, y, w, xt, yt, wt))
    return total


def _weight_rhs(x, w, lam, restricted, quadrature, path):
    n = x.shape[-2]
    nodes, weights = cell_nodes(n, quadrature)
    if len(weights) == 1:
        dw = _network.weight_drift(nodes[:, 0], nodes[:, 0], x, w, lam, restricted, path)
    else:
        dw = np.zeros(w.shape)
        for qa, wa in enumerate(weights):
            for qb, wb in enumerate(weights):
                dw = dw + (wa * wb) * _network.weight_drift(
                    nodes[:, qa], nodes[:, qb], x, w, lam, restricted, path
                )
    return _network.zero_diagonal(dw)


def particle_rhs_arrays(
    t: float,
    x: np.ndarray,
    w: np.ndarray,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    mode: str = "general",
    quadrature: str = "midpoint",
    path: str = "auto",
):
    """Batched right-hand side; x is (..., N, d), w is (..., N, N)."""
    restricted = _check_mode(mode, lam)
    dx = _network.state_drift(t, x, w, phi)
    dw = _weight_rhs(x, w, lam, restricted, quadrature, path)
    return dx, dw


def particle_rhs(
    state: ParticleState,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    mode: str = "general",
    quadrature: str = "midpoint",
    path: str = "auto",
) -> tuple[np.ndarray, np.ndarray]:
    return particle_rhs_arrays(state.t, state.x, state.w, phi, lam, mode, quadrature, path)


def integrate_particle_arrays(
    x0: np.ndarray,
    w0: np.ndarray,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    mode: str,
    T: float,
    dt: float,
    record_every: int = 1,
    t0: float = 0.0,
    quadrature: str = "midpoint",
    path: str = "auto",
):
    """Integrate a batch of networks at once; returns (times, x (K, ..., N, d), w (K, ..., N, N))."""
    _check_mode(mode, lam)

    def rhs(t, y):
        return particle_rhs_arrays(t, y[0], y[1], phi, lam, mode, quadrature, path)

    times, states = rk4_integrate(rhs, (x0, w0), t0, T, dt, record_every)
    return times, np.stack([s[0] for s in states]), np.stack([s[1] for s in states])


def integrate_particle(
    state0: ParticleState,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    mode: str = "general",
    T: float = 1.0,
    dt: float = 1e-2,
    record_every: int = 1,
    quadrature: str = "midpoint",
    path: str = "auto",
) -> Trajectory:
    times, xs, ws = integrate_particle_arrays(
        state0.x, state0.w, phi, lam, mode, T, dt, record_every, state0.t, quadrature, path
    )
    return Trajectory(times, xs, ws, dt, meta={"mode": mode, "phi": phi.name, "lambda": lam.name})


def weight_bound(C: float, growth: float, t) -> np.ndarray:
    """(C + C_Lambda t) exp(C_Lambda t)."""
    t = np.asarray(t, dtype=float)
    return (C + growth * t) * np.exp(growth * t)


def weight_bound_margin(traj: Trajectory, growth: float) -> float:
    """Smallest slack of max|w(t)| below (C + C_Lambda t) exp(C_Lambda t), C = max|w(0)|."""
    elapsed = traj.times - traj.times[0]
    C = float(np.max(np.abs(traj.w[0])))
    observed = np.max(np.abs(traj.w), axis=(-2, -1))
    return float(np.min(weight_bound(C, growth, elapsed) - observed))


# ---------------------------------------------------------------------------
# export


def write_trajectory_csv(traj: Trajectory, states_path, weights_path) -> None:
    K, N, d = traj.x.shape
    with open(states_path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "i"] + [f"x{c}" for c in range(d)])
        for k in range(K):
            for i in range(N):
                out.writerow([repr(traj.times[k]), i] + [repr(v) for v in traj.x[k, i]])
    with open(weights_path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "i", "j", "w"])
        for k in range(K):
            for i in range(N):
                for j in range(N):
                    out.writerow([repr(traj.times[k]), i, j, repr(traj.w[k, i, j])])


_HEADER = struct.Struct("<qqq")


def write_trajectory_binary(traj: Trajectory, path) -> None:
    """Little-endian layout: int64 N, d, K; then per snapshot float64 t, x (N*d), w (N*N)."""
    K, N, d = traj.x.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(N, d, K))
        for k in range(K):
            fh.write(np.asarray([traj.times[k]], dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(traj.x[k], dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(traj.w[k], dtype="<f8").tobytes())


def read_trajectory_binary(path, dt: float = float("nan")) -> Trajectory:
    raw = Path(path).read_bytes()
    N, d, K = _HEADER.unpack_from(raw, 0)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(K, 1 + N * d + N * N)
    times = body[:, 0].copy()
    x = body[:, 1:1 + N * d].reshape(K, N, d).copy()
    w = body[:, 1 + N * d:].reshape(K, N, N).copy()
    return Trajectory(times, x, w, dt)
