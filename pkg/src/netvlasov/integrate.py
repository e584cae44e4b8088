"""Fixed-step classical Runge-Kutta driver used by every solver."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import BlowUpError, DomainError

State = tuple[np.ndarray, ...]
Rhs = Callable[[float, State], State]


def time_grid(t0: float, T: float, dt: float) -> np.ndarray:
    """Step edges from t0 to t0+T; the last step is shortened to land on t0+T."""
    if not dt > 0:
        raise DomainError(f"step must be positive, got {dt}")
    if not T >= 0:
        raise DomainError(f"horizon must be nonnegative, got {T}")
    n_full = int(np.floor(T / dt + 1e-9))
    edges = t0 + dt * np.arange(n_full + 1, dtype=float)
    t_end = t0 + T
    if t_end - edges[-1] > 1e-12 * max(1.0, abs(t_end)):
        edges = np.append(edges, t_end)
    else:
        edges[-1] = t_end
    return edges


def rk4_step(rhs: Rhs, t: float, y: State, h: float, stage_hook=None) -> State:
    k1 = rhs(t, y)
    if stage_hook is not None:
        stage_hook(t, y, k1)
    y2 = tuple(a + 0.5 * h * b for a, b in zip(y, k1))
    k2 = rhs(t + 0.5 * h, y2)
    if stage_hook is not None:
        stage_hook(t + 0.5 * h, y2, k2)
    y3 = tuple(a + 0.5 * h * b for a, b in zip(y, k2))
    k3 = rhs(t + 0.5 * h, y3)
    if stage_hook is not None:
        stage_hook(t + 0.5 * h, y3, k3)
    y4 = tuple(a + h * b for a, b in zip(y, k3))
    k4 = rhs(t + h, y4)
    if stage_hook is not None:
        stage_hook(t + h, y4, k4)
    return tuple(
        a + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)
    )


def rk4_integrate(
    rhs: Rhs,
    y0: Sequence[np.ndarray],
    t0: float,
    T: float,
    dt: float,
    record_every: int = 1,
    stage_hook=None,
) -> tuple[np.ndarray, list[State]]:
    """Integrate and return (recorded times, recorded states).

    The initial and final states are always recorded. ``stage_hook(t, y, k)``
    sees every stage evaluation, which is handy for consistency checks.
    """
    if record_every < 1:
        raise DomainError("record_every must be >= 1")
    edges = time_grid(t0, T, dt)
    y = tuple(np.array(a, dtype=float, copy=True) for a in y0)
    times = [edges[0]]
    states = [tuple(a.copy() for a in y)]
    n_steps = len(edges) - 1
    for step in range(n_steps):
        t, h = edges[step], edges[step + 1] - edges[step]
        y = rk4_step(rhs, t, y, h, stage_hook)
        if not all(np.all(np.isfinite(a)) for a in y):
            raise BlowUpError(step + 1, edges[step + 1])
        if (step + 1) % record_every == 0 or step + 1 == n_steps:
            times.append(edges[step + 1])
            states.append(tuple(a.copy() for a in y))
    return np.asarray(times), states
