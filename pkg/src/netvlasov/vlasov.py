"""Vlasov-type transport on the extended phase space, solved along characteristics.

The fiber measure at identities (xi_i, zeta_j) is represented by P equally
weighted samples (x, y, w).  Every sample is advected by the force field the
whole ensemble generates, so the pushed-forward initial samples are the
solution itself.

Passive probes can ride along.  They feel the force field without
contributing to it, which gives the limit flow map through arbitrary
starting points.  The state components of a characteristic only depend on
(identity, own state), so probes are split into nodes (identity row, state)
and edges that reference two nodes and carry a weight.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import _network
from .continuum import GridSolution
from .errors import DomainError, InitializationError
from .integrate import rk4_integrate
from .kernels import KernelSpec, WeightDynamicsSpec

Sampler = Callable[[np.random.Generator, float, float, int], tuple[np.ndarray, np.ndarray, np.ndarray]]

_BLOCK_ELEMS = 2_000_000


@dataclass
class FiberedEnsemble:
    t: float
    x: np.ndarray  # (n, n, P, d)
    y: np.ndarray  # (n, n, P, d)
    w: np.ndarray  # (n, n, P)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.x.ndim != 4 or self.x.shape != self.y.shape or self.w.shape != self.x.shape[:3]:
            raise DomainError("fibered ensemble arrays have inconsistent shapes")
        if self.x.shape[0] != self.x.shape[1]:
            raise DomainError("fiber grid must be square")
        if self.P < 1:
            raise DomainError("each fiber needs at least one sample")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def P(self) -> int:
        return self.x.shape[2]

    @property
    def d(self) -> int:
        return self.x.shape[3]

    @property
    def masses(self) -> np.ndarray:
        return np.full(self.w.shape, 1.0 / self.P)


@dataclass
class ProbeSet:
    """Passive characteristics.

    node_rows: identity row (on the ensemble grid) of each node; node_x its state.
    edge_a / edge_b: nodes carrying the x and y components of each edge;
    edge_xi / edge_zeta: the edge identities; edge_w its weight.
    """

    node_rows: np.ndarray
    node_x: np.ndarray
    edge_a: np.ndarray
    edge_b: np.ndarray
    edge_xi: np.ndarray
    edge_zeta: np.ndarray
    edge_w: np.ndarray

    def __post_init__(self):
        self.node_rows = np.asarray(self.node_rows, dtype=int)
        self.node_x = np.asarray(self.node_x, dtype=float)
        if self.node_x.ndim == 1:
            self.node_x = self.node_x[:, None]
        self.edge_a = np.asarray(self.edge_a, dtype=int)
        self.edge_b = np.asarray(self.edge_b, dtype=int)
        self.edge_xi = np.asarray(self.edge_xi, dtype=float)
        self.edge_zeta = np.asarray(self.edge_zeta, dtype=float)
        self.edge_w = np.asarray(self.edge_w, dtype=float)


@dataclass
class VlasovTrajectory:
    times: np.ndarray
    x: np.ndarray  # (K, n, n, P, d)
    y: np.ndarray
    w: np.ndarray  # (K, n, n, P)
    dt: float
    node_x: np.ndarray | None = None  # (K, M1, d)
    edge_w: np.ndarray | None = None  # (K, M2)

    def state(self, k: int) -> FiberedEnsemble:
        return FiberedEnsemble(self.times[k], self.x[k], self.y[k], self.w[k])

    @property
    def final(self) -> FiberedEnsemble:
        return self.state(-1)


def row_of(identity, n: int) -> np.ndarray:
    """Index of the grid cell of [0, 1] containing each identity."""
    return np.minimum((np.asarray(identity, dtype=float) * n).astype(int), n - 1)


# ---------------------------------------------------------------------------
# samplers


def uniform_box_sampler(state_radius: float = 1.0, weight_max: float = 1.0, d: int = 1) -> Sampler:
    """iid x, y uniform on [-r, r]^d and w uniform on [0, weight_max], same law on every fiber."""

    def sample(rng, xi, zeta, P):
        x = rng.uniform(-state_radius, state_radius, size=(P, d))
        y = rng.uniform(-state_radius, state_radius, size=(P, d))
        w = rng.uniform(0.0, weight_max, size=P)
        return x, y, w

    return sample


def lattice_sampler(state_radius: float = 1.0, weight_max: float = 1.0, per_axis: int = 8) -> Sampler:
    """Deterministic equally weighted midpoint lattice of the box (d = 1), per_axis**3 points.

    It integrates smooth functions of the uniform law with O(per_axis^-2) error,
    which makes it a low-noise reference for the mean-field limit.
    """
    m = per_axis
    s = -state_radius + (2 * np.arange(m) + 1) * state_radius / m
    v = (np.arange(m) + 0.5) * weight_max / m
    gx, gy, gw = np.meshgrid(s, s, v, indexing="ij")
    pts = (gx.reshape(-1, 1), gy.reshape(-1, 1), gw.reshape(-1))

    def sample(rng, xi, zeta, P):
        if P != m ** 3:
            raise InitializationError(f"lattice sampler produces {m ** 3} points, asked for {P}")
        return pts[0].copy(), pts[1].copy(), pts[2].copy()

    return sample


def shifted_sampler(base: Sampler, shift: float) -> Sampler:
    """The base law translated by ``shift`` in both state components."""

    def sample(rng, xi, zeta, P):
        x, y, w = base(rng, xi, zeta, P)
        return x + shift, y + shift, w

    return sample


def ensemble_from_grid(sol: GridSolution) -> FiberedEnsemble:
    """Dirac fibers: fiber (i, j) holds the single sample (x_i, x_j, w_ij)."""
    n, d = sol.n, sol.d
    x = np.broadcast_to(sol.x[:, None, None, :], (n, n, 1, d)).copy()
    y = np.broadcast_to(sol.x[None, :, None, :], (n, n, 1, d)).copy()
    return FiberedEnsemble(sol.t, x, y, sol.w[:, :, None].copy())


def init_fibered(
    sampler: Sampler,
    n: int,
    P: int,
    seed: int = 0,
    support: tuple[float, float, float] | None = None,
) -> FiberedEnsemble:
    """Draw P samples per fiber from independent streams keyed by (seed, i, j).

    ``support`` = (R_X, R_Y, R_M) rejects samples outside the declared box.
    """
    if n < 1:
        raise InitializationError("n must be >= 1")
    if P < 1:
        raise InitializationError("P must be >= 1")
    mid = _network.cell_midpoints(n)
    xs, ys, ws = [], [], []
    for i in range(n):
        for j in range(n):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i, j]))
            x, y, w = sampler(rng, mid[i], mid[j], P)
            xs.append(np.asarray(x, dtype=float).reshape(P, -1))
            ys.append(np.asarray(y, dtype=float).reshape(P, -1))
            ws.append(np.asarray(w, dtype=float).reshape(P))
    d = xs[0].shape[1]
    ens = FiberedEnsemble(
        0.0,
        np.stack(xs).reshape(n, n, P, d),
        np.stack(ys).reshape(n, n, P, d),
        np.stack(ws).reshape(n, n, P),
    )
    if support is not None:
        rx, ry, rm = support
        if (np.linalg.norm(ens.x, axis=-1).max() > rx or np.linalg.norm(ens.y, axis=-1).max() > ry
                or np.abs(ens.w).max() > rm):
            raise InitializationError("a sample falls outside the declared support box")
    return ens


# ---------------------------------------------------------------------------
# force field


def _pull(t, pts, src_y, src_w, phi):
    """(1/S) sum_s src_w[s] phi(t, pt, src_y[s]) for each of the M points."""
    M, S = pts.shape[0], src_y.shape[0]
    out = np.empty(pts.shape)
    step = max(1, _BLOCK_ELEMS // max(1, S * pts.shape[1]))
    for lo in range(0, M, step):
        blk = pts[lo:lo + step]
        vals = phi.evaluator(t, blk[:, None, :], src_y[None, :, :])
        out[lo:lo + step] = np.sum(src_w[None, :, None] * vals, axis=1) / S
    return out


def _row_sources(ens: FiberedEnsemble, row: int):
    n, P, d = ens.n, ens.P, ens.d
    return ens.y[row].reshape(n * P, d), ens.w[row].reshape(n * P)


def _state_forces(t, ens: FiberedEnsemble, phi: KernelSpec):
    n, P, d = ens.n, ens.P, ens.d
    drift = np.empty((n, n * P, d))
    for r in range(n):
        drift[r] = _pull(t, ens.x[r].reshape(n * P, d), *_row_sources(ens, r), phi)
    fx = drift.reshape(n, n, P, d)
    # y of fiber (i, j) moves with the row-j field
    fy = np.empty_like(fx)
    for r in range(n):
        fy[:, r] = _pull(t, ens.y[:, r].reshape(n * P, d), *_row_sources(ens, r), phi).reshape(n, P, d)
    return fx, fy


def _remote_moments(ens: FiberedEnsemble, lam: WeightDynamicsSpec) -> list[float]:
    return [float(np.mean(np.broadcast_to(b(ens.x, ens.y, ens.w), ens.w.shape))) for _, b in lam.separable_form]


def _weight_force_points(xi, zeta, x, y, w, ens: FiberedEnsemble, lam: WeightDynamicsSpec, path: str):
    """F_w at arbitrary points; xi, zeta, w of shape (M,), x, y of shape (M, d)."""
    if path == "auto":
        path = "separable" if lam.separable_form is not None else "generic"
    if path == "separable":
        out = np.zeros(w.shape)
        for (a, _), m in zip(lam.separable_form, _remote_moments(ens, lam)):
            out = out + a(xi, zeta, x, y, w) * m
        return out
    if path != "generic":
        raise ValueError(f"unknown path {path!r}")
    d = ens.d
    sx, sy, sw = ens.x.reshape(-1, d), ens.y.reshape(-1, d), ens.w.reshape(-1)
    S = sw.shape[0]
    out = np.empty(w.shape)
    step = max(1, _BLOCK_ELEMS // max(1, S * d))
    for lo in range(0, w.shape[0], step):
        sl = slice(lo, lo + step)
        vals = lam.evaluator(
            xi[sl, None], zeta[sl, None], x[sl, None, :], y[sl, None, :], w[sl, None],
            sx[None], sy[None], sw[None],
        )
        out[sl] = np.mean(np.broadcast_to(vals, (len(w[sl]), S)), axis=1)
    return out


def _weight_forces(ens: FiberedEnsemble, lam: WeightDynamicsSpec, freeze_diagonal: bool, path: str):
    n, P, d = ens.n, ens.P, ens.d
    mid = _network.cell_midpoints(n)
    xi = np.broadcast_to(mid[:, None, None], (n, n, P)).reshape(-1)
    zeta = np.broadcast_to(mid[None, :, None], (n, n, P)).reshape(-1)
    fw = _weight_force_points(
        xi, zeta, ens.x.reshape(-1, d), ens.y.reshape(-1, d), ens.w.reshape(-1), ens, lam, path
    ).reshape(n, n, P)
    if freeze_diagonal:
        idx = np.arange(n)
        fw[idx, idx] = 0.0
    return fw


def vlasov_rhs(
    ens: FiberedEnsemble,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    freeze_diagonal: bool = True,
    path: str = "auto",
):
    """Force on every sample: (F_x, F_y, F_w) with the ensemble's own shapes.

    ``freeze_diagonal`` keeps the weights of the diagonal fibers fixed, the
    no-loop convention shared with the particle and grid solvers.
    """
    fx, fy = _state_forces(ens.t, ens, phi)
    return fx, fy, _weight_forces(ens, lam, freeze_diagonal, path)


def vlasov_force(
    ens: FiberedEnsemble,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    fiber: tuple[int, int],
    sample: int,
    freeze_diagonal: bool = True,
    path: str = "auto",
):
    i, j = fiber
    n, P, d = ens.n, ens.P, ens.d
    if not (0 <= i < n and 0 <= j < n and 0 <= sample < P):
        raise DomainError(f"fiber {fiber} / sample {sample} out of range")
    x, y, w = ens.x[i, j, sample], ens.y[i, j, sample], ens.w[i, j, sample]
    fx = _pull(ens.t, x[None], *_row_sources(ens, i), phi)[0]
    fy = _pull(ens.t, y[None], *_row_sources(ens, j), phi)[0]
    if freeze_diagonal and i == j:
        return fx, fy, 0.0
    mid = _network.cell_midpoints(n)
    fw = _weight_force_points(
        np.array([mid[i]]), np.array([mid[j]]), x[None], y[None], np.array([w]), ens, lam, path
    )[0]
    return fx, fy, float(fw)


def probe_rhs(t, ens: FiberedEnsemble, node_rows, node_x, probes: ProbeSet, edge_w, phi, lam, path="auto"):
    dnode = np.empty(node_x.shape)
    for r in np.unique(node_rows):
        sel = np.nonzero(node_rows == r)[0]
        dnode[sel] = _pull(t, node_x[sel], *_row_sources(ens, r), phi)
    dedge = _weight_force_points(
        probes.edge_xi, probes.edge_zeta, node_x[probes.edge_a], node_x[probes.edge_b], edge_w, ens, lam, path
    )
    return dnode, dedge


def integrate_vlasov(
    ens0: FiberedEnsemble,
    phi: KernelSpec,
    lam: WeightDynamicsSpec,
    T: float,
    dt: float,
    record_every: int = 1,
    probes: ProbeSet | None = None,
    freeze_diagonal: bool = True,
    path: str = "auto",
    stage_hook=None,
) -> VlasovTrajectory:
    def rhs(t, state):
        ens = FiberedEnsemble(t, state[0], state[1], state[2])
        fx, fy, fw = vlasov_rhs(ens, phi, lam, freeze_diagonal, path)
        if probes is None:
            return fx, fy, fw
        dn, de = probe_rhs(t, ens, probes.node_rows, state[3], probes, state[4], phi, lam, path)
        return fx, fy, fw, dn, de

    y0 = [ens0.x, ens0.y, ens0.w]
    if probes is not None:
        y0 += [probes.node_x, probes.edge_w]
    times, states = rk4_integrate(rhs, y0, ens0.t, T, dt, record_every, stage_hook)
    traj = VlasovTrajectory(
        times,
        np.stack([s[0] for s in states]),
        np.stack([s[1] for s in states]),
        np.stack([s[2] for s in states]),
        dt,
    )
    if probes is not None:
        traj.node_x = np.stack([s[3] for s in states])
        traj.edge_w = np.stack([s[4] for s in states])
    return traj


# ---------------------------------------------------------------------------
# a priori bounds


@dataclass
class BoundConstants:
    """Constants of the a priori estimates, built from kernel and initial-data constants.

    W_sup is sup|W(0)|; m2_0 is the largest per-fiber initial second moment of w.
    grad_cutoff is the sup-norm of the gradient of the cutoff used in the
    Lipschitz estimates of the truncated force.
    """

    R_X: float
    R_Y: float
    R_M: float
    M_phi: float
    C_lambda: float
    L_phi: float
    L_lambda: float
    T: float
    m2_0: float
    W_sup: float
    grad_cutoff: float = 1.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (np.isfinite(v) and v >= 0):
                raise DomainError(f"bound constant {k} must be finite and nonnegative, got {v}")

    @classmethod
    def from_ensemble(cls, ens0: FiberedEnsemble, phi: KernelSpec, lam: WeightDynamicsSpec, T: float,
                      grad_cutoff: float = 1.0) -> "BoundConstants":
        R_M = float(np.abs(ens0.w).max())
        return cls(
            R_X=float(np.linalg.norm(ens0.x, axis=-1).max()),
            R_Y=float(np.linalg.norm(ens0.y, axis=-1).max()),
            R_M=R_M,
            M_phi=phi.bound,
            C_lambda=lam.growth,
            L_phi=phi.lipschitz,
            L_lambda=lam.lipschitz,
            T=T,
            m2_0=float(np.mean(ens0.w ** 2, axis=-1).max()),
            W_sup=R_M,
            grad_cutoff=grad_cutoff,
        )

    def second_moment_bound(self, m2: float | np.ndarray, T: float | None = None):
        T = self.T if T is None else T
        return (m2 + 4 * self.C_lambda * T) * np.exp(4 * self.C_lambda * T)

    @property
    def m1(self) -> float:
        return 2.0 + float(self.second_moment_bound(self.m2_0))

    @property
    def R_M_bar(self) -> float:
        return self.R_M * (1 + self.T * self.C_lambda) + self.T * self.C_lambda

    @property
    def R_M_gronwall(self) -> float:
        """(R_M + C_Lambda T) exp(C_Lambda T): what Gronwall gives from |F_w| <= C_Lambda (1 + |w|)."""
        return (self.R_M + self.C_lambda * self.T) * np.exp(self.C_lambda * self.T)

    @property
    def radius_x(self) -> float:
        return self.R_X + self.T * self.M_phi * self.m1

    @property
    def radius_y(self) -> float:
        return self.R_Y + self.T * self.M_phi * self.m1

    @property
    def C1(self) -> float:
        return max(self.L_phi * self.m1, self.L_lambda)

    @property
    def L2(self) -> float:
        g = self.C_lambda * (2 + self.R_M_bar)
        return max(g, self.grad_cutoff * g, self.L_lambda)

    @property
    def L3(self) -> float:
        r = self.R_M_bar + 1
        return max(r * self.M_phi, self.M_phi * (1 + r * self.grad_cutoff), r * self.L_phi)

    @property
    def C2(self) -> float:
        return max(self.C1, self.L3, self.L2)

    @property
    def C3(self) -> float:
        return max(self.C2, 1.0)

    @property
    def C4(self) -> float:
        return (self.W_sup + self.C_lambda * self.T) * np.exp(self.C_lambda * self.T)

    @property
    def C5(self) -> float:
        return max(2 * self.C4 * self.L_phi + 3 * self.L_lambda, self.M_phi + 2 * self.L_lambda)

    @property
    def C_error(self) -> float:
        """Coupling-error constant as obtained at the end of its proof."""
        T = self.T
        return (2 * self.C4 * T * self.M_phi + 2 * self.C_lambda * T * (1 + self.C4)) * np.exp(self.C5 * T)

    @property
    def C_error_stated(self) -> float:
        """The same constant in the form it is announced (without the factors of T)."""
        return (2 * self.C4 * self.M_phi + self.C_lambda * (1 + self.C4)) * np.exp(self.C5 * self.T)

    def as_dict(self) -> dict:
        out = asdict(self)
        for k in ("m1", "R_M_bar", "R_M_gronwall", "radius_x", "radius_y", "C1", "L2", "L3", "C2", "C3",
                  "C4", "C5", "C_error", "C_error_stated"):
            out[k] = float(getattr(self, k))
        return out


@dataclass
class AprioriReport:
    margin_support_x: float
    margin_support_y: float
    margin_weight: float
    margin_second_moment: float
    margin_weight_gronwall: float
    constants: dict = field(default_factory=dict)

    @property
    def min_margin(self) -> float:
        return min(self.margin_support_x, self.margin_support_y, self.margin_weight, self.margin_second_moment)

    def passed(self, tol: float = 1e-9) -> bool:
        return self.min_margin >= -tol

    def as_text(self) -> str:
        keys = ("margin_support_x", "margin_support_y", "margin_weight", "margin_second_moment",
                "margin_weight_gronwall")
        return "\n".join(f"{k}: {getattr(self, k)!r}" for k in keys)


def a_priori_checks(traj: VlasovTrajectory, bounds: BoundConstants) -> AprioriReport:
    """Smallest slack over the recorded times of the support and moment bounds."""
    sx = np.linalg.norm(traj.x, axis=-1).max(axis=(1, 2, 3))
    sy = np.linalg.norm(traj.y, axis=-1).max(axis=(1, 2, 3))
    sw = np.abs(traj.w).max(axis=(1, 2, 3))
    m2 = np.mean(traj.w ** 2, axis=-1)  # (K, n, n)
    m2_bound = bounds.second_moment_bound(m2[0])
    return AprioriReport(
        margin_support_x=float(np.min(bounds.radius_x - sx)),
        margin_support_y=float(np.min(bounds.radius_y - sy)),
        margin_weight=float(np.min(bounds.R_M_bar - sw)),
        margin_second_moment=float(np.min(m2_bound[None] - m2)),
        margin_weight_gronwall=float(np.min(bounds.R_M_gronwall - sw)),
        constants=bounds.as_dict(),
    )


def write_ensemble_csv(traj: VlasovTrajectory, path) -> None:
    K, n, _, P, d = traj.x.shape
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["t", "i", "j", "p"] + [f"x{c}" for c in range(d)] + [f"y{c}" for c in range(d)] + ["w"])
        for k in range(K):
            for i in range(n):
                for j in range(n):
                    for p in range(P):
                        out.writerow(
                            [repr(traj.times[k]), i, j, p]
                            + [repr(v) for v in traj.x[k, i, j, p]]
                            + [repr(v) for v in traj.y[k, i, j, p]]
                            + [repr(traj.w[k, i, j, p])]
                        )
