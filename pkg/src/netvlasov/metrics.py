"""Flat (bounded-Lipschitz) distance between finitely supported measures.

Atoms live in R^d x R^d x R, stored as concatenated vectors (x, y, w) with the
Euclidean ground distance.

For probability measures the flat distance equals the optimal transport cost
for the truncated ground distance min(|a - b|, 2): a potential with |f| <= 1
and Lip(f) <= 1 is exactly a 1-Lipschitz function for the truncated metric,
up to an additive constant that equal masses do not see.  That gives two
exact shortcuts next to the general linear program:

* one measure is a single atom: the only coupling sends all mass to it;
* both measures are uniform with the same atom count: an optimal coupling
  is a permutation (Birkhoff), found by the assignment solver.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from .continuum import GridSolution
from .errors import DomainError
from .particle import ParticleState
from .vlasov import FiberedEnsemble

MERGE_TOL = 1e-12
MASS_TOL = 1e-12


@dataclass
class DiscreteMeasure:
    atoms: np.ndarray  # (k, D)
    masses: np.ndarray  # (k,)

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        if self.atoms.ndim == 1:
            self.atoms = self.atoms[:, None]
        self.masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if self.atoms.shape[0] != self.masses.shape[0]:
            raise DomainError("atoms and masses differ in length")
        if not np.all(np.isfinite(self.atoms)):
            raise DomainError("non-finite atom")

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.ones(1))

    @classmethod
    def uniform(cls, points) -> "DiscreteMeasure":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    def check_normalized(self) -> None:
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > MASS_TOL:
            raise DomainError(f"measure is not a probability measure (total mass {self.masses.sum()!r})")

    def merged(self, tol: float = MERGE_TOL) -> "DiscreteMeasure":
        """Canonical form: atoms closer than tol (max norm) fused, zero masses dropped, sorted."""
        atoms, masses = _merge(self.atoms, self.masses, tol)
        keep = masses > 0
        atoms, masses = atoms[keep], masses[keep]
        order = np.lexsort(atoms.T[::-1]) if atoms.size else np.arange(0)
        return DiscreteMeasure(atoms[order], masses[order])


def _merge(atoms: np.ndarray, masses: np.ndarray, tol: float):
    reps: list[int] = []
    label = np.empty(len(masses), dtype=int)
    for k in range(len(masses)):
        if reps:
            gap = np.max(np.abs(atoms[reps] - atoms[k]), axis=1)
            hit = np.nonzero(gap <= tol)[0]
            if hit.size:
                label[k] = hit[0]
                continue
        label[k] = len(reps)
        reps.append(k)
    total = np.zeros(len(reps))
    np.add.at(total, label, masses)
    return atoms[reps], total


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _dbl_lp(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    pts = np.concatenate([mu.atoms, nu.atoms])
    signed = np.concatenate([mu.masses, -nu.masses])
    pts, net = _merge(pts, signed, MERGE_TOL)
    # atoms with no net mass impose nothing: potentials extend from the rest
    keep = np.abs(net) > 1e-15
    pts, net = pts[keep], net[keep]
    k = len(net)
    if k == 0:
        return 0.0
    if k == 1:
        return float(min(abs(net[0]), 2.0))
    dist = _pairwise(pts, pts)
    rows, cols = np.nonzero(np.triu(dist < 2.0, k=1))
    m = len(rows)
    if m:
        r = np.arange(m)
        data = np.concatenate([np.ones(m), -np.ones(m), -np.ones(m), np.ones(m)])
        ri = np.concatenate([r, r, m + r, m + r])
        ci = np.concatenate([rows, cols, rows, cols])
        A = sparse.csr_matrix((data, (ri, ci)), shape=(2 * m, k))
        b = np.concatenate([dist[rows, cols], dist[rows, cols]])
    else:
        A, b = None, None
    res = linprog(-net, A_ub=A, b_ub=b, bounds=[(-1.0, 1.0)] * k, method="highs")
    if res.status != 0:
        raise RuntimeError(f"flat-distance LP failed: {res.message}")
    return float(np.clip(-res.fun, 0.0, 2.0))


def _dbl_single(mu: DiscreteMeasure, point: np.ndarray) -> float:
    gap = np.sqrt(np.sum((mu.atoms - point[None, :]) ** 2, axis=1))
    return float(np.dot(mu.masses, np.minimum(gap, 2.0)))


def _dbl_assignment(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    cost = np.minimum(_pairwise(mu.atoms, nu.atoms), 2.0)
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].mean())


def _is_uniform(m: DiscreteMeasure) -> bool:
    return bool(np.all(m.masses == m.masses[0]))


def dbl_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure, method: str = "auto") -> float:
    """Flat distance sup{int f d(mu - nu) : |f| <= 1, Lip(f) <= 1}.

    method: "auto", "lp", "assignment" (uniform, equal counts) or "single"
    (one side a single atom).
    """
    mu.check_normalized()
    nu.check_normalized()
    if mu.atoms.shape[1] != nu.atoms.shape[1]:
        raise DomainError("measures live in spaces of different dimension")
    if method == "auto":
        if len(nu.masses) == 1 or len(mu.masses) == 1:
            method = "single"
        elif len(mu.masses) == len(nu.masses) and _is_uniform(mu) and _is_uniform(nu):
            method = "assignment"
        else:
            method = "lp"
    if method == "lp":
        return _dbl_lp(mu, nu)
    if method == "single":
        if len(nu.masses) == 1:
            return _dbl_single(mu, nu.atoms[0])
        if len(mu.masses) == 1:
            return _dbl_single(nu, mu.atoms[0])
        raise DomainError("'single' needs a one-atom measure")
    if method == "assignment":
        if len(mu.masses) != len(nu.masses) or not (_is_uniform(mu) and _is_uniform(nu)):
            raise DomainError("'assignment' needs uniform measures with equal atom counts")
        return _dbl_assignment(mu, nu)
    raise DomainError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# fibered measures


@dataclass
class FiberedDiscreteMeasure:
    """n x n fibers with the same atom count k: atoms (n, n, k, D), masses (n, n, k)."""

    atoms: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=float)
        self.masses = np.asarray(self.masses, dtype=float)
        if self.atoms.ndim != 4 or self.masses.shape != self.atoms.shape[:3]:
            raise DomainError("fibered measure arrays have inconsistent shapes")
        if self.atoms.shape[0] != self.atoms.shape[1]:
            raise DomainError("fiber grid must be square")
        if np.any(np.abs(self.masses.sum(axis=-1) - 1.0) > MASS_TOL) or np.any(self.masses < 0):
            raise DomainError("every fiber must be a probability measure")

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    def fiber(self, i: int, j: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.atoms[i, j], self.masses[i, j])


def d1_fibered(
    mu: FiberedDiscreteMeasure,
    nu: FiberedDiscreteMeasure,
    method: str = "auto",
    workers: int = 1,
) -> float:
    """(1/n^2) sum over fibers of the flat distance."""
    if mu.atoms.shape[:2] != nu.atoms.shape[:2] or mu.atoms.shape[3] != nu.atoms.shape[3]:
        raise DomainError("fibered measures live on different grids")
    n = mu.n
    cells = [(i, j) for i in range(n) for j in range(n)]

    def one(c):
        return dbl_discrete(mu.fiber(*c), nu.fiber(*c), method)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(one, cells))
    else:
        vals = [one(c) for c in cells]
    return float(np.sum(vals) / (n * n))


def empirical_measures(state: ParticleState | GridSolution) -> FiberedDiscreteMeasure:
    """Fiber (i, j) is the Dirac mass at (x_i, x_j, w_ij)."""
    x, w = state.x, state.w
    n, d = x.shape
    atoms = np.concatenate(
        [
            np.broadcast_to(x[:, None, :], (n, n, d)),
            np.broadcast_to(x[None, :, :], (n, n, d)),
            w[:, :, None],
        ],
        axis=-1,
    )[:, :, None, :]
    return FiberedDiscreteMeasure(atoms, np.ones((n, n, 1)))


def ensemble_measures(ens: FiberedEnsemble) -> FiberedDiscreteMeasure:
    atoms = np.concatenate([ens.x, ens.y, ens.w[..., None]], axis=-1)
    return FiberedDiscreteMeasure(atoms, ens.masses)


def mean_measure(runs) -> FiberedDiscreteMeasure:
    """Uniform mixture of the runs, fiber by fiber."""
    runs = list(runs)
    if not runs:
        raise DomainError("mean_measure needs at least one run")
    shape = runs[0].atoms.shape
    for r in runs[1:]:
        if r.atoms.shape[:2] != shape[:2] or r.atoms.shape[3] != shape[3]:
            raise DomainError("runs live on different grids")
    R = len(runs)
    atoms = np.concatenate([r.atoms for r in runs], axis=2)
    masses = np.concatenate([r.masses for r in runs], axis=2) / R
    return FiberedDiscreteMeasure(atoms, masses)


def stacked_measures(x: np.ndarray, w: np.ndarray) -> FiberedDiscreteMeasure:
    """Mean measure of R Dirac configurations given as arrays x (R, N, d), w (R, N, N)."""
    R, n, d = x.shape
    atoms = np.concatenate(
        [
            np.broadcast_to(x[:, :, None, :], (R, n, n, d)),
            np.broadcast_to(x[:, None, :, :], (R, n, n, d)),
            w[..., None],
        ],
        axis=-1,
    )
    return FiberedDiscreteMeasure(np.moveaxis(atoms, 0, 2), np.full((n, n, R), 1.0 / R))


def write_measure_csv(measure: FiberedDiscreteMeasure, path, d: int) -> None:
    n, _, k, D = measure.atoms.shape
    if D != 2 * d + 1:
        raise DomainError("atom width does not match 2 d + 1")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["fiber_i", "fiber_j", "atom_index", "mass"]
                     + [f"x{c}" for c in range(d)] + [f"y{c}" for c in range(d)] + ["w"])
        for i in range(n):
            for j in range(n):
                for a in range(k):
                    out.writerow([i, j, a, repr(measure.masses[i, j, a])]
                                 + [repr(v) for v in measure.atoms[i, j, a]])
