"""Slow reference computations used only by the tests.

They share no code with the package: the flat distance is recomputed from the
transport side with a textbook dense simplex, and from the potential side by
enumerating the vertices of the feasible polytope.
"""

from __future__ import annotations

import itertools

import numpy as np


def simplex_min(c, A_eq, b_eq, max_iter=10_000, eps=1e-12):
    """min c.x s.t. A_eq x = b_eq, x >= 0 by the two-phase tableau method with Bland's rule."""
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase one: artificial basis
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n, n + m))
    T[m, :n] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    _pivot_loop(T, basis, n + m, max_iter, eps)
    if T[m, -1] < -1e-9:
        raise ValueError("infeasible")
    # drive remaining artificials out of the basis
    for r, var in enumerate(basis):
        if var >= n:
            cols = [j for j in range(n) if abs(T[r, j]) > eps]
            if cols:
                _pivot(T, basis, r, cols[0])
    T2 = np.zeros((m + 1, n + 1))
    T2[:m, :n] = T[:m, :n]
    T2[:m, -1] = T[:m, -1]
    T2[m, :n] = c
    for r, var in enumerate(basis):
        if var < n:
            T2[m] -= T2[m, var] * T2[r]
    basis = [v if v < n else -1 for v in basis]
    _pivot_loop(T2, basis, n, max_iter, eps)
    x = np.zeros(n)
    for r, var in enumerate(basis):
        if 0 <= var < n:
            x[var] = T2[r, -1]
    return float(c @ x), x


def _pivot(T, basis, r, col):
    T[r] /= T[r, col]
    for i in range(T.shape[0]):
        if i != r and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[r]
    basis[r] = col


def _pivot_loop(T, basis, ncols, max_iter, eps):
    m = T.shape[0] - 1
    for _ in range(max_iter):
        entering = next((j for j in range(ncols) if T[m, j] < -eps), None)
        if entering is None:
            return
        best, row = None, None
        for i in range(m):
            if T[i, entering] > eps:
                ratio = T[i, -1] / T[i, entering]
                if best is None or ratio < best - 1e-15 or (abs(ratio - best) <= 1e-15 and basis[i] < basis[row]):
                    best, row = ratio, i
        if row is None:
            raise ValueError("unbounded")
        _pivot(T, basis, row, entering)
    raise RuntimeError("simplex did not converge")


def _dist(a, b):
    return float(np.sqrt(np.sum((np.asarray(a) - np.asarray(b)) ** 2)))


def flat_distance_transport(atoms_a, masses_a, atoms_b, masses_b):
    """min over couplings of the expected truncated distance min(|a-b|, 2)."""
    ka, kb = len(masses_a), len(masses_b)
    cost = np.array([[min(_dist(a, b), 2.0) for b in atoms_b] for a in atoms_a]).reshape(-1)
    A = np.zeros((ka + kb, ka * kb))
    for i in range(ka):
        A[i, i * kb:(i + 1) * kb] = 1.0
    for j in range(kb):
        A[ka + j, j::kb] = 1.0
    b = np.concatenate([masses_a, masses_b])
    val, _ = simplex_min(cost, A, b)
    return val


def flat_distance_vertices(atoms_a, masses_a, atoms_b, masses_b):
    """Max of sum m_k f_k over every vertex of {|f_k| <= 1, f_k - f_l <= |z_k - z_l|}."""
    pts = [np.asarray(p, dtype=float) for p in list(atoms_a) + list(atoms_b)]
    net = np.concatenate([masses_a, -np.asarray(masses_b)])
    k = len(pts)
    rows, rhs = [], []
    for i in range(k):
        e = np.zeros(k)
        e[i] = 1.0
        rows += [e, -e]
        rhs += [1.0, 1.0]
    for i in range(k):
        for j in range(k):
            if i != j:
                e = np.zeros(k)
                e[i], e[j] = 1.0, -1.0
                rows.append(e)
                rhs.append(_dist(pts[i], pts[j]))
    G, h = np.array(rows), np.array(rhs)
    best = -np.inf
    for sub in itertools.combinations(range(len(h)), k):
        M = G[list(sub)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        f = np.linalg.solve(M, h[list(sub)])
        if np.all(G @ f <= h + 1e-9):
            best = max(best, float(net @ f))
    return best
