"""Right-hand sides shared by the particle and graph-limit solvers.

All functions accept arbitrary leading batch axes: x has shape (..., N, d) and
w has shape (..., N, N).
"""

from __future__ import annotations

import numpy as np

from .kernels import KernelSpec, WeightDynamicsSpec

# element budget for temporary (N, N, N) style blocks in the generic path
_BLOCK_ELEMS = 4_000_000


def cell_midpoints(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def state_drift(t: float, x: np.ndarray, w: np.ndarray, phi: KernelSpec) -> np.ndarray:
    """dx_i = (1/N) sum_j w_ij phi(t, x_i, x_j)."""
    n = x.shape[-2]
    pull = phi.evaluator(t, x[..., :, None, :], x[..., None, :, :])
    return np.sum(w[..., None] * pull, axis=-2) / n


def weight_drift_separable(
    xi: np.ndarray,
    zeta: np.ndarray,
    x: np.ndarray,
    w: np.ndarray,
    lam: WeightDynamicsSpec,
    restricted: bool,
) -> np.ndarray:
    """dw_ij = (1/N^2) sum_k a_k(local_ij) <b_k>, remote sums possibly excluding index i."""
    n = x.shape[-2]
    xi_b = xi[:, None]
    zeta_b = zeta[None, :]
    xl, yl = x[..., :, None, :], x[..., None, :, :]
    out = np.zeros(w.shape)
    for a, b in lam.separable_form:
        remote = np.broadcast_to(b(xl, yl, w), w.shape)
        total = np.sum(remote, axis=(-2, -1))
        if restricted:
            diag = np.diagonal(remote, axis1=-2, axis2=-1)
            moment = (total[..., None] - remote.sum(axis=-1) - remote.sum(axis=-2) + diag)[..., :, None]
        else:
            moment = total[..., None, None]
        out = out + a(xi_b, zeta_b, xl, yl, w) * moment
    return out / (n * n)


def weight_drift_generic(
    xi: np.ndarray,
    zeta: np.ndarray,
    x: np.ndarray,
    w: np.ndarray,
    lam: WeightDynamicsSpec,
    restricted: bool,
) -> np.ndarray:
    """Direct O(N^4) evaluation of the weight drift."""
    batch = x.shape[:-2]
    n, d = x.shape[-2], x.shape[-1]
    xs = x.reshape((-1, n, d))
    ws = w.reshape((-1, n, n))
    out = np.empty(ws.shape)
    rows = max(1, _BLOCK_ELEMS // max(1, n ** 3))
    # remote edges (i1, j1) laid out on the last two axes
    for b_idx in range(xs.shape[0]):
        xb, wb = xs[b_idx], ws[b_idx]
        xt = xb[:, None, :]
        yt = xb[None, :, :]
        for start in range(0, n, rows):
            ii = np.arange(start, min(n, start + rows))
            vals = lam.evaluator(
                xi[ii][:, None, None, None],
                zeta[None, :, None, None],
                xb[ii][:, None, None, None, :],
                xb[None, :, None, None, :],
                wb[ii][:, :, None, None],
                xt[None, None],
                yt[None, None],
                wb[None, None],
            )
            vals = np.broadcast_to(vals, (len(ii), n, n, n))
            if restricted:
                keep = np.ones((len(ii), 1, n, n), dtype=bool)
                for k, i in enumerate(ii):
                    keep[k, 0, i, :] = False
                    keep[k, 0, :, i] = False
                vals = np.where(keep, vals, 0.0)
            out[b_idx, ii] = vals.sum(axis=(-2, -1))
    return out.reshape(batch + (n, n)) / (n * n)


def weight_drift(xi, zeta, x, w, lam: WeightDynamicsSpec, restricted: bool, path: str = "auto"):
    if path == "auto":
        path = "separable" if lam.separable_form is not None else "generic"
    if path == "separable":
        return weight_drift_separable(xi, zeta, x, w, lam, restricted)
    if path == "generic":
        return weight_drift_generic(xi, zeta, x, w, lam, restricted)
    raise ValueError(f"unknown path {path!r}")


def zero_diagonal(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    idx = np.arange(n)
    a[..., idx, idx] = 0.0
    return a
