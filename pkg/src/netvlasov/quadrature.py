"""Per-cell quadrature rules on the uniform partition of [0, 1]."""

from __future__ import annotations

import re

import numpy as np

from .errors import DomainError


def parse_rule(rule: str) -> int:
    """Number of Gauss-Legendre nodes per cell; "midpoint" is the one-node rule."""
    if rule == "midpoint":
        return 1
    m = re.fullmatch(r"gauss_?(\d+)", rule)
    if not m or int(m.group(1)) < 1:
        raise DomainError(f"unknown quadrature {rule!r}; use 'midpoint' or 'gauss<q>'")
    return int(m.group(1))


def cell_nodes(n: int, rule: str) -> tuple[np.ndarray, np.ndarray]:
    """Nodes of shape (n, q) inside each cell [k/n, (k+1)/n) and weights (q,) summing to 1."""
    q = parse_rule(rule)
    ref, wts = np.polynomial.legendre.leggauss(q)
    offsets = 0.5 * (ref + 1.0)
    nodes = (np.arange(n)[:, None] + offsets[None, :]) / n
    return nodes, 0.5 * wts
