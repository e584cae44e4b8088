"""Interaction functions and weight dynamics.

Evaluators are vectorized numpy callables.  State arguments carry a trailing
axis of length d and broadcast against each other; weights and identities are
plain arrays of the matching leading shape.

* interaction ``phi(t, x, y)``: x, y of shape (..., d) -> drift of shape (..., d)
* weight dynamics ``lam(xi, zeta, x, y, w, xt, yt, wt)`` -> shape (...)

A weight dynamics may also declare a separable form: a list of pairs
``(a_k, b_k)`` with ``a_k(xi, zeta, x, y, w)`` depending on the local edge and
``b_k(xt, yt, wt)`` on the remote one, such that ``lam == sum_k a_k * b_k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

PhiFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
LambdaFn = Callable[..., np.ndarray]
LocalFactor = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]
RemoteFactor = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

# max |d/ds 1/(1+s^2)|, attained at s = 1/sqrt(3)
SIMILARITY_SLOPE = 3.0 * np.sqrt(3.0) / 8.0


@dataclass(frozen=True)
class KernelSpec:
    name: str
    evaluator: PhiFn
    bound: float
    lipschitz: float
    dim: int | None = None

    def __call__(self, t, x, y):
        return self.evaluator(t, x, y)


@dataclass(frozen=True)
class WeightDynamicsSpec:
    name: str
    evaluator: LambdaFn
    growth: float
    lipschitz: float
    x_independent: bool = False
    separable_form: tuple[tuple[LocalFactor, RemoteFactor], ...] | None = None
    dim: int | None = None

    def __call__(self, xi, zeta, x, y, w, xt, yt, wt):
        return self.evaluator(xi, zeta, x, y, w, xt, yt, wt)

    @property
    def separable(self) -> bool:
        return self.separable_form is not None


def _as_state(v, name: str) -> np.ndarray:
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.ndim != 1:
        raise DomainError(f"{name} must be a vector")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"non-finite {name}")
    return a


def _as_scalar(v, name: str) -> float:
    a = float(v)
    if not np.isfinite(a):
        raise DomainError(f"non-finite {name}")
    return a


def eval_phi(spec: KernelSpec, t: float, x, y) -> np.ndarray:
    """Pointwise interaction drift; returns a vector of the state dimension."""
    t = _as_scalar(t, "t")
    x, y = _as_state(x, "x"), _as_state(y, "y")
    if x.shape != y.shape:
        raise DomainError("x and y must have the same dimension")
    return np.asarray(spec.evaluator(t, x, y), dtype=float).reshape(x.shape)


def eval_lambda(spec: WeightDynamicsSpec, xi, zeta, x, y, w, xt, yt, wt) -> float:
    xi, zeta = _as_scalar(xi, "xi"), _as_scalar(zeta, "zeta")
    if not (0.0 <= xi <= 1.0 and 0.0 <= zeta <= 1.0):
        raise DomainError("identities must lie in [0, 1]")
    x, y = _as_state(x, "x"), _as_state(y, "y")
    xt, yt = _as_state(xt, "xt"), _as_state(yt, "yt")
    w, wt = _as_scalar(w, "w"), _as_scalar(wt, "wt")
    return float(spec.evaluator(xi, zeta, x, y, w, xt, yt, wt))


def separable_sum(spec: WeightDynamicsSpec, xi, zeta, x, y, w, xt, yt, wt) -> np.ndarray:
    """Evaluate sum_k a_k * b_k; used to cross-check the declared factorization."""
    if spec.separable_form is None:
        raise ConfigurationError(f"{spec.name} declares no separable form")
    total = 0.0
    for a, b in spec.separable_form:
        total = total + a(xi, zeta, x, y, w) * b(xt, yt, wt)
    return np.asarray(total, dtype=float)


# ---------------------------------------------------------------------------
# builtin catalog


def similarity(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """H(a, b) = 1 / (1 + |a - b|^2)."""
    diff = a - b
    return 1.0 / (1.0 + np.sum(diff * diff, axis=-1))


def _zero_like_weight(w):
    return np.zeros(np.shape(w))


def tanh_consensus(d: int = 1) -> KernelSpec:
    """Componentwise tanh(y - x); scalar tanh(y - x) when d = 1."""

    def phi(t, x, y):
        return np.tanh(y - x)

    return KernelSpec("tanh-consensus", phi, bound=float(np.sqrt(d)), lipschitz=1.0, dim=d)


def bounded_confidence(d: int = 1) -> KernelSpec:
    """Smooth bounded-confidence attraction (y - x) exp(-|y - x|^2)."""

    def phi(t, x, y):
        diff = y - x
        return diff * np.exp(-np.sum(diff * diff, axis=-1, keepdims=True))

    return KernelSpec(
        "bounded-confidence", phi, bound=float(np.exp(-0.5) / np.sqrt(2.0)), lipschitz=1.0, dim=d
    )


def zero_interaction(d: int = 1) -> KernelSpec:
    def phi(t, x, y):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))

    return KernelSpec("zero", phi, bound=0.0, lipschitz=0.0, dim=d)


def relax_to_similarity(d: int = 1, rate: float = 1.0) -> WeightDynamicsSpec:
    """rate * (H(xt, yt) - w): each edge relaxes toward the mean remote similarity."""

    def lam(xi, zeta, x, y, w, xt, yt, wt):
        return rate * (similarity(xt, yt) - w)

    def a_const(xi, zeta, x, y, w):
        return np.full(np.shape(w), rate)

    def a_decay(xi, zeta, x, y, w):
        return -rate * np.asarray(w, dtype=float)

    def b_sim(xt, yt, wt):
        return similarity(xt, yt)

    def b_one(xt, yt, wt):
        return np.ones(np.shape(wt))

    return WeightDynamicsSpec(
        "relax-to-H",
        lam,
        growth=rate,
        lipschitz=rate,
        x_independent=True,
        separable_form=((a_const, b_sim), (a_decay, b_one)),
        dim=d,
    )


def modulated_relax(d: int = 1, rate: float = 1.0) -> WeightDynamicsSpec:
    """rate * (c(xi, zeta) H(xt, yt) - w) with identity profile c = (1 + xi*zeta)/2."""

    def profile(xi, zeta):
        return 0.5 * (1.0 + np.asarray(xi) * np.asarray(zeta))

    def lam(xi, zeta, x, y, w, xt, yt, wt):
        return rate * (profile(xi, zeta) * similarity(xt, yt) - w)

    def a_prof(xi, zeta, x, y, w):
        return rate * np.broadcast_to(profile(xi, zeta), np.shape(w))

    def a_decay(xi, zeta, x, y, w):
        return -rate * np.asarray(w, dtype=float)

    def b_sim(xt, yt, wt):
        return similarity(xt, yt)

    def b_one(xt, yt, wt):
        return np.ones(np.shape(wt))

    return WeightDynamicsSpec(
        "modulated-relax",
        lam,
        growth=rate,
        lipschitz=rate,
        x_independent=True,
        separable_form=((a_prof, b_sim), (a_decay, b_one)),
        dim=d,
    )


def gated_relax(d: int = 1, rate: float = 1.0, weight_cap: float = 2.0) -> WeightDynamicsSpec:
    """rate * (1 - H(x, y)) (H(xt, yt) - w).

    Edges between agents in the same state do not move, so the weight
    dynamics vanish on x = y. The declared Lipschitz constant holds on
    |w| <= weight_cap.
    """

    def gate(x, y):
        return 1.0 - similarity(x, y)

    def lam(xi, zeta, x, y, w, xt, yt, wt):
        return rate * gate(x, y) * (similarity(xt, yt) - w)

    def a_gate(xi, zeta, x, y, w):
        return rate * np.broadcast_to(gate(x, y), np.shape(w))

    def a_decay(xi, zeta, x, y, w):
        return -rate * gate(x, y) * np.asarray(w, dtype=float)

    def b_sim(xt, yt, wt):
        return similarity(xt, yt)

    def b_one(xt, yt, wt):
        return np.ones(np.shape(wt))

    lip = rate * max(1.0, SIMILARITY_SLOPE * (1.0 + weight_cap))
    return WeightDynamicsSpec(
        "gated-relax",
        lam,
        growth=rate,
        lipschitz=lip,
        x_independent=False,
        separable_form=((a_gate, b_sim), (a_decay, b_one)),
        dim=d,
    )


def remote_bump(d: int = 1, scale: float = 1.0) -> WeightDynamicsSpec:
    """scale * exp(-|yt|^2): a bounded, smooth perturbation of any weight dynamics."""

    def lam(xi, zeta, x, y, w, xt, yt, wt):
        return scale * np.exp(-np.sum(yt * yt, axis=-1)) * np.ones(np.shape(w))

    def a_scale(xi, zeta, x, y, w):
        return np.full(np.shape(w), scale)

    def b_bump(xt, yt, wt):
        return np.exp(-np.sum(yt * yt, axis=-1)) * np.ones(np.shape(wt))

    return WeightDynamicsSpec(
        "remote-bump",
        lam,
        growth=abs(scale),
        lipschitz=abs(scale) * float(np.sqrt(2.0) * np.exp(-0.5)),
        x_independent=True,
        separable_form=((a_scale, b_bump),),
        dim=d,
    )


def zero_dynamics(d: int = 1) -> WeightDynamicsSpec:
    def lam(xi, zeta, x, y, w, xt, yt, wt):
        return np.zeros(np.broadcast_shapes(np.shape(w), np.shape(wt), np.shape(xt)[:-1]))

    def a_zero(xi, zeta, x, y, w):
        return _zero_like_weight(w)

    def b_zero(xt, yt, wt):
        return _zero_like_weight(wt)

    return WeightDynamicsSpec(
        "zero", lam, growth=0.0, lipschitz=0.0, x_independent=True,
        separable_form=((a_zero, b_zero),), dim=d,
    )


def perturbed(base: WeightDynamicsSpec, bump: WeightDynamicsSpec) -> WeightDynamicsSpec:
    """base + bump, keeping a separable form when both have one."""

    def lam(*args):
        return base.evaluator(*args) + bump.evaluator(*args)

    form = None
    if base.separable_form is not None and bump.separable_form is not None:
        form = tuple(base.separable_form) + tuple(bump.separable_form)
    return WeightDynamicsSpec(
        f"{base.name}+{bump.name}",
        lam,
        growth=base.growth + bump.growth,
        lipschitz=base.lipschitz + bump.lipschitz,
        x_independent=base.x_independent and bump.x_independent,
        separable_form=form,
        dim=base.dim,
    )


_PHI_CATALOG: dict[str, Callable[..., KernelSpec]] = {
    "tanh-consensus": tanh_consensus,
    "bounded-confidence": bounded_confidence,
    "zero": zero_interaction,
}
_LAMBDA_CATALOG: dict[str, Callable[..., WeightDynamicsSpec]] = {
    "relax-to-H": relax_to_similarity,
    "modulated-relax": modulated_relax,
    "gated-relax": gated_relax,
    "remote-bump": remote_bump,
    "zero": zero_dynamics,
}


def register_phi(name: str, factory: Callable[..., KernelSpec]) -> None:
    _PHI_CATALOG[name] = factory


def register_lambda(name: str, factory: Callable[..., WeightDynamicsSpec]) -> None:
    _LAMBDA_CATALOG[name] = factory


def phi_names() -> list[str]:
    return sorted(_PHI_CATALOG)


def lambda_names() -> list[str]:
    return sorted(_LAMBDA_CATALOG)


def get_phi(name: str, d: int = 1, **params) -> KernelSpec:
    try:
        factory = _PHI_CATALOG[name]
    except KeyError:
        raise ConfigurationError(f"unknown interaction kernel {name!r}; known: {phi_names()}") from None
    return factory(d=d, **params)


def get_lambda(name: str, d: int = 1, **params) -> WeightDynamicsSpec:
    try:
        factory = _LAMBDA_CATALOG[name]
    except KeyError:
        raise ConfigurationError(f"unknown weight dynamics {name!r}; known: {lambda_names()}") from None
    return factory(d=d, **params)


# ---------------------------------------------------------------------------
# sampled hypothesis validation


@dataclass
class ValidationReport:
    name: str
    kind: str
    samples: int
    max_abs_value: float
    max_bound_ratio: float
    declared_bound: float
    max_lipschitz_quotient: float
    declared_lipschitz: float
    diagonal_violations: int = 0
    structural_zero_violations: int = 0
    x_independence_violations: int = 0
    separable_max_error: float = 0.0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_text(self) -> str:
        rows = [
            ("kernel", self.name),
            ("kind", self.kind),
            ("samples", self.samples),
            ("max_abs_value", f"{self.max_abs_value:.6g}"),
            ("max_bound_ratio", f"{self.max_bound_ratio:.6g}"),
            ("declared_bound", f"{self.declared_bound:.6g}"),
            ("max_lipschitz_quotient", f"{self.max_lipschitz_quotient:.6g}"),
            ("declared_lipschitz", f"{self.declared_lipschitz:.6g}"),
            ("diagonal_violations", self.diagonal_violations),
            ("structural_zero_violations", self.structural_zero_violations),
            ("x_independence_violations", self.x_independence_violations),
            ("separable_max_error", f"{self.separable_max_error:.3g}"),
            ("status", "pass" if self.passed else "FAIL"),
        ]
        lines = [f"{k}: {v}" for k, v in rows]
        lines += [f"failure: {msg}" for msg in self.failures]
        return "\n".join(lines)


def _pair_samples(rng, lo, hi, count, width):
    """Half independent pairs, half close pairs (to probe the local slope)."""
    a = rng.uniform(lo, hi, size=(count, width))
    far = rng.uniform(lo, hi, size=(count, width))
    near = a + rng.normal(scale=1e-3 * (hi - lo), size=(count, width))
    use_near = (np.arange(count) % 2 == 1)[:, None]
    return a, np.where(use_near, near, far)


def validate_hypotheses(
    spec: KernelSpec | WeightDynamicsSpec,
    domain_box: tuple[float, float] = (-2.0, 2.0),
    sample_count: int = 10_000,
    seed: int = 0,
    d: int | None = None,
    tol: float = 1e-6,
) -> ValidationReport:
    """Sample-based check of boundedness, Lipschitz continuity and structure.

    Every coordinate (states and weights) is drawn from ``domain_box``.
    Lipschitz quotients use the sum of component distances, with the
    Euclidean norm inside each state component.
    """
    if sample_count < 1:
        raise DomainError("sample_count must be >= 1")
    lo, hi = map(float, domain_box)
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise DomainError("domain_box must be a finite nonempty interval")
    d = d or spec.dim or 1
    rng = np.random.default_rng(seed)
    if isinstance(spec, KernelSpec):
        return _validate_phi(spec, lo, hi, sample_count, rng, d, tol)
    return _validate_lambda(spec, lo, hi, sample_count, rng, d, tol)


def _validate_phi(spec, lo, hi, count, rng, d, tol):
    t = rng.uniform(0.0, 1.0, size=(count, 1))
    z1, z2 = _pair_samples(rng, lo, hi, count, 2 * d)
    x1, y1, x2, y2 = z1[:, :d], z1[:, d:], z2[:, :d], z2[:, d:]
    v1 = np.asarray(spec.evaluator(t, x1, y1), dtype=float).reshape(count, -1)
    v2 = np.asarray(spec.evaluator(t, x2, y2), dtype=float).reshape(count, -1)
    max_abs = float(np.max(np.linalg.norm(v1, axis=1)))
    dist = np.linalg.norm(x1 - x2, axis=1) + np.linalg.norm(y1 - y2, axis=1)
    ok = dist > 0
    quot = np.linalg.norm(v1 - v2, axis=1)[ok] / dist[ok]
    max_q = float(quot.max()) if quot.size else 0.0
    diag = np.asarray(spec.evaluator(t, x1, x1), dtype=float).reshape(count, -1)
    diag_bad = int(np.sum(np.linalg.norm(diag, axis=1) > 1e-12))

    rep = ValidationReport(
        spec.name, "interaction", count, max_abs, max_abs, spec.bound, max_q, spec.lipschitz,
        diagonal_violations=diag_bad,
    )
    if not np.all(np.isfinite(v1)):
        rep.failures.append("non-finite value")
    if max_abs > spec.bound * (1 + tol) + tol:
        rep.failures.append(f"|phi| reached {max_abs:.6g} > declared {spec.bound:.6g}")
    if max_q > spec.lipschitz * (1 + tol) + tol:
        rep.failures.append(f"Lipschitz quotient {max_q:.6g} > declared {spec.lipschitz:.6g}")
    if diag_bad:
        rep.failures.append(f"phi(t, x, x) != 0 at {diag_bad} samples")
    return rep


_SAME_TYPE_PAIRS = [("x", "y"), ("x", "xt"), ("x", "yt"), ("y", "xt"), ("y", "yt"), ("xt", "yt"), ("w", "wt")]


def _unpack(z, d):
    return {
        "x": z[:, 0:d], "y": z[:, d:2 * d], "w": z[:, 2 * d],
        "xt": z[:, 2 * d + 1:3 * d + 1], "yt": z[:, 3 * d + 1:4 * d + 1], "wt": z[:, 4 * d + 1],
    }


def _call_lambda(fn, ids, a):
    return np.asarray(fn(ids[0], ids[1], a["x"], a["y"], a["w"], a["xt"], a["yt"], a["wt"]), dtype=float)


def _validate_lambda(spec, lo, hi, count, rng, d, tol):
    width = 4 * d + 2
    ids = (rng.uniform(0, 1, size=count), rng.uniform(0, 1, size=count))
    z1, z2 = _pair_samples(rng, lo, hi, count, width)
    a1, a2 = _unpack(z1, d), _unpack(z2, d)
    v1 = _call_lambda(spec.evaluator, ids, a1).reshape(count)
    v2 = _call_lambda(spec.evaluator, ids, a2).reshape(count)
    growth = np.abs(v1) / (1.0 + np.abs(a1["w"]))
    max_growth = float(growth.max())
    dist = sum(np.linalg.norm(a1[k] - a2[k], axis=1) for k in ("x", "y", "xt", "yt"))
    dist = dist + np.abs(a1["w"] - a2["w"]) + np.abs(a1["wt"] - a2["wt"])
    ok = dist > 0
    quot = np.abs(v1 - v2)[ok] / dist[ok]
    max_q = float(quot.max()) if quot.size else 0.0

    structural = 0
    for left, right in _SAME_TYPE_PAIRS:
        b = dict(a1)
        b[right] = a1[left]
        structural += int(np.sum(np.abs(_call_lambda(spec.evaluator, ids, b)) > 1e-12))

    x_bad = 0
    if spec.x_independent:
        b = dict(a1)
        b["x"] = rng.uniform(lo, hi, size=a1["x"].shape)
        x_bad = int(np.sum(_call_lambda(spec.evaluator, ids, b).reshape(count) != v1))

    sep_err = 0.0
    if spec.separable_form is not None:
        s = separable_sum(spec, ids[0], ids[1], a1["x"], a1["y"], a1["w"], a1["xt"], a1["yt"], a1["wt"])
        sep_err = float(np.max(np.abs(s.reshape(count) - v1)))

    rep = ValidationReport(
        spec.name, "weight-dynamics", count, float(np.abs(v1).max()), max_growth,
        spec.growth, max_q, spec.lipschitz,
        structural_zero_violations=structural,
        x_independence_violations=x_bad,
        separable_max_error=sep_err,
    )
    if not np.all(np.isfinite(v1)):
        rep.failures.append("non-finite value")
    if max_growth > spec.growth * (1 + tol) + tol:
        rep.failures.append(f"|Lambda|/(1+|w|) reached {max_growth:.6g} > declared {spec.growth:.6g}")
    if max_q > spec.lipschitz * (1 + tol) + tol:
        rep.failures.append(f"Lipschitz quotient {max_q:.6g} > declared {spec.lipschitz:.6g}")
    if x_bad:
        rep.failures.append(f"declared x-independent but x changes the value at {x_bad} samples")
    if sep_err > 1e-12:
        rep.failures.append(f"separable form deviates by {sep_err:.3g}")
    return rep
