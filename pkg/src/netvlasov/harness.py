"""Experiment orchestration: configuration, the six experiments, rate fits and reports."""

from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import continuum, intermediate, metrics, particle, vlasov
from .errors import ConfigurationError, DomainError
from .kernels import get_lambda, get_phi, perturbed, remote_bump

KINDS = ("equivalence", "graphlimit", "meanfield", "coupling", "stability", "bounds")

# Config file sections and the fields each may set.
SECTIONS = {
    "kernels": ("phi", "lam", "d", "rate"),
    "time": ("T", "dt", "record_every"),
    "initial": ("state_radius", "weight_max"),
    "sizes": ("N", "n", "n_ref", "P", "R", "seeds"),
    "simulate": ("mode",),
    "stability": ("shifts", "bump_scales"),
    "reference": ("ref_grid", "ref_per_axis"),
    "run": ("seed", "workers", "out"),
}


@dataclass
class ExperimentConfig:
    kind: str = "equivalence"
    phi: str = "tanh-consensus"
    lam: str = "relax-to-H"
    d: int = 1
    rate: float = 1.0
    T: float = 1.0
    dt: float = 1e-3
    record_every: int = 1
    state_radius: float = 1.0
    weight_max: float = 1.0
    N: list = field(default_factory=lambda: [16])
    n: int = 16
    n_ref: int | None = None
    P: int = 1
    R: int = 100
    seeds: int = 10
    mode: str = "general"
    shifts: list = field(default_factory=lambda: [0.0, 0.05, 0.1])
    bump_scales: list = field(default_factory=lambda: [0.0, 0.05])
    ref_grid: int = 1
    ref_per_axis: int = 16
    seed: int = 0
    workers: int = 1
    out: str | None = None
    thresholds: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown experiment {self.kind!r}; choose from {KINDS}")
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not self.T >= 0:
            raise ConfigurationError("T must be nonnegative")
        sizes = list(self.N) + [self.n, self.P, self.R, self.seeds, self.d, self.ref_grid, self.ref_per_axis]
        if self.n_ref is not None:
            sizes.append(self.n_ref)
        if any(int(s) != s or s < 1 for s in sizes):
            raise ConfigurationError("all sizes must be positive integers")
        get_phi(self.phi, d=self.d)
        get_lambda(self.lam, d=self.d)
        return self

    def threshold(self, name: str):
        return self.thresholds[name]


DEFAULT_THRESHOLDS = {
    "equivalence": {"max_gap": 1e-10},
    "graphlimit": {"slope_max": -0.5},
    "meanfield": {"slope_max": -0.3},
    "coupling": {"slope_min": -0.8, "slope_max": -0.25, "comparison_slack": 1e-9},
    "stability": {"margin_min": 0.0, "zero_left_max": 1e-12},
    "bounds": {"margin_min": -1e-9},
}

DEFAULTS = {
    "equivalence": dict(N=[16], n=16, P=1, T=1.0, dt=1e-3, lam="relax-to-H"),
    "graphlimit": dict(N=[8, 16, 32, 64], n_ref=256, T=1.0, dt=1e-2, lam="gated-relax"),
    "meanfield": dict(N=[8, 16, 32, 64], R=200, T=0.5, dt=2.5e-2, mode="restricted",
                      ref_grid=1, ref_per_axis=16),
    "coupling": dict(N=[8, 16, 32], R=100, T=0.5, dt=2.5e-2, mode="restricted"),
    "stability": dict(n=4, P=16, T=0.5, dt=1e-2),
    "bounds": dict(N=[16], n=4, P=32, T=1.0, dt=1e-2, seeds=10),
}


def default_config(kind: str, **overrides) -> ExperimentConfig:
    if kind not in KINDS:
        raise ConfigurationError(f"unknown experiment {kind!r}; choose from {KINDS}")
    values = dict(DEFAULTS[kind])
    thresholds = dict(DEFAULT_THRESHOLDS[kind])
    thresholds.update(overrides.pop("thresholds", {}) or {})
    values.update(overrides)
    return ExperimentConfig(kind=kind, thresholds=thresholds, **values).validate()


def config_from_mapping(data: dict, kind: str | None = None) -> ExperimentConfig:
    """Flatten a nested mapping (as read from YAML) onto a config, with per-kind defaults."""
    data = dict(data or {})
    kind = kind or data.pop("kind", None) or "equivalence"
    data.pop("kind", None)
    values: dict = {}
    thresholds = data.pop("thresholds", {}) or {}
    if kind in thresholds and isinstance(thresholds[kind], dict):
        thresholds = thresholds[kind]
    for section, body in data.items():
        if section not in SECTIONS:
            raise ConfigurationError(f"unknown config section {section!r}; known: {sorted(SECTIONS)}")
        for key, val in (body or {}).items():
            if key not in SECTIONS[section]:
                raise ConfigurationError(f"unknown key {section}.{key}")
            values[key] = val
    if "N" in values and not isinstance(values["N"], list):
        values["N"] = [values["N"]]
    return default_config(kind, thresholds=thresholds, **values)


def load_config(path, kind: str | None = None) -> ExperimentConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a mapping")
    return config_from_mapping(data, kind)


# ---------------------------------------------------------------------------
# reports


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    relation: str  # "<=", ">=", "true"
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value!r} {self.relation} {self.threshold!r}"


def _check(name, value, relation, threshold) -> Check:
    value = float(value)
    if relation == "<=":
        ok = value <= threshold
    elif relation == ">=":
        ok = value >= threshold
    else:
        raise ValueError(relation)
    return Check(name, value, float(threshold), relation, bool(ok))


def _flag(name, ok: bool) -> Check:
    return Check(name, float(ok), 1.0, "true", bool(ok))


@dataclass
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    stderr: float


@dataclass
class RunReport:
    kind: str
    table: list = field(default_factory=list)
    fit: SlopeFit | None = None
    checks: list = field(default_factory=list)
    wall_clock: float = 0.0
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_text(self) -> str:
        lines = [f"experiment: {self.kind}", f"status: {'pass' if self.passed else 'fail'}",
                 f"wall_clock_s: {self.wall_clock:.3f}"]
        if self.fit is not None:
            lines += [f"slope: {self.fit.slope!r}", f"slope_stderr: {self.fit.stderr!r}",
                      f"intercept: {self.fit.intercept!r}", f"fit_residual: {self.fit.residual!r}"]
        for c in self.checks:
            lines.append(f"check.{c.name}: {'pass' if c.passed else 'fail'} value={c.value!r} "
                         f"{c.relation} {c.threshold!r}")
        for k, v in self.constants.items():
            lines.append(f"constant.{k}: {v!r}")
        for k, v in self.config.items():
            lines.append(f"config.{k}: {v!r}")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{self.kind}_report.txt").write_text(self.as_text())
        if self.table:
            with open(out / f"{self.kind}_table.csv", "w", newline="") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(self.table[0]))
                writer.writeheader()
                writer.writerows(self.table)
        return out


# ---------------------------------------------------------------------------
# rate fits


def fit_loglog(sizes, errors) -> SlopeFit:
    sizes = np.asarray(sizes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if sizes.shape != errors.shape or sizes.size < 3:
        raise DomainError("need at least three (size, error) pairs")
    if np.any(errors <= 0) or np.any(sizes <= 0):
        raise DomainError("sizes and errors must be positive")
    X = np.column_stack([np.log(sizes), np.ones_like(sizes)])
    y = np.log(errors)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(1, len(y) - 2)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(X.T @ X)
    return SlopeFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid ** 2))), float(np.sqrt(cov[0, 0])))


def fit_loglog_slope(sizes, errors) -> tuple[float, float, float]:
    """Least-squares line through (log N, log err): (slope, intercept, rms residual)."""
    f = fit_loglog(sizes, errors)
    return f.slope, f.intercept, f.residual


# ---------------------------------------------------------------------------
# experiments


def _kernels(cfg: ExperimentConfig):
    phi = get_phi(cfg.phi, d=cfg.d)
    params = {} if cfg.lam == "zero" else {"rate": cfg.rate}
    return phi, get_lambda(cfg.lam, d=cfg.d, **params)


def _random_network(cfg: ExperimentConfig, N: int, seed: int):
    x, w = intermediate.random_initial_data(N, 1, cfg.d, seed, cfg.state_radius, cfg.weight_max)
    return x[0], w[0]


def run_equivalence(cfg: ExperimentConfig, report: RunReport) -> None:
    phi, lam = _kernels(cfg)
    n = cfg.n
    x0, w0 = _random_network(cfg, n, cfg.seed)
    p = particle.integrate_particle(particle.ParticleState(0.0, x0, w0), phi, lam, "general",
                                    cfg.T, cfg.dt, cfg.record_every)
    c = continuum.integrate_graph_limit(continuum.GridSolution(0.0, x0, w0), phi, lam,
                                        cfg.T, cfg.dt, cfg.record_every)
    v = vlasov.integrate_vlasov(vlasov.ensemble_from_grid(continuum.GridSolution(0.0, x0, w0)), phi, lam,
                                cfg.T, cfg.dt, cfg.record_every)
    gaps = {
        "particle_vs_continuum": max(np.abs(p.x - c.x).max(), np.abs(p.w - c.w).max()),
        "continuum_vs_vlasov": max(
            np.abs(v.x[:, :, :, 0] - c.x[:, :, None, :]).max(),
            np.abs(v.y[:, :, :, 0] - c.x[:, None, :, :]).max(),
            np.abs(v.w[..., 0] - c.w).max(),
        ),
        "particle_vs_vlasov": max(
            np.abs(v.x[:, :, :, 0] - p.x[:, :, None, :]).max(),
            np.abs(v.y[:, :, :, 0] - p.x[:, None, :, :]).max(),
            np.abs(v.w[..., 0] - p.w).max(),
        ),
    }
    final_d1 = metrics.d1_fibered(metrics.empirical_measures(p.final), metrics.ensemble_measures(v.final))
    for k, g in gaps.items():
        report.table.append({"pair": k, "max_gap": float(g)})
    report.table.append({"pair": "d1_final_particle_vs_vlasov", "max_gap": final_d1})
    report.checks.append(_check("max_termwise_gap", max(gaps.values()), "<=", cfg.threshold("max_gap")))


def _smooth_initial(cfg: ExperimentConfig):
    r, m = cfg.state_radius, cfg.weight_max

    def x0(xi):
        base = r * np.cos(np.pi * np.asarray(xi))
        return np.repeat(base[..., None], cfg.d, axis=-1)

    def w0(xi, zeta):
        return m * np.sin(np.pi * np.abs(np.asarray(xi) - np.asarray(zeta)))

    return x0, w0


def run_graphlimit(cfg: ExperimentConfig, report: RunReport) -> None:
    phi, lam = _kernels(cfg)
    sizes = list(cfg.N)
    n_ref = cfg.n_ref or 4 * max(sizes)
    x0, w0 = _smooth_initial(cfg)
    ref0 = continuum.project_initial(x0, w0, n_ref, "gauss2")
    ref = continuum.integrate_graph_limit(ref0, phi, lam, cfg.T, cfg.dt, record_every=10 ** 9,
                                          freeze_diagonal=False).final
    ref_measure = metrics.empirical_measures(ref)
    errs = []
    for N in sizes:
        if n_ref % N:
            raise ConfigurationError(f"reference grid {n_ref} is not a multiple of N={N}")
        start = continuum.project_initial(x0, w0, N, "gauss2", zero_diagonal=True)
        traj = particle.integrate_particle(particle.ParticleState(0.0, start.x, start.w), phi, lam,
                                           "general", cfg.T, cfg.dt, record_every=10 ** 9)
        fin = continuum.GridSolution(traj.times[-1], traj.final.x, traj.final.w)
        ex, ew = continuum.l2_gap_parts(fin, ref)
        d1 = metrics.d1_fibered(metrics.empirical_measures(fin.refined(n_ref // N)), ref_measure,
                                workers=cfg.workers)
        errs.append(ex + ew)
        report.table.append({"N": N, "l2_gap": ex + ew, "l2_gap_x": ex, "l2_gap_w": ew, "d1": d1})
    report.fit = fit_loglog(sizes, errs)
    d1s = [row["d1"] for row in report.table]
    report.constants["n_ref"] = n_ref
    report.constants["d1_slope"] = fit_loglog(sizes, d1s).slope
    report.checks.append(_flag("l2_gap_monotone_decrease", all(b < a for a, b in zip(errs, errs[1:]))))
    report.checks.append(_check("l2_gap_slope", report.fit.slope, "<=", cfg.threshold("slope_max")))


def _meanfield_probes(sizes, samples: dict, ref_grid: int):
    """Probes that start at every run's own initial atoms, for every N at once."""
    rows, nodes = [], []
    ea, eb, exi, ezeta, ew = [], [], [], [], []
    spans = {}
    offset_nodes = 0
    offset_edges = 0
    for N in sizes:
        x, w = samples[N]  # (R, N, d), (R, N, N)
        R = x.shape[0]
        mid = (np.arange(N) + 0.5) / N
        node_id = offset_nodes + np.arange(R * N).reshape(R, N)
        rows.append(np.broadcast_to(vlasov.row_of(mid, ref_grid), (R, N)).reshape(-1))
        nodes.append(x.reshape(R * N, -1))
        # edge (r, i, j) carries x from node (r, i) and y from node (r, j)
        ea.append(np.broadcast_to(node_id[:, :, None], (R, N, N)).reshape(-1))
        eb.append(np.broadcast_to(node_id[:, None, :], (R, N, N)).reshape(-1))
        exi.append(np.broadcast_to(mid[None, :, None], (R, N, N)).reshape(-1))
        ezeta.append(np.broadcast_to(mid[None, None, :], (R, N, N)).reshape(-1))
        ew.append(w.reshape(-1))
        spans[N] = (offset_nodes, offset_edges)
        offset_nodes += R * N
        offset_edges += R * N * N
    probes = vlasov.ProbeSet(
        np.concatenate(rows), np.concatenate(nodes), np.concatenate(ea), np.concatenate(eb),
        np.concatenate(exi), np.concatenate(ezeta), np.concatenate(ew),
    )
    return probes, spans


def run_meanfield(cfg: ExperimentConfig, report: RunReport) -> None:
    phi, lam = _kernels(cfg)
    sizes = list(cfg.N)
    R = cfg.R
    samples = {N: intermediate.random_initial_data(N, R, cfg.d, cfg.seed + N, cfg.state_radius, cfg.weight_max)
               for N in sizes}
    if cfg.d != 1:
        raise ConfigurationError("the lattice reference law is implemented for d = 1")
    m = cfg.ref_per_axis
    ref0 = vlasov.init_fibered(vlasov.lattice_sampler(cfg.state_radius, cfg.weight_max, m), cfg.ref_grid, m ** 3)
    probes, spans = _meanfield_probes(sizes, samples, cfg.ref_grid)
    limit = vlasov.integrate_vlasov(ref0, phi, lam, cfg.T, cfg.dt, record_every=10 ** 9, probes=probes,
                                    freeze_diagonal=False)
    errs = []
    for N in sizes:
        x0, w0 = samples[N]
        _, xs, ws = particle.integrate_particle_arrays(x0, w0, phi, lam, cfg.mode, cfg.T, cfg.dt,
                                                       record_every=10 ** 9)
        mean = metrics.stacked_measures(xs[-1], ws[-1])
        n0, e0 = spans[N]
        node_x = limit.node_x[-1, n0:n0 + R * N].reshape(R, N, -1)
        edge_w = limit.edge_w[-1, e0:e0 + R * N * N].reshape(R, N, N)
        lim = metrics.stacked_measures(node_x, edge_w)
        d1 = metrics.d1_fibered(mean, lim, workers=cfg.workers)
        d1_init = metrics.d1_fibered(metrics.stacked_measures(x0, w0),
                                     metrics.stacked_measures(limit.node_x[0, n0:n0 + R * N].reshape(R, N, -1),
                                                              limit.edge_w[0, e0:e0 + R * N * N].reshape(R, N, N)),
                                     workers=cfg.workers)
        errs.append(d1)
        report.table.append({"N": N, "R": R, "d1": d1, "d1_initial": d1_init})
    report.fit = fit_loglog(sizes, errs)
    report.constants["reference_grid"] = cfg.ref_grid
    report.constants["reference_samples_per_fiber"] = m ** 3
    report.notes.append("limit measure: initial atoms of every run pushed along the limit flow, "
                        "force field from an equally weighted lattice ensemble of the initial law")
    report.checks.append(_flag("d1_strictly_decreasing", all(b < a for a, b in zip(errs, errs[1:]))))
    report.checks.append(_check("d1_slope", report.fit.slope, "<=", cfg.threshold("slope_max")))


def run_coupling(cfg: ExperimentConfig, report: RunReport) -> None:
    phi, lam = _kernels(cfg)
    sizes = list(cfg.N)
    errs = []
    worst_gap = -np.inf
    for N in sizes:
        seed = cfg.seed + N
        ens = intermediate.init_replicas(N, cfg.R, cfg.d, seed, cfg.state_radius, cfg.weight_max)
        inter = intermediate.integrate_intermediate(ens, phi, lam, cfg.T, cfg.dt, record_every=10 ** 9)
        times, px, pw = particle.integrate_particle_arrays(ens.x, ens.w, phi, lam, "restricted", cfg.T, cfg.dt,
                                                           record_every=10 ** 9)
        runs = intermediate.ReplicaTrajectory(times, px, pw, cfg.dt)
        ex, ew = intermediate.coupling_error_parts(runs, inter, times[-1])
        d1 = metrics.d1_fibered(metrics.stacked_measures(px[-1], pw[-1]),
                                metrics.stacked_measures(inter.x[-1], inter.w[-1]), workers=cfg.workers)
        worst_gap = max(worst_gap, d1 - (2 * ex + ew))
        errs.append(ex + ew)
        report.table.append({"t": float(times[-1]), "error_x": ex, "error_w": ew, "R": cfg.R, "N": N,
                             "seed": seed, "d1_particle_vs_intermediate": d1})
    report.fit = fit_loglog(sizes, errs)
    report.checks.append(_check("coupling_slope_lower", report.fit.slope, ">=", cfg.threshold("slope_min")))
    report.checks.append(_check("coupling_slope_upper", report.fit.slope, "<=", cfg.threshold("slope_max")))
    report.checks.append(_check("comparison_inequality_excess", worst_gap, "<=",
                                cfg.threshold("comparison_slack")))


def _perturbation_integral(mu0: vlasov.FiberedEnsemble, bar_s: vlasov.FiberedEnsemble, lam, lam_bar) -> float:
    """Average of |Lambda - Lambda_bar| over local samples of mu0 and remote samples of bar_s."""
    n, P, d = mu0.n, mu0.P, mu0.d
    mid = (np.arange(n) + 0.5) / n
    xi = np.broadcast_to(mid[:, None, None], (n, n, P)).reshape(-1)
    zeta = np.broadcast_to(mid[None, :, None], (n, n, P)).reshape(-1)
    lx, ly, lw = mu0.x.reshape(-1, d), mu0.y.reshape(-1, d), mu0.w.reshape(-1)
    rx, ry, rw = bar_s.x.reshape(-1, d), bar_s.y.reshape(-1, d), bar_s.w.reshape(-1)
    args = (xi[:, None], zeta[:, None], lx[:, None], ly[:, None], lw[:, None], rx[None], ry[None], rw[None])
    gap = np.abs(lam(*args) - lam_bar(*args))
    return float(np.mean(np.broadcast_to(gap, (len(lw), len(rw)))))


def run_stability(cfg: ExperimentConfig, report: RunReport) -> None:
    phi, lam = _kernels(cfg)
    base = vlasov.uniform_box_sampler(cfg.state_radius, cfg.weight_max, cfg.d)
    mu0 = vlasov.init_fibered(base, cfg.n, cfg.P, cfg.seed)
    mu = vlasov.integrate_vlasov(mu0, phi, lam, cfg.T, cfg.dt, cfg.record_every)
    mu_measures = [metrics.ensemble_measures(mu.state(k)) for k in range(len(mu.times))]
    for shift in cfg.shifts:
        for scale in cfg.bump_scales:
            lam_bar = perturbed(lam, remote_bump(cfg.d, scale))
            bar0 = vlasov.init_fibered(vlasov.shifted_sampler(base, shift), cfg.n, cfg.P, cfg.seed)
            bar = vlasov.integrate_vlasov(bar0, phi, lam_bar, cfg.T, cfg.dt, cfg.record_every)
            consts = vlasov.BoundConstants(
                R_X=float(max(np.linalg.norm(mu0.x, axis=-1).max(), np.linalg.norm(bar0.x, axis=-1).max())),
                R_Y=float(max(np.linalg.norm(mu0.y, axis=-1).max(), np.linalg.norm(bar0.y, axis=-1).max())),
                R_M=float(max(np.abs(mu0.w).max(), np.abs(bar0.w).max())),
                M_phi=phi.bound, C_lambda=max(lam.growth, lam_bar.growth),
                L_phi=phi.lipschitz, L_lambda=max(lam.lipschitz, lam_bar.lipschitz), T=cfg.T,
                m2_0=float(max(np.mean(mu0.w ** 2, -1).max(), np.mean(bar0.w ** 2, -1).max())),
                W_sup=float(max(np.abs(mu0.w).max(), np.abs(bar0.w).max())),
            )
            C3 = consts.C3
            left = np.array([metrics.d1_fibered(mu_measures[k], metrics.ensemble_measures(bar.state(k)),
                                                workers=cfg.workers) for k in range(len(bar.times))])
            integrand = np.array([_perturbation_integral(mu0, bar.state(k), lam, lam_bar)
                                  for k in range(len(bar.times))])
            elapsed = bar.times - bar.times[0]
            cumulative = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(elapsed) * (integrand[1:] + integrand[:-1]))])
            right = np.exp(4 * C3 * elapsed) * (left[0] + C3 * cumulative)
            margin = float(np.min(right - left))
            # at t = 0 both sides coincide, so the informative slack is the one after it
            later = float(np.min((right - left)[1:])) if len(left) > 1 else margin
            report.table.append({"shift": shift, "bump_scale": scale, "d1_initial": float(left[0]),
                                 "left_max": float(left.max()), "right_at_T": float(right[-1]),
                                 "margin": margin, "margin_after_t0": later, "C3": C3})
            report.checks.append(_check(f"margin[shift={shift},bump={scale}]", margin, ">=",
                                        cfg.threshold("margin_min")))
            if shift == 0 and scale == 0:
                report.checks.append(_check("identical_runs_left_side", float(left.max()), "<=",
                                            cfg.threshold("zero_left_max")))
            report.constants = consts.as_dict()


def run_bounds(cfg: ExperimentConfig, report: RunReport) -> None:
    phi, lam = _kernels(cfg)
    N = cfg.N[0]
    worst = {"weight_bound": np.inf, "support_x": np.inf, "support_y": np.inf,
             "weight_support": np.inf, "second_moment": np.inf}
    for s in range(cfg.seeds):
        seed = cfg.seed + s
        x0, w0 = _random_network(cfg, N, seed)
        traj = particle.integrate_particle(particle.ParticleState(0.0, x0, w0), phi, lam, cfg.mode,
                                           cfg.T, cfg.dt, cfg.record_every)
        wb = particle.weight_bound_margin(traj, lam.growth)
        ens0 = vlasov.init_fibered(vlasov.uniform_box_sampler(cfg.state_radius, cfg.weight_max, cfg.d),
                                   cfg.n, cfg.P, seed)
        vt = vlasov.integrate_vlasov(ens0, phi, lam, cfg.T, cfg.dt, cfg.record_every)
        consts = vlasov.BoundConstants.from_ensemble(ens0, phi, lam, cfg.T)
        ap = vlasov.a_priori_checks(vt, consts)
        row = {"seed": seed, "weight_bound": wb, "support_x": ap.margin_support_x,
               "support_y": ap.margin_support_y, "weight_support": ap.margin_weight,
               "second_moment": ap.margin_second_moment, "weight_support_gronwall": ap.margin_weight_gronwall}
        report.table.append(row)
        for k in worst:
            worst[k] = min(worst[k], row[k])
        report.constants = consts.as_dict()
    for k, v in worst.items():
        report.checks.append(_check(f"min_margin_{k}", v, ">=", cfg.threshold("margin_min")))


_RUNNERS = {
    "equivalence": run_equivalence,
    "graphlimit": run_graphlimit,
    "meanfield": run_meanfield,
    "coupling": run_coupling,
    "stability": run_stability,
    "bounds": run_bounds,
}


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    cfg.validate()
    report = RunReport(cfg.kind, config={k: v for k, v in asdict(cfg).items() if k != "thresholds"})
    report.config.update({f"threshold.{k}": v for k, v in cfg.thresholds.items()})
    start = time.perf_counter()
    _RUNNERS[cfg.kind](cfg, report)
    report.wall_clock = time.perf_counter() - start
    if cfg.out:
        report.write(cfg.out)
    return report
