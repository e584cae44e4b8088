"""Command line entry point: ``netvlasov <command> [options]``."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import continuum, harness, intermediate, particle, vlasov
from .errors import NetVlasovError
from .kernels import get_lambda, get_phi, lambda_names, phi_names, validate_hypotheses


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="output directory (default: ./out)")
    p.add_argument("--threads", type=int, help="worker threads for fiber-level metric evaluation")
    p.add_argument("--dt", type=float, help="time step")
    p.add_argument("--horizon", type=float, help="final time T")


def _config(args, kind: str) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config, kind) if args.config else harness.default_config(kind)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.dt is not None:
        cfg.dt = args.dt
    if args.horizon is not None:
        cfg.T = args.horizon
    if args.threads is not None:
        cfg.workers = args.threads
    cfg.out = str(args.out or cfg.out or "out")
    return cfg.validate()


def _kernels(cfg):
    params = {} if cfg.lam == "zero" else {"rate": cfg.rate}
    return get_phi(cfg.phi, d=cfg.d), get_lambda(cfg.lam, d=cfg.d, **params)


def _finish(report: harness.RunReport, out: str) -> int:
    report.write(out)
    sys.stdout.write(report.as_text())
    return 0 if report.passed else 1


def cmd_simulate(args) -> int:
    cfg = _config(args, "bounds")
    phi, lam = _kernels(cfg)
    N = cfg.N[0]
    x, w = intermediate.random_initial_data(N, 1, cfg.d, cfg.seed, cfg.state_radius, cfg.weight_max)
    traj = particle.integrate_particle(particle.ParticleState(0.0, x[0], w[0]), phi, lam, cfg.mode,
                                       cfg.T, cfg.dt, cfg.record_every)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    particle.write_trajectory_csv(traj, out / "states.csv", out / "weights.csv")
    report = harness.RunReport("simulate", config={"N": N, "mode": cfg.mode, "phi": cfg.phi, "lam": cfg.lam,
                                                   "T": cfg.T, "dt": cfg.dt, "seed": cfg.seed})
    margin = particle.weight_bound_margin(traj, lam.growth)
    report.checks.append(harness._check("weight_bound_margin", margin, ">=", -1e-9))
    return _finish(report, cfg.out)


def cmd_continuum(args) -> int:
    cfg = _config(args, "graphlimit")
    phi, lam = _kernels(cfg)
    x0, w0 = harness._smooth_initial(cfg)
    sol0 = continuum.project_initial(x0, w0, cfg.n, "gauss2")
    traj = continuum.integrate_graph_limit(sol0, phi, lam, cfg.T, cfg.dt, cfg.record_every)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    continuum.write_grid_csv(traj, out / "grid_states.csv", out / "grid_weights.csv")
    report = harness.RunReport("continuum", config={"n": cfg.n, "phi": cfg.phi, "lam": cfg.lam,
                                                    "T": cfg.T, "dt": cfg.dt})
    report.checks.append(harness._flag("finite", bool(np.all(np.isfinite(traj.w)))))
    return _finish(report, cfg.out)


def cmd_vlasov(args) -> int:
    cfg = _config(args, "bounds")
    phi, lam = _kernels(cfg)
    sampler = vlasov.uniform_box_sampler(cfg.state_radius, cfg.weight_max, cfg.d)
    ens0 = vlasov.init_fibered(sampler, cfg.n, cfg.P, cfg.seed)
    traj = vlasov.integrate_vlasov(ens0, phi, lam, cfg.T, cfg.dt, cfg.record_every)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    vlasov.write_ensemble_csv(traj, out / "ensemble.csv")
    consts = vlasov.BoundConstants.from_ensemble(ens0, phi, lam, cfg.T)
    ap = vlasov.a_priori_checks(traj, consts)
    (out / "bounds.txt").write_text(ap.as_text() + "\n")
    report = harness.RunReport("vlasov", constants=consts.as_dict(),
                               config={"n": cfg.n, "P": cfg.P, "phi": cfg.phi, "lam": cfg.lam})
    for key in ("margin_support_x", "margin_support_y", "margin_weight", "margin_second_moment"):
        report.checks.append(harness._check(key, getattr(ap, key), ">=", -1e-9))
    return _finish(report, cfg.out)


def cmd_experiment(args) -> int:
    cfg = _config(args, args.kind)
    return _finish(harness.run_experiment(cfg), cfg.out)


def cmd_validate(args) -> int:
    seed = args.seed or 0
    report = harness.RunReport("validate-kernels")
    texts = []
    for name in phi_names():
        rep = validate_hypotheses(get_phi(name), (-2.0, 2.0), args.samples, seed)
        texts.append(rep.as_text())
        report.checks.append(harness._flag(f"phi.{name}", rep.passed))
    for name in lambda_names():
        rep = validate_hypotheses(get_lambda(name), (-2.0, 2.0), args.samples, seed)
        texts.append(rep.as_text())
        report.checks.append(harness._flag(f"lambda.{name}", rep.passed))
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    (out / "kernels.txt").write_text("\n\n".join(texts) + "\n")
    return _finish(report, str(out))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netvlasov", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="integrate one finite network")
    _common(p)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("continuum", help="integrate the graph limit on a grid")
    _common(p)
    p.set_defaults(func=cmd_continuum)
    p = sub.add_parser("vlasov", help="integrate a fibered ensemble and check the a priori bounds")
    _common(p)
    p.set_defaults(func=cmd_vlasov)
    p = sub.add_parser("experiment", help="run one of the experiments")
    p.add_argument("kind", choices=harness.KINDS)
    _common(p)
    p.set_defaults(func=cmd_experiment)
    p = sub.add_parser("validate-kernels", help="sampled hypothesis checks of the builtin kernels")
    _common(p)
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", None):
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    try:
        return args.func(args)
    except NetVlasovError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
