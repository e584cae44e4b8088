from dataclasses import replace

import numpy as np
import pytest

from netvlasov.continuum import GridSolution, graph_limit_rhs, integrate_graph_limit
from netvlasov.errors import InitializationError
from netvlasov.kernels import WeightDynamicsSpec, get_lambda, get_phi, similarity
from netvlasov.vlasov import (
    BoundConstants,
    FiberedEnsemble,
    a_priori_checks,
    ensemble_from_grid,
    init_fibered,
    integrate_vlasov,
    lattice_sampler,
    row_of,
    shifted_sampler,
    uniform_box_sampler,
    vlasov_force,
    vlasov_rhs,
    write_ensemble_csv,
)

TANH = get_phi("tanh-consensus")
RELAX = get_lambda("relax-to-H")
GATED = get_lambda("gated-relax")
ZERO_PHI = get_phi("zero")
ZERO_LAM = get_lambda("zero")
BOX = uniform_box_sampler(1.0, 1.0, 1)


def random_grid(n, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 1, (n, n))
    np.fill_diagonal(w, 0.0)
    return GridSolution(0.0, rng.uniform(-1, 1, (n, 1)), w)


def test_dirac_fibers_from_grid():
    sol = random_grid(4, 0)
    ens = ensemble_from_grid(sol)
    assert ens.P == 1
    assert ens.x[1, 3, 0, 0] == sol.x[1, 0] and ens.y[1, 3, 0, 0] == sol.x[3, 0]
    assert ens.w[1, 3, 0] == sol.w[1, 3]


def test_uniform_sampler_means_clt():
    P = 64
    ens = init_fibered(BOX, 3, P, seed=0)
    # uniform on [-1, 1]: sigma = 1/sqrt(3); on [0, 1]: sigma = 1/sqrt(12)
    assert np.all(np.abs(ens.x.mean(axis=2)) <= 4 / np.sqrt(3) / np.sqrt(P))
    assert np.all(np.abs(ens.w.mean(axis=2) - 0.5) <= 4 / np.sqrt(12) / np.sqrt(P))


def test_init_is_reproducible_and_fiber_keyed():
    a = init_fibered(BOX, 3, 8, seed=5)
    b = init_fibered(BOX, 3, 8, seed=5)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.w, b.w)
    assert not np.array_equal(a.x[0, 1], a.x[1, 0])


def test_init_errors():
    with pytest.raises(InitializationError):
        init_fibered(BOX, 2, 0)
    with pytest.raises(InitializationError):
        init_fibered(uniform_box_sampler(2.0, 1.0), 2, 16, support=(1.0, 1.0, 1.0))
    with pytest.raises(InitializationError):
        init_fibered(lattice_sampler(per_axis=3), 1, 26)


def test_lattice_and_shift():
    ens = init_fibered(shifted_sampler(lattice_sampler(per_axis=4), 0.1), 1, 64)
    assert ens.x.mean() == pytest.approx(0.1) and ens.w.mean() == pytest.approx(0.5)


def test_row_of_clamps_right_end():
    assert list(row_of([0.0, 0.49, 0.5, 1.0], 2)) == [0, 0, 1, 1]


def test_zero_weights_zero_state_force():
    ens = init_fibered(BOX, 3, 4, seed=1)
    ens = FiberedEnsemble(0.0, ens.x, ens.y, np.zeros_like(ens.w))
    fx, fy, _ = vlasov_force(ens, TANH, RELAX, (1, 2), 3)
    assert np.all(fx == 0) and np.all(fy == 0)


def test_dirac_force_equals_grid_rhs():
    sol = random_grid(5, 2)
    ens = ensemble_from_grid(sol)
    dx, dw = graph_limit_rhs(sol, TANH, GATED)
    for i, j in [(0, 1), (3, 2), (4, 4)]:
        fx, fy, fw = vlasov_force(ens, TANH, GATED, (i, j), 0)
        assert np.allclose(fx, dx[i], atol=1e-15) and np.allclose(fy, dx[j], atol=1e-15)
        assert fw == pytest.approx(dw[i, j], abs=1e-15)


def test_hand_computed_force_two_fibers():
    x = np.array([0.1, -0.3, 0.5, 0.2]).reshape(2, 2, 1, 1)
    y = np.array([0.4, 0.0, -0.6, 0.9]).reshape(2, 2, 1, 1)
    w = np.array([0.3, 0.8, 0.5, 0.2]).reshape(2, 2, 1)
    ens = FiberedEnsemble(0.0, x, y, w)
    fx, fy, fw = vlasov_force(ens, TANH, RELAX, (0, 1), 0)
    xs, ys = x[0, 1, 0, 0], y[0, 1, 0, 0]
    hx = 0.5 * (w[0, 0, 0] * np.tanh(y[0, 0, 0, 0] - xs) + w[0, 1, 0] * np.tanh(y[0, 1, 0, 0] - xs))
    hy = 0.5 * (w[1, 0, 0] * np.tanh(y[1, 0, 0, 0] - ys) + w[1, 1, 0] * np.tanh(y[1, 1, 0, 0] - ys))
    hw = np.mean([similarity(x[a, b, 0], y[a, b, 0]) - w[0, 1, 0] for a in range(2) for b in range(2)])
    assert fx[0] == pytest.approx(hx, abs=1e-15)
    assert fy[0] == pytest.approx(hy, abs=1e-15)
    assert fw == pytest.approx(hw, abs=1e-15)


@pytest.mark.parametrize("lam", [RELAX, GATED, get_lambda("modulated-relax")])
def test_separable_weight_force_matches_generic(lam):
    ens = init_fibered(BOX, 3, 5, seed=3)
    _, _, fast = vlasov_rhs(ens, TANH, lam, path="separable")
    _, _, slow = vlasov_rhs(ens, TANH, lam, path="generic")
    assert np.max(np.abs(fast - slow)) <= 1e-12


def test_frozen_without_dynamics():
    ens = init_fibered(BOX, 2, 4, seed=4)
    traj = integrate_vlasov(ens, ZERO_PHI, ZERO_LAM, 1.0, 0.1)
    assert np.all(traj.x == ens.x[None]) and np.all(traj.w == ens.w[None])


def test_dirac_reduction_matches_grid_trajectory():
    sol = random_grid(6, 5)
    grid = integrate_graph_limit(sol, TANH, GATED, 1.0, 0.01)
    vl = integrate_vlasov(ensemble_from_grid(sol), TANH, GATED, 1.0, 0.01)
    assert np.max(np.abs(vl.x[:, :, 0, 0, :] - grid.x)) <= 1e-10
    assert np.max(np.abs(vl.w[..., 0] - grid.w)) <= 1e-10


def test_mass_conserved():
    ens = init_fibered(BOX, 2, 6, seed=6)
    traj = integrate_vlasov(ens, TANH, RELAX, 0.5, 0.1)
    assert traj.x.shape[1:] == ens.x.shape
    assert np.all(traj.state(-1).masses == ens.masses)


def test_stage_values_are_the_force_of_a_frozen_copy():
    ens0 = init_fibered(BOX, 2, 3, seed=7)
    seen = []

    def hook(t, y, k):
        frozen = FiberedEnsemble(t, y[0].copy(), y[1].copy(), y[2].copy())
        ref = vlasov_rhs(frozen, TANH, GATED)
        seen.append(max(float(np.max(np.abs(a - b))) for a, b in zip(ref, k)))

    integrate_vlasov(ens0, TANH, GATED, 0.3, 0.1, stage_hook=hook)
    assert len(seen) == 12 and max(seen) == 0.0


def test_a_priori_margins_nonnegative_desk_run():
    ens = init_fibered(BOX, 3, 16, seed=8)
    traj = integrate_vlasov(ens, TANH, RELAX, 1.0, 0.05)
    rep = a_priori_checks(traj, BoundConstants.from_ensemble(ens, TANH, RELAX, 1.0))
    assert rep.passed() and rep.min_margin >= 0


def test_a_priori_margins_static_without_dynamics():
    ens = init_fibered(BOX, 2, 8, seed=9)
    traj = integrate_vlasov(ens, ZERO_PHI, ZERO_LAM, 1.0, 0.1)
    consts = BoundConstants.from_ensemble(ens, ZERO_PHI, ZERO_LAM, 1.0)
    rep = a_priori_checks(traj, consts)
    assert rep.margin_weight == 0.0 and rep.margin_second_moment == 0.0


def test_understated_growth_is_detected():
    pump = WeightDynamicsSpec("pump", lambda xi, zeta, x, y, w, xt, yt, wt: 2.0 + 0 * w,
                              growth=2.0, lipschitz=0.0, x_independent=True)
    ens = init_fibered(BOX, 2, 8, seed=10)
    traj = integrate_vlasov(ens, TANH, pump, 1.0, 0.1)
    honest = BoundConstants.from_ensemble(ens, TANH, pump, 1.0)
    assert a_priori_checks(traj, honest).passed()
    liar = replace(honest, C_lambda=0.05)
    rep = a_priori_checks(traj, liar)
    assert not rep.passed() and rep.min_margin < 0


def test_bound_constants_relations():
    ens = init_fibered(BOX, 2, 8, seed=11)
    c = BoundConstants.from_ensemble(ens, TANH, RELAX, 1.0)
    assert c.R_M_gronwall >= c.R_M and c.R_M_bar >= c.R_M
    assert c.C3 > 0 and c.C_error > 0 and c.C_error_stated > 0
    assert set(c.as_dict()) >= {"R_X", "C3", "R_M_bar", "C_error"}


def test_ensemble_csv(tmp_path):
    traj = integrate_vlasov(init_fibered(BOX, 2, 2, seed=12), TANH, RELAX, 0.1, 0.1)
    write_ensemble_csv(traj, tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2 * 2 * 2
