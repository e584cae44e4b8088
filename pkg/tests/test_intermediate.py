import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netvlasov.errors import ConfigurationError, DomainError
from netvlasov.intermediate import (
    ReplicaEnsemble,
    coupling_error,
    coupling_error_parts,
    init_replicas,
    integrate_intermediate,
    intermediate_rhs,
    random_initial_data,
    write_coupling_csv,
)
from netvlasov.kernels import get_lambda, get_phi
from netvlasov.particle import ParticleState, integrate_particle, particle_rhs

TANH = get_phi("tanh-consensus")
RELAX = get_lambda("relax-to-H")
ZERO_PHI = get_phi("zero")
ZERO_LAM = get_lambda("zero")


def particle_runs(ens, phi, lam, T, dt):
    return [integrate_particle(ParticleState(0.0, ens.x[r], ens.w[r]), phi, lam, "restricted", T, dt)
            for r in range(ens.R)]


def test_streams_are_prefix_stable():
    x3, w3 = random_initial_data(5, 3, seed=7)
    x5, w5 = random_initial_data(5, 5, seed=7)
    assert np.array_equal(x3, x5[:3]) and np.array_equal(w3, w5[:3])
    assert np.all(np.diagonal(w5, axis1=1, axis2=2) == 0)
    assert np.all(np.abs(x5) <= 1) and np.all((w5 >= 0) & (w5 <= 1))


def test_identical_replicas_reduce_to_particle_rhs():
    ens = init_replicas(6, 1, seed=3)
    stacked = ReplicaEnsemble(0.0, np.repeat(ens.x, 4, 0), np.repeat(ens.w, 4, 0))
    dx, dw = intermediate_rhs(stacked, TANH, RELAX)
    px, pw = particle_rhs(ParticleState(0.0, ens.x[0], ens.w[0]), TANH, RELAX, "restricted")
    for r in range(4):
        np.testing.assert_allclose(dx[r], px, atol=1e-15)
        np.testing.assert_allclose(dw[r], pw, atol=1e-15)


def test_zero_phi_zero_state_drift():
    dx, _ = intermediate_rhs(init_replicas(5, 3, seed=1), ZERO_PHI, RELAX)
    assert np.all(dx == 0)


def test_two_by_two_hand_value():
    x = np.array([[[0.0], [1.0]], [[0.5], [-1.0]]])
    w = np.array([[[0.0, 0.7], [0.2, 0.0]], [[0.0, 0.4], [0.9, 0.0]]])
    dx, _ = intermediate_rhs(ReplicaEnsemble(0.0, x, w), TANH, ZERO_LAM)
    hand = 0.5 * 0.5 * (0.7 * np.tanh(1.0 - 0.0) + 0.4 * np.tanh(-1.0 - 0.0))
    assert dx[0, 0, 0] == pytest.approx(hand, abs=1e-15)


def test_x_dependent_dynamics_rejected():
    with pytest.raises(ConfigurationError):
        intermediate_rhs(init_replicas(4, 2), TANH, get_lambda("gated-relax"))


@pytest.mark.parametrize("lam", [RELAX, get_lambda("modulated-relax")])
def test_separable_matches_generic(lam):
    ens = init_replicas(5, 3, seed=11)
    _, fast = intermediate_rhs(ens, TANH, lam, path="separable")
    _, slow = intermediate_rhs(ens, TANH, lam, path="generic")
    assert np.max(np.abs(fast - slow)) <= 1e-12


def test_frozen_without_dynamics():
    ens = init_replicas(4, 3, seed=2)
    traj = integrate_intermediate(ens, ZERO_PHI, ZERO_LAM, 1.0, 0.1)
    assert np.all(traj.x == ens.x[None]) and np.all(traj.w == ens.w[None])


def test_single_replica_equals_restricted_particle():
    ens = init_replicas(8, 1, seed=5)
    traj = integrate_intermediate(ens, TANH, RELAX, 1.0, 0.01)
    ref = particle_runs(ens, TANH, RELAX, 1.0, 0.01)[0]
    assert np.max(np.abs(traj.x[:, 0] - ref.x)) <= 1e-13
    assert np.max(np.abs(traj.w[:, 0] - ref.w)) <= 1e-13


def test_closed_form_relaxation_across_replicas():
    N, R = 8, 3
    _, w0 = random_initial_data(N, R, seed=9)
    ens = ReplicaEnsemble(0.0, np.zeros((R, N, 1)), w0)
    traj = integrate_intermediate(ens, ZERO_PHI, RELAX, 1.0, 1e-3)
    exact = 1 + (w0 - 1) * np.exp(-((N - 1) / N) ** 2)
    for r in range(R):
        np.fill_diagonal(exact[r], 0)
    assert np.max(np.abs(traj.w[-1] - exact)) <= 1e-8


def test_identical_replicas_stay_identical():
    ens = init_replicas(5, 1, seed=4)
    traj = integrate_intermediate(ReplicaEnsemble(0.0, np.repeat(ens.x, 3, 0), np.repeat(ens.w, 3, 0)),
                                  TANH, RELAX, 0.5, 0.05)
    assert np.all(traj.x[:, 0] == traj.x[:, 2]) and np.all(traj.w[:, 1] == traj.w[:, 2])


def test_coupling_error_zero_cases():
    ens = init_replicas(5, 4, seed=6)
    frozen = integrate_intermediate(ens, ZERO_PHI, ZERO_LAM, 0.5, 0.1)
    assert coupling_error(particle_runs(ens, ZERO_PHI, ZERO_LAM, 0.5, 0.1), frozen, 0.5) == 0.0
    live = integrate_intermediate(ens, TANH, RELAX, 0.5, 0.1)
    runs = particle_runs(ens, TANH, RELAX, 0.5, 0.1)
    assert coupling_error(runs, live, 0.0) == 0.0
    ex, ew = coupling_error_parts(runs, live, 0.5)
    assert ex > 0 and ew >= 0


def test_coupling_error_shape_mismatch():
    ens = init_replicas(5, 2, seed=6)
    other = init_replicas(4, 2, seed=6)
    traj = integrate_intermediate(ens, TANH, RELAX, 0.2, 0.1)
    with pytest.raises(DomainError):
        coupling_error(particle_runs(other, TANH, RELAX, 0.2, 0.1), traj, 0.2)


def test_coupling_csv(tmp_path):
    write_coupling_csv(tmp_path / "c.csv", [dict(t=0.5, error_x=0.1, error_w=0.2, R=4, N=8, seed=0)])
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "t,error_x,error_w,R,N,seed"


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 6), st.integers(1, 4), st.integers(0, 1000))
def test_coupling_error_nonnegative(N, R, seed):
    ens = init_replicas(N, R, seed=seed)
    traj = integrate_intermediate(ens, TANH, RELAX, 0.2, 0.1)
    assert coupling_error(particle_runs(ens, TANH, RELAX, 0.2, 0.1), traj, 0.2) >= 0.0
