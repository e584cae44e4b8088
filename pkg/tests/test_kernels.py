import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netvlasov.errors import ConfigurationError, DomainError
from netvlasov.kernels import (
    KernelSpec,
    WeightDynamicsSpec,
    eval_lambda,
    eval_phi,
    get_lambda,
    get_phi,
    lambda_names,
    perturbed,
    phi_names,
    register_phi,
    remote_bump,
    separable_sum,
    similarity,
    validate_hypotheses,
)

finite = st.floats(-5, 5, allow_nan=False)


def test_tanh_consensus_coincident_arguments_vanish():
    phi = get_phi("tanh-consensus")
    assert eval_phi(phi, 0.0, 0.0, 0.0)[0] == 0.0
    assert eval_phi(phi, 0.0, 1.0, 1.0)[0] == 0.0


def test_tanh_consensus_unit_gap():
    # tanh(1) from its exponential form, independent of numpy's tanh
    ref = (math.e - math.exp(-1)) / (math.e + math.exp(-1))
    val = eval_phi(get_phi("tanh-consensus"), 0.0, 0.0, 1.0)[0]
    assert abs(val - ref) < 1e-15
    assert abs(val - 0.76159415595) < 1e-11


def test_relax_to_h_examples():
    lam = get_lambda("relax-to-H")
    assert eval_lambda(lam, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0) == 1.0
    assert eval_lambda(lam, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0) == 0.5
    h = float(similarity(np.array([0.3]), np.array([-0.4])))
    assert eval_lambda(lam, 0.1, 0.9, 0.0, 0.0, h, 0.3, -0.4, 0.7) == 0.0


@pytest.mark.parametrize("bad", [np.nan, np.inf, -np.inf])
def test_non_finite_inputs_rejected(bad):
    with pytest.raises(DomainError):
        eval_phi(get_phi("tanh-consensus"), 0.0, bad, 0.0)
    with pytest.raises(DomainError):
        eval_lambda(get_lambda("relax-to-H"), 0.5, 0.5, 0.0, 0.0, bad, 0.0, 0.0, 0.0)


def test_identity_outside_unit_interval_rejected():
    with pytest.raises(DomainError):
        eval_lambda(get_lambda("relax-to-H"), 1.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def test_phi_vector_valued_in_higher_dimension():
    out = eval_phi(get_phi("tanh-consensus", d=3), 0.0, [0, 0, 0], [1, -1, 0])
    assert out.shape == (3,)
    np.testing.assert_allclose(out, np.tanh([1, -1, 0]))


@pytest.mark.parametrize("name", phi_names())
def test_builtin_phi_passes_validation(name):
    rep = validate_hypotheses(get_phi(name), (-2.0, 2.0), 10_000, seed=1)
    assert rep.passed, rep.failures


@pytest.mark.parametrize("name", lambda_names())
def test_builtin_lambda_passes_validation(name):
    rep = validate_hypotheses(get_lambda(name), (-2.0, 2.0), 10_000, seed=1)
    assert rep.passed, rep.failures
    assert rep.separable_max_error <= 1e-12


def test_zero_phi_reports_all_zero():
    rep = validate_hypotheses(get_phi("zero"), (-2.0, 2.0), 1000, seed=0)
    assert rep.passed
    assert rep.max_abs_value == 0.0 and rep.max_lipschitz_quotient == 0.0


def test_tanh_observed_maxima_within_declared():
    rep = validate_hypotheses(get_phi("tanh-consensus"), (-2.0, 2.0), 10_000, seed=0)
    assert rep.max_abs_value <= 1.0 and rep.max_lipschitz_quotient <= 1.0


def test_validation_flags_understated_bound():
    base = get_phi("tanh-consensus")
    liar = KernelSpec("liar", base.evaluator, bound=0.1, lipschitz=1.0, dim=1)
    rep = validate_hypotheses(liar, (-2.0, 2.0), 2000, seed=0)
    assert not rep.passed
    assert rep.failures


def test_validation_flags_self_drift():
    shifted = KernelSpec("shifted", lambda t, x, y: np.tanh(y - x) + 0.1, bound=1.1, lipschitz=1.0, dim=1)
    rep = validate_hypotheses(shifted, (-2.0, 2.0), 2000, seed=0)
    assert rep.diagonal_violations > 0 and not rep.passed


def test_validation_flags_false_x_independence():
    gated = get_lambda("gated-relax")
    fake = WeightDynamicsSpec("fake", gated.evaluator, gated.growth, gated.lipschitz,
                              x_independent=True, separable_form=gated.separable_form, dim=1)
    rep = validate_hypotheses(fake, (-2.0, 2.0), 2000, seed=0)
    assert rep.x_independence_violations > 0


def test_validation_report_text_has_name():
    rep = validate_hypotheses(get_lambda("relax-to-H"), (-2.0, 2.0), 100, seed=0)
    assert "relax-to-H" in rep.as_text()


def test_unknown_kernel_is_configuration_error():
    with pytest.raises(ConfigurationError):
        get_phi("no-such-kernel")
    with pytest.raises(ConfigurationError):
        get_lambda("no-such-dynamics")


def test_register_custom_phi():
    register_phi("half-tanh", lambda d=1: KernelSpec("half-tanh", lambda t, x, y: 0.5 * np.tanh(y - x), 0.5, 0.5, d))
    assert "half-tanh" in phi_names()
    assert eval_phi(get_phi("half-tanh"), 0.0, 0.0, 1.0)[0] == pytest.approx(0.5 * np.tanh(1.0))


def test_perturbed_is_sum_and_stays_separable():
    base = get_lambda("relax-to-H")
    pert = perturbed(base, remote_bump(scale=0.05))
    args = (0.2, 0.7, np.array([0.1]), np.array([0.3]), 0.4, np.array([0.5]), np.array([-0.2]), 0.9)
    assert eval_lambda(pert, *args) == pytest.approx(eval_lambda(base, *args) + 0.05 * np.exp(-0.04))
    assert pert.separable and pert.growth == pytest.approx(1.05)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=6, max_size=6), st.floats(0, 1), st.floats(0, 1),
       st.sampled_from(["relax-to-H", "modulated-relax", "gated-relax", "remote-bump"]))
def test_separable_form_matches_evaluator(vals, xi, zeta, name):
    lam = get_lambda(name)
    x, y, w, xt, yt, wt = vals
    a = (xi, zeta, np.array([x]), np.array([y]), w, np.array([xt]), np.array([yt]), wt)
    assert abs(float(separable_sum(lam, *a)) - float(lam(*a))) <= 1e-12 * (1 + abs(w))


@settings(max_examples=200, deadline=None)
@given(finite, finite, st.sampled_from(["tanh-consensus", "bounded-confidence"]))
def test_phi_bounded_and_deterministic(x, y, name):
    phi = get_phi(name)
    v1 = eval_phi(phi, 0.0, x, y)
    v2 = eval_phi(phi, 0.0, x, y)
    assert np.array_equal(v1, v2)
    assert np.linalg.norm(v1) <= phi.bound + 1e-15


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=6, max_size=6))
def test_relax_growth_bound(vals):
    lam = get_lambda("relax-to-H")
    x, y, w, xt, yt, wt = vals
    v = eval_lambda(lam, 0.5, 0.5, x, y, w, xt, yt, wt)
    assert abs(v) <= lam.growth * (1 + abs(w)) + 1e-15
