import math

import numpy as np
import pytest

from bayes_net import Assignment
from elim_order import EliminationOrder
from errors import AssignmentError, InstanceTooLarge, ZeroProbabilityEvidence
from factor import Factor, Scaled, rescale
from inference import brute_force_map, exact_map, mpe, posterior_marginals, probability_of_evidence
from tests.helpers import (
    RTOL, build_network, oracle_map, oracle_marginals, oracle_probability, random_instance, uniform_network,
)


# --- Factors ---

def test_rescale_keeps_values_exact():
    values = np.array([3e-200, 1e-250])
    scaled, exponent = rescale(values)
    assert 0.5 <= scaled.max() < 1.0
    np.testing.assert_array_equal(np.ldexp(scaled, exponent), values)


def test_factor_product_and_marginals():
    f = Factor((0,), [0.4, 0.6])
    g = Factor((0, 1), [[0.8, 0.2], [0.1, 0.9]])
    joint = f.multiply(g)
    assert joint.scope == (0, 1)
    assert joint.sum_out(0).restrict({1: 1}).scalar().value == pytest.approx(0.62)
    reduced, argmax = joint.max_out(0)
    np.testing.assert_array_equal(argmax, [0, 1])
    assert Factor.product([]).scalar().value == 1.0


def test_scaled_log_of_zero():
    assert Scaled(0.0, 5).log == -math.inf
    assert float(Scaled(0.5, 3)) == 4.0


def test_long_products_do_not_underflow():
    net = uniform_network(1200)
    p = probability_of_evidence(net, Assignment({v: 1 for v in range(1200)}))
    assert p.value == 0.0
    assert p.log == pytest.approx(-1200 * math.log(2.0))


# --- Chain examples ---

def test_probability_of_evidence_chain(chain):
    assert probability_of_evidence(chain, Assignment({1: 1})).value == pytest.approx(0.62)
    assert probability_of_evidence(chain, Assignment()).value == pytest.approx(1.0)
    full = Assignment({0: 1, 1: 0})
    assert probability_of_evidence(chain, full).value == pytest.approx(chain.joint_probability(full))


def test_posterior_marginals_chain(chain):
    marginals = posterior_marginals(chain, Assignment({1: 1}))
    np.testing.assert_allclose(marginals[0], [0.08, 0.54])
    np.testing.assert_allclose(marginals[1], [0.0, 0.62])


def test_posterior_marginals_uniform_root():
    net = build_network([("A", 2)], [(0, (), [0.5, 0.5])])
    np.testing.assert_allclose(posterior_marginals(net, Assignment())[0], [0.5, 0.5])


def test_mpe_chain(chain):
    result = mpe(chain, Assignment({1: 1}))
    assert result.assignment == Assignment({0: 1, 1: 1})
    assert result.score == pytest.approx(0.54)
    assert result.log_score == pytest.approx(math.log(0.54))


def test_mpe_of_complete_evidence(chain):
    e = Assignment({0: 0, 1: 1})
    result = mpe(chain, e)
    assert result.assignment == e
    assert result.score == pytest.approx(0.08)


def test_mpe_uniform_ties_to_zeros(uniform):
    result = mpe(uniform, Assignment())
    assert result.assignment == Assignment({v: 0 for v in range(4)})
    assert result.score == pytest.approx(2.0 ** -4)


def test_exact_map_chain(chain):
    result = exact_map(chain, {0}, Assignment({1: 1}))
    assert result.assignment == Assignment({0: 1})
    assert result.score == pytest.approx(0.54)


def test_exact_map_fork_matches_enumeration(fork):
    best, table = oracle_map(fork, [1, 2], {})
    result = exact_map(fork, {1, 2}, Assignment())
    assert result.score == pytest.approx(best, rel=RTOL)
    assert table[result.assignment[1], result.assignment[2]] == pytest.approx(best, rel=RTOL)


def test_exact_map_with_empty_s(chain):
    result = exact_map(chain, set(), Assignment({1: 1}))
    assert len(result.assignment) == 0
    assert result.score == pytest.approx(0.62)


def test_exact_map_over_all_unbound_is_mpe(fork):
    e = Assignment({2: 1})
    assert exact_map(fork, {0, 1}, e).score == pytest.approx(mpe(fork, e).score, rel=RTOL)


def test_exact_map_errors(chain, fork):
    with pytest.raises(AssignmentError):
        exact_map(chain, {0, 1}, Assignment({1: 1}))
    with pytest.raises(ValueError):
        exact_map(fork, {1, 2}, Assignment(), EliminationOrder((1, 0, 2)))


def test_zero_probability_evidence():
    net = build_network([("A", 2), ("B", 2)], [(0, (), [1.0, 0.0]), (1, (0,), [[1.0, 0.0], [0.0, 1.0]])])
    e = Assignment({1: 1})
    assert probability_of_evidence(net, e).value == 0.0
    with pytest.raises(ZeroProbabilityEvidence):
        mpe(net, e)
    with pytest.raises(ZeroProbabilityEvidence):
        exact_map(net, {0}, e)
    with pytest.raises(ZeroProbabilityEvidence):
        brute_force_map(net, {0}, e)


def test_brute_force_map(chain):
    result = brute_force_map(chain, {0}, Assignment({1: 1}))
    assert result.assignment == Assignment({0: 1})
    assert result.score == pytest.approx(0.54)
    assert brute_force_map(chain, set(), Assignment()).score == pytest.approx(1.0)


def test_brute_force_guard():
    with pytest.raises(InstanceTooLarge):
        brute_force_map(uniform_network(30), {0}, Assignment())


# --- Oracle equivalence ---

def _check_instance(seed):
    net, S, e = random_instance(seed)
    e = Assignment(e)
    p_e = oracle_probability(net, e)
    assert probability_of_evidence(net, e).value == pytest.approx(p_e, rel=RTOL)

    expected = oracle_marginals(net, e)
    for var, row in posterior_marginals(net, e).items():
        np.testing.assert_allclose(row, expected[var], rtol=RTOL, atol=1e-300)

    best, table = oracle_map(net, S, e)
    result = exact_map(net, S, e)
    assert result.score == pytest.approx(best, rel=RTOL)
    assert table[tuple(result.assignment[v] for v in sorted(S))] == pytest.approx(best, rel=RTOL)
    assert brute_force_map(net, S, e).score == pytest.approx(best, rel=RTOL)

    unbound = [v for v in range(net.n) if v not in e]
    best_mpe, _ = oracle_map(net, unbound, e)
    assert mpe(net, e).score == pytest.approx(best_mpe, rel=RTOL)


@pytest.mark.parametrize("seed", range(25))
def test_matches_enumeration(seed):
    _check_instance(seed)


@pytest.mark.slow
def test_matches_enumeration_on_500_instances():
    for seed in range(500):
        _check_instance(seed)


@pytest.mark.parametrize("seed", range(25))
def test_probability_of_evidence_ignores_the_order(seed):
    net, _, e = random_instance(seed)
    rng = np.random.default_rng(seed + 30_000)
    shuffled = EliminationOrder(tuple(rng.permutation(net.n)))
    expected = probability_of_evidence(net, e).value
    assert probability_of_evidence(net, e, shuffled).value == pytest.approx(expected, rel=RTOL, abs=1e-300)


@pytest.mark.parametrize("seed", range(25))
def test_projected_mpe_never_beats_map(seed):
    net, S, e = random_instance(seed)
    e = Assignment(e)
    projected = mpe(net, e).assignment.project(S)
    score = probability_of_evidence(net, projected.merge(e)).value
    assert score <= exact_map(net, S, e).score * (1 + RTOL)
