"""
Exact inference by variable elimination: Pr(e), posterior marginals, MPE and MAP.

Evidence is absorbed by slicing the CPT factors before elimination. Every
factor carries a power-of-two log offset so products over 100+ variables do
not underflow.
"""
import math
import logging
from dataclasses import dataclass

import numpy as np

from bayes_net import Assignment
from circuit import IndicatorSetting, build_trace
from config import BRUTE_FORCE_LIMIT
from elim_order import constrained_order_is_valid, min_fill_order, moral_graph
from errors import AssignmentError, InstanceTooLarge, ZeroProbabilityEvidence
from factor import Factor

# Configure logging for this module
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MapSolution:
    """
    An instantiation of the MAP variables and its score Pr(s, e).
    `log_score` stays finite when `score` underflows to 0.
    """
    assignment: Assignment
    score: float
    log_score: float


# --- Helper functions ---

def _default_order(net, constraint=None):
    return min_fill_order(moral_graph(net), constraint)


def _check_order(net, order):
    if not order.covers(net.n):
        raise ValueError("elimination order must cover every network variable")


def _evidence_factors(net, e):
    net.validate_assignment(e)
    return [Factor.from_cpt(cpt).restrict(e) for cpt in net.cpts]


def _eliminate(net, e, sequence, maxed=frozenset()):
    """
    Sums out (or maxes out, for variables in `maxed`) every unobserved variable.

    Returns:
        tuple: (Scaled total, traceback list of (var, scope, argmax table) in
        elimination order).
    """
    pending = _evidence_factors(net, e)
    traceback = []
    for var in sequence:
        if var in e:
            continue
        bucket = [f for f in pending if var in f.scope]
        pending = [f for f in pending if var not in f.scope]
        product = Factor.product(bucket)
        if var in maxed:
            reduced, argmax = product.max_out(var)
            traceback.append((var, reduced.scope, argmax))
        else:
            reduced = product.sum_out(var)
        pending.append(reduced)
    return Factor.product(pending).scalar(), traceback


def _trace_back(traceback, e):
    """Recovers an argmax by walking the max-eliminated variables in reverse."""
    bindings = dict(e)
    for var, scope, argmax in reversed(traceback):
        bindings[var] = int(argmax[tuple(bindings[v] for v in scope)])
    return bindings


# ========== Probabilities ==========

def probability_of_evidence(net, e, order=None):
    """
    Pr(e) by variable elimination.

    Returns:
        Scaled: `.value` is Pr(e) (1 for empty evidence), `.log` its logarithm.
    """
    if order is None:
        order = _default_order(net)
    _check_order(net, order)
    total, _ = _eliminate(net, Assignment(e), order.sequence)
    return total


def posterior_marginals(net, e, order=None, trace=None):
    """
    Unnormalized marginals Pr(x, e) for every variable X, from one
    differentiation of the network polynomial at e.

    Returns:
        dict: var -> array over values of Pr(x, e). A variable bound by e has
        all of its mass on the bound value.
    """
    if trace is None:
        trace = build_trace(net, order)
    e = Assignment(e)
    fwd = trace.forward(IndicatorSetting.from_assignment(net, e))
    prob_e = trace.value(fwd).value
    marginals = {}
    for var, (mantissa, exponent) in trace.backward(fwd).items():
        if var in e:
            row = np.zeros(net.cardinalities[var])
            row[e[var]] = prob_e
        else:
            row = np.ldexp(mantissa, exponent)
        marginals[var] = row
    return marginals


# ========== MPE / MAP ==========

def mpe(net, e, order=None):
    """
    Most probable completion of e. Any elimination order is sound.

    Returns:
        MapSolution: over every variable, extending e. Ties go to the lowest
        value index at each traceback step.

    Raises:
        ZeroProbabilityEvidence: when Pr(e) = 0.
    """
    e = Assignment(e)
    if order is None:
        order = _default_order(net)
    _check_order(net, order)
    total, traceback = _eliminate(net, e, order.sequence, maxed=frozenset(range(net.n)))
    if total.mantissa <= 0.0:
        raise ZeroProbabilityEvidence("evidence has probability zero; no MPE exists")
    return MapSolution(Assignment(_trace_back(traceback, e)), total.value, total.log)


def exact_map(net, S, e, order=None):
    """
    Exact MAP: sums out the non-MAP variables first, then maxes over S.

    Args:
        net (BayesianNetwork): The network.
        S (iterable): MAP variable ids, disjoint from the evidence.
        e (Assignment): Evidence.
        order (EliminationOrder): Must eliminate all non-S variables before
            any S variable. Defaults to constrained min-fill.

    Returns:
        MapSolution: argmax s* over S and Pr(s*, e).

    Raises:
        ZeroProbabilityEvidence: when Pr(e) = 0.
    """
    S = frozenset(S)
    e = Assignment(e)
    if any(var in e for var in S):
        raise AssignmentError("MAP variables and evidence overlap")
    if order is None:
        order = _default_order(net, S)
    _check_order(net, order)
    if not constrained_order_is_valid(order.sequence, S, ignore=e):
        raise ValueError("exact MAP needs an order that eliminates the non-MAP variables first")

    total, traceback = _eliminate(net, e, order.sequence, maxed=S)
    if total.mantissa <= 0.0:
        raise ZeroProbabilityEvidence("evidence has probability zero; no MAP exists")
    bindings = _trace_back(traceback, e)
    return MapSolution(Assignment({v: bindings[v] for v in S}), total.value, total.log)


def brute_force_map(net, S, e):
    """
    Exact MAP by enumerating the joint over every unobserved variable.
    Test oracle for small instances; ties go to the lexicographically lowest
    instantiation of S (ordered by id).

    Raises:
        InstanceTooLarge: when the joint over the unobserved variables exceeds
            BRUTE_FORCE_LIMIT entries.
    """
    S = tuple(sorted(S))
    e = Assignment(e)
    if any(var in e for var in S):
        raise AssignmentError("MAP variables and evidence overlap")
    unbound = [v for v in range(net.n) if v not in e]
    size = math.prod(net.cardinalities[v] for v in unbound)
    if size > BRUTE_FORCE_LIMIT:
        raise InstanceTooLarge(f"joint over {len(unbound)} variables has {size} entries")

    joint = Factor.product(_evidence_factors(net, e))
    for var in unbound:
        if var not in S and var in joint.scope:
            joint = joint.sum_out(var)
    values = np.transpose(joint.values, [joint.scope.index(v) for v in S]) if S else joint.values
    if float(values.max(initial=0.0)) <= 0.0:
        raise ZeroProbabilityEvidence("evidence has probability zero; no MAP exists")

    flat = int(np.argmax(values))
    best = np.unravel_index(flat, values.shape) if S else ()
    mantissa = float(values.reshape(-1)[flat])
    log_score = math.log(mantissa) + joint.log_offset * math.log(2.0)
    return MapSolution(
        Assignment({v: int(x) for v, x in zip(S, best)}),
        math.ldexp(mantissa, joint.log_offset),
        log_score,
    )
