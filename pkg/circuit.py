"""
Differential inference over a recorded variable-elimination trace.

The network polynomial P(lambda) is evaluated by variable elimination with the
evidence indicators lambda_x kept as leaves. Running the elimination once
records a tree of table contractions (every scalar they produce is a +/x node
of an arithmetic circuit). Re-running that trace forward at the indicators of
(s, e) gives Pr(s, e); one backward pass gives dP/dlambda_x for every x, and

    dP(s, e)/dlambda_x = Pr(s - X, x, e)

so the scores of all neighbours of s cost one forward and one backward pass.

The trace depends on the network and the elimination order only. Indicator
values are supplied per evaluation and every evaluation uses private buffers,
so one trace can be shared by concurrent searches.
"""
import math
import logging
from dataclasses import dataclass

import numpy as np

from bayes_net import Assignment
from elim_order import min_fill_order, moral_graph
from errors import AssignmentError
from factor import LN2, Scaled, einsum_labels, rescale

# Configure logging for this module
logger = logging.getLogger(__name__)


# ========== Indicators ==========

class IndicatorSetting:
    """
    Values of the evidence indicators lambda_x, one 0/1 vector per variable.

    A variable bound by the assignment has exactly one indicator at 1; an
    unbound variable has all of its indicators at 1.
    """

    __slots__ = ("tables",)

    def __init__(self, tables):
        self.tables = [np.asarray(t, dtype=np.float64) for t in tables]

    @classmethod
    def from_assignment(cls, net, assignment):
        net.validate_assignment(assignment)
        tables = []
        for var, card in enumerate(net.cardinalities):
            if var in assignment:
                table = np.zeros(card)
                table[assignment[var]] = 1.0
            else:
                table = np.ones(card)
            tables.append(table)
        return cls(tables)

    @classmethod
    def unobserved(cls, net):
        return cls([np.ones(card) for card in net.cardinalities])


# ========== Trace ==========

@dataclass(frozen=True)
class _Contraction:
    """out = sum over dropped axes of left x right (right may be absent)."""
    left: int
    right: int
    out: int
    left_labels: list
    right_labels: list
    out_labels: list
    # Backward targets: the labels of each input that survive in the adjoint
    # product, and the reshape that broadcasts them back to the input's shape.
    left_target: list
    left_shape: tuple
    right_target: list
    right_shape: tuple


class ForwardPass:
    __slots__ = ("values", "offsets")

    def __init__(self, values, offsets):
        self.values = values
        self.offsets = offsets


class ElimTrace:
    """
    Recorded elimination of the network polynomial along `order`.

    Attributes:
        node_count (int): Scalars produced by the trace (one per product entry
            and one per output entry of every contraction).
        width (int): Largest contraction scope minus one.
    """

    def __init__(self, net, order):
        if not order.covers(net.n):
            raise ValueError("elimination order must cover every network variable")
        self.net = net
        self.order = order
        self.scopes = []
        self.ops = []
        self.node_count = 0
        self.width = 0

        self.cpt_nodes = []
        self.cpt_values = []
        self.cpt_offsets = []
        self.indicator_nodes = []
        for cpt in net.cpts:
            values, shift = rescale(np.asarray(cpt.table, dtype=np.float64))
            self.cpt_nodes.append(self._add_node(cpt.scope))
            self.cpt_values.append(values)
            self.cpt_offsets.append(shift)
        for var in range(net.n):
            self.indicator_nodes.append(self._add_node((var,)))

        pending = self.cpt_nodes + self.indicator_nodes
        for var in order.sequence:
            bucket = [node for node in pending if var in self.scopes[node]]
            pending = [node for node in pending if var not in self.scopes[node]]
            bucket.sort(key=lambda node: (len(self.scopes[node]), node))
            acc = bucket[0]
            for node in bucket[1:-1]:
                acc = self._contract(acc, node, self._union(acc, node))
            last = bucket[-1] if len(bucket) > 1 else None
            scope = tuple(v for v in self._union(acc, last) if v != var)
            pending.append(self._contract(acc, last, scope))

        self.root = pending[0]
        for node in pending[1:]:
            self.root = self._contract(self.root, node, ())

        logger.debug(f"Recorded trace: {len(self.ops)} contractions, {self.node_count} nodes, width {self.width}")

    # --- Recording ---

    def _add_node(self, scope):
        self.scopes.append(tuple(scope))
        return len(self.scopes) - 1

    def _union(self, a, b):
        scope = self.scopes[a]
        if b is None:
            return scope
        return scope + tuple(v for v in self.scopes[b] if v not in scope)

    def _size(self, scope):
        return math.prod(self.net.cardinalities[v] for v in scope)

    def _backward_target(self, labels, out_labels, other_labels, scope):
        present = set(out_labels) | set(other_labels)
        target = [l for l in labels if l in present]
        shape = tuple(self.net.cardinalities[v] if l in present else 1 for l, v in zip(labels, scope))
        return target, shape

    def _contract(self, a, b, out_scope):
        union = self._union(a, b)
        out = self._add_node(out_scope)
        labels = einsum_labels(union)
        left_labels = [labels[v] for v in self.scopes[a]]
        right_labels = [labels[v] for v in self.scopes[b]] if b is not None else []
        out_labels = [labels[v] for v in out_scope]
        left_target, left_shape = self._backward_target(left_labels, out_labels, right_labels, self.scopes[a])
        right_target, right_shape = ([], ())
        if b is not None:
            right_target, right_shape = self._backward_target(right_labels, out_labels, left_labels, self.scopes[b])
        self.ops.append(_Contraction(
            a, b, out, left_labels, right_labels, out_labels,
            left_target, left_shape, right_target, right_shape,
        ))
        self.node_count += self._size(union) + self._size(out_scope)
        self.width = max(self.width, len(union) - 1)
        return out

    # --- Evaluation ---

    def forward(self, setting):
        """Evaluates every node of the trace at the given indicator values."""
        values = [None] * len(self.scopes)
        offsets = [0] * len(self.scopes)
        for var in range(self.net.n):
            values[self.cpt_nodes[var]] = self.cpt_values[var]
            offsets[self.cpt_nodes[var]] = self.cpt_offsets[var]
            values[self.indicator_nodes[var]] = setting.tables[var]

        for op in self.ops:
            if op.right is None:
                raw = np.einsum(values[op.left], op.left_labels, op.out_labels)
                offset = offsets[op.left]
            else:
                raw = np.einsum(values[op.left], op.left_labels, values[op.right], op.right_labels, op.out_labels)
                offset = offsets[op.left] + offsets[op.right]
            values[op.out], shift = rescale(raw)
            offsets[op.out] = offset + shift
        return ForwardPass(values, offsets)

    def value(self, fwd):
        return Scaled(float(fwd.values[self.root]), fwd.offsets[self.root])

    def backward(self, fwd, variables=None):
        """
        Differentiates the root with respect to the indicators of `variables`.

        Returns:
            dict: var -> (mantissa array, exponent), i.e. dP/dlambda_x for every
            value x of var is mantissa[x] * 2^exponent.
        """
        grads = [None] * len(self.scopes)
        grad_offsets = [0] * len(self.scopes)
        grads[self.root] = np.ones(())

        def accumulate(node, raw, offset, shape):
            raw = np.array(np.broadcast_to(raw.reshape(shape), self._shape(node)))
            if grads[node] is not None:
                top = max(offset, grad_offsets[node])
                raw = np.ldexp(raw, offset - top) + np.ldexp(grads[node], grad_offsets[node] - top)
                offset = top
            grads[node], shift = rescale(raw)
            grad_offsets[node] = offset + shift

        for op in reversed(self.ops):
            g = grads[op.out]
            if g is None:
                continue
            go = grad_offsets[op.out]
            if op.right is None:
                raw = np.einsum(g, op.out_labels, op.left_target)
                accumulate(op.left, raw, go, op.left_shape)
                continue
            raw = np.einsum(g, op.out_labels, fwd.values[op.right], op.right_labels, op.left_target)
            accumulate(op.left, raw, go + fwd.offsets[op.right], op.left_shape)
            raw = np.einsum(g, op.out_labels, fwd.values[op.left], op.left_labels, op.right_target)
            accumulate(op.right, raw, go + fwd.offsets[op.left], op.right_shape)

        if variables is None:
            variables = range(self.net.n)
        result = {}
        for var in variables:
            node = self.indicator_nodes[var]
            if grads[node] is None:
                result[var] = (np.zeros(self.net.cardinalities[var]), 0)
            else:
                result[var] = (grads[node], grad_offsets[node])
        return result

    def _shape(self, node):
        return tuple(self.net.cardinalities[v] for v in self.scopes[node])


def build_trace(net, order=None):
    """Records the elimination trace; defaults to an unconstrained min-fill order."""
    if order is None:
        order = min_fill_order(moral_graph(net))
    return ElimTrace(net, order)


# ========== Neighbour scores ==========

@dataclass(frozen=True, eq=False)
class NeighborScores:
    """
    Pr(s - X, x, e) for every MAP variable X and value x, plus Pr(s, e).

    Scores are held as mantissa arrays with a power-of-two exponent per variable.
    """
    base: Scaled
    mantissas: dict
    exponents: dict

    @property
    def base_score(self):
        return self.base.value

    @property
    def base_log_score(self):
        return self.base.log

    @property
    def variables(self):
        return tuple(self.mantissas)

    def scores(self, var):
        return np.ldexp(self.mantissas[var], self.exponents[var])

    def log_scores(self, var):
        with np.errstate(divide="ignore"):
            return np.log(self.mantissas[var]) + self.exponents[var] * LN2

    def score(self, var, value):
        return math.ldexp(float(self.mantissas[var][value]), self.exponents[var])


def evaluate_polynomial(net, setting, order=None, trace=None):
    """
    P evaluated at an indicator setting: Pr of the evidence the setting encodes.

    Returns:
        Scaled: use `.value` for the probability and `.log` for its logarithm.
    """
    if trace is None:
        trace = build_trace(net, order)
    return trace.value(trace.forward(setting))


def all_neighbor_scores(net, S, s, e, order=None, trace=None):
    """
    Scores every neighbour of s in one forward and one backward pass.

    Args:
        net (BayesianNetwork): The network.
        S (iterable): MAP variables; `s` must bind exactly these.
        s (Assignment): Current MAP state.
        e (Assignment): Evidence, disjoint from S.
        order (EliminationOrder): Any unconstrained order (ignored if `trace` is given).
        trace (ElimTrace): A trace recorded earlier for `net`.

    Returns:
        NeighborScores
    """
    S = tuple(sorted(S))
    if set(s) != set(S):
        raise AssignmentError("the current state must bind exactly the MAP variables")
    if any(var in e for var in S):
        raise AssignmentError("MAP variables and evidence overlap")
    if trace is None:
        trace = build_trace(net, order)

    setting = IndicatorSetting.from_assignment(net, Assignment(s).merge(e))
    fwd = trace.forward(setting)
    grads = trace.backward(fwd, S)
    return NeighborScores(
        base=trace.value(fwd),
        mantissas={var: grads[var][0] for var in S},
        exponents={var: grads[var][1] for var in S},
    )
