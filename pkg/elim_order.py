"""
Interaction graphs, min-fill elimination orders and their widths.

Constrained orders eliminate every non-MAP variable before any MAP variable,
which is what exact MAP by variable elimination requires.
"""
import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import networkx as nx

# Configure logging for this module
logger = logging.getLogger(__name__)

# Undirected, irreflexive graph over variable ids.
InteractionGraph = nx.Graph


def constrained_order_is_valid(sequence, constraint, ignore=()):
    """True when every variable outside `constraint` precedes every variable in it.
    Variables in `ignore` (e.g. evidence) may appear anywhere."""
    constraint = set(constraint)
    ignore = set(ignore)
    seen_constrained = False
    for var in sequence:
        if var in ignore:
            continue
        if var in constraint:
            seen_constrained = True
        elif seen_constrained:
            return False
    return True


@dataclass(frozen=True)
class EliminationOrder:
    sequence: tuple
    constraint: frozenset = None

    def __post_init__(self):
        sequence = tuple(int(v) for v in self.sequence)
        if len(set(sequence)) != len(sequence):
            raise ValueError("elimination order repeats a variable")
        object.__setattr__(self, "sequence", sequence)
        if self.constraint is not None:
            constraint = frozenset(int(v) for v in self.constraint)
            if not constrained_order_is_valid(sequence, constraint):
                raise ValueError("constrained order places a constrained variable before an unconstrained one")
            object.__setattr__(self, "constraint", constraint)

    def __len__(self):
        return len(self.sequence)

    def __iter__(self):
        return iter(self.sequence)

    def covers(self, n):
        return sorted(self.sequence) == list(range(n))


@dataclass(frozen=True)
class WidthStats:
    min: int
    max: int
    average: float
    weighted_average: float


# ========== Graph construction ==========

def moral_graph(net):
    """Links every variable to its parents and marries every pair of co-parents.
    Accepts a BayesianNetwork or a bare DAG over 0..n-1."""
    dag = net if isinstance(net, nx.DiGraph) else net.dag
    graph = nx.Graph(nx.moral_graph(dag))
    graph.add_nodes_from(dag.nodes)
    return graph


# ========== Elimination ==========

def _adjacency(g):
    return {v: set(g.neighbors(v)) - {v} for v in g.nodes}


def _fill_count(adj, v):
    return sum(1 for a, b in combinations(adj[v], 2) if b not in adj[a])


def _eliminate(adj, v):
    """Connects the neighbours of v pairwise, removes v, returns its neighbours."""
    nbrs = adj.pop(v)
    for a in nbrs:
        adj[a].discard(v)
        adj[a].update(nbrs - {a})
    return nbrs


def min_fill_order(g, constraint=None):
    """
    Greedy min-fill elimination order.

    Args:
        g (InteractionGraph): Graph to eliminate.
        constraint (iterable): Optional set S; all vertices outside S are
            eliminated (by min-fill) before any vertex of S.

    Returns:
        EliminationOrder: Ties on fill count go to the lowest variable id.
    """
    adj = _adjacency(g)
    vertices = sorted(adj)
    if constraint is None:
        phases = [vertices]
    else:
        constraint = frozenset(constraint)
        unknown = constraint - set(vertices)
        if unknown:
            raise ValueError(f"constraint mentions variables not in the graph: {sorted(unknown)}")
        phases = [[v for v in vertices if v not in constraint], sorted(constraint)]

    fill = {v: _fill_count(adj, v) for v in vertices}
    sequence = []
    for phase in phases:
        remaining = set(phase)
        while remaining:
            v = min(remaining, key=lambda u: (fill[u], u))
            nbrs = _eliminate(adj, v)
            remaining.discard(v)
            del fill[v]
            dirty = set(nbrs)
            for a in nbrs:
                dirty |= adj[a]
            for u in dirty:
                fill[u] = _fill_count(adj, u)
            sequence.append(v)

    return EliminationOrder(tuple(sequence), constraint)


def order_width(g, order):
    """Width of `order`: the largest (remaining neighbour count) at elimination time."""
    sequence = tuple(order)
    if len(sequence) != g.number_of_nodes() or set(sequence) != set(g.nodes):
        raise ValueError("order is not a permutation of the graph's vertices")
    adj = _adjacency(g)
    width = 0
    for v in sequence:
        width = max(width, len(_eliminate(adj, v)))
    return width


def induced_width(net, constraint=None):
    """Min-fill order on the moral graph of `net` and its width."""
    graph = moral_graph(net)
    order = min_fill_order(graph, constraint)
    return order, order_width(graph, order)


# ========== Statistics ==========

def width_stats(widths):
    """
    Min, max, average and weighted average of a list of widths.

    The weighted average is log2(sum 2^w / k); the max width is factored out
    before exponentiating so large widths do not overflow.
    """
    values = np.asarray(list(widths), dtype=np.float64)
    if values.size == 0:
        raise ValueError("width_stats needs at least one width")
    top = values.max()
    weighted = float(top + np.log2(np.mean(np.exp2(values - top))))
    return WidthStats(
        min=int(values.min()),
        max=int(top),
        average=float(values.mean()),
        weighted_average=weighted,
    )
