"""
Random benchmark networks.

Two structure generators over ordered variables 0..N-1 (edges always point
from lower to higher index), a bias-b quantification for binary variables,
MAP-variable selection among the roots, and leaf evidence drawn by ancestral
sampling so Pr(e) > 0 even on deterministic networks.
"""
import logging
from dataclasses import dataclass

import numpy as np
import networkx as nx

from bayes_net import Assignment, BayesianNetwork, Cpt, Variable
from config import MAX_MAP_VARS, ROOT_PROBABILITY
from errors import ConfigError

# Configure logging for this module
logger = logging.getLogger(__name__)

GEN_METHODS = ("connectivity", "edge_prob")


@dataclass(frozen=True)
class GenConfig:
    method: str = "edge_prob"
    n: int = 100
    c: float = 6
    p: float = 0.025
    bias: float = 0.5
    max_map_vars: int = MAX_MAP_VARS
    rng_seed: int = 0

    def __post_init__(self):
        if self.method not in GEN_METHODS:
            raise ConfigError(f"unknown generation method {self.method!r}")
        if self.n < 1:
            raise ConfigError("a network needs at least one variable")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError("edge probability must lie in [0, 1]")
        if not 0.0 <= self.bias <= 0.5:
            raise ConfigError("bias must lie in [0, 0.5]")
        if self.c < 1:
            raise ConfigError("connectivity must be at least 1")
        if self.max_map_vars < 0:
            raise ConfigError("max_map_vars must be non-negative")

    @property
    def param(self):
        return self.c if self.method == "connectivity" else self.p


@dataclass(frozen=True)
class Instance:
    net: BayesianNetwork
    map_vars: tuple
    evidence: Assignment
    config: GenConfig


# ========== Seeds ==========

def instance_rng(master_seed, *path):
    """Independent generator for (master seed, instance index, ...)."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, path)]))


def derive_seed(master_seed, *path):
    """64-bit integer seed derived from (master seed, path)."""
    return int(np.random.SeedSequence([int(master_seed), *map(int, path)]).generate_state(1, dtype=np.uint64)[0])


# ========== Structures ==========

def _ordered_dag(n):
    dag = nx.DiGraph()
    dag.add_nodes_from(range(n))
    return dag


def gen_structure_edge_prob(n, p, rng):
    """Each pair gets an edge with probability p, directed toward the later variable."""
    dag = _ordered_dag(n)
    if n > 1:
        mask = np.triu(rng.random((n, n)) < p, k=1)
        dag.add_edges_from((int(i), int(j)) for i, j in zip(*np.nonzero(mask)))
    return dag


def connectivity_parent_count(c):
    """Parents per non-root variable; also the min-fill width the generator reaches."""
    return max(1, int(round(c)))


def gen_structure_connectivity(n, c, rng, root_probability=ROOT_PROBABILITY):
    """
    Width-targeted generator.

    Variable i >= 1 is a root with probability `root_probability`. Any other
    variable takes k = round(c) parents: the roots still waiting for a child
    first, topped up with a random subset of one earlier family (a variable
    together with its parents). Until some family has k + 1 members the
    largest family is extended; after that the family is picked uniformly.

    Every parent set is a clique of the moral graph built so far plus
    childless roots, so the moral graph stays chordal and its largest clique
    is the largest family. Min-fill then eliminates without fill and its
    width is exactly k once a family is full.

    Args:
        n (int): Variable count.
        c (float): Target min-fill width.
        rng (numpy.random.Generator): Source of randomness.
        root_probability (float): Chance that a variable after the first is a root.
    """
    k = connectivity_parent_count(c)
    dag = _ordered_dag(n)
    families = []
    largest = None
    pending = [0] if n else []
    for i in range(1, n):
        if rng.random() < root_probability:
            pending.append(i)
            continue
        # With k > 1 one slot stays free so the new family joins the existing structure.
        room = k - 1 if families and k > 1 else k
        parents = pending[:room]
        del pending[:room]
        if families and len(parents) < k:
            if len(largest) > k:
                base = families[int(rng.integers(len(families)))]
            else:
                base = largest
            take = min(k - len(parents), len(base))
            parents.extend(int(v) for v in rng.choice(base, size=take, replace=False))
        dag.add_edges_from((p, i) for p in sorted(parents))
        family = tuple(sorted(parents)) + (i,)
        families.append(family)
        if largest is None or len(family) > len(largest):
            largest = family
    return dag


def gen_structure(config, rng):
    if config.method == "connectivity":
        return gen_structure_connectivity(config.n, config.c, rng)
    return gen_structure_edge_prob(config.n, config.p, rng)


# ========== Quantification ==========

def quantify(dag, b, rng):
    """
    Binary CPTs with bias b.

    Root rows are uniform random points on the simplex. Every other row puts
    v ~ U[0, b) on a fair-coin-chosen value and 1 - v on the other, so b = 0
    gives deterministic rows and b = 0.5 uniformly random ones.
    """
    if not 0.0 <= b <= 0.5:
        raise ConfigError("bias must lie in [0, 0.5]")
    n = dag.number_of_nodes()
    variables = tuple(Variable(i, f"X{i}", 2) for i in range(n))
    cpts = []
    for child in range(n):
        parents = tuple(sorted(dag.predecessors(child)))
        rows = 2 ** len(parents)
        if parents:
            v = rng.uniform(0.0, b, size=rows) if b > 0 else np.zeros(rows)
            first = np.where(rng.random(rows) < 0.5, v, 1.0 - v)
        else:
            first = rng.random(rows)
        table = np.stack([first, 1.0 - first], axis=-1).reshape((2,) * len(parents) + (2,))
        cpts.append(Cpt(child, parents, table))
    return BayesianNetwork(variables, tuple(cpts))


# ========== MAP variables and evidence ==========

def select_map_vars(net, max_map_vars, rng):
    """All roots when there are at most `max_map_vars`, else a uniform subset of that size.
    Accepts a BayesianNetwork or a bare DAG."""
    dag = net.dag if isinstance(net, BayesianNetwork) else net
    roots = sorted(v for v in dag.nodes if dag.in_degree(v) == 0)
    if len(roots) <= max_map_vars:
        return tuple(roots)
    chosen = rng.choice(len(roots), size=max_map_vars, replace=False)
    return tuple(sorted(roots[int(i)] for i in chosen))


def _draw(row, u):
    cumulative = np.cumsum(row)
    value = int(np.searchsorted(cumulative, u, side="right"))
    if value >= len(row):
        value = int(np.flatnonzero(row)[-1])
    return value


def sample_evidence(net, rng):
    """Forward-samples a complete instantiation and keeps the leaf values."""
    sample = {}
    for var in net.topological_order:
        cpt = net.cpts[var]
        row = cpt.table[tuple(sample[p] for p in cpt.parents)]
        sample[var] = _draw(row, rng.random())
    return Assignment({var: sample[var] for var in net.leaves()})


def generate_instance(config, rng=None):
    """Structure, quantification, MAP variables and evidence from one config."""
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)
    dag = gen_structure(config, rng)
    net = quantify(dag, config.bias, rng)
    map_vars = select_map_vars(net, config.max_map_vars, rng)
    evidence = Assignment({v: x for v, x in sample_evidence(net, rng).items() if v not in map_vars})
    return Instance(net, map_vars, evidence, config)


