"""Network builders and a brute-force enumeration oracle for the tests."""
import numpy as np

from bayes_net import BayesianNetwork, Cpt, Variable
from netgen import gen_structure_edge_prob, quantify, sample_evidence, select_map_vars

RTOL = 1e-9


def build_network(variables, cpts):
    """variables: [(name, cardinality)]; cpts: [(child id, parent ids, table)] in child order."""
    return BayesianNetwork(
        tuple(Variable(i, name, card) for i, (name, card) in enumerate(variables)),
        tuple(Cpt(child, tuple(parents), np.asarray(table, dtype=np.float64)) for child, parents, table in cpts),
    )


def uniform_network(n):
    """Chain X0 -> X1 -> ... with every row uniform."""
    cpts = [(0, (), [0.5, 0.5])]
    cpts += [(i, (i - 1,), [[0.5, 0.5], [0.5, 0.5]]) for i in range(1, n)]
    return build_network([(f"X{i}", 2) for i in range(n)], cpts)


def random_instance(seed, max_n=12, p=0.3, bias=0.5):
    """Small seeded instance: (net, S, e)."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_n + 1))
    net = quantify(gen_structure_edge_prob(n, p, rng), bias, rng)
    S = select_map_vars(net, 25, rng)
    e = {v: x for v, x in sample_evidence(net, rng).items() if v not in S}
    return net, S, e


# ========== Oracle ==========

def joint_table(net):
    joint = np.ones(net.cardinalities)
    for cpt in net.cpts:
        scope = cpt.scope
        shape = [1] * net.n
        for v in scope:
            shape[v] = net.cardinalities[v]
        joint = joint * np.transpose(cpt.table, np.argsort(scope)).reshape(shape)
    return joint


def masked_joint(net, assignment):
    """Joint with every entry inconsistent with `assignment` zeroed."""
    joint = joint_table(net)
    for var, value in assignment.items():
        mask = np.zeros(net.cardinalities[var])
        mask[value] = 1.0
        shape = [1] * net.n
        shape[var] = net.cardinalities[var]
        joint = joint * mask.reshape(shape)
    return joint


def oracle_probability(net, assignment):
    return float(masked_joint(net, assignment).sum())


def oracle_marginals(net, e):
    joint = masked_joint(net, e)
    return {v: joint.sum(axis=tuple(a for a in range(net.n) if a != v)) for v in range(net.n)}


def oracle_map(net, S, e):
    """(max over s of Pr(s, e), table of Pr(s, e) over sorted S)."""
    S = sorted(S)
    joint = masked_joint(net, e)
    table = joint.sum(axis=tuple(a for a in range(net.n) if a not in S))
    return float(table.max()), table
