"""
Bayesian network representation: variables, CPTs, networks and assignments.

Networks and assignments are immutable once constructed, so they can be shared
read-only between search runs and worker processes.
"""
import math
import logging
from collections.abc import Mapping
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import networkx as nx

from config import CPT_TOLERANCE
from errors import AssignmentError, NetworkValidationError

# Configure logging for this module
logger = logging.getLogger(__name__)


# ========== Assignments ==========

class Assignment(Mapping):
    """
    A partial or complete mapping from variable id to value index.

    Houses the instantiations s, e, s' and s - X, x. Bindings are stored sorted
    by variable id so two equal assignments also iterate identically.
    """

    __slots__ = ("_bindings",)

    def __init__(self, bindings=None):
        items = {}
        for var, value in dict(bindings or {}).items():
            var, value = int(var), int(value)
            if var < 0 or value < 0:
                raise AssignmentError(f"negative binding {var} -> {value}")
            items[var] = value
        self._bindings = dict(sorted(items.items()))

    def __getitem__(self, var):
        return self._bindings[var]

    def __iter__(self):
        return iter(self._bindings)

    def __len__(self):
        return len(self._bindings)

    def __hash__(self):
        return hash(tuple(self._bindings.items()))

    def __repr__(self):
        return f"Assignment({self._bindings})"

    def with_value(self, var, value):
        """Returns a copy with `var` bound to `value`; self is unchanged."""
        updated = dict(self._bindings)
        updated[var] = value
        return Assignment(updated)

    def without(self, var):
        return Assignment({v: x for v, x in self._bindings.items() if v != var})

    def project(self, variables):
        """Restricts the assignment to `variables` (missing ones are skipped)."""
        return Assignment({v: self._bindings[v] for v in variables if v in self._bindings})

    def merge(self, other):
        """Union of two assignments. Raises AssignmentError on conflicting bindings."""
        merged = dict(self._bindings)
        for var, value in other.items():
            if merged.get(var, value) != value:
                raise AssignmentError(f"conflicting bindings for variable {var}")
            merged[var] = value
        return Assignment(merged)

    def key(self, variables):
        """Hashable tuple of values over `variables`, in the given order."""
        return tuple(self._bindings[v] for v in variables)


# ========== Variables and CPTs ==========

@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    cardinality: int

    def __post_init__(self):
        if self.cardinality < 2:
            raise NetworkValidationError(f"variable {self.name!r}: cardinality < 2")


@dataclass(frozen=True, eq=False)
class Cpt:
    """
    Conditional probability table of `child` given `parents`.

    The table has shape (card(p1), ..., card(pk), card(child)), parents ordered
    by id. Flattened in C order this is the file layout: one row per parent
    configuration, last parent fastest-varying.
    """
    child: int
    parents: tuple
    table: np.ndarray

    def __post_init__(self):
        parents = tuple(int(p) for p in self.parents)
        table = np.array(self.table, dtype=np.float64)
        if table.ndim != len(parents) + 1:
            raise NetworkValidationError(
                f"CPT of variable {self.child}: table has {table.ndim} axes, expected {len(parents) + 1}"
            )
        if len(set(parents)) != len(parents):
            raise NetworkValidationError(f"CPT of variable {self.child}: duplicate parents")
        if self.child in parents:
            raise NetworkValidationError(f"CPT of variable {self.child}: variable is its own parent")

        # Parents are kept in id order; permute the table axes to match.
        ordering = sorted(range(len(parents)), key=lambda i: parents[i])
        if ordering != list(range(len(parents))):
            table = np.transpose(table, ordering + [len(parents)]).copy()
            parents = tuple(parents[i] for i in ordering)

        table.flags.writeable = False
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "table", table)

    def __eq__(self, other):
        if not isinstance(other, Cpt):
            return NotImplemented
        return (self.child == other.child and self.parents == other.parents
                and np.array_equal(self.table, other.table))

    __hash__ = None

    @property
    def scope(self):
        return self.parents + (self.child,)

    def entry(self, assignment):
        """CPT entry consistent with a complete-enough assignment."""
        return float(self.table[tuple(assignment[v] for v in self.scope)])


# ========== Networks ==========

@dataclass(frozen=True, eq=False)
class BayesianNetwork:
    variables: tuple
    cpts: tuple

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "cpts", tuple(self.cpts))
        self._validate()

    def _validate(self):
        names = set()
        for index, var in enumerate(self.variables):
            if var.id != index:
                raise NetworkValidationError(f"variable {var.name!r}: id {var.id} breaks the dense 0..N-1 numbering")
            if var.name in names:
                raise NetworkValidationError(f"variable {var.name!r} declared twice")
            names.add(var.name)

        if len(self.cpts) != len(self.variables):
            raise NetworkValidationError(f"expected {len(self.variables)} CPTs, found {len(self.cpts)}")

        for index, cpt in enumerate(self.cpts):
            name = self.variables[index].name if index < len(self.variables) else str(index)
            if cpt.child != index:
                raise NetworkValidationError(f"CPT at position {index} belongs to variable {cpt.child}, expected {name!r}")
            for parent in cpt.parents:
                if not 0 <= parent < len(self.variables):
                    raise NetworkValidationError(f"CPT of {name!r}: unknown parent id {parent}")
            expected = tuple(self.variables[p].cardinality for p in cpt.scope)
            if cpt.table.shape != expected:
                raise NetworkValidationError(f"CPT of {name!r}: table shape {cpt.table.shape}, expected {expected}")
            if not np.all(np.isfinite(cpt.table)) or cpt.table.min() < 0.0 or cpt.table.max() > 1.0:
                raise NetworkValidationError(f"CPT of {name!r}: entries outside [0, 1]")
            sums = cpt.table.sum(axis=-1)
            bad = np.argwhere(np.abs(sums - 1.0) > CPT_TOLERANCE)
            if bad.size:
                config = tuple(int(i) for i in bad[0])
                raise NetworkValidationError(
                    f"CPT of {name!r}: row for parent configuration {config} sums to {sums[tuple(bad[0])]!r}, not 1"
                )

        if not nx.is_directed_acyclic_graph(self.dag):
            cycle = nx.find_cycle(self.dag)
            path = " -> ".join(self.variables[u].name for u, _ in cycle)
            raise NetworkValidationError(f"cycle detected: {path} -> {self.variables[cycle[0][0]].name}")

    def __eq__(self, other):
        if not isinstance(other, BayesianNetwork):
            return NotImplemented
        return self.variables == other.variables and self.cpts == other.cpts

    __hash__ = None

    # --- Structure ---

    @property
    def n(self):
        return len(self.variables)

    @cached_property
    def cardinalities(self):
        return tuple(var.cardinality for var in self.variables)

    @cached_property
    def names(self):
        return tuple(var.name for var in self.variables)

    @cached_property
    def _index(self):
        return {var.name: var.id for var in self.variables}

    def index_of(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise AssignmentError(f"unknown variable {name!r}") from None

    @cached_property
    def dag(self):
        graph = nx.DiGraph()
        graph.add_nodes_from(range(len(self.variables)))
        for cpt in self.cpts:
            graph.add_edges_from((parent, cpt.child) for parent in cpt.parents)
        return graph

    def parents(self, var):
        return self.cpts[var].parents

    def children(self, var):
        return tuple(sorted(self.dag.successors(var)))

    def roots(self):
        return tuple(v for v in range(self.n) if not self.cpts[v].parents)

    def leaves(self):
        return tuple(v for v in range(self.n) if self.dag.out_degree(v) == 0)

    @cached_property
    def topological_order(self):
        return tuple(nx.lexicographical_topological_sort(self.dag))

    # --- Probabilities ---

    def validate_assignment(self, assignment):
        for var, value in assignment.items():
            if not 0 <= var < self.n:
                raise AssignmentError(f"unknown variable id {var}")
            if not 0 <= value < self.cardinalities[var]:
                raise AssignmentError(
                    f"value {value} out of range for {self.names[var]!r} (cardinality {self.cardinalities[var]})"
                )

    def joint_probability(self, assignment):
        """Pr of a complete assignment: the product of the matching CPT entries."""
        return math.prod(cpt.entry(assignment) for cpt in self.cpts)

    def log_joint_probability(self, assignment):
        entries = [cpt.entry(assignment) for cpt in self.cpts]
        if min(entries) == 0.0:
            return -math.inf
        return math.fsum(math.log(p) for p in entries)

    def describe(self, assignment):
        """Human-readable {name: value} view of an assignment."""
        return {self.names[var]: value for var, value in assignment.items()}


# ========== Neighbours ==========

def neighbor(net, s, var, value):
    """
    Returns s - X, x: the assignment s with variable `var` changed to `value`.

    Args:
        net (BayesianNetwork): Supplies the cardinality of `var`.
        s (Assignment): Must bind `var`.
        var (int): Variable id X.
        value (int): New value index x.

    Returns:
        Assignment: A new assignment; `s` itself is not modified.
    """
    if var not in s:
        raise AssignmentError(f"variable {var} is not bound in the assignment")
    if not 0 <= value < net.cardinalities[var]:
        raise AssignmentError(
            f"value {value} out of range for {net.names[var]!r} (cardinality {net.cardinalities[var]})"
        )
    return s.with_value(var, value)


def neighbors(net, s, variables):
    """Yields (X, x, s - X, x) for every non-identical neighbour over `variables`."""
    for var in sorted(variables):
        for value in range(net.cardinalities[var]):
            if value != s[var]:
                yield var, value, neighbor(net, s, var, value)
