"""
Nonnegative tables over variable scopes, carried as mantissa table x 2^log_offset.

After every product or marginalization the table is rescaled by a power of two
so its largest entry lies in [0.5, 1); the exponent moves into `log_offset`.
Rescaling by powers of two is exact, so the represented values never pick up
rounding error from the scale bookkeeping.
"""
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

LN2 = math.log(2.0)


@dataclass(frozen=True)
class Scaled:
    """A nonnegative real represented as mantissa x 2^exponent."""
    mantissa: float
    exponent: int

    @property
    def value(self):
        return math.ldexp(self.mantissa, self.exponent)

    @property
    def log(self):
        if self.mantissa <= 0.0:
            return -math.inf
        return math.log(self.mantissa) + self.exponent * LN2

    def __float__(self):
        return self.value


def rescale(values):
    """Returns (values * 2^-k, k) with the max of the result in [0.5, 1)."""
    if values.size == 0:
        return values, 0
    top = float(values.max())
    if top <= 0.0 or not math.isfinite(top):
        return values, 0
    _, exponent = math.frexp(top)
    if exponent == 0:
        return values, 0
    return np.ldexp(values, -exponent), exponent


def einsum_labels(*scopes):
    """Maps the variable ids used by `scopes` onto small einsum axis labels."""
    labels = {}
    for scope in scopes:
        for var in scope:
            labels.setdefault(var, len(labels))
    return labels


class Factor:
    __slots__ = ("scope", "values", "log_offset")

    def __init__(self, scope, values, log_offset=0, normalize=True):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != len(scope):
            raise ValueError(f"factor over {len(scope)} variables given a {values.ndim}-d table")
        if normalize:
            values, shift = rescale(values)
            log_offset += shift
        self.scope = tuple(scope)
        self.values = values
        self.log_offset = int(log_offset)

    @classmethod
    def from_cpt(cls, cpt):
        return cls(cpt.scope, cpt.table)

    def __repr__(self):
        return f"Factor(scope={self.scope}, shape={self.values.shape}, log_offset={self.log_offset})"

    def restrict(self, evidence):
        """Slices out the variables bound by `evidence`."""
        if not any(var in evidence for var in self.scope):
            return self
        index = tuple(evidence[var] if var in evidence else slice(None) for var in self.scope)
        scope = tuple(var for var in self.scope if var not in evidence)
        return Factor(scope, self.values[index], self.log_offset)

    def multiply(self, other):
        scope = self.scope + tuple(v for v in other.scope if v not in self.scope)
        labels = einsum_labels(scope)
        values = np.einsum(
            self.values, [labels[v] for v in self.scope],
            other.values, [labels[v] for v in other.scope],
            [labels[v] for v in scope],
        )
        return Factor(scope, values, self.log_offset + other.log_offset)

    @staticmethod
    def product(factors):
        factors = list(factors)
        if not factors:
            return Factor((), np.array(1.0))
        return reduce(Factor.multiply, factors)

    def sum_out(self, var):
        axis = self.scope.index(var)
        scope = self.scope[:axis] + self.scope[axis + 1:]
        return Factor(scope, self.values.sum(axis=axis), self.log_offset)

    def max_out(self, var):
        """
        Maximizes `var` out.

        Returns:
            tuple: (Factor over the remaining scope, argmax table over that scope).
            The argmax is the lowest maximizing value index.
        """
        axis = self.scope.index(var)
        scope = self.scope[:axis] + self.scope[axis + 1:]
        argmax = self.values.argmax(axis=axis)
        return Factor(scope, self.values.max(axis=axis), self.log_offset), argmax

    def scalar(self):
        if self.scope:
            raise ValueError(f"factor still mentions variables {self.scope}")
        return Scaled(float(self.values), self.log_offset)
