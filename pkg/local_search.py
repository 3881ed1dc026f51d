"""
Local search for MAP: hill climbing with random restarts and taboo search.

Every step scores all neighbours of the current state with one pass over the
elimination trace; that pass is the unit of the evaluation budget. The four
initialisations cost rand 0, mpe 1, ml 1 and seq |S| evaluations.
"""
import math
import logging
from dataclasses import dataclass, field

import numpy as np

from bayes_net import Assignment
from circuit import IndicatorSetting, all_neighbor_scores
from config import DEFAULT_BUDGET, RESTART_WALK_LENGTH, SCORE_EPSILON
from errors import AssignmentError, ConfigError, ZeroProbabilityEvidence
from factor import LN2
from inference import MapSolution, mpe

# Configure logging for this module
logger = logging.getLogger(__name__)

SEARCH_METHODS = ("hill", "taboo", "none")
INIT_METHODS = ("rand", "mpe", "ml", "seq")


@dataclass(frozen=True)
class SearchConfig:
    """
    Args:
        method: "hill", "taboo", or "none" (return the initialisation).
        init: "rand", "mpe", "ml" or "seq".
        budget: Maximum network evaluations, initialisation included.
        restart_walk_length: Random moves taken when the search is stuck.
        rng_seed: Seed of the run's random generator.
    """
    method: str = "hill"
    init: str = "rand"
    budget: int = DEFAULT_BUDGET
    restart_walk_length: int = RESTART_WALK_LENGTH
    rng_seed: int = 0

    def __post_init__(self):
        if self.method not in SEARCH_METHODS:
            raise ConfigError(f"unknown search method {self.method!r}")
        if self.init not in INIT_METHODS:
            raise ConfigError(f"unknown initialisation {self.init!r}")
        if self.budget < 0:
            raise ConfigError("budget must be non-negative")
        if self.restart_walk_length < 1:
            raise ConfigError("restart_walk_length must be at least 1")


@dataclass
class SearchResult:
    best: MapSolution
    evaluations_used: int
    evaluations_to_best: int
    peaks_found: int
    peaks_before_best: int = 0
    first_peak_evaluation: int = None
    # (evaluation index, log score) each time the best state improved.
    visited_best_trace: list = field(default_factory=list)
    # States (values over sorted S) whose neighbourhoods were scored, in order.
    trajectory: list = field(default_factory=list)


def init_cost(init, S):
    return {"rand": 0, "mpe": 1, "ml": 1, "seq": len(S)}[init]


# ========== Initialisations ==========

def init_random(net, S, rng):
    """Each MAP variable independently uniform over its values. Costs nothing."""
    return Assignment({var: int(rng.integers(net.cardinalities[var])) for var in sorted(S)})


def init_mpe(net, S, e, trace):
    """Projection of the MPE given e onto S. One evaluation."""
    return mpe(net, e, trace.order).assignment.project(sorted(S))


def _marginal_logs(net, variables, evidence, trace):
    """log Pr(x, evidence) for every value of `variables`, from one trace pass."""
    fwd = trace.forward(IndicatorSetting.from_assignment(net, evidence))
    if trace.value(fwd).mantissa <= 0.0:
        return None
    logs = {}
    with np.errstate(divide="ignore"):
        for var, (mantissa, exponent) in trace.backward(fwd, variables).items():
            logs[var] = np.log(mantissa) + exponent * LN2
    return logs


def init_ml(net, S, e, trace):
    """
    Each MAP variable takes the value maximizing Pr(x | e); ties go to the
    lowest value index. One evaluation.
    """
    S = sorted(S)
    logs = _marginal_logs(net, S, Assignment(e), trace)
    if logs is None:
        raise ZeroProbabilityEvidence("evidence has probability zero")
    return Assignment({var: int(np.argmax(logs[var])) for var in S})


def init_seq(net, S, e, trace):
    """
    Commits MAP variables one at a time: each round picks, among the variables
    not yet assigned, the (variable, value) pair with the highest Pr(x | e, y)
    given the assignment y built so far. One evaluation per MAP variable.
    """
    remaining = sorted(S)
    y = Assignment()
    e = Assignment(e)
    while remaining:
        logs = _marginal_logs(net, remaining, e.merge(y), trace)
        choice = None
        if logs is not None:
            best_log = -math.inf
            for var in remaining:
                for value, log in enumerate(logs[var]):
                    if log > best_log:
                        best_log, choice = log, (var, value)
        if choice is None:
            # Every candidate has probability zero: commit the lowest id to 0.
            choice = (remaining[0], 0)
        y = y.with_value(*choice)
        remaining.remove(choice[0])
    return y


# ========== Search ==========

class LocalSearch:
    """One search run over a shared, immutable trace."""

    def __init__(self, net, S, e, config, trace, initial=None):
        self.net = net
        self.S = tuple(sorted(S))
        self.e = Assignment(e)
        self.config = config
        self.trace = trace
        self.initial = None if initial is None else Assignment(initial)
        self.rng = np.random.default_rng(config.rng_seed)
        self.cards = [net.cardinalities[var] for var in self.S]
        self.logger = logging.getLogger(__name__)

        if any(var in self.e for var in self.S):
            raise AssignmentError("MAP variables and evidence overlap")
        net.validate_assignment(self.e)

        self.used = 0
        self.best_state = None
        self.best_log = -math.inf
        self.best_score = 0.0
        self.best_eval = 0
        self.peaks = 0
        self.peaks_before_best = 0
        self.first_peak = None
        self.best_trace = []
        self.trajectory = []

    # --- Helpers ---

    def _assignment(self, state):
        return Assignment(dict(zip(self.S, state)))

    def _initialize(self):
        if self.initial is not None:
            if set(self.initial) != set(self.S):
                raise AssignmentError("the initial state must bind exactly the MAP variables")
            return tuple(self.initial[var] for var in self.S)
        init = self.config.init
        cost = init_cost(init, self.S)
        if cost > self.config.budget:
            raise ConfigError(f"budget {self.config.budget} cannot cover the {init} initialisation ({cost} evaluations)")
        if init == "rand":
            s = init_random(self.net, self.S, self.rng)
        elif init == "mpe":
            s = init_mpe(self.net, self.S, self.e, self.trace)
        elif init == "ml":
            s = init_ml(self.net, self.S, self.e, self.trace)
        else:
            s = init_seq(self.net, self.S, self.e, self.trace)
        self.used += cost
        return tuple(s[var] for var in self.S)

    def _record_best(self, state, log, score):
        if self.best_state is None or log > self.best_log + SCORE_EPSILON:
            self.best_state, self.best_log, self.best_score = state, log, score
            self.best_eval = self.used
            self.peaks_before_best = self.peaks
            self.best_trace.append((self.used, log))

    def _score(self, state):
        ns = all_neighbor_scores(self.net, self.S, self._assignment(state), self.e, trace=self.trace)
        self.used += 1
        self.trajectory.append(state)

        # Every scored state competes for best, not only the ones moved to.
        candidate = (ns.base_log_score, state, ns.base_score)
        logs = {}
        for i, var in enumerate(self.S):
            logs[var] = ns.log_scores(var)
            for value in range(self.cards[i]):
                if value != state[i] and logs[var][value] > candidate[0]:
                    neighbour = state[:i] + (value,) + state[i + 1:]
                    candidate = (logs[var][value], neighbour, ns.score(var, value))
        self._record_best(candidate[1], float(candidate[0]), candidate[2])
        return ns, logs

    def _best_move(self, state, logs, visited=None):
        """Best neighbour (log, state); ties go to the lowest variable id, then value."""
        best = None
        for i, var in enumerate(self.S):
            for value in range(self.cards[i]):
                if value == state[i]:
                    continue
                neighbour = state[:i] + (value,) + state[i + 1:]
                if visited is not None and neighbour in visited:
                    continue
                if best is None or logs[var][value] > best[0]:
                    best = (logs[var][value], neighbour)
        return best

    def _random_walk(self, state):
        state = list(state)
        for _ in range(self.config.restart_walk_length):
            i = int(self.rng.integers(len(self.S)))
            value = int(self.rng.integers(self.cards[i] - 1))
            if value >= state[i]:
                value += 1
            state[i] = value
        return tuple(state)

    def _score_unpriced(self, state):
        """Pr(s, e) for reporting a state never scored inside the budget."""
        setting = IndicatorSetting.from_assignment(self.net, self._assignment(state).merge(self.e))
        value = self.trace.value(self.trace.forward(setting))
        return value.log, value.value

    # --- Main loop ---

    def run(self):
        state = self._initialize()
        init_used = self.used
        method = self.config.method

        visited = set()
        while method != "none" and self.used < self.config.budget:
            if method == "taboo":
                visited.add(state)
            ns, logs = self._score(state)
            base_log = ns.base_log_score
            if not self.S:
                break

            best_any = self._best_move(state, logs)
            is_peak = best_any[0] <= base_log + SCORE_EPSILON
            if is_peak:
                self.peaks += 1
                if self.first_peak is None:
                    self.first_peak = self.used
                self.logger.debug(f"Peak #{self.peaks} at evaluation {self.used} (log score {base_log:.6f})")

            if method == "hill":
                state = self._random_walk(state) if is_peak else best_any[1]
            else:
                move = self._best_move(state, logs, visited)
                state = self._random_walk(state) if move is None else move[1]

        if self.best_state is None:
            log, score = self._score_unpriced(state)
            self.best_state, self.best_log, self.best_score = state, log, score
            self.best_eval = init_used
            self.best_trace.append((init_used, log))

        return SearchResult(
            best=MapSolution(self._assignment(self.best_state), self.best_score, self.best_log),
            evaluations_used=self.used,
            evaluations_to_best=self.best_eval,
            peaks_found=self.peaks,
            peaks_before_best=self.peaks_before_best,
            first_peak_evaluation=self.first_peak,
            visited_best_trace=self.best_trace,
            trajectory=self.trajectory,
        )


def hill_climb(net, S, e, config, trace, initial=None):
    """Hill climbing with random restarts; a random walk follows every peak."""
    if config.method != "hill":
        raise ConfigError("hill_climb needs config.method == 'hill'")
    return LocalSearch(net, S, e, config, trace, initial).run()


def taboo_search(net, S, e, config, trace, initial=None):
    """Moves to the best neighbour not visited before, even when it is worse."""
    if config.method != "taboo":
        raise ConfigError("taboo_search needs config.method == 'taboo'")
    return LocalSearch(net, S, e, config, trace, initial).run()


def run_search(net, S, e, config, trace, initial=None):
    """Runs the configured method; method "none" returns the initialisation."""
    return LocalSearch(net, S, e, config, trace, initial).run()
