"""Forward state-space search: bfs, astar, and gbfs over ground tasks.

One best-first loop serves all three algorithms; they differ only in
the priority they assign a node. Ties break first on the secondary
component (h, where applicable), then strictly FIFO via a monotonic
counter — states themselves are never compared, so runs are
deterministic for identical inputs. The goal test happens when a node
is expanded (popped), not when it is generated, which keeps bfs and
astar optimal. Resource exhaustion is an outcome, not an error.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, replace

from ..grounding import GroundAction, GroundTask
from .heuristics import HEURISTIC_NAMES, make_heuristic

ALGORITHMS = ("bfs", "astar", "gbfs")
# Every planner string this capability accepts, as advertised in its
# announcements (and from there in the gateway's capability registry).
PLANNERS = ("bfs",) + tuple(
    f"{algorithm}:{heuristic}" for algorithm in ("astar", "gbfs") for heuristic in HEURISTIC_NAMES
)
DEFAULT_MAX_EXPANSIONS = 1_000_000
DEFAULT_TIME_BUDGET_MS = 30_000

OUTCOME_SOLVED = "solved"
OUTCOME_UNSOLVABLE = "unsolvable"
OUTCOME_RESOURCE_LIMIT = "resourceLimit"


class UnknownPlannerError(Exception):
    """The requested planner string names no supported configuration."""

    def __init__(self, planner):
        super().__init__(f"unknown planner {planner!r}")
        self.planner = planner


@dataclass(frozen=True)
class SearchConfig:
    algorithm: str
    heuristic: str = "none"
    max_expansions: int = DEFAULT_MAX_EXPANSIONS
    time_budget_ms: int = DEFAULT_TIME_BUDGET_MS

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise UnknownPlannerError(self.algorithm)
        if self.algorithm == "bfs":
            if self.heuristic != "none":
                raise UnknownPlannerError(f"{self.algorithm}:{self.heuristic}")
        elif self.heuristic not in HEURISTIC_NAMES:
            raise UnknownPlannerError(f"{self.algorithm}:{self.heuristic}")


def parse_planner(text) -> SearchConfig:
    """Parse "algorithm" or "algorithm:heuristic" into a config."""
    if not isinstance(text, str) or not text:
        raise UnknownPlannerError(text)
    algorithm, sep, heuristic = text.partition(":")
    if algorithm not in ALGORITHMS:
        raise UnknownPlannerError(text)
    try:
        return SearchConfig(algorithm=algorithm, heuristic=heuristic if sep else "none")
    except UnknownPlannerError:
        raise UnknownPlannerError(text) from None


@dataclass(frozen=True)
class Plan:
    steps: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class SearchStats:
    expanded: int
    generated: int
    evaluated: int
    elapsed_ms: int
    outcome: str


def _applicable(state: frozenset[int], action: GroundAction) -> bool:
    return action.pre_pos <= state and not (action.pre_neg & state)


def _successor(state: frozenset[int], action: GroundAction) -> frozenset[int]:
    return (state - action.delete) | action.add


def satisfies_goal(state: frozenset[int], task: GroundTask) -> bool:
    return task.goal_pos <= state and not (task.goal_neg & state)


def run_search(task: GroundTask, config: SearchConfig) -> tuple[Plan | None, SearchStats]:
    """Run the configured search; returns (plan or None, stats).

    Unsolvable is only reported once the reachable space (minus relaxed
    dead ends) is exhausted, or immediately when the task carries the
    grounding-time unsolvable flag. A* reopens closed states on cheaper
    paths unless the heuristic is consistent (h_max), where reopening
    can never fire.
    """
    start = time.monotonic()
    expanded = generated = evaluated = 0

    def finish(outcome: str, plan: Plan | None = None):
        elapsed_ms = int((time.monotonic() - start) * 1000)
        return plan, SearchStats(expanded, generated, evaluated, elapsed_ms, outcome)

    if task.unsolvable:
        return finish(OUTCOME_UNSOLVABLE)

    uses_heuristic = config.algorithm in ("astar", "gbfs")
    heuristic = make_heuristic(config.heuristic, task) if uses_heuristic else None
    reopening = config.algorithm == "astar" and config.heuristic != "hmax"

    def priority(g: int, h: float) -> tuple[float, float]:
        if config.algorithm == "bfs":
            return (float(g), 0.0)
        if config.algorithm == "astar":
            return (g + h, h)
        return (h, 0.0)

    deadline = start + config.time_budget_ms / 1000.0
    init = frozenset(task.init)
    if heuristic is not None:
        h0 = heuristic(init)
        evaluated += 1
        if h0 == math.inf:
            return finish(OUTCOME_UNSOLVABLE)
    else:
        h0 = 0.0

    counter = 0
    best_g: dict[frozenset[int], int] = {init: 0}
    parents: dict[frozenset[int], tuple[frozenset[int], str] | None] = {init: None}
    closed: set[frozenset[int]] = set()
    frontier: list[tuple[tuple[float, float], int, int, frozenset[int]]] = [(priority(0, h0), counter, 0, init)]

    while frontier:
        _, _, g, state = heapq.heappop(frontier)
        if g != best_g.get(state) or state in closed:
            continue  # stale entry, or already expanded and not reopened
        closed.add(state)
        if satisfies_goal(state, task):
            steps: list[str] = []
            cursor = state
            while True:
                parent = parents[cursor]
                if parent is None:
                    break
                cursor, name = parent
                steps.append(name)
            return finish(OUTCOME_SOLVED, Plan(tuple(reversed(steps))))
        if expanded >= config.max_expansions or time.monotonic() > deadline:
            return finish(OUTCOME_RESOURCE_LIMIT)
        expanded += 1
        for action in task.actions:
            if not _applicable(state, action):
                continue
            successor = _successor(state, action)
            generated += 1
            tentative = g + 1
            known = best_g.get(successor)
            if known is not None and known <= tentative:
                continue
            if successor in closed:
                if not reopening:
                    continue
                closed.discard(successor)
            if heuristic is not None:
                h = heuristic(successor)
                evaluated += 1
                if h == math.inf:
                    continue  # relaxed dead end: the goal is unreachable from here
            else:
                h = 0.0
            best_g[successor] = tentative
            parents[successor] = (state, action.name)
            counter += 1
            heapq.heappush(frontier, (priority(tentative, h), counter, tentative, successor))

    return finish(OUTCOME_UNSOLVABLE)


def _configured(algorithm: str, heuristic: str, config: SearchConfig | None) -> SearchConfig:
    if config is None:
        return SearchConfig(algorithm=algorithm, heuristic=heuristic)
    return replace(config, algorithm=algorithm, heuristic=heuristic)


def bfs(task: GroundTask, config: SearchConfig | None = None):
    return run_search(task, _configured("bfs", "none", config))


def astar(task: GroundTask, heuristic: str, config: SearchConfig | None = None):
    return run_search(task, _configured("astar", heuristic, config))


def gbfs(task: GroundTask, heuristic: str, config: SearchConfig | None = None):
    return run_search(task, _configured("gbfs", heuristic, config))
