"""Search algorithms, heuristics, and the Solving capability handler."""

from .heuristics import (
    HEURISTIC_NAMES,
    goal_count,
    hadd,
    hff,
    hmax,
    make_heuristic,
    relaxation_table,
)
from .search import (
    ALGORITHMS,
    DEFAULT_MAX_EXPANSIONS,
    DEFAULT_TIME_BUDGET_MS,
    OUTCOME_RESOURCE_LIMIT,
    OUTCOME_SOLVED,
    OUTCOME_UNSOLVABLE,
    PLANNERS,
    Plan,
    SearchConfig,
    SearchStats,
    UnknownPlannerError,
    astar,
    bfs,
    gbfs,
    parse_planner,
    run_search,
    satisfies_goal,
)
from .service import handle_solving, plan_payload, solve_task

__all__ = [
    "ALGORITHMS",
    "DEFAULT_MAX_EXPANSIONS",
    "DEFAULT_TIME_BUDGET_MS",
    "HEURISTIC_NAMES",
    "OUTCOME_RESOURCE_LIMIT",
    "OUTCOME_SOLVED",
    "OUTCOME_UNSOLVABLE",
    "PLANNERS",
    "Plan",
    "SearchConfig",
    "SearchStats",
    "UnknownPlannerError",
    "astar",
    "bfs",
    "gbfs",
    "goal_count",
    "hadd",
    "handle_solving",
    "hff",
    "hmax",
    "make_heuristic",
    "parse_planner",
    "plan_payload",
    "relaxation_table",
    "run_search",
    "satisfies_goal",
    "solve_task",
]
