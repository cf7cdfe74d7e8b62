"""Greedy supermodular minimization: the budget and cover problems.

On a GFF the error is non-increasing and supermodular, so greedy carries a
guarantee certificate and stale heap entries are valid upper bounds (lazy
re-evaluation). GMRF inputs are accepted as a heuristic: same loop, fresh
evaluation of every candidate each round, and no certificate.
"""

from __future__ import annotations

import heapq
import math
import time

from .errors import InvariantViolation
from .models import GffModel, Guarantee, SelectionReport, err, make_report

BUDGET_FACTOR = 1.0 / (1.0 - 1.0 / math.e)


def cover_factor(gff: GffModel) -> float:
    """1 + ln((n-1)^2 R/r) with R the largest and r the smallest edge resistance."""
    resistances = [r for _, _, r in gff.edges]
    big, small = max(resistances), min(resistances)
    return 1.0 + math.log((gff.n - 1) ** 2 * big / small)


def _start_set(model):
    return {model.pin} if isinstance(model, GffModel) else set()


def _greedy_rounds(model, stop):
    """Run greedy argmin-err rounds until ``stop(selected, current_err)``.

    Returns the selected set. Ties break toward the lowest vertex index; the
    accepted candidate is always re-evaluated fresh before acceptance.
    """
    selected = _start_set(model)
    current = err(model, selected)
    lazy = isinstance(model, GffModel)
    remaining = [v for v in model.vertices if v not in selected]

    heap = []
    if lazy:
        for x in remaining:
            heap.append((-(current - err(model, selected | {x})), x))
        heapq.heapify(heap)

    while remaining and not stop(selected, current):
        if lazy:
            while True:
                neg_gain, x = heapq.heappop(heap)
                fresh = current - err(model, selected | {x})
                key = (-fresh, x)
                if not heap or key <= heap[0]:
                    break
                heapq.heappush(heap, key)
            chosen, gain = x, fresh
        else:
            gains = [(current - err(model, selected | {x}), x) for x in remaining]
            gain, chosen = max(gains, key=lambda t: (t[0], -t[1]))
        if gain < -1e-12 * max(current, 1.0):
            raise InvariantViolation(
                f"greedy err increased by {-gain!r} adding {chosen}")
        selected.add(chosen)
        remaining.remove(chosen)
        current -= gain
    return selected


def greedy_budget(model, b: int) -> SelectionReport:
    """Add b vertices greedily, each round the argmin of err(S + {x})."""
    if b < 0:
        raise InvariantViolation(f"budget must be >= 0, got {b}")
    started = time.perf_counter()
    base = len(_start_set(model))

    selected = _greedy_rounds(model, lambda s, e: len(s) - base >= b)
    guarantee = None
    if isinstance(model, GffModel):
        guarantee = Guarantee(BUDGET_FACTOR, "supermodular greedy, budget")
    return make_report(model, selected, "greedy-budget", b,
                       guarantee=guarantee, started=started)


def greedy_cover(model, alpha: float) -> SelectionReport:
    """Add vertices greedily until err(S) <= alpha."""
    if alpha < 0:
        raise InvariantViolation(f"alpha must be >= 0, got {alpha}")
    started = time.perf_counter()

    selected = _greedy_rounds(model, lambda s, e: e <= alpha)
    guarantee = None
    if isinstance(model, GffModel):
        guarantee = Guarantee(cover_factor(model), "supermodular cover, log-ratio bound")
    return make_report(model, selected, "greedy-cover", alpha,
                       guarantee=guarantee, started=started)
