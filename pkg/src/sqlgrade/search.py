"""Minimum-cost edit-sequence search.

Exhaustive mode is a shortest-path (Dijkstra) walk over an implicit graph:
states are student-query trees keyed by their syntactically-canonical
serialization, edges are guided edits, and a state matches when its full
canonicalization equals the correct query's.  Greedy mode keeps a single
state and repeatedly takes the successor with the best benefit - cost score,
where benefit is the drop in canonicalized edit distance to the correct
query.  Both modes run under wall-clock and state-count budgets.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .canonicalize import canonicalize_syntactic, canonical_root
from .distance import (
    ComponentWeights, DEFAULT_WEIGHTS, canonicalized_edit_distance,
    total_component_marks,
)
from .edits import EditSequence, adjust_with_cost, enumerate_edits
from .tree import FlatTree


@dataclass(frozen=True)
class Budget:
    wall_seconds: float = 10.0
    max_states: int = 200_000


EXHAUSTIVE_BUDGET = Budget(10.0, 200_000)
GREEDY_BUDGET = Budget(5.0, 50_000)
LEARNING_BUDGET = Budget(2.0, 20_000)


@dataclass(frozen=True)
class SearchResult:
    marks_fraction: Fraction
    edit_seq: EditSequence
    explored_states: int
    elapsed: float
    outcome: str  # Matched | ZeroMarks | BudgetExceeded | CycleDetected


def total_marks(cq: FlatTree, w: ComponentWeights = DEFAULT_WEIGHTS
                ) -> Fraction:
    """Denominator of the grading formula: weighted component count."""
    return total_component_marks(cq, w)


def _seq_cost(seq: EditSequence, origin) -> Fraction:
    return adjust_with_cost(seq, origin).total_cost


def exhaustive_search(sq: FlatTree, cq: FlatTree,
                      w: ComponentWeights = DEFAULT_WEIGHTS,
                      budget: Budget = EXHAUSTIVE_BUDGET,
                      schema=None) -> SearchResult:
    start = time.monotonic()
    tot = total_marks(cq, w)
    cq_serial = canonical_root(cq, schema).serial
    sq0, _ = canonicalize_syntactic(sq, schema)
    origin = sq.with_origin

    best: dict[str, Fraction] = {sq0.root.serial: tot}
    counter = 0
    frontier = [(-tot, sq0.root.serial, counter, sq0, EditSequence())]
    explored = 0
    while frontier:
        if time.monotonic() - start > budget.wall_seconds \
                or explored >= budget.max_states:
            return SearchResult(Fraction(0), EditSequence(), explored,
                                time.monotonic() - start, "BudgetExceeded")
        neg_marks, key, _, tree, seq = heapq.heappop(frontier)
        marks = -neg_marks
        if best.get(key, Fraction(-1)) != marks:
            continue  # superseded entry
        explored += 1
        if canonical_root(tree, schema).serial == cq_serial:
            return SearchResult(marks / tot, seq, explored,
                                time.monotonic() - start, "Matched")
        for edit, succ in enumerate_edits(tree, cq, w, schema=schema):
            succ, _ = canonicalize_syntactic(succ, schema)
            new_seq = seq.add(edit)
            new_marks = tot - _seq_cost(new_seq, origin)
            if new_marks <= 0:
                continue
            skey = succ.root.serial
            if new_marks > best.get(skey, Fraction(-1)):
                # Costs are non-negative, so everything still on the
                # frontier costs at least as much as the state just popped;
                # a successor at the same cost that already canonicalizes
                # to the target cannot be beaten.
                if new_marks == marks \
                        and canonical_root(succ, schema).serial == cq_serial:
                    return SearchResult(new_marks / tot, new_seq,
                                        explored + 1,
                                        time.monotonic() - start, "Matched")
                best[skey] = new_marks
                counter += 1
                heapq.heappush(frontier,
                               (-new_marks, skey, counter, succ, new_seq))
    return SearchResult(Fraction(0), EditSequence(), explored,
                        time.monotonic() - start, "ZeroMarks")


def greedy_search(sq: FlatTree, cq: FlatTree,
                  w: ComponentWeights = DEFAULT_WEIGHTS,
                  budget: Budget = GREEDY_BUDGET,
                  schema=None) -> SearchResult:
    start = time.monotonic()
    tot = total_marks(cq, w)
    cq_full = cq.replace_root(canonical_root(cq, schema))
    sq0, _ = canonicalize_syntactic(sq, schema)
    origin = sq.with_origin

    def probe(tree: FlatTree) -> Fraction:
        full = tree.replace_root(canonical_root(tree, schema))
        return canonicalized_edit_distance(full, cq_full, w).total

    def fallback(tree, seq, explored, outcome):
        # best-effort fraction from the distance formula
        frac = max(Fraction(0), (tot - probe(tree)) / tot)
        return SearchResult(frac, seq, explored,
                            time.monotonic() - start, outcome)

    tree, seq = sq0, EditSequence()
    visited = {tree.root.serial}
    explored = 0
    while True:
        if time.monotonic() - start > budget.wall_seconds \
                or explored >= budget.max_states:
            return fallback(tree, seq, explored, "BudgetExceeded")
        explored += 1
        dist_here = probe(tree)
        if dist_here == 0:
            marks = tot - _seq_cost(seq, origin)
            if marks <= 0:
                return SearchResult(Fraction(0), seq, explored,
                                    time.monotonic() - start, "ZeroMarks")
            return SearchResult(marks / tot, seq, explored,
                                time.monotonic() - start, "Matched")
        cands = enumerate_edits(tree, cq, w, schema=schema)
        best = None
        for edit, succ in cands:
            succ, _ = canonicalize_syntactic(succ, schema)
            # Progress toward the canonical target dominates; cost only
            # breaks ties.  Scoring progress minus cost would favour cheap
            # edits that the canonicalizer undoes (e.g. dropping a DISTINCT
            # that is redundant over a key) over real fixes.
            reduction = dist_here - probe(succ)
            key = (-reduction, edit.cost, edit.description)
            if best is None or key < best[0]:
                best = (key, edit, succ)
        if best is None:
            return fallback(tree, seq, explored, "ZeroMarks")
        _, edit, succ = best
        if succ.root.serial in visited:
            return fallback(tree, seq, explored, "CycleDetected")
        visited.add(succ.root.serial)
        tree, seq = succ, seq.add(edit)
        if tot - _seq_cost(seq, origin) <= 0:
            return SearchResult(Fraction(0), seq, explored,
                                time.monotonic() - start, "ZeroMarks")
