"""Exact minimization of the joint selection/clustering program.

The inner integer program (overlap, incidence, and pooled path rows)
is solved by depth-first branch-and-bound with constraint propagation;
the outer loop separates violated path constraints on each optimum and
re-solves until none remain.  A second, variable-ordered pass picks the
lexicographically smallest optimal assignment, so results are fully
deterministic.  brute_force provides an independent oracle for small
instances.
"""

import itertools
import time

import numpy as np

from .crag import (
    PathConstraint,
    Solution,
    conflict_cliques,
    objective_value,
    shortest_selected_path,
    validate_solution,
)
from .errors import CmcError, InfeasibleSolution, KeyMismatch, TooLarge

MODES = ("full", "merge_tree_only", "leaf_multicut_only")
BRUTE_FORCE_LIMIT = 26


class _Timeout(Exception):
    def __init__(self, assign):
        self.assign = assign


class _State:
    """Assignment trail over binary variables with <=-row propagation.

    Rows carry integer coefficients and bounds, so slack bookkeeping is
    exact; the objective bound (partial objective plus sum of negative
    costs of unassigned variables) is a float saved and restored at
    decision points.
    """

    def __init__(self, costs, rows, fixed):
        self.costs = costs
        self.n = len(costs)
        self.rows = rows
        self.var_rows = [[] for _ in range(self.n)]
        for ridx, (cmap, _) in enumerate(rows):
            for v in cmap:
                self.var_rows[v].append(ridx)
        self.value = [None] * self.n
        self.slack = [
            bound - sum(a for a in cmap.values() if a < 0) for cmap, bound in rows
        ]
        self.bound = 0.0
        for c in costs:
            if c < 0.0:
                self.bound += c
        self.trail = []
        queue = []
        for v, val in sorted(fixed.items()):
            if not self._set(v, val, queue):
                raise CmcError("mode restriction is infeasible")
        if not self._drain(queue):
            raise CmcError("mode restriction is infeasible")

    def _set(self, v, val, queue):
        if self.value[v] is not None:
            return self.value[v] == val
        self.value[v] = val
        self.trail.append(v)
        c = self.costs[v]
        self.bound += max(c, 0.0) if val else max(-c, 0.0)
        for r in self.var_rows[v]:
            a = self.rows[r][0][v]
            delta = a * val - (a if a < 0 else 0)
            if delta:
                self.slack[r] -= delta
                if self.slack[r] < 0:
                    return False
                queue.append(r)
        return True

    def _force_row(self, r, queue):
        cmap, _ = self.rows[r]
        for u, a in cmap.items():
            if self.value[u] is not None:
                continue
            s = self.slack[r]
            if a > s:
                if not self._set(u, 0, queue):
                    return False
            elif -a > s:
                if not self._set(u, 1, queue):
                    return False
        return True

    def _drain(self, queue):
        while queue:
            if not self._force_row(queue.pop(), queue):
                return False
        return True

    def propagate(self, v, val):
        queue = []
        return self._set(v, val, queue) and self._drain(queue)

    def undo_to(self, mark, saved_bound):
        while len(self.trail) > mark:
            v = self.trail.pop()
            val = self.value[v]
            self.value[v] = None
            for r in self.var_rows[v]:
                a = self.rows[r][0][v]
                delta = a * val - (a if a < 0 else 0)
                if delta:
                    self.slack[r] += delta
        self.bound = saved_bound


def _dfs(state, order, greedy, ub, strict, first_leaf, deadline):
    """Iterative DFS branch-and-bound.

    Prunes subtrees whose bound exceeds ub[0] (strictly when `strict`,
    else on >=, with ub tightened at every improving leaf).  greedy
    tries the cost-reducing value first; otherwise 0 comes first, which
    together with first_leaf yields the lexicographically smallest
    assignment within the ub budget.  Raises _Timeout carrying the best
    assignment so far.
    """
    n = state.n
    best_obj, best_assign = None, None
    frames = []
    pos = 0
    ticks = 0

    def over_budget():
        return state.bound > ub[0] if strict else state.bound >= ub[0]

    def advance():
        nonlocal pos
        while frames:
            v, vals, mark, saved_bound, fpos = frames[-1]
            state.undo_to(mark, saved_bound)
            if vals:
                val = vals.pop(0)
                if state.propagate(v, val) and not over_budget():
                    pos = fpos
                    return True
                state.undo_to(mark, saved_bound)
            else:
                frames.pop()
        return False

    if over_budget():
        return None, None
    while True:
        ticks += 1
        if (
            deadline is not None
            and (ticks & 1023) == 0
            and time.monotonic() > deadline
        ):
            raise _Timeout(best_assign)
        while pos < n and state.value[order[pos]] is not None:
            pos += 1
        if pos == n:
            best_obj, best_assign = state.bound, list(state.value)
            if first_leaf:
                return best_obj, best_assign
            ub[0] = best_obj
            if not advance():
                return best_obj, best_assign
            continue
        v = order[pos]
        vals = [1, 0] if (greedy and state.costs[v] < 0.0) else [0, 1]
        frames.append((v, vals, len(state.trail), state.bound, pos))
        if not advance():
            return best_obj, best_assign


def _check_costs(crag, costs, ids, edges):
    if set(costs.f) != set(ids):
        raise KeyMismatch("f keys do not match the candidates")
    if set(costs.g) != set(edges):
        raise KeyMismatch("g keys do not match the adjacency edges")


def _build_rows(crag, var_y, var_m, pool):
    rows = []
    for clique in conflict_cliques(crag):
        if len(clique) > 1:
            rows.append(({var_y[i]: 1 for i in sorted(clique)}, 1))
    for e in crag.adjacency:
        rows.append(({var_m[e]: 2, var_y[e[0]]: -1, var_y[e[1]]: -1}, 0))
    for pc in pool:
        cmap = {var_m[e]: 1 for e in pc.path}
        cmap[var_m[pc.bypassed_edge]] = -1
        rows.append((cmap, len(pc.path) - 1))
    return rows


def _solve_ilp(cvec, rows, fixed, deadline):
    """Two passes: optimize, then rerun in index order for the lex tie-break."""
    n = len(cvec)
    state = _State(cvec, rows, fixed)
    order = sorted(range(n), key=lambda v: (-abs(cvec[v]), v))
    ub = [0.0]
    obj, assign = _dfs(state, order, True, ub, False, False, deadline)
    if obj is None:
        obj, assign = 0.0, [0] * n

    state = _State(cvec, rows, fixed)
    ub = [obj]
    try:
        _, lex_assign = _dfs(
            state, list(range(n)), False, ub, True, True, deadline
        )
    except _Timeout:
        raise _Timeout(assign)
    return lex_assign if lex_assign is not None else assign


def separate_path_constraints(crag, solution):
    """One shortest violated path per unselected-but-connected edge."""
    out = []
    for e in crag.adjacency:
        if solution.m[e]:
            continue
        path = shortest_selected_path(solution.m, e[0], e[1])
        if path is not None:
            out.append(PathConstraint(path=path, bypassed_edge=e))
    return out


def _assignment_to_solution(crag, costs, assign, var_y, var_m):
    y = {i: assign[v] for i, v in var_y.items()}
    m = {e: assign[v] for e, v in var_m.items()}
    return Solution(y=y, m=m, objective=objective_value(costs.f, costs.g, y, m))


def solve(crag, costs, mode="full", time_limit=None):
    """Global optimum of the selection/clustering objective.

    Cutting-plane outer loop: solve with the pooled path constraints,
    separate violations on the optimum, add them, re-solve; done when
    none remain.  merge_tree_only pins every merge indicator to 0;
    leaf_multicut_only pins selection to 0 for non-leaves (leaf
    selection stays free).  On timeout the best feasible assignment
    found (possibly all-zero) is returned with optimal=False.
    """
    if mode not in MODES:
        raise CmcError(f"unknown mode {mode!r}")
    ids = crag.ids()
    edges = list(crag.adjacency)
    _check_costs(crag, costs, ids, edges)
    var_y = {i: k for k, i in enumerate(ids)}
    var_m = {e: len(ids) + k for k, e in enumerate(edges)}
    cvec = [float(costs.f[i]) for i in ids] + [float(costs.g[e]) for e in edges]

    fixed = {}
    if mode == "merge_tree_only":
        fixed = {var_m[e]: 0 for e in edges}
    elif mode == "leaf_multicut_only":
        leaves = set(crag.leaves())
        fixed = {var_y[i]: 0 for i in ids if i not in leaves}

    deadline = None if time_limit is None else time.monotonic() + float(time_limit)
    pool = []
    iterations = 0
    while True:
        iterations += 1
        rows = _build_rows(crag, var_y, var_m, pool)
        try:
            assign = _solve_ilp(cvec, rows, fixed, deadline)
        except _Timeout as exc:
            sol = _timeout_fallback(crag, costs, exc.assign, var_y, var_m)
            sol.iterations = iterations
            return sol
        sol = _assignment_to_solution(crag, costs, assign, var_y, var_m)
        violations = separate_path_constraints(crag, sol)
        if not violations:
            sol.iterations = iterations
            return sol
        pool.extend(violations)


def _timeout_fallback(crag, costs, assign, var_y, var_m):
    """Best feasible assignment seen before the clock ran out."""
    candidates = []
    if assign is not None:
        sol = _assignment_to_solution(crag, costs, assign, var_y, var_m)
        if not validate_solution(crag, sol):
            candidates.append(sol)
    zero = Solution(
        y={i: 0 for i in var_y},
        m={e: 0 for e in var_m},
        objective=0.0,
    )
    candidates.append(zero)
    best = min(candidates, key=lambda s: s.objective)
    best.optimal = False
    return best


def _connected_subsets(anchor, allowed, adj):
    """All subsets containing `anchor`, within `allowed`, connected in adj."""
    results = []

    def grow(current, frontier, banned):
        if not frontier:
            results.append(frozenset(current))
            return
        v = frontier[0]
        rest = frontier[1:]
        grow(current, rest, banned | {v})
        extra = sorted(
            (adj[v] & allowed) - current - banned - set(rest) - {v}
        )
        grow(current | {v}, rest + extra, banned)

    start_frontier = sorted(adj[anchor] & allowed)
    grow({anchor}, start_frontier, set())
    return results


def _connected_partitions(vertices, edges):
    """All partitions of `vertices` whose parts are connected under `edges`."""
    adj = {v: set() for v in vertices}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)

    def rec(remaining):
        if not remaining:
            yield []
            return
        anchor = remaining[0]
        allowed = set(remaining[1:])
        for part in _connected_subsets(anchor, allowed, adj):
            rest = tuple(v for v in remaining if v not in part)
            for tail in rec(rest):
                yield [part] + tail

    yield from rec(tuple(sorted(vertices)))


def brute_force(crag, costs, mode="full"):
    """Oracle: exhaustive minimum over all feasible assignments.

    Selection vectors are enumerated directly (pruned by the conflict
    cliques); for each one, the feasible merge assignments are exactly
    the partitions of the selected subgraph into connected parts, with
    every within-part edge merged.  Ties break to the lexicographically
    smallest (y, m) bit-vector.
    """
    if mode not in MODES:
        raise CmcError(f"unknown mode {mode!r}")
    ids = crag.ids()
    edges = list(crag.adjacency)
    _check_costs(crag, costs, ids, edges)
    n = len(ids) + len(edges)
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(n, BRUTE_FORCE_LIMIT)

    cliques = [sorted(c) for c in conflict_cliques(crag) if len(c) > 1]
    leaves = set(crag.leaves())
    best = None  # (objective, bits, y, m)
    for bits_y in itertools.product((0, 1), repeat=len(ids)):
        y = dict(zip(ids, bits_y))
        if mode == "leaf_multicut_only" and any(
            y[i] for i in ids if i not in leaves
        ):
            continue
        if any(sum(y[i] for i in cl) > 1 for cl in cliques):
            continue
        selected = [i for i in ids if y[i]]
        live = [e for e in edges if y[e[0]] and y[e[1]]]
        live_set = set(live)
        if mode == "merge_tree_only":
            partitions = [[frozenset([v]) for v in selected]]
        else:
            partitions = _connected_partitions(selected, live)
        for parts in partitions:
            part_of = {}
            for k, part in enumerate(parts):
                for v in part:
                    part_of[v] = k
            m = {
                e: int(e in live_set and part_of[e[0]] == part_of[e[1]])
                for e in edges
            }
            obj = objective_value(costs.f, costs.g, y, m)
            bits = bits_y + tuple(m[e] for e in edges)
            if best is None or (obj, bits) < (best[0], best[1]):
                best = (obj, bits, dict(y), m)
    return Solution(y=best[2], m=best[3], objective=best[0])


def extract_segmentation(crag, solution):
    """Label image of the solution's connected selected groups.

    Components of (selected candidates, merged edges) get labels 1..C,
    ordered by their smallest pixel in row-major order; everything else
    is 0.
    """
    violations = validate_solution(crag, solution)
    if violations:
        raise InfeasibleSolution(violations)
    selected = [i for i in crag.ids() if solution.y[i]]
    group = {i: i for i in selected}

    def find(x):
        while group[x] != x:
            group[x] = group[group[x]]
            x = group[x]
        return x

    for edge, merged in solution.m.items():
        if merged:
            a, b = find(edge[0]), find(edge[1])
            if a != b:
                group[max(a, b)] = min(a, b)

    components = {}
    for i in selected:
        components.setdefault(find(i), []).append(i)
    keyed = []
    for members in components.values():
        first_pixel = min(min(crag.pixels_of(i)) for i in members)
        keyed.append((first_pixel, members))
    keyed.sort()

    labels = np.zeros((crag.height, crag.width), dtype=np.int64)
    for label, (_, members) in enumerate(keyed, start=1):
        for cid in members:
            for (r, c) in crag.pixels_of(cid):
                labels[r, c] = label
    return labels
