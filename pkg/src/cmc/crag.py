"""Candidate region adjacency graph.

A Crag holds a pool of candidate regions (leaves carry pixels, inner
nodes derive theirs as the union of their children), adjacency edges
between disjoint touching candidates, and a subset forest recording
which candidates are unions of which.  The module also provides
conflict-clique enumeration, validation of binary assignments against
the overlap / incidence / path constraint families, and JSON
(de)serialization.
"""

from dataclasses import dataclass, field
from collections import deque

from .errors import (
    AdjacencyBetweenOverlapping,
    CmcError,
    KeyMismatch,
    LeavesDoNotCoverImage,
    NotAdjacent,
    OverlappingLeaves,
    SubsetNotForest,
)


@dataclass(frozen=True)
class Candidate:
    """One region: a superpixel (level 0, carries pixels) or a merge result.

    Exactly one of `pixels` / `children` is populated: leaves store a
    frozenset of (row, col) pairs, inner nodes store the ids of their
    children and derive pixels lazily through the owning Crag.
    """

    id: int
    level: int
    children: tuple = ()
    pixels: frozenset = None


@dataclass(frozen=True)
class PathConstraint:
    """Σ_{e ∈ path} m_e − m_bypassed ≤ len(path) − 1.

    Forbids connecting two candidates through selected edges while the
    direct edge between them stays unselected.
    """

    path: tuple  # ordered adjacency edges, each a sorted (i, j) pair
    bypassed_edge: tuple


@dataclass(frozen=True)
class Violation:
    """One broken constraint; `family` is overlap / incidence / path."""

    family: str
    ids: tuple
    path: tuple = ()


@dataclass
class Solution:
    """Binary assignment over one Crag: y per candidate, m per edge.

    `optimal` / `iterations` are solver bookkeeping; they do not take
    part in equality and are not serialized.
    """

    y: dict
    m: dict
    objective: float
    optimal: bool = field(default=True, compare=False)
    iterations: int = field(default=0, compare=False)


def edge_key(i, j):
    """Canonical unordered edge: sorted pair."""
    return (i, j) if i < j else (j, i)


def edge_to_str(edge):
    return f"{edge[0]}-{edge[1]}"


def edge_from_str(key):
    a, b = key.split("-")
    return edge_key(int(a), int(b))


def objective_value(f, g, y, m):
    """Σ y_i f_i + Σ m_e g_e, summed in one canonical order.

    Every place that reports or compares objectives goes through this
    function, so equal assignments always produce bit-equal floats.
    """
    total = 0.0
    for i in sorted(y):
        if y[i]:
            total += f[i]
    for e in sorted(m):
        if m[e]:
            total += g[e]
    return total


class Crag:
    """Immutable after construction; build via build_crag()."""

    def __init__(self, candidates, adjacency, subset, width, height):
        self.candidates = dict(candidates)  # id -> Candidate
        self.adjacency = tuple(sorted(adjacency))
        self.subset = dict(subset)  # child id -> parent id
        self.width = int(width)
        self.height = int(height)
        self._pixel_cache = {}
        self._leaves_under = {}

    def __eq__(self, other):
        if not isinstance(other, Crag):
            return NotImplemented
        return (
            self.candidates == other.candidates
            and self.adjacency == other.adjacency
            and self.subset == other.subset
            and self.width == other.width
            and self.height == other.height
        )

    def __repr__(self):
        return (
            f"Crag({len(self.candidates)} candidates, "
            f"{len(self.adjacency)} edges, {self.width}x{self.height})"
        )

    def ids(self):
        return sorted(self.candidates)

    def leaves(self):
        return sorted(i for i, c in self.candidates.items() if not c.children)

    def roots(self):
        return sorted(i for i in self.candidates if i not in self.subset)

    def parent(self, cid):
        return self.subset.get(cid)

    def ancestors(self, cid):
        """Strict ancestors, bottom-up."""
        chain = []
        p = self.subset.get(cid)
        while p is not None:
            chain.append(p)
            p = self.subset.get(p)
        return chain

    def leaves_under(self, cid):
        """Sorted leaf ids of the subtree rooted at cid (cid itself if leaf)."""
        if cid not in self._leaves_under:
            found = []
            stack = [cid]
            while stack:
                node = stack.pop()
                kids = self.candidates[node].children
                if kids:
                    stack.extend(kids)
                else:
                    found.append(node)
            self._leaves_under[cid] = tuple(sorted(found))
        return self._leaves_under[cid]

    def pixels_of(self, cid):
        """Pixel set of a candidate; inner nodes union their leaves."""
        if cid not in self._pixel_cache:
            cand = self.candidates[cid]
            if cand.pixels is not None:
                self._pixel_cache[cid] = cand.pixels
            else:
                acc = set()
                for leaf in self.leaves_under(cid):
                    acc |= self.candidates[leaf].pixels
                self._pixel_cache[cid] = frozenset(acc)
        return self._pixel_cache[cid]

    def size_of(self, cid):
        return len(self.pixels_of(cid))


def interface_pairs(pixels_a, pixels_b):
    """All 4-neighbor pixel pairs (p in a, q in b), sorted for determinism.

    Iterates the smaller set.  Empty result means the regions do not
    touch (or overlap exactly, which callers rule out separately).
    """
    if len(pixels_a) > len(pixels_b):
        return [(p, q) for q, p in interface_pairs(pixels_b, pixels_a)]
    pairs = []
    for (r, c) in pixels_a:
        for q in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if q in pixels_b:
                pairs.append(((r, c), q))
    pairs.sort()
    return pairs


def regions_touch(pixels_a, pixels_b):
    """Whether any 4-neighbor pixel pair crosses between the two sets."""
    if len(pixels_a) > len(pixels_b):
        pixels_a, pixels_b = pixels_b, pixels_a
    for (r, c) in pixels_a:
        if (
            (r - 1, c) in pixels_b
            or (r + 1, c) in pixels_b
            or (r, c - 1) in pixels_b
            or (r, c + 1) in pixels_b
        ):
            return True
    return False


def build_crag(candidates, adjacency, subset, width, height):
    """Validating constructor for Crag.

    Checks: unique ids, children/subset consistency, the subset relation
    is a forest, leaves carry in-bounds pairwise-disjoint pixels, every
    adjacency edge joins two disjoint touching candidates.
    """
    cand_map = {}
    for cand in candidates:
        if cand.id in cand_map:
            raise CmcError(f"duplicate candidate id {cand.id}")
        if cand.level < 0:
            raise CmcError(f"candidate {cand.id} has negative level")
        if cand.children and cand.pixels is not None:
            raise CmcError(f"candidate {cand.id} carries both children and pixels")
        if not cand.children and not cand.pixels:
            raise LeavesDoNotCoverImage(f"leaf candidate {cand.id} has no pixels")
        cand_map[cand.id] = cand

    raw_pairs = [(int(c), int(p)) for c, p in subset]
    for child, parent in raw_pairs:
        if child not in cand_map or parent not in cand_map:
            raise CmcError(f"subset pair ({child}, {parent}) references unknown id")
    seen_children = set()
    for child, parent in raw_pairs:
        if child in seen_children:
            raise SubsetNotForest([child], "child has two parents")
        seen_children.add(child)
    subset = dict(raw_pairs)

    # children fields must mirror the subset pairs exactly
    children_from_subset = {}
    for child, parent in subset.items():
        children_from_subset.setdefault(parent, set()).add(child)
    for cid, cand in cand_map.items():
        declared = set(cand.children)
        derived = children_from_subset.get(cid, set())
        if declared != derived:
            raise SubsetNotForest(
                [cid], f"children {sorted(declared)} != subset-derived {sorted(derived)}"
            )

    # cycle check: walk parent chains, memoizing nodes proven acyclic
    safe = set()
    for start in cand_map:
        trail = []
        on_trail = set()
        node = start
        while node is not None and node not in safe:
            if node in on_trail:
                raise SubsetNotForest(trail[trail.index(node):], "cycle")
            trail.append(node)
            on_trail.add(node)
            node = subset.get(node)
        safe.update(trail)

    crag = Crag(cand_map, (), subset, width, height)

    # leaves: in bounds, pairwise disjoint
    owner = {}
    for cid in crag.leaves():
        for (r, c) in cand_map[cid].pixels:
            if not (0 <= r < height and 0 <= c < width):
                raise LeavesDoNotCoverImage(
                    f"pixel ({r}, {c}) of leaf {cid} outside {height}x{width}"
                )
            if (r, c) in owner:
                raise OverlappingLeaves(owner[(r, c)], cid)
            owner[(r, c)] = cid

    edges = set()
    for i, j in adjacency:
        i, j = int(i), int(j)
        if i not in cand_map or j not in cand_map:
            raise CmcError(f"adjacency edge ({i}, {j}) references unknown id")
        if i == j:
            raise AdjacencyBetweenOverlapping(i, j)
        pa, pb = crag.pixels_of(i), crag.pixels_of(j)
        if not pa.isdisjoint(pb):
            raise AdjacencyBetweenOverlapping(i, j)
        if not regions_touch(pa, pb):
            raise NotAdjacent()
        edges.add(edge_key(i, j))

    return Crag(cand_map, edges, subset, width, height)


def conflict_cliques(crag):
    """One clique per leaf: the leaf plus all its ancestors.

    Cliques contained in another clique are dropped.  Returns a sorted
    list of frozensets.
    """
    cliques = {frozenset([leaf] + crag.ancestors(leaf)) for leaf in crag.leaves()}
    kept = [
        c
        for c in cliques
        if not any(c < other for other in cliques)
    ]
    return sorted(kept, key=sorted)


def _selected_neighbors(m):
    nbrs = {}
    for (i, j), v in m.items():
        if v:
            nbrs.setdefault(i, []).append(j)
            nbrs.setdefault(j, []).append(i)
    for k in nbrs:
        nbrs[k].sort()
    return nbrs


def shortest_selected_path(m, source, target):
    """BFS over m=1 edges; ordered edge tuple from source to target, or None."""
    if source == target:
        return ()
    nbrs = _selected_neighbors(m)
    prev = {source: None}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        for nxt in nbrs.get(node, ()):
            if nxt in prev:
                continue
            prev[nxt] = node
            if nxt == target:
                path = []
                while prev[nxt] is not None:
                    path.append(edge_key(prev[nxt], nxt))
                    nxt = prev[nxt]
                path.reverse()
                return tuple(path)
            queue.append(nxt)
    return None


def validate_solution(crag, solution):
    """All overlap / incidence / path violations of a binary assignment.

    Empty list iff the assignment is feasible.  Path violations are
    found by connectivity: an unselected edge whose endpoints are
    joined through selected edges breaks transitivity.
    """
    y, m = solution.y, solution.m
    if set(y) != set(crag.candidates):
        raise KeyMismatch(
            f"y keys {sorted(set(y) ^ set(crag.candidates))} unmatched"
        )
    if set(m) != set(crag.adjacency):
        raise KeyMismatch(
            f"m keys {sorted(set(m) ^ set(crag.adjacency))} unmatched"
        )
    for mapping in (y, m):
        for k, v in mapping.items():
            if v not in (0, 1):
                raise KeyMismatch(f"non-binary value {v!r} at {k}")

    violations = []
    for clique in conflict_cliques(crag):
        selected = tuple(sorted(i for i in clique if y[i]))
        if len(selected) > 1:
            violations.append(Violation("overlap", selected))
    for (i, j) in crag.adjacency:
        if m[(i, j)] and (not y[i] or not y[j]):
            violations.append(Violation("incidence", (i, j)))
    for (i, j) in crag.adjacency:
        if m[(i, j)]:
            continue
        path = shortest_selected_path(m, i, j)
        if path is not None:
            violations.append(Violation("path", (i, j), path))
    return violations


# ---------------------------------------------------------------------------
# JSON serialization


def _encode_pixels(pixels):
    """Run-length encode a pixel set row by row; col_end is exclusive."""
    rows = {}
    for (r, c) in pixels:
        rows.setdefault(r, []).append(c)
    runs = []
    for r in sorted(rows):
        cols = sorted(rows[r])
        start = prev = cols[0]
        for c in cols[1:]:
            if c == prev + 1:
                prev = c
                continue
            runs.append({"row": r, "col_start": start, "col_end": prev + 1})
            start = prev = c
        runs.append({"row": r, "col_start": start, "col_end": prev + 1})
    return runs


def _decode_pixels(runs):
    pixels = set()
    for run in runs:
        r = run["row"]
        for c in range(run["col_start"], run["col_end"]):
            pixels.add((r, c))
    return frozenset(pixels)


def crag_to_json(crag):
    cands = []
    for cid in crag.ids():
        cand = crag.candidates[cid]
        entry = {"id": cid, "level": cand.level}
        if cand.children:
            entry["children"] = sorted(cand.children)
        else:
            entry["pixels"] = _encode_pixels(cand.pixels)
        cands.append(entry)
    return {
        "width": crag.width,
        "height": crag.height,
        "candidates": cands,
        "adjacency": [list(e) for e in crag.adjacency],
        "subset": sorted([c, p] for c, p in crag.subset.items()),
    }


def crag_from_json(obj):
    candidates = []
    for entry in obj["candidates"]:
        if "children" in entry:
            cand = Candidate(
                int(entry["id"]), int(entry["level"]), tuple(entry["children"])
            )
        else:
            cand = Candidate(
                int(entry["id"]),
                int(entry["level"]),
                (),
                _decode_pixels(entry["pixels"]),
            )
        candidates.append(cand)
    return build_crag(
        candidates, obj["adjacency"], obj["subset"], obj["width"], obj["height"]
    )


def solution_to_json(solution):
    return {
        "y": {str(i): int(v) for i, v in sorted(solution.y.items())},
        "m": {edge_to_str(e): int(v) for e, v in sorted(solution.m.items())},
        "objective": solution.objective,
    }


def solution_from_json(obj):
    return Solution(
        y={int(i): int(v) for i, v in obj["y"].items()},
        m={edge_from_str(k): int(v) for k, v in obj["m"].items()},
        objective=float(obj["objective"]),
    )
