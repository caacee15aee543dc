"""From boundary map to candidate pool.

seeded_watershed turns a boundary probability map into superpixels,
build_merge_tree greedily merges the adjacent pair with the smallest
score (smaller region size times median interface intensity), and
extract_candidates cuts the tree down to the candidates within a merge
budget and wires up the candidate region adjacency graph.
"""

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .crag import Candidate, build_crag, interface_pairs
from .errors import DegenerateInput, DimensionMismatch, NoSeeds, NotAdjacent


def _check_boundary(boundary):
    boundary = np.asarray(boundary, dtype=np.float64)
    if boundary.ndim != 2:
        raise DegenerateInput(f"boundary map must be 2-d, got shape {boundary.shape}")
    if not np.all(np.isfinite(boundary)):
        raise DegenerateInput("boundary map contains non-finite values")
    if boundary.min() < 0.0 or boundary.max() > 1.0:
        raise DegenerateInput("boundary values outside [0, 1]")
    return boundary


def seeded_watershed(boundary, seed_threshold):
    """Flood superpixels from low-boundary seeds.

    Seeds are 4-connected components of {boundary < seed_threshold}.
    Remaining pixels are claimed in priority order of their boundary
    value; ties fall back to insertion order (FIFO), so the result is
    deterministic.  Labels are 1..K with no background.
    """
    boundary = _check_boundary(boundary)
    seeds, n_seeds = ndimage.label(boundary < seed_threshold)
    if n_seeds == 0:
        raise NoSeeds(seed_threshold)
    labels = seeds.astype(np.int64)
    h, w = labels.shape
    counter = itertools.count()
    heap = []
    rs, cs = np.nonzero(labels)
    for r, c in zip(rs.tolist(), cs.tolist()):
        heapq.heappush(heap, (boundary[r, c], next(counter), r, c))
    while heap:
        _, _, r, c = heapq.heappop(heap)
        lab = labels[r, c]
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < h and 0 <= nc < w and labels[nr, nc] == 0:
                labels[nr, nc] = lab
                heapq.heappush(heap, (boundary[nr, nc], next(counter), nr, nc))
    return labels


def interface_intensities(pixels_a, pixels_b, boundary):
    """max(boundary[p], boundary[q]) for each 4-neighbor pair across the interface."""
    boundary = np.asarray(boundary, dtype=np.float64)
    return [
        max(float(boundary[p]), float(boundary[q]))
        for p, q in interface_pairs(pixels_a, pixels_b)
    ]


def merge_score(region_a, region_b, boundary):
    """min(|a|, |b|) times the median interface intensity.

    Median of an even-length list is the mean of the two central
    values.  Raises NotAdjacent when the regions share no 4-neighbor
    pixel pair.
    """
    a = frozenset(map(tuple, region_a))
    b = frozenset(map(tuple, region_b))
    vals = interface_intensities(a, b, boundary)
    if not vals:
        raise NotAdjacent()
    return min(len(a), len(b)) * float(np.median(vals))


@dataclass(frozen=True)
class MergeEvent:
    child_a: int
    child_b: int
    new_id: int
    score: float


@dataclass(eq=False)
class MergeTree:
    """Initial superpixels plus the ordered merge events that built the tree."""

    superpixels: np.ndarray
    events: list = field(default_factory=list)


def _pair(a, b):
    return (a, b) if a < b else (b, a)


def build_merge_tree(superpixels, boundary):
    """Greedy agglomeration: always merge the lowest-score adjacent pair.

    Scores of edges incident to the freshly merged region are
    recomputed (sizes change and interfaces concatenate); ties pick the
    smallest (min_id, max_id) pair.  New ids continue above the largest
    existing label.  Returns K-1 events for K superpixels.
    """
    superpixels = np.asarray(superpixels)
    boundary = _check_boundary(boundary)
    if superpixels.shape != boundary.shape:
        raise DimensionMismatch(boundary.shape, superpixels.shape)

    ids, counts = np.unique(superpixels, return_counts=True)
    sizes = {int(i): int(c) for i, c in zip(ids, counts)}

    # interface intensity lists per adjacent label pair, from the grid
    iface = {}
    for sl_a, sl_b in (
        (np.s_[:, :-1], np.s_[:, 1:]),
        (np.s_[:-1, :], np.s_[1:, :]),
    ):
        la, lb = superpixels[sl_a], superpixels[sl_b]
        mask = la != lb
        vals = np.maximum(boundary[sl_a], boundary[sl_b])[mask]
        for a, b, v in zip(la[mask].tolist(), lb[mask].tolist(), vals.tolist()):
            iface.setdefault(_pair(a, b), []).append(v)

    nbrs = {int(i): set() for i in ids}
    for a, b in iface:
        nbrs[a].add(b)
        nbrs[b].add(a)

    edge_score = {
        e: min(sizes[e[0]], sizes[e[1]]) * float(np.median(v))
        for e, v in iface.items()
    }
    heap = [(s, e[0], e[1]) for e, s in edge_score.items()]
    heapq.heapify(heap)

    alive = {int(i) for i in ids}
    next_id = int(ids.max()) + 1
    events = []
    while len(alive) > 1:
        if not heap:
            raise DegenerateInput("superpixel adjacency graph is disconnected")
        s, a, b = heapq.heappop(heap)
        if a not in alive or b not in alive or edge_score.get((a, b)) != s:
            continue
        new = next_id
        next_id += 1
        events.append(MergeEvent(a, b, new, s))
        alive.discard(a)
        alive.discard(b)
        sizes[new] = sizes[a] + sizes[b]
        iface.pop((a, b), None)
        edge_score.pop((a, b), None)
        merged_nbrs = (nbrs.pop(a) | nbrs.pop(b)) - {a, b}
        for n in merged_nbrs:
            vals = iface.pop(_pair(a, n), []) + iface.pop(_pair(b, n), [])
            edge_score.pop(_pair(a, n), None)
            edge_score.pop(_pair(b, n), None)
            key = _pair(new, n)
            iface[key] = vals
            sc = min(sizes[new], sizes[n]) * float(np.median(vals))
            edge_score[key] = sc
            heapq.heappush(heap, (sc, key[0], key[1]))
            nbrs[n].discard(a)
            nbrs[n].discard(b)
            nbrs[n].add(new)
        nbrs[new] = merged_nbrs
        alive.add(new)
    return MergeTree(superpixels, events)


def extract_candidates(tree, max_merges, score_threshold=None):
    """Cut the merge-tree down to a Crag.

    A node's level is 0 for superpixels and 1 + max(child levels) for a
    merge result; nodes with level > max_merges are dropped (max_merges
    None means no level cap).  With a score_threshold, merge results
    whose creation score is >= the threshold are dropped too; surviving
    nodes then re-attach to their nearest surviving ancestor, which
    keeps every inner node the exact disjoint union of its children.
    Adjacency edges join every disjoint touching pair across all levels.
    """
    sp = np.asarray(tree.superpixels)
    h, w = sp.shape
    leaf_ids = [int(i) for i in np.unique(sp)]

    level = {i: 0 for i in leaf_ids}
    parent = {}
    score_of = {}
    for ev in tree.events:
        level[ev.new_id] = 1 + max(level[ev.child_a], level[ev.child_b])
        parent[ev.child_a] = ev.new_id
        parent[ev.child_b] = ev.new_id
        score_of[ev.new_id] = ev.score

    def included(node):
        if max_merges is not None and level[node] > max_merges:
            return False
        if (
            score_threshold is not None
            and node in score_of
            and score_of[node] >= score_threshold
        ):
            return False
        return True

    inc = {n for n in level if included(n)}

    # ancestors-or-self in the full tree, for overlap tests
    full_anc = {}
    for n in level:
        chain = set()
        node = n
        while node is not None:
            chain.add(node)
            node = parent.get(node)
        full_anc[n] = chain

    # included chain per leaf: the leaf plus its included ancestors
    inc_chain = {}
    for leaf in leaf_ids:
        chain = []
        node = leaf
        while node is not None:
            if node in inc:
                chain.append(node)
            node = parent.get(node)
        inc_chain[leaf] = chain

    # adjacency from leaf-level touching pairs, lifted through the chains
    leaf_adj = set()
    for sl_a, sl_b in (
        (np.s_[:, :-1], np.s_[:, 1:]),
        (np.s_[:-1, :], np.s_[1:, :]),
    ):
        la, lb = sp[sl_a], sp[sl_b]
        mask = la != lb
        for a, b in zip(la[mask].tolist(), lb[mask].tolist()):
            leaf_adj.add(_pair(a, b))
    edges = set()
    for la, lb in leaf_adj:
        for big_a in inc_chain[la]:
            for big_b in inc_chain[lb]:
                if big_a == big_b:
                    continue
                if big_b in full_anc[big_a] or big_a in full_anc[big_b]:
                    continue
                edges.add(_pair(big_a, big_b))

    # re-attach surviving nodes to their nearest surviving ancestor
    sub_pairs = []
    restricted_children = {n: [] for n in inc}
    for n in sorted(inc):
        p = parent.get(n)
        while p is not None and p not in inc:
            p = parent.get(p)
        if p is not None:
            sub_pairs.append((n, p))
            restricted_children[p].append(n)

    leaf_pixels = {}
    for lid in leaf_ids:
        rs, cs = np.nonzero(sp == lid)
        leaf_pixels[lid] = frozenset(zip(rs.tolist(), cs.tolist()))

    cands = []
    for n in sorted(inc):
        kids = tuple(sorted(restricted_children[n]))
        if kids:
            cands.append(Candidate(n, level[n], kids))
        else:
            cands.append(Candidate(n, level[n], (), leaf_pixels[n]))
    return build_crag(cands, sorted(edges), sub_pairs, w, h)
