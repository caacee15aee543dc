import numpy as np
import pytest

from cmc.errors import DegenerateInput, NoSeeds, NotAdjacent
from cmc.hierarchy import (
    build_merge_tree,
    extract_candidates,
    interface_intensities,
    merge_score,
    seeded_watershed,
)


def strip_tree():
    """1x8 strip, four 2-pixel superpixels; scores force (1,2), (3,4), (5,6)."""
    boundary = np.array([[0, 0, 0, 0, 0.5, 0.1, 0.1, 0]], dtype=float)
    superpixels = np.array([[1, 1, 2, 2, 3, 3, 4, 4]])
    return build_merge_tree(superpixels, boundary), boundary


def chain_tree():
    """1x8 strip of single pixels with ramping boundary: merges run left to
    right, producing levels 1..7."""
    boundary = np.arange(8).reshape(1, 8) / 10.0
    superpixels = np.arange(1, 9).reshape(1, 8)
    return build_merge_tree(superpixels, boundary)


# ---------------------------------------------------------------------------
# watershed


def test_watershed_constant_zero():
    labels = seeded_watershed(np.zeros((5, 4)), 0.5)
    assert np.array_equal(labels, np.ones((5, 4), dtype=labels.dtype))


def test_watershed_column_barrier():
    """Full-height barrier at col 2 splits the image into two seeds; the
    barrier pixels themselves drain to the first seed in queue order."""
    boundary = np.zeros((4, 4))
    boundary[:, 2] = 1.0
    labels = seeded_watershed(boundary, 0.5)
    assert len(np.unique(labels)) == 2
    expected = np.ones((4, 4), dtype=labels.dtype)
    expected[:, 3] = 2
    assert np.array_equal(labels, expected)


def test_watershed_no_seeds():
    with pytest.raises(NoSeeds):
        seeded_watershed(np.ones((2, 2)), 0.5)


def test_watershed_is_partition():
    rng = np.random.default_rng(2)
    boundary = rng.random((16, 16))
    labels = seeded_watershed(boundary, 0.5)
    uniq = np.unique(labels)
    assert uniq[0] == 1 and uniq[-1] == len(uniq)  # labels are 1..K
    assert labels.shape == boundary.shape


def test_watershed_deterministic():
    rng = np.random.default_rng(3)
    boundary = rng.random((12, 12))
    a = seeded_watershed(boundary, 0.6)
    b = seeded_watershed(boundary.copy(), 0.6)
    assert np.array_equal(a, b)


def test_watershed_rejects_bad_boundary():
    with pytest.raises(DegenerateInput):
        seeded_watershed(np.full((2, 2), 1.5), 0.5)
    with pytest.raises(DegenerateInput):
        seeded_watershed(np.full((2, 2), np.nan), 0.5)
    with pytest.raises(DegenerateInput):
        seeded_watershed(np.zeros(4), 0.5)


# ---------------------------------------------------------------------------
# merge score


def test_merge_score_formula():
    # |a|=3, |b|=5, interface intensities {0.2, 0.4, 0.6} -> 3 * 0.4
    boundary = np.zeros((3, 3))
    boundary[0] = [0.2, 0.4, 0.6]
    a = [(0, 0), (0, 1), (0, 2)]
    b = [(1, 0), (1, 1), (1, 2), (2, 0), (2, 1)]
    assert merge_score(a, b, boundary) == pytest.approx(3 * 0.4)


def test_merge_score_even_median():
    # |a|=|b|=2, intensities {0.1, 0.3} -> 2 * 0.2
    boundary = np.array([[0.1, 0.1], [0.3, 0.3]])
    a = [(0, 0), (1, 0)]
    b = [(0, 1), (1, 1)]
    assert merge_score(a, b, boundary) == pytest.approx(2 * 0.2)


def test_merge_score_zero_boundary():
    boundary = np.zeros((1, 4))
    assert merge_score([(0, 0), (0, 1)], [(0, 2)], boundary) == 0.0


def test_merge_score_not_adjacent():
    boundary = np.zeros((1, 4))
    with pytest.raises(NotAdjacent):
        merge_score([(0, 0)], [(0, 2)], boundary)


def test_interface_intensities_max_of_pair():
    boundary = np.array([[0.2, 0.7]])
    assert interface_intensities([(0, 0)], [(0, 1)], boundary) == [0.7]


# ---------------------------------------------------------------------------
# merge tree


def test_single_region_tree():
    tree = build_merge_tree(np.ones((3, 3), dtype=int), np.zeros((3, 3)))
    assert tree.events == []


def test_first_merge_is_cheapest():
    # collinear A-B-C, interface medians 0.1 (A,B) and 0.9 (B,C); the
    # interface intensity is the max of the two facing pixels
    boundary = np.array([[0.1, 0.1, 0.1, 0.9, 0.9, 0.9]]) * np.ones((2, 1))
    superpixels = np.array([[1, 1, 2, 2, 3, 3]]) * np.ones((2, 1), dtype=int)
    tree = build_merge_tree(superpixels, boundary)
    assert (tree.events[0].child_a, tree.events[0].child_b) == (1, 2)


def test_strip_tree_events():
    tree, _ = strip_tree()
    got = [(e.child_a, e.child_b, e.new_id, e.score) for e in tree.events]
    assert got == [(1, 2, 5, 0.0), (3, 4, 6, 0.2), (5, 6, 7, 2.0)]


def test_tree_event_count_and_id_consumption():
    rng = np.random.default_rng(4)
    boundary = rng.random((10, 10))
    superpixels = seeded_watershed(boundary, 0.7)
    k = superpixels.max()
    tree = build_merge_tree(superpixels, boundary)
    assert len(tree.events) == k - 1
    consumed = [e.child_a for e in tree.events] + [e.child_b for e in tree.events]
    assert len(consumed) == len(set(consumed))  # each id merged at most once
    assert [e.new_id for e in tree.events] == list(range(k + 1, 2 * k))


def test_tree_deterministic():
    rng = np.random.default_rng(5)
    boundary = rng.random((8, 8))
    superpixels = seeded_watershed(boundary, 0.6)
    a = build_merge_tree(superpixels, boundary)
    b = build_merge_tree(superpixels.copy(), boundary.copy())
    assert a.events == b.events


def test_replay_each_merge_is_minimal():
    """Recompute every live pair score from scratch at each step: the chosen
    pair must be a minimizer, with ties going to the smallest (id, id)."""
    rng = np.random.default_rng(6)
    boundary = rng.random((8, 8))
    superpixels = seeded_watershed(boundary, 0.6)
    tree = build_merge_tree(superpixels, boundary)

    regions = {
        int(lab): {tuple(p) for p in np.argwhere(superpixels == lab)}
        for lab in np.unique(superpixels)
    }
    for event in tree.events:
        scores = {}
        live = sorted(regions)
        for i_pos, a in enumerate(live):
            for b in live[i_pos + 1:]:
                try:
                    scores[(a, b)] = merge_score(regions[a], regions[b], boundary)
                except NotAdjacent:
                    pass
        best = min(scores.items(), key=lambda kv: (kv[1], kv[0]))
        assert (event.child_a, event.child_b) == best[0]
        assert event.score == best[1]
        regions[event.new_id] = regions.pop(event.child_a) | regions.pop(
            event.child_b
        )


# ---------------------------------------------------------------------------
# candidate extraction


def test_extract_all_levels():
    tree, _ = strip_tree()
    crag = extract_candidates(tree, None)
    assert crag.ids() == list(range(1, 8))  # 2K-1 candidates
    assert crag.candidates[5].level == 1
    assert crag.candidates[7].level == 2
    assert crag.roots() == [7]


def test_extract_leaves_only():
    tree, _ = strip_tree()
    crag = extract_candidates(tree, 0)
    assert crag.ids() == [1, 2, 3, 4]
    assert crag.adjacency == ((1, 2), (2, 3), (3, 4))


def test_extract_level_cap():
    tree, _ = strip_tree()
    crag = extract_candidates(tree, 1)
    assert crag.ids() == [1, 2, 3, 4, 5, 6]
    assert set(crag.adjacency) == {
        (1, 2), (2, 3), (3, 4), (3, 5), (2, 6), (5, 6),
    }
    assert crag.roots() == [5, 6]


def test_extract_chain_level_cap():
    tree = chain_tree()
    crag = extract_candidates(tree, 5)
    assert crag.ids() == list(range(1, 14))  # levels 6 and 7 dropped
    assert crag.roots() == [7, 8, 13]


def test_extract_chain_unlimited():
    tree = chain_tree()
    crag = extract_candidates(tree, None)
    assert len(crag.ids()) == 15  # 2K-1 for K=8


def test_extract_score_threshold():
    tree, _ = strip_tree()
    # event scores are 0.0, 0.2, 2.0; a threshold of 0.2 keeps only node 5
    crag = extract_candidates(tree, None, score_threshold=0.2)
    assert crag.ids() == [1, 2, 3, 4, 5]
    assert crag.roots() == [3, 4, 5]
    assert crag.parent(1) == 5 and crag.parent(3) is None


def test_extract_reattaches_across_dropped_nodes():
    """With an inner node dropped by the score filter, its children hang
    from the nearest surviving ancestor and stay exact unions."""
    from cmc.hierarchy import MergeEvent, MergeTree

    # hand-built tree with a high-score merge below a low-score one, so
    # the middle node is dropped while its parent survives
    superpixels = np.array([[1, 1, 2, 2, 3, 3]])
    tree = MergeTree(
        superpixels, [MergeEvent(1, 2, 4, 0.5), MergeEvent(3, 4, 5, 0.1)]
    )
    crag = extract_candidates(tree, None, score_threshold=0.3)
    assert crag.ids() == [1, 2, 3, 5]
    assert crag.parent(1) == 5 and crag.parent(2) == 5 and crag.parent(3) == 5
    assert crag.candidates[5].children == (1, 2, 3)
    assert crag.pixels_of(5) == frozenset((0, c) for c in range(6))
    assert set(crag.adjacency) == {(1, 2), (2, 3)}


def test_extract_max_merges_zero_on_random():
    rng = np.random.default_rng(8)
    boundary = rng.random((10, 10))
    superpixels = seeded_watershed(boundary, 0.6)
    crag = extract_candidates(build_merge_tree(superpixels, boundary), 0)
    assert crag.leaves() == crag.ids()
