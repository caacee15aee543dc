"""Node and edge feature vectors.

Per candidate: size, circularity, eccentricity, a 16-bin contour
tangent angle histogram, and intensity statistics of the raw image and
the boundary map over all pixels and over contour pixels.  Per edge:
contact area, interface intensity statistics, and the symmetric
combinators (|u-v|, min, max, u+v) of the endpoint node features.
"""

import math

import numpy as np
from scipy import ndimage

from .crag import edge_from_str, edge_key, edge_to_str
from .errors import DegenerateInput, EmptyRegion, NotAnEdge
from .hierarchy import interface_intensities

TWO_PI = 2.0 * math.pi

_QUANTILES = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)

# Moore neighborhood, clockwise starting north (rows grow downward)
_MOORE = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def _stat_names(prefix):
    names = [f"{prefix}_{s}" for s in ("sum", "mean", "var", "skew", "kurt")]
    names += [f"{prefix}_hist_{b:02d}" for b in range(20)]
    names += [f"{prefix}_q{int(q * 100):02d}" for q in _QUANTILES]
    return names


def node_feature_names():
    names = ["size", "circularity", "eccentricity"]
    names += [f"angle_hist_{b:02d}" for b in range(16)]
    for prefix in ("raw_all", "raw_contour", "boundary_all", "boundary_contour"):
        names += _stat_names(prefix)
    return names


def edge_feature_names():
    names = ["contact_area", "interface_mean", "interface_var", "interface_skew"]
    for name in node_feature_names():
        names += [f"absdiff_{name}", f"min_{name}", f"max_{name}", f"sum_{name}"]
    return names


def _moments(values):
    """sum, mean, population variance/skewness, excess kurtosis; 0 at zero variance."""
    total = float(values.sum())
    mean = float(values.mean())
    d = values - mean
    m2 = float(np.mean(d * d))
    if m2 > 0.0:
        skew = float(np.mean(d**3)) / m2**1.5
        kurt = float(np.mean(d**4)) / (m2 * m2) - 3.0
    else:
        skew = 0.0
        kurt = 0.0
    return total, mean, m2, skew, kurt


def _stats_block(values):
    total, mean, var, skew, kurt = _moments(values)
    hist = np.histogram(values, bins=20, range=(0.0, 1.0))[0].astype(np.float64)
    quant = np.quantile(values, _QUANTILES)
    return np.concatenate([[total, mean, var, skew, kurt], hist, quant])


def _trace_contour(pixels):
    """Moore boundary walk, one full cycle of pixels (may repeat pixels).

    The walk over (pixel, backtrack) states is eventually periodic; one
    period is returned, which for compact blobs is the classic closed
    clockwise trace.  (A plain return-to-start check can miss: on thin
    shapes the start pixel is only ever re-entered from directions other
    than the initial backtrack.)
    """
    start = min(pixels)
    back0 = (start[0], start[1] - 1)  # row-major first pixel: west is outside
    seen = {}
    seq = []
    cur, back = start, back0
    while (cur, back) not in seen:
        seen[(cur, back)] = len(seq)
        seq.append(cur)
        idx = _MOORE.index((back[0] - cur[0], back[1] - cur[1]))
        nxt = None
        for k in range(1, 9):
            off = _MOORE[(idx + k) % 8]
            q = (cur[0] + off[0], cur[1] + off[1])
            if q in pixels:
                prev = _MOORE[(idx + k - 1) % 8]
                nxt, nback = q, (cur[0] + prev[0], cur[1] + prev[1])
                break
        if nxt is None:
            return seq
        cur, back = nxt, nback
    return seq[seen[(cur, back)]:]


def _angle_histogram(pixels):
    """16-bin histogram of contour displacement angles over [0, 2pi).

    All-zero for single pixels and for regions that are not one
    8-connected component (no unambiguous contour to walk).
    """
    if len(pixels) < 2:
        return np.zeros(16)
    rows = [p[0] for p in pixels]
    cols = [p[1] for p in pixels]
    r0, c0 = min(rows), min(cols)
    mask = np.zeros((max(rows) - r0 + 1, max(cols) - c0 + 1), dtype=bool)
    for (r, c) in pixels:
        mask[r - r0, c - c0] = True
    _, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n != 1:
        return np.zeros(16)
    contour = _trace_contour(pixels)
    if len(contour) < 2:
        return np.zeros(16)
    hist = np.zeros(16)
    closed = contour + [contour[0]]
    for (ra, ca), (rb, cb) in zip(closed, closed[1:]):
        angle = math.atan2(rb - ra, cb - ca) % TWO_PI
        hist[int(angle / (TWO_PI / 16)) % 16] += 1.0
    return hist


def _contour_pixels(pixels):
    """Pixels with at least one 4-neighbor outside the region."""
    out = []
    for (r, c) in pixels:
        if (
            (r - 1, c) not in pixels
            or (r + 1, c) not in pixels
            or (r, c - 1) not in pixels
            or (r, c + 1) not in pixels
        ):
            out.append((r, c))
    return out


def _values_at(image, coords):
    arr = image[[p[0] for p in coords], [p[1] for p in coords]]
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise DegenerateInput("image values outside [0, 1] under candidate")
    return arr


def node_features(pixels, raw, boundary):
    """147-entry feature vector for one candidate's pixel set."""
    if not pixels:
        raise EmptyRegion()
    pixels = frozenset(map(tuple, pixels))
    raw = np.asarray(raw, dtype=np.float64)
    boundary = np.asarray(boundary, dtype=np.float64)

    size = float(len(pixels))

    perimeter = 0
    for (r, c) in pixels:
        for q in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if q not in pixels:
                perimeter += 1
    circularity = 4.0 * math.pi * size / (perimeter * perimeter)

    coords = np.array(sorted(pixels), dtype=np.float64)
    if len(pixels) == 1:
        eccentricity = 0.0
    else:
        cov = np.cov(coords.T, bias=True)
        lo, hi = np.linalg.eigvalsh(cov)
        eccentricity = math.sqrt(1.0 - max(lo, 0.0) / hi) if hi > 0.0 else 0.0

    angles = _angle_histogram(pixels)

    ordered = sorted(pixels)
    contour = _contour_pixels(pixels)
    blocks = []
    for image in (raw, boundary):
        for coords_list in (ordered, contour):
            blocks.append(_stats_block(_values_at(image, coords_list)))
    return np.concatenate([[size, circularity, eccentricity], angles] + blocks)


def edge_features(edge, crag, raw, boundary, node_feats):
    """592-entry feature vector for one adjacency edge."""
    edge = edge_key(*edge)
    if edge not in set(crag.adjacency):
        raise NotAnEdge(edge)
    i, j = edge
    vals = np.array(
        interface_intensities(crag.pixels_of(i), crag.pixels_of(j), boundary)
    )
    _, mean, var, skew, _ = _moments(vals)
    u, v = np.asarray(node_feats[i]), np.asarray(node_feats[j])
    combo = np.empty(4 * len(u))
    combo[0::4] = np.abs(u - v)
    combo[1::4] = np.minimum(u, v)
    combo[2::4] = np.maximum(u, v)
    combo[3::4] = u + v
    return np.concatenate([[float(len(vals)), mean, var, skew], combo])


def compute_features(crag, raw, boundary):
    """Feature vectors for every candidate and adjacency edge of a Crag."""
    node_feats = {
        cid: node_features(crag.pixels_of(cid), raw, boundary) for cid in crag.ids()
    }
    edge_feats = {
        e: edge_features(e, crag, raw, boundary, node_feats) for e in crag.adjacency
    }
    return node_feats, edge_feats


def features_to_json(node_feats, edge_feats):
    return {
        "node_schema": node_feature_names(),
        "edge_schema": edge_feature_names(),
        "nodes": {str(i): list(map(float, v)) for i, v in sorted(node_feats.items())},
        "edges": {
            edge_to_str(e): list(map(float, v)) for e, v in sorted(edge_feats.items())
        },
    }


def features_from_json(obj):
    node_feats = {int(i): np.array(v) for i, v in obj["nodes"].items()}
    edge_feats = {edge_from_str(k): np.array(v) for k, v in obj["edges"].items()}
    return node_feats, edge_feats
