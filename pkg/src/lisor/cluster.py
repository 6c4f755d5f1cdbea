"""Hidden-state trace pools and their k-means partitioning.

Two clustering spaces are supported: the raw hidden vectors, and a
position-augmented space where each point gains ``n_sequences`` extra
coordinates, all zero except its own sequence's slot, which holds the
(1-based) position of the point within that sequence. Temporally close
points of one sequence thereby become geometrically close.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import Alphabet, Sequence
from .errors import ClusteringError, ConfigurationError, ParseError, StructuralError
from .model import RnnModel, forward

MAX_LLOYD_ITER = 300

METHOD_KMEANSPP = "kmeans++"
METHOD_KMEANSX = "kmeans-x"

SPACE_RAW = "raw"
SPACE_AUGMENTED = "position-augmented"


@dataclass
class TracePool:
    """All hidden-state points recorded over one data split.

    Points are ordered sequence-major then by position; ``seq_index`` and
    ``position`` are 1-based, matching the augmented-feature convention.
    """

    H: np.ndarray          # (N, d)
    seq_index: np.ndarray  # (N,)
    position: np.ndarray   # (N,)
    symbols: np.ndarray    # (N,) consumed token indices
    n_sequences: int
    d: int

    def __len__(self) -> int:
        return self.H.shape[0]

    def validate(self) -> None:
        n = len(self)
        if not (self.seq_index.shape == self.position.shape == self.symbols.shape == (n,)):
            raise StructuralError("pool index arrays disagree with point count")
        if self.H.shape != (n, self.d):
            raise StructuralError(f"H shape {self.H.shape} != ({n}, {self.d})")
        expect_seq = 1
        expect_pos = 1
        for i in range(n):
            si, pj = int(self.seq_index[i]), int(self.position[i])
            if si == expect_seq and pj == expect_pos:
                expect_pos += 1
            elif si == expect_seq + 1 and pj == 1:
                expect_seq, expect_pos = si, 2
            else:
                raise StructuralError(f"point {i}: non-contiguous (i={si}, j={pj})")
        if expect_seq != self.n_sequences:
            raise StructuralError(f"saw {expect_seq} sequences, header says {self.n_sequences}")

    def sequence_slices(self) -> list[slice]:
        """Contiguous point ranges, one per sequence, in order."""
        bounds = np.flatnonzero(self.position == 1).tolist() + [len(self)]
        return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


@dataclass
class Clustering:
    k: int
    centroids: np.ndarray   # (k, dim) in the clustering space
    assign: np.ndarray      # (N,) cluster ids
    space: str              # SPACE_RAW or SPACE_AUGMENTED
    cost: float             # sum of squared distances to assigned centroids
    cost_history: list[float] = field(default_factory=list)


def collect_traces(model: RnnModel, split: list[Sequence]) -> TracePool:
    """Record the top-layer hidden state after every token of every sequence."""
    if not split:
        raise ConfigurationError("split must be non-empty")
    hs, seq_idx, pos, syms = [], [], [], []
    for i, seq in enumerate(split, start=1):
        trace = forward(model, seq)
        hs.append(trace.hidden)
        n_steps = len(trace)
        seq_idx.extend([i] * n_steps)
        pos.extend(range(1, n_steps + 1))
        syms.extend(seq.tokens)
    return TracePool(
        H=np.concatenate(hs, axis=0),
        seq_index=np.asarray(seq_idx, dtype=np.int64),
        position=np.asarray(pos, dtype=np.int64),
        symbols=np.asarray(syms, dtype=np.int64),
        n_sequences=len(split),
        d=model.d,
    )


def augment_position(pool: TracePool) -> np.ndarray:
    """Concatenate each point with its sequence-slot position feature.

    Point (i, j) maps to [h_1..h_d, 0, ..., j, ..., 0] where j sits in extra
    slot i; the extra block has one slot per pooled sequence.
    """
    n = len(pool)
    out = np.zeros((n, pool.d + pool.n_sequences))
    out[:, : pool.d] = pool.H
    out[np.arange(n), pool.d + pool.seq_index - 1] = pool.position
    return out


def kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2-weighted seeding: each next centroid is drawn with probability
    proportional to its squared distance from the nearest chosen one."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1:
        raise ClusteringError(f"k must be >= 1, got {k}")
    if k > np.unique(points, axis=0).shape[0]:
        raise ClusteringError(f"k={k} exceeds the number of distinct points")
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(0, n))
    centroids[0] = points[first]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centroids[j]) ** 2, axis=1))
    return centroids


def _assign_nearest(points: np.ndarray, centroids: np.ndarray):
    """Squared distance to the nearest centroid and its id (ties: lowest id).

    Distances come from explicit differences, chunked to bound memory: the
    faster norm-expansion form has cancellation noise that misorders exact
    duplicates, which matters because pools repeat hidden states verbatim.
    """
    n, dim = points.shape
    k = centroids.shape[0]
    d2 = np.empty(n)
    assign = np.empty(n, dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, k * dim))
    for a in range(0, n, chunk):
        diff = points[a : a + chunk, None, :] - centroids[None, :, :]
        dist = np.einsum("pkd,pkd->pk", diff, diff)
        idx = np.argmin(dist, axis=1)
        rows = np.arange(dist.shape[0])
        assign[a : a + chunk] = idx
        d2[a : a + chunk] = dist[rows, idx]
    return d2, assign


def _repair_empties(points: np.ndarray, centroids: np.ndarray, d2: np.ndarray, empty_ids):
    """Reseed each empty cluster with the point farthest from its assigned
    centroid. A farthest point has positive distance, hence coincides with no
    centroid; masking its co-located duplicates keeps repairs distinct."""
    far = d2.copy()
    for j in empty_ids:
        p = int(np.argmax(far))
        if far[p] <= 0.0:
            raise ClusteringError("cannot repair empty cluster: no point off a centroid")
        centroids[j] = points[p]
        far[np.all(points == points[p], axis=1)] = -1.0


def lloyd(points: np.ndarray, centroids: np.ndarray, space: str = SPACE_RAW) -> Clustering:
    """Alternate nearest-assignment and mean updates until assignments fix.

    Empty clusters are reseeded with the point currently farthest from its
    assigned centroid. The per-iteration assignment cost is recorded in
    ``cost_history`` and is non-increasing.
    """
    points = np.asarray(points, dtype=np.float64)
    centroids = np.array(centroids, dtype=np.float64)
    n = points.shape[0]
    k = centroids.shape[0]
    if not 1 <= k <= n:
        raise ClusteringError(f"need 1 <= k <= n_points, got k={k}, n={n}")
    history: list[float] = []
    prev = None
    for _ in range(MAX_LLOYD_ITER):
        d2, assign = _assign_nearest(points, centroids)
        history.append(float(d2.sum()))
        counts = np.bincount(assign, minlength=k)
        if prev is not None and counts.min() > 0 and np.array_equal(assign, prev):
            break
        prev = assign
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, points)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            _repair_empties(points, centroids, d2, np.flatnonzero(~nonempty))
    # Cap exit can leave assignments stale; settle them (and any stray
    # empties) against the final centroids.
    for _ in range(k + 1):
        d2, assign = _assign_nearest(points, centroids)
        counts = np.bincount(assign, minlength=k)
        if counts.min() > 0:
            break
        _repair_empties(points, centroids, d2, np.flatnonzero(counts == 0))
    return Clustering(
        k=k,
        centroids=centroids,
        assign=assign,
        space=space,
        cost=float(d2.sum()),
        cost_history=history,
    )


def _method_space(pool: TracePool, method: str):
    if method == METHOD_KMEANSPP:
        return pool.H, SPACE_RAW
    if method == METHOD_KMEANSX:
        return augment_position(pool), SPACE_AUGMENTED
    raise ConfigurationError(
        f"unknown method {method!r}; expected {METHOD_KMEANSPP!r} or {METHOD_KMEANSX!r}"
    )


def distinct_points(pool: TracePool, method: str) -> int:
    """Distinct point count in the method's clustering space; the largest k
    the pool supports. Shared prefixes collapse raw hidden states, so this
    can be well below the pool size for k-means++."""
    points, _ = _method_space(pool, method)
    return int(np.unique(points, axis=0).shape[0])


def cluster_pool(pool: TracePool, k: int, method: str, rng: np.random.Generator) -> Clustering:
    """Partition a trace pool with k-means++ (raw space) or k-means-x
    (position-augmented space)."""
    points, space = _method_space(pool, method)
    centroids = kmeanspp_init(points, k, rng)
    return lloyd(points, centroids, space=space)


def dump_trace_pool(pool: TracePool, alphabet: Alphabet, path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"d": pool.d, "n_sequences": pool.n_sequences}) + "\n")
        for i in range(len(pool)):
            row = {
                "i": int(pool.seq_index[i]),
                "j": int(pool.position[i]),
                "symbol": alphabet.symbol(int(pool.symbols[i])),
                "h": pool.H[i].tolist(),
            }
            fh.write(json.dumps(row) + "\n")


def load_trace_pool(path, alphabet: Alphabet) -> TracePool:
    with open(path) as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ParseError(f"{path}: empty trace pool file")
    header = json.loads(lines[0])
    for key in ("d", "n_sequences"):
        if key not in header:
            raise ParseError(f"{path}: header missing field {key!r}")
    rows = [json.loads(line) for line in lines[1:]]
    pool = TracePool(
        H=np.asarray([r["h"] for r in rows], dtype=np.float64).reshape(len(rows), header["d"]),
        seq_index=np.asarray([r["i"] for r in rows], dtype=np.int64),
        position=np.asarray([r["j"] for r in rows], dtype=np.int64),
        symbols=np.asarray([alphabet.index(r["symbol"]) for r in rows], dtype=np.int64),
        n_sequences=int(header["n_sequences"]),
        d=int(header["d"]),
    )
    pool.validate()
    return pool
