"""Random contact-graph generators on a compact CSR representation.

Three families, all reproducible from an integer seed and sized for
ensembles of 1e5..1e6-node graphs:

  config-poisson:   configuration model with Poisson(mu) degrees, uniform
                    stub pairing, self-loops and multi-edges erased
  barabasi-albert:  preferential attachment with m = round(mu/2) edges per
                    new node
  watts-strogatz:   ring lattice of even degree k = round(mu) with each
                    edge rewired independently with a fixed probability

Generated graphs are undirected and simple; the empirical mean degree must
land within 2% of the request or generation fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import maybe_njit
from .params import DegreeDistribution, ModelError

GRAPH_KINDS = ("config-poisson", "barabasi-albert", "watts-strogatz")


@dataclass(frozen=True)
class ContactGraph:
    """Undirected simple graph in CSR form (indptr/indices), with degrees."""

    indptr: np.ndarray
    indices: np.ndarray
    degrees: np.ndarray
    generator: str
    seed_key: tuple

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.degrees):
            arr.setflags(write=False)

    @property
    def node_count(self) -> int:
        return len(self.degrees)

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]: self.indptr[v + 1]]

    def census(self) -> tuple[float, float]:
        """Empirical (mean, variance) of the degree sequence."""
        d = self.degrees.astype(np.float64)
        return float(d.mean()), float(d.var())

    def degree_distribution(self) -> DegreeDistribution:
        counts = np.bincount(self.degrees)
        return DegreeDistribution({k: int(c) for k, c in enumerate(counts) if c > 0})

    def write_edge_list(self, path) -> None:
        """Plain `u v` text rows, each undirected edge once (u < v)."""
        with open(path, "w", encoding="utf-8") as fh:
            for u in range(self.node_count):
                row = self.indices[self.indptr[u]: self.indptr[u + 1]]
                for v in row[row > u]:
                    fh.write(f"{u} {v}\n")


def _csr_from_edges(n: int, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ends = np.concatenate([lo, hi])
    other = np.concatenate([hi, lo])
    order = np.argsort(ends, kind="stable")
    indices = np.ascontiguousarray(other[order], dtype=np.int32)
    counts = np.bincount(ends, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices


def _dedupe_edges(n: int, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep = u != v
    u, v = u[keep], v[keep]
    lo = np.minimum(u, v).astype(np.int64)
    hi = np.maximum(u, v).astype(np.int64)
    keys = np.unique(lo * n + hi)
    return keys // n, keys % n


def _config_poisson(n: int, mu: float, rng: np.random.Generator):
    deg = rng.poisson(mu, n)
    idx = int(rng.integers(n))
    while int(deg.sum()) % 2 == 1:
        deg[idx] = rng.poisson(mu)
    stubs = np.repeat(np.arange(n, dtype=np.int64), deg)
    stubs = stubs[rng.permutation(stubs.size)]
    return _dedupe_edges(n, stubs[0::2], stubs[1::2])


@maybe_njit(cache=True)
def _ba_attach(m: int, n: int, repeated: np.ndarray, targets: np.ndarray,
               edges_u: np.ndarray, edges_v: np.ndarray, uniforms: np.ndarray) -> int:
    """Preferential-attachment loop. targets holds the current attachment
    set (m distinct nodes); uniforms is an oversized buffer of U(0,1) draws.
    Returns draws consumed, or -1 if the buffer ran out."""
    rep_len = 0
    ptr = 0
    e = 0
    for t in range(m, n):
        for j in range(m):
            edges_u[e] = t
            edges_v[e] = targets[j]
            e += 1
        for j in range(m):
            repeated[rep_len] = targets[j]
            repeated[rep_len + 1] = t
            rep_len += 2
        # next attachment set: m distinct draws weighted by degree
        filled = 0
        while filled < m:
            if ptr >= uniforms.shape[0]:
                return -1
            cand = repeated[int(uniforms[ptr] * rep_len)]
            ptr += 1
            dup = False
            for j in range(filled):
                if targets[j] == cand:
                    dup = True
                    break
            if not dup:
                targets[filled] = cand
                filled += 1
    return ptr


def _barabasi_albert(n: int, mu: float, rng: np.random.Generator):
    m = max(1, int(round(mu / 2.0)))
    if m >= n:
        raise ModelError(f"attachment count m={m} must be below node count {n}")
    n_edges = m * (n - m)
    repeated = np.empty(2 * n_edges, dtype=np.int64)
    targets = np.arange(m, dtype=np.int64)
    edges_u = np.empty(n_edges, dtype=np.int64)
    edges_v = np.empty(n_edges, dtype=np.int64)
    overdraw = int(2.5 * m * (n - m)) + 1024
    while True:
        uniforms = rng.random(overdraw)
        used = _ba_attach(m, n, repeated, targets.copy(), edges_u, edges_v, uniforms)
        if used >= 0:
            break
        overdraw *= 2
    return _dedupe_edges(n, edges_u, edges_v)


def _watts_strogatz(n: int, mu: float, rewire_p: float, rng: np.random.Generator):
    k = int(round(mu / 2.0)) * 2
    if k < 2 or k >= n:
        raise ModelError(f"ring degree k={k} invalid for {n} nodes (need 2 <= k < n)")
    if not 0.0 <= rewire_p <= 1.0:
        raise ModelError(f"rewire probability must be in [0, 1], got {rewire_p}")
    half = k // 2
    u = np.repeat(np.arange(n, dtype=np.int64), half)
    v = (u + np.tile(np.arange(1, half + 1, dtype=np.int64), n)) % n
    if rewire_p > 0.0:
        edge_set = set((min(a, b) * n + max(a, b)) for a, b in zip(u.tolist(), v.tolist()))
        decide = rng.random(u.size)
        rewire_idx = np.flatnonzero(decide < rewire_p)
        buf = rng.random(4 * rewire_idx.size + 64)
        ptr = 0
        for i in rewire_idx.tolist():
            a, b = int(u[i]), int(v[i])
            old_key = min(a, b) * n + max(a, b)
            for _ in range(1000):
                if ptr >= buf.size:
                    buf = rng.random(buf.size)
                    ptr = 0
                w = int(buf[ptr] * n)
                ptr += 1
                new_key = min(a, w) * n + max(a, w)
                if w != a and new_key not in edge_set:
                    edge_set.discard(old_key)
                    edge_set.add(new_key)
                    v[i] = w
                    break
            # a saturated node keeps its edge; only possible at k ~ n
    return _dedupe_edges(n, u, v)


def generate_graph(
    kind: str,
    node_count: int,
    mean_degree: float,
    seed,
    ws_rewire: float = 0.1,
) -> ContactGraph:
    """Build one of the three graph families, reproducibly from `seed`.

    seed is an int or a numpy SeedSequence. The empirical mean degree is
    checked against the request: 2% tolerance, widened to the degree-sampling
    noise floor on small graphs.
    """
    if kind not in GRAPH_KINDS:
        raise ModelError(f"unknown graph kind {kind!r}; choose from {GRAPH_KINDS}")
    if node_count < 100:
        raise ModelError(f"node_count must be >= 100, got {node_count}")
    if mean_degree < 1.0:
        raise ModelError(f"mean_degree must be >= 1, got {mean_degree}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    if kind == "config-poisson":
        lo, hi = _config_poisson(node_count, mean_degree, rng)
    elif kind == "barabasi-albert":
        lo, hi = _barabasi_albert(node_count, mean_degree, rng)
    else:
        lo, hi = _watts_strogatz(node_count, mean_degree, ws_rewire, rng)
    indptr, indices = _csr_from_edges(node_count, lo, hi)
    degrees = np.diff(indptr).astype(np.int32)
    graph = ContactGraph(
        indptr=indptr,
        indices=indices,
        degrees=degrees,
        generator=kind,
        seed_key=tuple(ss.entropy if isinstance(ss.entropy, (list, tuple)) else [ss.entropy])
        + tuple(ss.spawn_key),
    )
    mean = graph.census()[0]
    tol = max(0.02 * mean_degree, 5.0 * math.sqrt(mean_degree / node_count))
    if abs(mean - mean_degree) > tol:
        raise ModelError(
            f"{kind}: empirical mean degree {mean:.3f} misses request {mean_degree} "
            "(unattainable constructor parameters)"
        )
    return graph
