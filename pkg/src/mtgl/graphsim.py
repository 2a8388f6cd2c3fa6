"""Sampling typed sparse random graphs, their component census, and the
multi-type Poisson Galton-Watson tree."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ClampedEdgeWarning, Explosion, PreconditionViolated
from .model import Model, solve_dual
from .rng import generator, replicate_seed
from .trees import h_value
from .typevec import as_typevec

# geometric gaps are drawn in chunks of (expected remaining edges) * this + slack
_CHUNK_FACTOR = 1.1


@dataclass(frozen=True, eq=False)
class GraphSample:
    type_of: np.ndarray   # vertex -> type index, contiguous blocks
    edges: np.ndarray     # (m, 2) int64, u < v
    seed: int
    n: int
    draws: int = 0        # geometric variates consumed (candidate-pair skips)

    @property
    def num_edges(self) -> int:
        return len(self.edges)


def _skip_positions(rng: np.random.Generator, total: int, p: float) -> tuple[np.ndarray, int]:
    """Sorted indices in range(total) each kept independently with prob p."""
    if total <= 0 or p <= 0:
        return np.empty(0, dtype=np.int64), 0
    if p >= 1:
        return np.arange(total, dtype=np.int64), 0
    chunks = []
    pos = -1
    draws = 0
    while True:
        expected = (total - 1 - pos) * p
        size = int(expected * _CHUNK_FACTOR + 5 * math.sqrt(expected) + 16)
        gaps = rng.geometric(p, size=size)
        draws += size
        idx = pos + np.cumsum(gaps, dtype=np.int64)
        if idx[-1] >= total:
            chunks.append(idx[idx < total])
            break
        chunks.append(idx)
        pos = int(idx[-1])
    return np.concatenate(chunks), draws


def _triangle_pairs(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of idx = j (j - 1) / 2 + i over pairs i < j."""
    j = np.floor((1 + np.sqrt(1 + 8 * idx.astype(np.float64))) / 2).astype(np.int64)
    # guard against rounding at perfect squares
    j -= (j * (j - 1) // 2 > idx)
    j += ((j + 1) * j // 2 <= idx)
    i = idx - j * (j - 1) // 2
    return i, j


def sample_graph(model: Model, seed: int) -> GraphSample:
    """Sample the typed graph with geometric skipping inside each type block.

    Runtime is linear in the number of vertices plus edges.  The same
    ``(model, seed)`` always yields the identical edge array.
    """
    counts = model.counts
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    type_of = np.repeat(np.arange(model.d), counts)
    P = model.kappa / model.n
    if np.any(P > 1):
        warnings.warn("kappa/n exceeds 1; edge probability clamped to 1", ClampedEdgeWarning, stacklevel=2)
        P = np.minimum(P, 1.0)
    rng = generator(seed)
    parts = []
    draws = 0
    for r in range(model.d):
        for s in range(r, model.d):
            if r == s:
                N = counts[r]
                idx, k = _skip_positions(rng, N * (N - 1) // 2, float(P[r, r]))
                i, j = _triangle_pairs(idx)
                u, v = i + offsets[r], j + offsets[r]
            else:
                idx, k = _skip_positions(rng, counts[r] * counts[s], float(P[r, s]))
                u = idx // counts[s] + offsets[r]
                v = idx % counts[s] + offsets[s]
            draws += k
            parts.append(np.stack([u, v], axis=1))
    edges = np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)
    return GraphSample(type_of, edges.astype(np.int64), seed, model.n, draws)


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def roots(self) -> list[int]:
        return [self.find(x) for x in range(len(self.parent))]


@dataclass(frozen=True, eq=False)
class ComponentCensus:
    t: dict        # type vector -> number of components with that configuration
    giant: tuple
    total: int

    def count(self, k) -> int:
        return self.t.get(as_typevec(k), 0)

    def to_dict(self) -> dict:
        return {
            "t": {",".join(map(str, k)): v for k, v in sorted(self.t.items())},
            "giant": list(self.giant),
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ComponentCensus:
        t = {tuple(int(x) for x in key.split(",")): int(v) for key, v in data["t"].items()}
        return cls(t, tuple(data["giant"]), int(data["total"]))


def giant_key(k) -> tuple:
    """Order used to pick the largest component: |k| first, then lexicographic."""
    return (sum(k), tuple(k))


def census_from_edges(n: int, type_of: np.ndarray, edges, d: int) -> ComponentCensus:
    uf = UnionFind(n)
    for u, v in np.asarray(edges, dtype=np.int64).tolist():
        uf.union(u, v)
    roots = np.asarray(uf.roots(), dtype=np.int64)
    type_of = np.asarray(type_of, dtype=np.int64)
    # per-root type counts: one row per distinct root
    uniq, inverse = np.unique(roots, return_inverse=True)
    per = np.zeros((len(uniq), d), dtype=np.int64)
    np.add.at(per, (inverse, type_of), 1)
    configs, mult = np.unique(per, axis=0, return_counts=True)
    t = {tuple(int(x) for x in row): int(c) for row, c in zip(configs, mult)}
    giant = max(t, key=giant_key)
    total = int(mult.sum())
    counts = np.bincount(type_of, minlength=d)
    assert np.array_equal((configs * mult[:, None]).sum(axis=0), counts), "census conservation"
    return ComponentCensus(t, giant, total)


def census(sample: GraphSample) -> ComponentCensus:
    d = int(sample.type_of.max()) + 1 if sample.n else 0
    return census_from_edges(sample.n, sample.type_of, sample.edges, d)


# ---------------------------------------------------------------------------
# Replicate batches
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CensusStats:
    R: int
    master_seed: int
    tracked: list                 # tracked type vectors
    seeds: np.ndarray             # per-replicate seeds
    giant: np.ndarray             # (R, d) raw giant configurations
    t: np.ndarray                 # (R, len(tracked)) raw counts
    total: np.ndarray             # (R,) raw C_n
    centers: dict = field(default_factory=dict)

    def scaled(self) -> dict:
        """Centered statistics divided by sqrt(n)."""
        n = self.centers["n"]
        root = math.sqrt(n)
        return {
            "giant": (self.giant - self.centers["giant"] * n) / root,
            "t": (self.t - self.centers["t"] * n) / root,
            "total": (self.total - self.centers["total"] * n) / root,
        }

    def means(self) -> dict:
        return {key: val.mean(axis=0) for key, val in self.scaled().items()}

    def covariances(self) -> dict:
        sc = self.scaled()
        return {
            "giant": np.atleast_2d(np.cov(sc["giant"], rowvar=False)),
            "t": np.atleast_1d(sc["t"].var(axis=0, ddof=1)) if sc["t"].size else np.zeros(0),
            "total": float(sc["total"].var(ddof=1)),
        }


def _replicate(args):
    model, seed, tracked = args
    cen = census(sample_graph(model, seed))
    return cen.giant, [cen.count(k) for k in tracked], cen.total


def centering_constants(model: Model, tracked) -> dict:
    """(mu - c), h(k) and q for the realized measure mu^n."""
    mu = model.mu_n
    dual = solve_dual(model.kappa, mu)
    c = dual.c
    return {
        "n": model.n,
        "c": c,
        "giant": mu - c,
        "t": np.array([h_value(k, model.kappa, mu, c).h for k in tracked]),
        "total": float(c.sum() - 0.5 * c @ model.kappa @ c),
    }


def run_batch(model: Model, R: int, master_seed: int, requested_ks=(), workers: int = 1,
              seeds=None) -> CensusStats:
    """R independent replicates, reduced in replicate-index order.

    ``seeds`` overrides the splitmix-derived per-replicate seeds.
    """
    if R < 2:
        raise PreconditionViolated("run_batch needs R >= 2")
    tracked = [as_typevec(k) for k in requested_ks]
    if seeds is None:
        seeds = [replicate_seed(master_seed, i) for i in range(R)]
    seeds = [int(s) for s in seeds]
    jobs = [(model, s, tracked) for s in seeds]
    if workers <= 1:
        results = [_replicate(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, R // (8 * workers))))
    giant = np.array([r[0] for r in results], dtype=float).reshape(R, model.d)
    t = np.array([r[1] for r in results], dtype=float).reshape(R, len(tracked))
    total = np.array([r[2] for r in results], dtype=float)
    return CensusStats(R, master_seed, tracked, np.array(seeds, dtype=np.uint64), giant, t, total,
                       centering_constants(model, tracked))


# ---------------------------------------------------------------------------
# Multi-type Poisson Galton-Watson tree
# ---------------------------------------------------------------------------

def sample_gw(kappa, mu, root_type: int, seed_or_rng, cap: int = 10**5) -> tuple[int, ...]:
    """Total progeny type vector of the Galton-Watson tree from ``root_type``.

    A type-s particle has Poisson(kappa[s, r] mu[r]) children of type r.
    Generations are aggregated: the children of z_s type-s parents are a
    single Poisson draw with mean sum_s z_s kappa[s, r] mu[r].  Raises
    Explosion as soon as the population exceeds ``cap``.
    """
    kappa = np.asarray(kappa, dtype=float)
    mu = np.asarray(mu, dtype=float)
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else generator(seed_or_rng)
    M = kappa * mu[None, :]
    z = np.zeros(len(mu), dtype=np.int64)
    z[root_type] = 1
    total = z.copy()
    while z.any():
        z = rng.poisson(z @ M)
        total += z
        if total.sum() > cap:
            raise Explosion(int(total.sum()), cap)
    return tuple(int(x) for x in total)


@dataclass(frozen=True)
class GWBatch:
    samples: int
    explosions: int
    counts: dict   # finite total progeny -> frequency

    @property
    def explosion_rate(self) -> float:
        return self.explosions / self.samples

    @property
    def explosion_se(self) -> float:
        p = self.explosion_rate
        return math.sqrt(max(p * (1 - p), 1e-300) / self.samples)


def gw_batch(kappa, mu, root_type: int, samples: int, seed: int, cap: int = 10**5) -> GWBatch:
    rng = generator(seed)
    counts: dict = {}
    explosions = 0
    for _ in range(samples):
        try:
            y = sample_gw(kappa, mu, root_type, rng, cap)
        except Explosion:
            explosions += 1
            continue
        counts[y] = counts.get(y, 0) + 1
    return GWBatch(samples, explosions, counts)
