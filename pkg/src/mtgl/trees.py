"""Weighted spanning-tree counts tau(k), cluster weights h(k) and their sums.

tau(k) sums, over all spanning trees of the complete graph on a multiset of
|k| typed vertices, the product of kernel values along the tree edges.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import NoDecay, SingularLaplacian, SingularMatrix, TooLarge
from .typevec import as_typevec, compositions, expand, require_nonzero

LOG_UNDERFLOW = -700.0


# ---------------------------------------------------------------------------
# tau(k)
# ---------------------------------------------------------------------------

def weighted_laplacian(k, kappa) -> np.ndarray:
    x = expand(k)
    W = np.asarray(kappa, dtype=float)[np.ix_(x, x)].copy()
    np.fill_diagonal(W, 0.0)
    return np.diag(W.sum(axis=1)) - W


def tau_log(k, kappa, drop: int = 0) -> float:
    """log tau(k) by the weighted Matrix-Tree theorem.

    The cofactor obtained by deleting row and column ``drop`` of the
    |k|-vertex weighted Laplacian is evaluated with a pivoted LU log-determinant.
    """
    k = require_nonzero(as_typevec(k))
    m = sum(k)
    if m == 1:
        return 0.0
    L = weighted_laplacian(k, kappa)
    keep = [i for i in range(m) if i != drop]
    sign, logdet = np.linalg.slogdet(L[np.ix_(keep, keep)])
    if sign <= 0 or not np.isfinite(logdet):
        raise SingularLaplacian(f"reduced Laplacian of k={k} is singular")
    return float(logdet)


def tau_log_batch(ks, kappa) -> np.ndarray:
    """Vectorized log tau for many type vectors at once.

    Uses the block structure of the typed complete graph: within type s the
    Laplacian has eigenvalue (kappa k)_s with multiplicity k_s - 1, and the
    remaining nonzero spectrum is that of the |S|x|S| quotient, so that

        tau(k) = det(D_{kappa k} - D_{sqrt k} kappa D_{sqrt k} + u u^T)
                 * prod_s (kappa k)_s^(k_s - 1) / |k|,   u = sqrt(k / |k|).
    """
    ks = np.atleast_2d(np.asarray(ks, dtype=float))
    kappa = np.asarray(kappa, dtype=float)
    total = ks.sum(axis=1)
    if np.any(total < 1):
        raise ValueError("zero type vector in batch")
    load = ks @ kappa  # (kappa k)_s, kappa symmetric
    root = np.sqrt(ks)
    M = -root[:, :, None] * kappa[None, :, :] * root[:, None, :]
    idx = np.arange(kappa.shape[0])
    M[:, idx, idx] += load
    u = np.sqrt(ks / total[:, None])
    M += u[:, :, None] * u[:, None, :]
    sign, logdet = np.linalg.slogdet(M)
    if np.any(sign <= 0):
        raise SingularLaplacian("quotient matrix not positive definite")
    return logdet + ((ks - 1.0) * np.log(load)).sum(axis=1) - np.log(total)


def prufer_decode(seq, m: int) -> list[tuple[int, int]]:
    """Edges of the labeled tree on range(m) with Prüfer sequence ``seq``."""
    degree = [1] * m
    for v in seq:
        degree[v] += 1
    leaves = [v for v in range(m) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u, w = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, w))
    return edges


@lru_cache(maxsize=None)
def labeled_trees(m: int) -> np.ndarray:
    """Every labeled tree on m vertices as an array of shape (m**(m-2), m-1, 2)."""
    if m < 2:
        return np.zeros((1, 0, 2), dtype=np.int64)
    trees = [prufer_decode(seq, m) for seq in itertools.product(range(m), repeat=m - 2)]
    return np.asarray(trees, dtype=np.int64)


def tau_enum(k, kappa) -> float:
    """tau(k) by brute-force enumeration of all Prüfer sequences (|k| <= 8)."""
    k = require_nonzero(as_typevec(k))
    m = sum(k)
    if m > 8:
        raise TooLarge(f"|k| = {m} > 8 for Prüfer enumeration")
    if m == 1:
        return 1.0
    x = np.asarray(expand(k))
    kappa = np.asarray(kappa, dtype=float)
    trees = labeled_trees(m)
    weights = kappa[x[trees[:, :, 0]], x[trees[:, :, 1]]].prod(axis=1)
    return math.fsum(weights.tolist())


# ---------------------------------------------------------------------------
# h(k)
# ---------------------------------------------------------------------------

def log_h(k, kappa, measure, log_tau: float | None = None) -> float:
    """log of tau(k) prod_s (m_s e^{-(kappa m)_s})^{k_s} / k_s! for a measure m."""
    k = as_typevec(k)
    measure = np.asarray(measure, dtype=float)
    if log_tau is None:
        log_tau = tau_log(k, kappa)
    load = np.asarray(kappa, dtype=float) @ measure
    out = log_tau
    for s, ks in enumerate(k):
        if ks:  # 0^0 = 1
            out += ks * (math.log(measure[s]) - load[s]) - math.lgamma(ks + 1)
    return out


def log_h_batch(ks, kappa, measure) -> np.ndarray:
    ks = np.atleast_2d(np.asarray(ks, dtype=float))
    measure = np.asarray(measure, dtype=float)
    per_type = np.log(measure) - np.asarray(kappa, dtype=float) @ measure
    return tau_log_batch(ks, kappa) + ks @ per_type - gammaln(ks + 1).sum(axis=1)


def _exp_or_zero(x: float) -> float:
    return 0.0 if x < LOG_UNDERFLOW else math.exp(x)


@dataclass(frozen=True)
class ClusterWeight:
    k: tuple[int, ...]
    log_tau: float
    h: float          # mu-form
    h_c: float | None  # c-form, when a dual solution was supplied

    @property
    def form(self) -> str:
        return "mu" if self.h_c is None else "mu+c"


def h_value(k, kappa, mu, c=None) -> ClusterWeight:
    """h(k) in the mu-form and, given the dual solution c, the c-form.

    The two agree whenever c solves the characteristic equation.
    """
    k = require_nonzero(as_typevec(k))
    lt = tau_log(k, kappa)
    h_mu = _exp_or_zero(log_h(k, kappa, mu, lt))
    h_c = None if c is None else _exp_or_zero(log_h(k, kappa, c, lt))
    return ClusterWeight(k, lt, h_mu, h_c)


# ---------------------------------------------------------------------------
# Summation identities and Phi
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MassIdentities:
    sum_h: float
    sum_kh: np.ndarray
    phi_truncated: np.ndarray
    truncation_radius: int
    tail_estimate: float
    last_ratio: float

    def targets(self, kappa, c) -> dict:
        c = np.asarray(c, dtype=float)
        return {
            "sum_h": float(c.sum() - 0.5 * c @ np.asarray(kappa) @ c),
            "sum_kh": c,
            "phi": phi_closed(kappa, c),
        }


def mass_identities(kappa, c, tol: float = 1e-7, max_radius: int = 2000,
                    decay_deadline: int = 60, decay_threshold: float = 0.95) -> MassIdentities:
    """Shell-by-shell sums of h, k h and k k^T h in the c-form.

    Shells {|k| = m} are added for m = 1, 2, ... until the geometric tail
    estimate s_m / (1 - r_m) of the |k|^2-weighted shell mass drops below
    ``tol``; s_m is the last shell's mass and r_m its ratio to the previous one.
    """
    kappa = np.asarray(kappa, dtype=float)
    c = np.asarray(c, dtype=float)
    d = len(c)
    sum_h = []
    sum_kh = np.zeros(d)
    phi = np.zeros((d, d))
    prev = None
    ratio = float("nan")
    tail = float("inf")
    for m in range(1, max_radius + 1):
        ks = np.array(list(compositions(m, d)), dtype=float)
        h = np.exp(log_h_batch(ks, kappa, c))
        sum_h.append(math.fsum(h.tolist()))
        sum_kh += ks.T @ h
        phi += (ks * h[:, None]).T @ ks
        mass = float(m * m * h.sum())
        if prev is not None and prev > 0:
            ratio = mass / prev
            if ratio < 1:
                tail = mass / (1 - ratio)
                if tail < tol:
                    break
        if m >= decay_deadline and not ratio < decay_threshold:
            raise NoDecay(f"shell ratio {ratio:.4f} still >= {decay_threshold} at m={m}")
        prev = mass
    else:
        raise NoDecay(f"tail estimate {tail:.3g} above tol after {max_radius} shells")
    return MassIdentities(math.fsum(sum_h), sum_kh, (phi + phi.T) / 2, m, tail, ratio)


def phi_closed(kappa, c) -> np.ndarray:
    """(D_c^{-1} - kappa)^{-1}."""
    c = np.asarray(c, dtype=float)
    M = np.diag(1.0 / c) - np.asarray(kappa, dtype=float)
    try:
        phi = np.linalg.solve(M, np.eye(len(c)))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("D_c^{-1} - kappa is singular") from exc
    if np.linalg.cond(M) > 1e12:
        raise SingularMatrix("D_c^{-1} - kappa is numerically singular (near criticality)")
    return (phi + phi.T) / 2
