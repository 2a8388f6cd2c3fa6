"""Connection probability p_n(k) of a typed random graph on |k| vertices.

Edges between a type-r and a type-s vertex appear independently with
probability min(1, kappa[r, s] / n).
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from .errors import ClampedEdgeWarning, PreconditionViolated, StateSpaceTooLarge, TooLarge
from .trees import tau_log, tau_log_batch
from .typevec import as_typevec, expand, require_nonzero

MAX_STATES = 10**7
# below this lower bound on p_n(k) the subtractive recursion is run in mpmath
FLOAT_SAFE_LOWER = 1e-3
GUARD_DIGITS = 30
BOX_SCAN_LIMIT = 10**6


@dataclass(frozen=True)
class ConnProbResult:
    value: float
    log_value: float
    method: str


def edge_probabilities(kappa, n: int, warn: bool = True) -> np.ndarray:
    kappa = np.asarray(kappa, dtype=float)
    P = kappa / n
    if np.any(P > 1):
        if warn:
            warnings.warn(f"kappa/n exceeds 1 at n={n}; edge probability clamped to 1",
                          ClampedEdgeWarning, stacklevel=3)
        P = np.minimum(P, 1.0)
    return P


def log10_lower_bound(k, n: int, kappa) -> float | None:
    """log10 of (1 - max kappa/n)^{|k|^2/2} n^{1-|k|} tau(k); None if unusable."""
    kappa = np.asarray(kappa, dtype=float)
    m = sum(k)
    if kappa.max() >= n:
        return None
    val = (m * m / 2) * math.log1p(-kappa.max() / n) + (1 - m) * math.log(n) + tau_log(k, kappa)
    return val / math.log(10)


def working_precision(top, n: int, kappa) -> int | None:
    """Decimal digits needed for the DP over the box below ``top``.

    The recursion loses about -log10 p_n(m) digits at each m, so the
    smallest lower bound over the box decides; None means float suffices.
    """
    top = tuple(top)
    if sum(top) <= 1:
        return None
    kappa = np.asarray(kappa, dtype=float)
    kmax = float(kappa.max())
    if kmax >= n:
        return GUARD_DIGITS + 2 * sum(top) ** 2
    states = math.prod(t + 1 for t in top)
    if states <= BOX_SCAN_LIMIT:
        ms = np.array([m for m in itertools.product(*(range(t + 1) for t in top)) if sum(m) > 1],
                      dtype=float)
    else:
        ms = np.array([top], dtype=float)
    size = ms.sum(axis=1)
    lb = (size * size / 2 * math.log1p(-kmax / n) + (1 - size) * math.log(n)
          + tau_log_batch(ms, kappa)) / math.log(10)
    worst = float(lb.min())
    if worst >= math.log10(FLOAT_SAFE_LOWER):
        return None
    return GUARD_DIGITS + int(math.ceil(-worst))


class ConnectionTable:
    """Memoized p_n(m) for every m in a down-closed set of type vectors.

    q(m) = 1 - sum over proper anchored sub-configurations m' of
           prod_s C(m_s - [s=r], m'_s - [s=r]) q(m') prod_{s,s'} (1-P_{ss'})^{m'_s (m_s' - m'_s')}
    where r is the anchor type of m: its largest coordinate, or the
    ``anchor`` type when that is present in m.  The value does not depend
    on the choice.  Every
    summand is the probability that the anchor's component is exactly m',
    so the sum never exceeds one; precision is lost only to the final
    subtraction, which ``dps`` must cover.
    """

    def __init__(self, kappa, n: int, top, dps: int | None = None, warn: bool = True,
                 anchor: int | None = None):
        self.anchor = anchor
        self.kappa = np.asarray(kappa, dtype=float)
        self.n = n
        self.top = tuple(top)
        self.d = len(self.top)
        self.dps = dps
        P = edge_probabilities(kappa, n, warn=warn)
        if dps is None:
            self._one = 1.0
            self._fsum = math.fsum
            conv = float
        else:
            self._ctx = mpmath.mp.clone()
            self._ctx.dps = dps
            self._one = self._ctx.mpf(1)
            self._fsum = self._ctx.fsum
            conv = self._ctx.mpf
        self._conv = conv
        # binom[s][a][b] = C(a, b) for a <= top_s
        self._binom = []
        for s in range(self.d):
            rows = [[conv(math.comb(a, b)) for b in range(a + 1)] for a in range(self.top[s] + 1)]
            self._binom.append(rows)
        # pw[s][t][e] = (1 - P_st)^e
        self._pw = [[None] * self.d for _ in range(self.d)]
        for s in range(self.d):
            for t in range(self.d):
                base = conv(1) - conv(P[s, t]) if dps is not None else 1.0 - P[s, t]
                emax = self.top[s] * self.top[t] // (4 if s == t else 1) + 1
                powers = [conv(1)]
                for _ in range(emax):
                    powers.append(powers[-1] * base)
                self._pw[s][t] = powers
        self.q = {}

    def value(self, m):
        m = tuple(m)
        if m not in self.q:
            self._fill(m)
        return self.q[m]

    def _fill(self, target):
        for m in itertools.product(*(range(t + 1) for t in target)):
            if m not in self.q and sum(m) > 0:
                self.q[m] = self._compute(m)

    def _compute(self, m):
        if sum(m) == 1:
            return self._one
        d = self.d
        if self.anchor is not None and m[self.anchor] > 0:
            r = self.anchor
        else:
            r = max(range(d), key=lambda s: (m[s], -s))
        ranges = [range(1, m[s] + 1) if s == r else range(m[s] + 1) for s in range(d)]
        terms = []
        for sub in itertools.product(*ranges):
            if sub == m:
                continue
            term = self.q[sub]
            for s in range(d):
                a, b = (m[s] - 1, sub[s] - 1) if s == r else (m[s], sub[s])
                term = term * self._binom[s][a][b]
            for s in range(d):
                if sub[s]:
                    for t in range(d):
                        e = sub[s] * (m[t] - sub[t])
                        if e:
                            term = term * self._pw[s][t][e]
            terms.append(term)
        return self._one - self._fsum(terms)

    def log_value(self, m) -> float:
        v = self.value(m)
        if self.dps is None:
            return math.log(v) if v > 0 else -math.inf
        return float(self._ctx.log(v)) if v > 0 else -math.inf


def p_conn_exact(k, n: int, kappa, dps: int | None = None) -> ConnProbResult:
    """p_n(k) by dynamic programming over the sub-configurations of k."""
    k = require_nonzero(as_typevec(k))
    states = math.prod(x + 1 for x in k)
    if states > MAX_STATES:
        raise StateSpaceTooLarge(f"{states} lattice states > {MAX_STATES}")
    if dps is None:
        dps = working_precision(k, n, kappa)
    table = ConnectionTable(kappa, n, k, dps=dps)
    v = table.value(k)
    return ConnProbResult(float(v), table.log_value(k), "exact-dp")


@lru_cache(maxsize=None)
def _connected_masks(m: int) -> tuple[np.ndarray, np.ndarray]:
    """(bits, connected) over all edge subsets of the complete graph on m vertices."""
    pairs = list(itertools.combinations(range(m), 2))
    E = len(pairs)
    masks = np.arange(2**E, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(E)) & 1).astype(bool)
    adj = np.zeros((2**E, m, m), dtype=np.uint8)
    for e, (i, j) in enumerate(pairs):
        adj[:, i, j] = adj[:, j, i] = bits[:, e]
    reach = np.broadcast_to(np.eye(m, dtype=np.uint8), adj.shape).copy()
    for _ in range(max(m - 1, 1)):
        reach = ((reach + np.matmul(reach, adj)) > 0).astype(np.uint8)
    connected = reach[:, 0, :].all(axis=1)
    return bits, connected


def p_conn_brute(k, n: int, kappa) -> ConnProbResult:
    """p_n(k) by summing over all 2^C(|k|,2) edge subsets (|k| <= 6)."""
    k = require_nonzero(as_typevec(k))
    m = sum(k)
    if m > 6:
        raise TooLarge(f"|k| = {m} > 6 for brute-force enumeration")
    if m == 1:
        return ConnProbResult(1.0, 0.0, "brute-force")
    P = edge_probabilities(kappa, n)
    x = expand(k)
    p_edge = np.array([P[x[i], x[j]] for i, j in itertools.combinations(range(m), 2)])
    bits, connected = _connected_masks(m)
    bits = bits[connected]
    if np.all((p_edge > 0) & (p_edge < 1)):
        # one matrix-vector product instead of a product over edges per subset
        log_q = np.log1p(-p_edge)
        probs = np.exp(bits @ (np.log(p_edge) - log_q) + log_q.sum())
    else:
        probs = np.where(bits, p_edge, 1.0 - p_edge).prod(axis=1)
    value = math.fsum(probs.tolist())
    return ConnProbResult(value, math.log(value) if value > 0 else -math.inf, "brute-force")


# ---------------------------------------------------------------------------
# Closed-form bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnBounds:
    est_lower: float
    est_upper: float
    meso_upper: float
    esti2p_upper: float
    binom_upper: float | None
    plb_shape: float


def _support(k):
    return [s for s, x in enumerate(k) if x > 0]


def p_conn_bounds(k, n: int, kappa, r: int | None = None, m=None) -> ConnBounds:
    """Closed-form bounds and shapes for p_n(k).

    est_lower/est_upper sandwich p_n(k) for every n.  meso_upper uses the
    anchor type ``r`` (default: the largest coordinate).  esti2p_upper and
    plb_shape omit their unspecified 1+O(1/n) factor and constant.
    binom_upper needs an enclosing configuration ``m >= k`` and holds because
    C(m-e_r, k-e_r) p_n(k) prod (1-kappa/n)^{k(m-k)} is the probability that
    a fixed type-r vertex of the m-graph has component exactly k.
    """
    k = require_nonzero(as_typevec(k))
    kappa = np.asarray(kappa, dtype=float)
    size = sum(k)
    kmax = float(kappa.max())
    lt = tau_log(k, kappa)
    log_upper = (1 - size) * math.log(n) + lt
    est_upper = math.exp(log_upper)
    if kmax < n:
        est_lower = math.exp(size * size / 2 * math.log1p(-kmax / n) + log_upper)
    else:
        est_lower = 0.0

    supp = _support(k)
    if r is None:
        r = max(supp, key=lambda s: (k[s], -s))
    if k[r] == 0:
        raise PreconditionViolated(f"anchor type {r} absent from k={k}")
    load = kappa @ np.asarray(k, dtype=float)
    log_meso = ((len(supp) - 1) * math.log(kmax * len(supp)) + (1 - size) * math.log(n)
                - 2 * math.log(k[r])
                + sum((k[s] - 1) * math.log(load[s]) + math.log(k[s]) for s in supp))

    log_fill = sum(k[s] * math.log(-math.expm1(-load[s] / n)) for s in supp)
    log_2p = (sum(0.5 * math.log(2 * math.pi * k[s]) for s in supp)
              + load[supp].sum() / (2 * n) + log_fill)
    log_plb = (sum(math.log(n) - 0.5 * math.log(k[s]) for s in supp)
               + math.log(-math.expm1(-load[r] / n)) + log_fill)

    binom_upper = None
    if m is not None:
        m = as_typevec(m)
        if any(a < b for a, b in zip(m, k)):
            raise PreconditionViolated(f"enclosing configuration m={m} must dominate k={k}")
        log_b = 0.0
        for s in range(len(k)):
            dl = 1 if s == r else 0
            log_b -= math.log(math.comb(m[s] - dl, k[s] - dl))
        P = np.minimum(kappa / n, 1.0)
        for s in range(len(k)):
            for t in range(len(k)):
                e = k[s] * (m[t] - k[t])
                if e:
                    if P[s, t] >= 1:
                        log_b = math.inf
                    else:
                        log_b -= e * math.log1p(-P[s, t])
        binom_upper = math.exp(log_b) if log_b < 700 else math.inf

    return ConnBounds(est_lower, est_upper, math.exp(log_meso), math.exp(log_2p),
                      binom_upper, math.exp(log_plb))
