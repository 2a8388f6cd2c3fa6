"""The compound Poisson description of the component census.

Jumps X are type vectors drawn from a law proportional to the weights
w(k) = n^{|k|-1} p_n(k) prod_s (mu^n_s prod_r (1 - kappa_rs/n)^{N_r - k_r/2})^{k_s} / prod_s k_s!
with N = mu^n n the per-type vertex counts; a Poisson(Z n) number of jumps,
conditioned on summing to N, has the same empirical law as the graph's
component census.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .connectivity import ConnectionTable, working_precision
from .errors import (
    LatticeTooLarge,
    NoDecay,
    NoExponentialMoment,
    PreconditionViolated,
    TooLarge,
    TooManyPartitions,
)
from .graphsim import UnionFind
from .model import Model, moment_condition, kappa_sup, sigma, solve_dual
from .rng import generator
from .trees import log_h_batch, phi_closed
from .typevec import as_typevec, box, require_nonzero, shell

FULL_COST = 2 * 10**5        # DP work below which S_{alpha n} is enumerated whole
MAX_PARTITION_SUM = 12
MAX_LATTICE_SUM = 40
MAX_BRUTE_N = 6


def _log1m(x: float) -> float:
    return math.log1p(-x) if x < 1 else -math.inf


def _require_unclamped(model: Model):
    if float(model.kappa.max()) >= model.n:
        raise PreconditionViolated(
            f"n = {model.n} must exceed max kappa = {model.kappa.max():g} for the jump law")


def upper_box(model: Model, alpha=None) -> tuple[int, ...]:
    """Coordinatewise bound floor(alpha_r n) of S_{alpha n}; alpha defaults to mu^n."""
    counts = model.counts
    if alpha is None:
        return tuple(counts)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (model.d,))
    if np.any(alpha <= 0):
        raise PreconditionViolated("alpha must be positive")
    up = tuple(int(math.floor(a * model.n + 1e-9)) for a in alpha)
    if any(u > c for u, c in zip(up, counts)):
        raise PreconditionViolated(f"alpha n = {up} exceeds the vertex counts {counts}")
    return up


def _type_factors(model: Model) -> tuple[np.ndarray, np.ndarray]:
    """(a, L) with log of the k-independent and k-dependent parts of w.

    log w(k) = (|k|-1) log n + log p_n(k) + k.a - 1/2 k^T L k - sum log k_s!
    where L_rs = log(1 - kappa_rs/n) and a_s = log mu^n_s + sum_r N_r L_rs.
    """
    L = np.vectorize(_log1m)(model.kappa / model.n)
    N = np.asarray(model.counts, dtype=float)
    with np.errstate(divide="ignore"):
        a = np.log(model.mu_n) + N @ L
    return a, L


def _log_weights(model: Model, ks: np.ndarray, logp: np.ndarray) -> np.ndarray:
    a, L = _type_factors(model)
    ks = np.asarray(ks, dtype=float)
    size = ks.sum(axis=1)
    # zero coordinates contribute 0 even when mu^n_s = 0
    lin = np.where(ks > 0, ks * a, 0.0).sum(axis=1)
    quad = np.einsum("ir,rs,is->i", ks, L, ks)
    return (size - 1) * math.log(model.n) + logp + lin - 0.5 * quad - gammaln(ks + 1).sum(axis=1)


def jump_weight(k, model: Model) -> float:
    """w(k), assembled in log space with the exact connection probability."""
    _require_unclamped(model)
    k = require_nonzero(as_typevec(k))
    table = ConnectionTable(model.kappa, model.n, k, dps=working_precision(k, model.n, model.kappa))
    lw = _log_weights(model, np.array([k]), np.array([table.log_value(k)]))
    return float(np.exp(lw[0]))


@dataclass(frozen=True, eq=False)
class JumpLaw:
    ks: np.ndarray            # (K, d) retained support
    weights: np.ndarray       # w(k)
    probs: np.ndarray         # normalized over the retained support
    Z: float                  # Z_n^alpha, including the extrapolated tail in shell mode
    alpha_box: tuple
    n: int
    truncated: bool
    retained_mass: float      # retained weight / Z
    mode: str

    @property
    def support(self) -> list:
        return [tuple(int(x) for x in k) for k in self.ks]

    def prob(self, k) -> float:
        k = as_typevec(k)
        hits = np.all(self.ks == np.asarray(k), axis=1)
        return float(self.probs[hits][0]) if hits.any() else 0.0

    def mean(self) -> np.ndarray:
        return self.probs @ self.ks

    def second_moment(self) -> np.ndarray:
        return (self.ks * self.probs[:, None]).T @ self.ks

    def covariance(self) -> np.ndarray:
        m = self.mean()
        return self.second_moment() - np.outer(m, m)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "alpha_box": list(self.alpha_box),
            "Z": self.Z,
            "truncated": self.truncated,
            "retained_mass": self.retained_mass,
            "mode": self.mode,
            "support": [[int(x) for x in k] for k in self.ks],
            "weights": self.weights.tolist(),
            "probs": self.probs.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> JumpLaw:
        return cls(np.asarray(data["support"], dtype=np.int64), np.asarray(data["weights"]),
                   np.asarray(data["probs"]), data["Z"], tuple(data["alpha_box"]), data["n"],
                   data["truncated"], data["retained_mass"], data["mode"])


def _table_logs(table: ConnectionTable, ks) -> np.ndarray:
    return np.array([table.log_value(k) for k in ks])


def jump_law(model: Model, alpha=None, cap_mass: float = 1e-12, mode: str = "auto",
             max_radius: int = 4096) -> JumpLaw:
    """The jump law on S_{alpha n} and its normalizer Z_n^alpha.

    Small boxes are enumerated whole.  Otherwise shells |k| = 1, 2, ... are
    added until the geometric tail estimate falls below ``cap_mass`` times
    the retained weight; Z then includes that tail estimate.
    """
    _require_unclamped(model)
    up = upper_box(model, alpha)
    d = model.d
    cost = math.prod((u + 1) * (u + 2) // 2 for u in up)
    if mode == "auto":
        mode = "full" if cost <= FULL_COST else "shell"
    if mode == "full":
        ks = np.array([k for k in box(up) if sum(k) > 0], dtype=np.int64)
        table = ConnectionTable(model.kappa, model.n, up, dps=working_precision(up, model.n, model.kappa))
        lw = _log_weights(model, ks, _table_logs(table, map(tuple, ks)))
        w = np.exp(lw)
        Z = math.fsum(w.tolist())
        return JumpLaw(ks, w, w / Z, Z, up, model.n, False, 1.0, "full")

    plan = 64
    while True:
        top = tuple(min(u, plan) for u in up)
        table = ConnectionTable(model.kappa, model.n, top,
                                dps=working_precision(top, model.n, model.kappa))
        ks_all, w_all = [], []
        prev = None
        ratio = math.nan
        tail = math.inf
        done = False
        restart = False
        for m in range(1, sum(up) + 1):
            if m > plan:
                restart = True
                break
            ks = shell(m, d, up)
            if not ks:
                continue
            lw = _log_weights(model, np.array(ks), _table_logs(table, ks))
            w = np.exp(lw)
            ks_all.extend(ks)
            w_all.append(w)
            mass = math.fsum(w.tolist())
            total = math.fsum(math.fsum(x.tolist()) for x in w_all)
            if prev is not None and prev > 0:
                ratio = mass / prev
                if ratio < 1:
                    tail = mass * ratio / (1 - ratio)
                    if tail < cap_mass * total:
                        done = True
                        break
                elif 60 <= m < sum(up):
                    raise NoDecay(f"jump-law shell ratio {ratio:.4f} >= 1 at |k| = {m}")
            prev = mass
        else:
            # the whole box was enumerated
            done = True
            tail = 0.0
        if done:
            break
        if restart:
            plan *= 2
            if plan > max_radius:
                raise NoDecay(f"jump-law shells still significant beyond |k| = {max_radius}")
    w = np.concatenate(w_all)
    ks = np.array(ks_all, dtype=np.int64)
    retained = math.fsum(w.tolist())
    Z = retained + tail
    return JumpLaw(ks, w, w / retained, Z, up, model.n, tail > 0, retained / Z, "shell")


# ---------------------------------------------------------------------------
# Census laws and the terminal probability
# ---------------------------------------------------------------------------

def vector_partitions(N, upper=None):
    """All multisets of nonzero vectors (each <= upper) summing to N.

    Yields dicts {part: multiplicity}; parts are produced in nonincreasing
    lexicographic order so every multiset appears once.
    """
    N = tuple(N)
    d = len(N)
    upper = N if upper is None else tuple(upper)
    parts = sorted((k for k in box(upper) if sum(k) > 0), reverse=True)

    def rec(rem, start, acc):
        if sum(rem) == 0:
            out = {}
            for p in acc:
                out[p] = out.get(p, 0) + 1
            yield out
            return
        for i in range(start, len(parts)):
            p = parts[i]
            if all(p[s] <= rem[s] for s in range(d)):
                acc.append(p)
                yield from rec(tuple(rem[s] - p[s] for s in range(d)), i, acc)
                acc.pop()

    yield from rec(N, 0, [])


def _pconn_logs(model: Model, top) -> dict:
    table = ConnectionTable(model.kappa, model.n, top,
                            dps=working_precision(top, model.n, model.kappa), warn=False)
    return {k: table.log_value(k) for k in box(top) if sum(k) > 0}




def _census_log_prob(gamma: dict, N, L: np.ndarray, logp: dict) -> float:
    """log P(t_n = gamma): components connected, no edges between them."""
    d = len(N)
    val = sum(math.lgamma(x + 1) for x in N)
    within = np.zeros((d, d))
    for k, g in gamma.items():
        val += g * (logp[k] - sum(math.lgamma(x + 1) for x in k)) - math.lgamma(g + 1)
        within += g * np.outer(k, k)
    # ordered type pairs; the 1/2 counts each unordered vertex pair once
    cross = 0.5 * (np.outer(N, N) - within)
    for r in range(d):
        for s in range(d):
            if cross[r, s] > 0:
                val += cross[r, s] * L[r, s]
    return val


@dataclass(frozen=True, eq=False)
class CensusLaw:
    gammas: list      # list of dicts {k: gamma_k}
    probs: np.ndarray

    def prob(self, gamma: dict) -> float:
        key = gamma_key(gamma)
        for g, p in zip(self.gammas, self.probs):
            if gamma_key(g) == key:
                return float(p)
        return 0.0

    def as_dict(self) -> dict:
        return {gamma_key(g): float(p) for g, p in zip(self.gammas, self.probs)}

    def giant_law(self) -> dict:
        """Law of |C_max| (largest |k|, then lexicographically largest)."""
        out: dict = {}
        for g, p in zip(self.gammas, self.probs):
            big = max(g, key=lambda k: (sum(k), k))
            out[big] = out.get(big, 0.0) + float(p)
        return out

    def restricted(self, upper) -> tuple[list, np.ndarray]:
        """The censuses whose components all lie below ``upper``."""
        keep = [i for i, g in enumerate(self.gammas)
                if all(all(a <= b for a, b in zip(k, upper)) for k in g)]
        return [self.gammas[i] for i in keep], self.probs[keep]


def gamma_key(gamma: dict) -> tuple:
    return tuple(sorted((tuple(int(x) for x in k), int(v)) for k, v in gamma.items() if v))


def census_law_exact(model: Model) -> CensusLaw:
    """Exact law of the census {t_n(k)} from the connection probabilities.

    A census gamma has probability
        prod_r N_r! prod_k [p_n(k) / prod_r k_r!]^{gamma_k} / gamma_k!
        * prod_{r,s} (1 - kappa_rs/n)^{(N_r N_s - sum_k gamma_k k_r k_s)/2},
    the last factor being the probability of no edge between distinct
    components.  It equals the per-component form with factors
    prod_{r,s} (1 - kappa_rs/n)^{k_s (N_r - k_r/2)} times the global
    normalization prod_{r,s} (1 - kappa_rs/n)^{-N_r N_s/2}.
    """
    N = tuple(model.counts)
    if sum(N) > MAX_PARTITION_SUM:
        raise TooManyPartitions(f"|N| = {sum(N)} > {MAX_PARTITION_SUM}")
    L = np.vectorize(_log1m)(model.kappa / model.n)
    logp = _pconn_logs(model, N)
    gammas = list(vector_partitions(N))
    logs = np.array([_census_log_prob(g, N, L, logp) for g in gammas])
    return CensusLaw(gammas, np.exp(logs))


def census_law_brute(model: Model) -> CensusLaw:
    """Census law by enumerating every graph on the n vertices (n <= 6)."""
    n = model.n
    if n > MAX_BRUTE_N:
        raise TooLarge(f"n = {n} > {MAX_BRUTE_N} for graph enumeration")
    types = np.repeat(np.arange(model.d), model.counts)
    P = np.minimum(model.kappa / n, 1.0)
    pairs = list(itertools.combinations(range(n), 2))
    pe = [float(P[types[i], types[j]]) for i, j in pairs]
    law: dict = {}
    for mask in range(2 ** len(pairs)):
        prob = 1.0
        uf = UnionFind(n)
        for e, (i, j) in enumerate(pairs):
            if mask >> e & 1:
                prob *= pe[e]
                uf.union(i, j)
            else:
                prob *= 1.0 - pe[e]
        if prob == 0.0:
            continue
        comps: dict = {}
        for v in range(n):
            comps.setdefault(uf.find(v), [0] * model.d)[types[v]] += 1
        gamma: dict = {}
        for k in comps.values():
            gamma[tuple(k)] = gamma.get(tuple(k), 0) + 1
        key = gamma_key(gamma)
        law[key] = law.get(key, 0.0) + prob
    keys = sorted(law)
    return CensusLaw([dict(k) for k in keys], np.array([law[k] for k in keys]))


def terminal_log_factor(model: Model, Z: float) -> float:
    """log of e^{-Z n} n^n prod_{r,s} (1-kappa_rs/n)^{N_r N_s/2} prod_s (mu^n_s)^{N_s} / prod_s N_s!."""
    n = model.n
    N = np.asarray(model.counts, dtype=float)
    L = np.vectorize(_log1m)(model.kappa / n)
    val = -Z * n + n * math.log(n) + 0.5 * N @ L @ N
    for s, Ns in enumerate(model.counts):
        if Ns:
            val += Ns * math.log(model.mu_n[s]) - math.lgamma(Ns + 1)
    return val


@dataclass(frozen=True)
class TerminalProb:
    value: float
    log_value: float
    cond_prob: float | None = None


def conditioning_prob(model: Model, alpha=None) -> float:
    """P(every component k satisfies k <= floor(alpha n)), from the exact census law."""
    up = upper_box(model, alpha)
    law = census_law_exact(model)
    return math.fsum(law.restricted(up)[1].tolist())


def terminal_prob_formula(model: Model, alpha=None, law: JumpLaw | None = None,
                          cond_prob: float | None = None) -> TerminalProb:
    """P(sum of the N(Z n) jumps = mu^n n) through the closed form.

    The conditioning probability is computed exactly unless supplied.
    """
    if law is None:
        law = jump_law(model, alpha)
    if cond_prob is None:
        cond_prob = conditioning_prob(model, alpha)
    lv = terminal_log_factor(model, law.Z) + math.log(cond_prob)
    return TerminalProb(math.exp(lv), lv, cond_prob)


def _convolve_box(a: np.ndarray, b_ks: np.ndarray, b_p: np.ndarray) -> np.ndarray:
    """(a * b) restricted to the box of ``a``; b given as a sparse list."""
    out = np.zeros_like(a)
    shape = a.shape
    for k, p in zip(b_ks, b_p):
        if np.any(k >= np.array(shape)):
            continue
        dst = tuple(slice(int(x), None) for x in k)
        src = tuple(slice(0, s - int(x)) for s, x in zip(shape, k))
        out[dst] += p * a[src]
    return out


def terminal_prob_convolution(model: Model, alpha=None, law: JumpLaw | None = None) -> TerminalProb:
    """P(sum of the N(Z n) jumps = mu^n n) as a Poisson mixture of convolutions.

    Every jump has |k| >= 1, so at most |N| jumps can land on N.
    """
    N = tuple(model.counts)
    if sum(N) > MAX_LATTICE_SUM:
        raise LatticeTooLarge(f"|N| = {sum(N)} > {MAX_LATTICE_SUM}")
    if law is None:
        law = jump_law(model, alpha)
    lam = law.Z * model.n
    cur = np.zeros(tuple(x + 1 for x in N))
    cur[(0,) * model.d] = 1.0
    terms = []
    for j in range(sum(N) + 1):
        if j > 0:
            cur = _convolve_box(cur, law.ks, law.probs)
        terms.append(math.exp(-lam + j * math.log(lam) - math.lgamma(j + 1)) * cur[N])
    value = math.fsum(terms)
    return TerminalProb(value, math.log(value) if value > 0 else -math.inf)


# ---------------------------------------------------------------------------
# Representation check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RepresentationReport:
    n: int
    alpha_box: tuple
    tv: float
    terminal_formula: float
    terminal_convolution: float
    terminal_rel_gap: float
    cond_prob: float
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["alpha_box"] = list(self.alpha_box)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> RepresentationReport:
        data = dict(data)
        data["alpha_box"] = tuple(data["alpha_box"])
        return cls(**data)


def jump_census_log_joint(gamma: dict, law: JumpLaw, n: int) -> float:
    """log P(N(Zn) = G, jump counts = gamma) = -Zn + sum_k gamma_k log(n w_k) - log gamma_k!."""
    index = {k: i for i, k in enumerate(law.support)}
    val = -law.Z * n
    for k, g in gamma.items():
        val += g * math.log(n * law.weights[index[tuple(k)]]) - math.lgamma(g + 1)
    return val


def verify_representation(model: Model, alpha=None, tol: float = 1e-12) -> RepresentationReport:
    """Compare the conditioned graph census law with the conditioned jump census."""
    up = upper_box(model, alpha)
    law = jump_law(model, alpha, mode="full")
    census = census_law_exact(model)
    gammas, graph_p = census.restricted(up)
    cond = math.fsum(graph_p.tolist())
    graph_p = graph_p / cond
    conv = terminal_prob_convolution(model, alpha, law)
    jump_p = np.array([math.exp(jump_census_log_joint(g, law, model.n)) for g in gammas]) / conv.value
    tv = 0.5 * math.fsum(np.abs(graph_p - jump_p).tolist())
    formula = terminal_prob_formula(model, alpha, law, cond_prob=cond)
    gap = abs(formula.value - conv.value) / conv.value
    return RepresentationReport(model.n, up, tv, formula.value, conv.value, gap, cond, tol,
                                bool(tv <= tol and gap <= tol))


# ---------------------------------------------------------------------------
# The limit jump law h(k)/q
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LimitJumpLaw:
    ks: np.ndarray
    probs: np.ndarray        # h(k)/q for |k| <= K
    q: float
    mean: np.ndarray         # c/q
    psi: np.ndarray          # Phi/q
    mean_table: np.ndarray   # from the truncated table
    psi_table: np.ndarray
    deficit: float           # 1 - sum of the table
    eta: np.ndarray | None
    moment_condition_ok: bool

    def prob(self, k) -> float:
        hits = np.all(self.ks == np.asarray(as_typevec(k)), axis=1)
        return float(self.probs[hits][0]) if hits.any() else 0.0


def exponential_moment_eta(kappa, c, K: int = 60, eta0: float = 0.1, floor: float = 1e-6) -> np.ndarray:
    """An eta > 0 with geometrically decaying shells of sum e^{<eta,k>} h(k).

    Starting from eta0 in every coordinate, eta is halved until the ratio of
    the last two shell sums up to |k| = K is below one.
    """
    kappa = np.asarray(kappa, dtype=float)
    c = np.asarray(c, dtype=float)
    d = len(c)
    shells = [np.array(shell(m, d), dtype=float) for m in (K - 1, K)]
    logs = [log_h_batch(ks, kappa, c) for ks in shells]
    eta = np.full(d, eta0)
    while eta[0] >= floor:
        sums = [np.exp(lh + ks @ eta).sum() for ks, lh in zip(shells, logs)]
        if sums[0] > 0 and sums[1] / sums[0] < 1:
            return eta
        eta = eta / 2
    raise NoExponentialMoment(f"no eta >= {floor} with decaying shells at K = {K}")


def limit_jump_law(model: Model, K: int = 40, c=None) -> LimitJumpLaw:
    kappa, mu = model.kappa, model.mu
    if c is None:
        c = solve_dual(kappa, mu).c
    c = np.asarray(c, dtype=float)
    q = float(c.sum() - 0.5 * c @ kappa @ c)
    ks = np.array([k for m in range(1, K + 1) for k in shell(m, model.d)], dtype=np.int64)
    probs = np.exp(log_h_batch(ks, kappa, c)) / q
    phi = phi_closed(kappa, c)
    try:
        eta = exponential_moment_eta(kappa, c)
    except NoExponentialMoment:
        eta = None
    ok, _ = moment_condition(sigma(model), kappa_sup(kappa))
    return LimitJumpLaw(ks, probs, q, c / q, phi / q, probs @ ks,
                        (ks * probs[:, None]).T @ ks, 1.0 - math.fsum(probs.tolist()), eta, ok)


# ---------------------------------------------------------------------------
# Sampling the compound Poisson process
# ---------------------------------------------------------------------------

class AliasTable:
    """Vose's alias method over a finite probability vector."""

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        p = p / p.sum()
        K = len(p)
        scaled = p * K
        self.prob = np.ones(K)
        self.alias = np.arange(K)
        small = [i for i in range(K) if scaled[i] < 1]
        large = [i for i in range(K) if scaled[i] >= 1]
        while small and large:
            s, g = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = g
            scaled[g] = scaled[g] + scaled[s] - 1
            (small if scaled[g] < 1 else large).append(g)
        self.prob.flags.writeable = False
        self.alias.flags.writeable = False

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        K = len(self.prob)
        col = rng.integers(0, K, size=size)
        coin = rng.random(size)
        return np.where(coin < self.prob[col], col, self.alias[col])


def sample_cpp(law: JumpLaw, n: int, seed: int) -> list[tuple[int, ...]]:
    """N ~ Poisson(Z n) jumps drawn i.i.d. from the (retained) jump law."""
    rng = generator(seed)
    count = int(rng.poisson(law.Z * n))
    idx = AliasTable(law.probs).sample(rng, count)
    return [tuple(int(x) for x in law.ks[i]) for i in idx]
