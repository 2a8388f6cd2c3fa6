"""Model definition, criticality and the dual (characteristic) equation.

A model is a finite type set with a symmetric positive kernel ``kappa`` and a
type measure ``mu``; vertices of types r and s are joined with probability
``min(1, kappa[r, s] / n)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    CountMismatch,
    DimensionTooLarge,
    InvalidModel,
    MeasureNotNormalized,
    NearCriticalWarning,
    NoConvergence,
    NonPositiveEntry,
    NonSymmetricKernel,
)

EPS_CRIT = 1e-6
SYMMETRY_TOL = 1e-12
MEASURE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ModelSpec:
    type_labels: tuple[str, ...]
    kappa: np.ndarray
    mu: np.ndarray
    n: int
    counts: tuple[int, ...] | None = None  # optional explicit per-type vertex counts


@dataclass(frozen=True, eq=False)
class Model:
    """A validated model with integer per-type vertex counts."""

    type_labels: tuple[str, ...]
    kappa: np.ndarray
    mu: np.ndarray
    n: int
    counts: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.type_labels)

    @property
    def mu_n(self) -> np.ndarray:
        """The realized finite-n measure, counts / n."""
        return np.asarray(self.counts, dtype=float) / self.n

    @property
    def clamped(self) -> bool:
        return bool(np.any(self.kappa >= self.n))

    def edge_prob(self) -> np.ndarray:
        return np.minimum(1.0, self.kappa / self.n)

    def to_dict(self) -> dict:
        return {
            "types": list(self.type_labels),
            "kappa": self.kappa.tolist(),
            "mu": self.mu.tolist(),
            "n": self.n,
            "counts": list(self.counts),
            "mu_n": self.mu_n.tolist(),
        }


def integerize(mu: np.ndarray, n: int) -> tuple[int, ...]:
    """Largest-remainder rounding of ``mu * n`` to integers summing to ``n``."""
    raw = np.asarray(mu, dtype=float) * n
    counts = np.floor(raw).astype(int)
    short = n - int(counts.sum())
    # stable sort keeps ties in index order
    order = np.argsort(-(raw - counts), kind="stable")
    for i in order[:short]:
        counts[i] += 1
    return tuple(int(c) for c in counts)


def validate_model(spec: ModelSpec) -> Model:
    """Check the model invariants and integerize the type counts.

    Raises InvalidModel listing every violated invariant.
    """
    problems = []
    kappa = np.atleast_2d(np.asarray(spec.kappa, dtype=float))
    mu = np.atleast_1d(np.asarray(spec.mu, dtype=float))
    d = len(spec.type_labels)
    if kappa.shape != (d, d) or mu.shape != (d,):
        raise InvalidModel([CountMismatch(
            f"shape mismatch: {d} labels, kappa {kappa.shape}, mu {mu.shape}")])
    if len(set(spec.type_labels)) != d:
        problems.append(CountMismatch("type labels must be distinct"))
    if not np.allclose(kappa, kappa.T, rtol=0.0, atol=SYMMETRY_TOL):
        problems.append(NonSymmetricKernel("kappa is not symmetric"))
    if not np.all(kappa > 0) or not np.all(np.isfinite(kappa)):
        problems.append(NonPositiveEntry("kappa entries must be finite and > 0"))
    if not np.all(mu > 0):
        problems.append(NonPositiveEntry("mu entries must be > 0"))
    if abs(mu.sum() - 1.0) > MEASURE_TOL:
        problems.append(MeasureNotNormalized(f"sum(mu) = {mu.sum():.15g}"))
    n = int(spec.n)
    if n < 1 or n != spec.n:
        problems.append(CountMismatch(f"n must be a positive integer, got {spec.n}"))
    if spec.counts is not None:
        counts = tuple(int(c) for c in spec.counts)
        if len(counts) != d or sum(counts) != n or min(counts) < 0:
            problems.append(CountMismatch(f"counts {counts} do not sum to n={n}"))
    elif not problems:
        counts = integerize(mu, n)
    if problems:
        raise InvalidModel(problems)
    kappa = (kappa + kappa.T) / 2
    return Model(tuple(spec.type_labels), kappa, mu, n, counts)


def make_model(kappa, mu, n: int, labels=None, counts=None) -> Model:
    """Convenience constructor: build and validate in one step."""
    kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
    if labels is None:
        labels = tuple(str(i) for i in range(kappa.shape[0]))
    return validate_model(ModelSpec(tuple(labels), kappa, np.atleast_1d(np.asarray(mu, dtype=float)),
                                    n, None if counts is None else tuple(counts)))


# ---------------------------------------------------------------------------
# Perron root and criticality
# ---------------------------------------------------------------------------

def perron_root(kappa: np.ndarray, weights: np.ndarray, rtol: float = 1e-12,
                max_iter: int = 100_000) -> float:
    """Largest eigenvalue of ``kappa @ diag(weights)`` by power iteration.

    Iterates on the similar symmetric matrix D^{1/2} kappa D^{1/2} from the
    all-ones vector and stops once the eigen-residual is below ``rtol``
    relative to the Rayleigh quotient.
    """
    w = np.sqrt(np.asarray(weights, dtype=float))
    S = w[:, None] * np.asarray(kappa, dtype=float) * w[None, :]
    x = np.ones(S.shape[0]) / math.sqrt(S.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        y = S @ x
        lam = float(x @ y)
        if lam <= 0:
            return 0.0
        if np.linalg.norm(y - lam * x) <= rtol * lam:
            return lam
        x = y / np.linalg.norm(y)
    raise NoConvergence(f"power iteration did not converge in {max_iter} steps")


def sigma(model: Model) -> float:
    """Perron root of kappa D_mu."""
    return perron_root(model.kappa, model.mu)


def classify(sig: float, eps_crit: float = EPS_CRIT) -> str:
    if sig < 1 - eps_crit:
        return "subcritical"
    if sig > 1 + eps_crit:
        return "supercritical"
    return "near-critical"


@dataclass(frozen=True)
class CriticalityReport:
    sigma: float
    regime: str
    kappa_sup: float
    moment_condition_ok: bool
    moment_margin: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict) -> CriticalityReport:
        return cls(**data)


def criticality(model: Model, eps_crit: float = EPS_CRIT) -> CriticalityReport:
    sig = sigma(model)
    try:
        ks = kappa_sup(model.kappa)
    except DimensionTooLarge:
        ks = float("nan")
    ok, margin = moment_condition(sig, ks)
    return CriticalityReport(sig, classify(sig, eps_crit), ks, ok, margin)


# ---------------------------------------------------------------------------
# Dual equation  c_i exp(-(kappa c)_i) = mu_i exp(-(kappa mu)_i)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DualSolution:
    c: np.ndarray
    residual: float
    iterations: int
    is_trivial: bool

    def to_dict(self) -> dict:
        return {"c": self.c.tolist(), "residual": self.residual,
                "iterations": self.iterations, "is_trivial": self.is_trivial}

    @classmethod
    def from_dict(cls, data: dict) -> DualSolution:
        return cls(np.asarray(data["c"], dtype=float), data["residual"],
                   data["iterations"], data["is_trivial"])


def dual_residual(kappa: np.ndarray, mu: np.ndarray, c: np.ndarray) -> float:
    return float(np.max(np.abs(c * np.exp(-kappa @ c) - mu * np.exp(-kappa @ mu))))


def solve_dual(kappa, mu, tol: float = 1e-14, max_iter: int = 1_000_000,
               eps_crit: float = EPS_CRIT) -> DualSolution:
    """Minimal fixed point of c -> mu * exp(-kappa (mu - c)), started at 0.

    The iterates increase coordinatewise; in the subcritical regime the limit
    is mu itself.
    """
    kappa = np.asarray(kappa, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sig = perron_root(kappa, mu)
    regime = classify(sig, eps_crit)
    if regime == "near-critical":
        warnings.warn(f"Perron root {sig:.9g} is within {eps_crit} of 1; "
                      "dual iteration converges slowly", NearCriticalWarning, stacklevel=2)
    c = np.zeros_like(mu)
    for it in range(1, max_iter + 1):
        c_next = mu * np.exp(-kappa @ (mu - c))
        if np.any(c_next < c):
            # monotone map; a decrease can only be round-off at the fixed point
            assert np.all(c - c_next <= 1e-13 * mu), "dual iteration lost monotonicity"
            c_next = np.maximum(c_next, c)
        step = float(np.max(np.abs(c_next - c)))
        c = c_next
        if step < tol:
            break
    else:
        raise NoConvergence(f"dual iteration did not converge in {max_iter} steps")
    trivial = regime == "subcritical"
    if trivial:
        c = mu.copy()
    elif regime == "supercritical":
        assert perron_root(kappa, c) < 1, "kappa D_c must be subcritical at the dual point"
    return DualSolution(c, dual_residual(kappa, mu, c), it, trivial)


def solve_model_dual(model: Model, tol: float = 1e-14) -> DualSolution:
    return solve_dual(model.kappa, model.mu, tol=tol)


# ---------------------------------------------------------------------------
# [kappa] = sup <nu, kappa nu> over the simplex, and the moment condition
# ---------------------------------------------------------------------------

def _segment_max(kappa, nu, i, j):
    """Best transfer of mass between coordinates i and j (exact 1-D quadratic)."""
    total = nu[i] + nu[j]
    if total <= 0:
        return nu
    rest = nu.copy()
    rest[i] = rest[j] = 0.0
    # f(t) = <nu_t, kappa nu_t> with nu_t = rest + t e_i + (total - t) e_j
    a = kappa[i, i] - 2 * kappa[i, j] + kappa[j, j]
    g = kappa @ rest
    b = 2 * (g[i] - g[j]) + 2 * total * (kappa[i, j] - kappa[j, j])
    candidates = [0.0, total]
    if a < 0:
        t_star = -b / (2 * a)
        if 0 < t_star < total:
            candidates.append(t_star)
    best, best_val = nu, -np.inf
    for t in candidates:
        trial = rest.copy()
        trial[i], trial[j] = t, total - t
        val = trial @ kappa @ trial
        if val > best_val:
            best, best_val = trial, val
    return best


def _refine(kappa, nu, max_sweeps=1000, tol=1e-15):
    val = nu @ kappa @ nu
    for _ in range(max_sweeps):
        for i, j in itertools.combinations(range(len(nu)), 2):
            nu = _segment_max(kappa, nu, i, j)
        new = nu @ kappa @ nu
        if new - val <= tol * max(1.0, abs(new)):
            return nu, float(new)
        val = new
    return nu, float(val)


def _simplex_grid(d: int, steps: int):
    for cut in itertools.combinations(range(steps + d - 1), d - 1):
        parts = np.diff(np.concatenate(([-1], cut, [steps + d - 1]))) - 1
        yield parts / steps


def kappa_sup(kappa, return_argmax: bool = False):
    """sup of <nu, kappa nu> over the probability simplex.

    Closed form for one and two types; for three types a 1/200 grid followed by
    pairwise coordinate ascent; coarser grids for four to six types.
    """
    kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
    d = kappa.shape[0]
    if d > 6:
        raise DimensionTooLarge(f"|S| = {d} > 6: supply [kappa] manually")
    if d == 1:
        nu = np.ones(1)
        val = float(kappa[0, 0])
    elif d == 2:
        nu, _ = _refine(kappa, np.array([0.5, 0.5]))
        nu = _segment_max(kappa, nu, 0, 1)
        val = float(nu @ kappa @ nu)
    else:
        steps = {3: 200, 4: 60, 5: 30, 6: 20}[d]
        best_val, best_nu = -np.inf, None
        for nu in _simplex_grid(d, steps):
            val = nu @ kappa @ nu
            if val > best_val:
                best_val, best_nu = val, nu
        nu, val = _refine(kappa, best_nu)
    return (val, nu) if return_argmax else val


def moment_condition(sig: float, ksup: float) -> tuple[bool, float]:
    """Return (Sigma - log Sigma - [kappa]/2 > 1, margin of that inequality)."""
    margin = sig - math.log(sig) - 0.5 * ksup - 1.0
    return bool(margin > 0), float(margin)
