"""Quadratic rate functions for the fluctuations of the component census.

Every rate function here has the form x -> 1/2 <x, H x> for a positive
definite H; its inverse is the covariance of the matching central limit.
The supercritical functions are built from

    D_v, v_i = mu_i / (c_i (mu_i - c_i))
    A_0 = (I - kappa D_c) D_{mu-c}^{-1} (I - D_mu kappa),  A = (A_0 + A_0^T) / 2
    Phi = (D_c^{-1} - kappa)^{-1}
    B   = (Phi - c c^T / q)^{-1},   B_k = (Phi - k k^T h(k))^{-1}

with q = |c| - <c, kappa c> / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NegativeRateCoefficient,
    NotSupercritical,
    OverflowGuard,
    PDViolation,
    PreconditionViolated,
    SingularMatrix,
)
from .model import EPS_CRIT, classify, perron_root, solve_dual
from .trees import h_value, phi_closed
from .typevec import as_typevec, require_nonzero

PD_RTOL = 1e-10


def is_pd(M: np.ndarray, rtol: float = PD_RTOL) -> bool:
    """Cholesky succeeds and the smallest eigenvalue exceeds rtol * ||M||."""
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, M.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(M).max())):
        return False
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return bool(np.linalg.eigvalsh(M).min() > rtol * np.linalg.norm(M, 2))


def _solve(M: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    try:
        out = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"{what} is singular") from exc
    if np.linalg.cond(M) > 1e12:
        raise SingularMatrix(f"{what} is numerically singular")
    return out


def _inv(M: np.ndarray, what: str) -> np.ndarray:
    inv = _solve(M, np.eye(len(M)), what)
    return (inv + inv.T) / 2


@dataclass(frozen=True, eq=False)
class RateContext:
    kappa: np.ndarray
    mu: np.ndarray
    c: np.ndarray
    q: float
    v: np.ndarray
    Dv: np.ndarray
    A0: np.ndarray
    A: np.ndarray
    Phi: np.ndarray
    B: np.ndarray
    regime: str
    sigma: float

    @property
    def d(self) -> int:
        return len(self.c)

    def giant_hessian(self) -> np.ndarray:
        """(I - kappa D_c) D_v (I - D_c kappa), the Hessian of I."""
        I = np.eye(self.d)
        M = (I - self.kappa * self.c[None, :]) @ self.Dv @ (I - self.c[:, None] * self.kappa)
        return (M + M.T) / 2

    def rank_one_gap(self) -> float:
        """|det(I - Phi^{-1} c c^T / q) - <c, kappa c> / (2 q)|."""
        lhs = np.linalg.det(np.eye(self.d) - _solve(self.Phi, np.outer(self.c, self.c), "Phi") / self.q)
        return abs(lhs - 0.5 * self.c @ self.kappa @ self.c / self.q)

    def to_dict(self) -> dict:
        out = {}
        for key, val in self.__dict__.items():
            out[key] = val.tolist() if isinstance(val, np.ndarray) else val
        return out

    @classmethod
    def from_dict(cls, data: dict) -> RateContext:
        kw = {k: (np.asarray(v, dtype=float) if isinstance(v, list) else v) for k, v in data.items()}
        return cls(**kw)


def build_context(kappa, mu, check: bool = True) -> RateContext:
    """All matrices of the supercritical rate functions, with PD checks."""
    kappa = np.asarray(kappa, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sig = perron_root(kappa, mu)
    regime = classify(sig, EPS_CRIT)
    if regime != "supercritical":
        raise NotSupercritical(f"Perron root {sig:.6g} gives a {regime} model")
    c = solve_dual(kappa, mu).c
    q = float(c.sum() - 0.5 * c @ kappa @ c)
    v = mu / (c * (mu - c))
    I = np.eye(len(c))
    A0 = (I - kappa * c[None, :]) @ np.diag(1.0 / (mu - c)) @ (I - mu[:, None] * kappa)
    A = (A0 + A0.T) / 2
    Phi = phi_closed(kappa, c)
    B = _inv(Phi - np.outer(c, c) / q, "Phi - c c^T / q")
    ctx = RateContext(kappa, mu, c, q, v, np.diag(v), A0, A, Phi, B, regime, sig)
    if check:
        if not is_pd(ctx.giant_hessian()):
            raise PDViolation("(I - kappa D_c) D_v (I - D_c kappa) is not positive definite")
        if not is_pd(Phi):
            raise PDViolation("Phi is not positive definite")
        if not is_pd(B):
            raise PDViolation("B is not positive definite")
        if not is_pd(A + B):
            raise PDViolation("A + B is not positive definite")
    return ctx


def model_context(model, check: bool = True) -> RateContext:
    return build_context(model.kappa, model.mu, check)


@dataclass(frozen=True, eq=False)
class KRateContext:
    k: tuple
    h: float
    Bk: np.ndarray
    pd_condition: bool
    apbk_pd: bool


def k_context(ctx: RateContext, k) -> KRateContext:
    k = require_nonzero(as_typevec(k))
    kv = np.asarray(k, dtype=float)
    h = h_value(k, ctx.kappa, ctx.mu).h
    Bk = _inv(ctx.Phi - np.outer(kv, kv) * h, "Phi - k k^T h(k)")
    cond = bool(kv @ (np.diag(1.0 / ctx.mu) - ctx.kappa) @ kv * h < 1)
    apbk = is_pd(ctx.A + Bk)
    if cond and not apbk:
        raise PDViolation(f"A + B_k not positive definite although the sufficient condition holds, k={k}")
    return KRateContext(k, h, Bk, cond, apbk)


def _positive(coef: float, what: str) -> float:
    if not coef > 0:
        raise NegativeRateCoefficient(f"{what} quadratic coefficient {coef:.6g} is not positive")
    return coef


# ---------------------------------------------------------------------------
# Supercritical rate functions
# ---------------------------------------------------------------------------

def rate_I(ctx: RateContext, x) -> float:
    """Rate of (|C_max| - (mu - c) n) / (a_n sqrt n): 1/2 <(I - D_c kappa) x, D_v (I - D_c kappa) x>."""
    x = np.asarray(x, dtype=float)
    y = x - ctx.c * (ctx.kappa @ x)
    return float(0.5 * y @ (ctx.v * y))


def coef_J(ctx: RateContext, k, published: bool = False) -> float:
    """Quadratic coefficient of J_k: 1/h(k) + k^T A (A + B_k)^{-1} B_k k.

    ``published=True`` uses a minus sign in front of the second term.
    """
    kc = k_context(ctx, k)
    if not kc.apbk_pd:
        raise PDViolation(f"A + B_k is not positive definite for k={kc.k}")
    kv = np.asarray(kc.k, dtype=float)
    second = kv @ ctx.A @ _solve(ctx.A + kc.Bk, kc.Bk @ kv, "A + B_k")
    coef = 1.0 / kc.h + (-second if published else second)
    return _positive(float(coef), "J_k")


def rate_J(ctx: RateContext, k, x: float, published: bool = False) -> float:
    return 0.5 * x * x * coef_J(ctx, k, published)


def coef_i(ctx: RateContext) -> float:
    """Quadratic coefficient of i: 1/q + c^T A (A + B)^{-1} B c / q^2."""
    second = ctx.c @ ctx.A @ _solve(ctx.A + ctx.B, ctx.B @ ctx.c, "A + B")
    return _positive(float(1.0 / ctx.q + second / ctx.q**2), "i")


def rate_i(ctx: RateContext, x: float) -> float:
    return 0.5 * x * x * coef_i(ctx)


# ---------------------------------------------------------------------------
# Subcritical rate functions (c = mu)
# ---------------------------------------------------------------------------

def _sub_setup(kappa, mu):
    kappa = np.asarray(kappa, dtype=float)
    mu = np.asarray(mu, dtype=float)
    sig = perron_root(kappa, mu)
    if classify(sig, EPS_CRIT) != "subcritical":
        raise PreconditionViolated(f"Perron root {sig:.6g}: model is not subcritical")
    return kappa, mu, phi_closed(kappa, mu)


def coef_J_sub(kappa, mu, k, published: bool = False) -> float:
    """Quadratic coefficient of J'_k: 1/h(k) + k^T (Phi - k k^T h(k))^{-1} k."""
    kappa, mu, Phi = _sub_setup(kappa, mu)
    k = require_nonzero(as_typevec(k))
    kv = np.asarray(k, dtype=float)
    h = h_value(k, kappa, mu).h
    second = kv @ _solve(Phi - np.outer(kv, kv) * h, kv, "Phi - k k^T h(k)")
    coef = 1.0 / h + (-second if published else second)
    return _positive(float(coef), "J'_k")


def rate_J_sub(kappa, mu, k, x: float, published: bool = False) -> float:
    return 0.5 * x * x * coef_J_sub(kappa, mu, k, published)


def coef_i_sub(kappa, mu, published: bool = False) -> float:
    """Quadratic coefficient of i', i.e. i'(x) / (x^2 / 2).

    i'(x) = x^2 / (2 - a) * (1 + 2 <((2 - a) Phi - 2 mu mu^T)^{-1} mu, mu>),  a = <mu, kappa mu>;
    ``published=True`` uses (<((2 - a) Phi - 2 mu mu^T)^{-1} mu, mu> - 1) instead.
    """
    kappa, mu, Phi = _sub_setup(kappa, mu)
    a = float(mu @ kappa @ mu)
    inner = float(mu @ _solve((2 - a) * Phi - 2 * np.outer(mu, mu), mu, "(2 - a) Phi - 2 mu mu^T"))
    bracket = inner - 1 if published else 1 + 2 * inner
    return _positive(2.0 / (2 - a) * bracket, "i'")


def rate_i_sub(kappa, mu, x: float, published: bool = False) -> float:
    return 0.5 * x * x * coef_i_sub(kappa, mu, published)


# ---------------------------------------------------------------------------
# Rates for the compound Poisson sums
# ---------------------------------------------------------------------------

def cpp_rates(ctx_or_phi, which: str, x, k=None, c=None, q=None, h=None) -> float:
    """j1 = 1/2 <x, Phi^{-1} x>; j2 with Phi - c c^T / q; j3 with Phi - k k^T h(k)."""
    if isinstance(ctx_or_phi, RateContext):
        Phi, c, q = ctx_or_phi.Phi, ctx_or_phi.c, ctx_or_phi.q
        kappa, mu = ctx_or_phi.kappa, ctx_or_phi.mu
    else:
        Phi = np.asarray(ctx_or_phi, dtype=float)
        kappa = mu = None
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if which == "j1":
        M = Phi
    elif which == "j2":
        M = Phi - np.outer(c, c) / q
    elif which == "j3":
        kv = np.asarray(require_nonzero(as_typevec(k)), dtype=float)
        if h is None:
            h = h_value(as_typevec(k), kappa, mu).h
        M = Phi - np.outer(kv, kv) * h
    else:
        raise ValueError(f"unknown cpp rate {which!r}")
    return float(0.5 * x @ _solve(M, x, which))


@dataclass(frozen=True, eq=False)
class PredictedCovariances:
    giant_cov: np.ndarray
    var_t: dict
    var_Cn: float

    def to_dict(self) -> dict:
        return {
            "giant_cov": self.giant_cov.tolist(),
            "var_t": {",".join(map(str, k)): v for k, v in self.var_t.items()},
            "var_Cn": self.var_Cn,
        }

    @classmethod
    def from_dict(cls, data: dict) -> PredictedCovariances:
        var_t = {tuple(int(x) for x in key.split(",")): v for key, v in data["var_t"].items()}
        return cls(np.asarray(data["giant_cov"], dtype=float), var_t, data["var_Cn"])


def predicted_covariances(ctx: RateContext, ks=(), published: bool = False) -> PredictedCovariances:
    """Inverse Hessians of I, J_k and i: the CLT-scale covariances per vertex."""
    giant = _inv(ctx.giant_hessian(), "giant Hessian")
    var_t = {as_typevec(k): float(1.0 / coef_J(ctx, k, published)) for k in ks}
    return PredictedCovariances(giant, var_t, float(1.0 / coef_i(ctx)))


# ---------------------------------------------------------------------------
# Scaled cumulant generating functions of compound sums
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CGFCheck:
    variant: str
    empirical_limit: float
    predicted: float
    gap: float
    bound: float
    a_n: float

    @property
    def passed(self) -> bool:
        return self.gap <= self.bound

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def cgf_check(ks, probs, lam: float, n: int, theta: float, z, variant: str = "poisson",
              u: float = 0.0, b=None, slack: float = 3.0, guard: float = 50.0) -> CGFCheck:
    """Exact scaled CGF of a centered compound sum against its quadratic limit.

    With a_n = n^theta and s = a_n / sqrt(n), the exact value
        a_n^{-2} log E exp{s <z, S - centering + b_n>}
    is summed over the jump law (no simulation).  'poisson' uses N(lam n)
    jumps centered at lam n m; 'fixed' uses floor(lam n + u a_n sqrt n)
    jumps centered at (lam n + u a_n sqrt n) m.  The optional shift is
    b_n = b sqrt(n), which adds <z, b>/a_n to the exact value.
    """
    ks = np.atleast_2d(np.asarray(ks, dtype=float))
    probs = np.asarray(probs, dtype=float)
    probs = probs / probs.sum()
    z = np.broadcast_to(np.asarray(z, dtype=float), (ks.shape[1],))
    a = float(n) ** theta
    s = a / math.sqrt(n)
    zk = ks @ z
    if np.abs(s * zk).max() > guard:
        raise OverflowGuard(f"(a_n/sqrt n) max <z,k> = {np.abs(s * zk).max():.3g} exceeds {guard}")
    m = probs @ ks
    zm = float(z @ m)
    second = (ks * probs[:, None]).T @ ks
    C = second - np.outer(m, m)
    t = s * zk
    shift = 0.0 if b is None else float(z @ np.asarray(b, dtype=float)) * math.sqrt(n) * s
    if variant == "poisson":
        # lam n (E e^{tX} - 1 - t E X), summed termwise
        body = lam * n * math.fsum((probs * (np.expm1(t) - t)).tolist())
        predicted = 0.5 * lam * (z @ C @ z + zm**2)
    elif variant == "fixed":
        target = lam * n + u * a * math.sqrt(n)
        count = math.floor(target)
        log_mgf = math.log1p(math.fsum((probs * np.expm1(t)).tolist()))
        body = count * (log_mgf - s * zm) - (target - count) * s * zm
        predicted = 0.5 * lam * float(z @ C @ z)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    exact = (body + shift) / a**2
    return CGFCheck(variant, float(exact), float(predicted), float(abs(exact - predicted)),
                    slack * (1 / a + a / math.sqrt(n)), a)
