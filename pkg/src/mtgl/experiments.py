"""Monte Carlo fluctuation experiments and run manifests."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import InsufficientReplicates, PreconditionViolated
from .graphsim import CensusStats, run_batch
from .model import Model
from .rates import build_context, predicted_covariances
from .rng import PRNG_NAME
from .typevec import as_typevec, format_typevec

DEFAULT_BANDS = {"giant": 0.10, "C_n": 0.10, "t": 0.15}


@dataclass(frozen=True)
class RunManifest:
    model_digest: str
    command: list
    master_seed: int
    seed_source: str         # "argument" or the environment variable name
    prng: str = PRNG_NAME
    version: str = __version__
    source_date_epoch: int = 0

    def to_dict(self) -> dict:
        return {
            "model_digest": self.model_digest,
            "command": list(self.command),
            "master_seed": self.master_seed,
            "seed_source": self.seed_source,
            "prng": self.prng,
            "version": self.version,
            "source_date_epoch": self.source_date_epoch,
        }

    @classmethod
    def from_dict(cls, data: dict) -> RunManifest:
        return cls(**data)


def model_digest(model: Model) -> str:
    payload = json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def make_manifest(model: Model, command, seed: int, seed_source: str = "argument") -> RunManifest:
    # wall-clock time would break byte-identical reruns; SOURCE_DATE_EPOCH is the reproducible stamp
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0") or 0)
    return RunManifest(model_digest(model), list(command), int(seed), seed_source,
                       source_date_epoch=epoch)


# ---------------------------------------------------------------------------
# Jackknife standard errors
# ---------------------------------------------------------------------------

def jackknife_cov_se(x: np.ndarray, y: np.ndarray) -> float:
    """Jackknife standard error of the unbiased sample covariance of (x, y).

    The leave-one-out covariances follow in closed form from the full-sample
    cross-product sum, so the cost is linear in the sample size.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    R = len(x)
    if R < 3:
        raise InsufficientReplicates("jackknife needs at least 3 replicates")
    dx, dy = x - x.mean(), y - y.mean()
    S = float(dx @ dy)
    loo = (S - R / (R - 1) * dx * dy) / (R - 2)
    return float(math.sqrt((R - 1) / R * np.sum((loo - loo.mean()) ** 2)))


# ---------------------------------------------------------------------------
# Fluctuation report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluctuationRow:
    name: str
    empirical: float
    predicted: float
    ratio: float
    se: float
    band: float
    passed: bool          # |ratio - 1| <= band + 3 relative SE
    within_band: bool     # |ratio - 1| <= band

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class FluctuationReport:
    n: int
    R: int
    rows: list = field(default_factory=list)
    manifest: dict | None = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, name: str) -> FluctuationRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"n": self.n, "R": self.R, "rows": [r.to_dict() for r in self.rows],
                "manifest": self.manifest, "passed": self.passed}

    @classmethod
    def from_dict(cls, data: dict) -> FluctuationReport:
        return cls(data["n"], data["R"], [FluctuationRow(**r) for r in data["rows"]], data["manifest"])


def _row(name, x, y, predicted, band) -> FluctuationRow:
    emp = float(np.cov(x, y, ddof=1)[0, 1])
    se = jackknife_cov_se(x, y)
    ratio = emp / predicted
    rel_se = se / abs(predicted)
    dev = abs(ratio - 1)
    return FluctuationRow(name, emp, float(predicted), float(ratio), se, band,
                          bool(dev <= band + 3 * rel_se), bool(dev <= band))


def fluctuation_report(stats: CensusStats, model: Model, bands=None, published: bool = False,
                       manifest: RunManifest | None = None) -> FluctuationReport:
    bands = {**DEFAULT_BANDS, **(bands or {})}
    ctx = build_context(model.kappa, model.mu_n)
    pred = predicted_covariances(ctx, stats.tracked, published=published)
    sc = stats.scaled()
    rows = []
    labels = model.type_labels
    for i in range(model.d):
        for j in range(i, model.d):
            rows.append(_row(f"giant[{labels[i]},{labels[j]}]", sc["giant"][:, i], sc["giant"][:, j],
                             pred.giant_cov[i, j], bands["giant"]))
    if model.d > 1:
        tot = sc["giant"].sum(axis=1)
        rows.append(_row("giant[total]", tot, tot, float(pred.giant_cov.sum()), bands["giant"]))
    rows.append(_row("C_n", sc["total"], sc["total"], pred.var_Cn, bands["C_n"]))
    for col, k in enumerate(stats.tracked):
        x = sc["t"][:, col]
        rows.append(_row(f"t({format_typevec(k)})", x, x, pred.var_t[k], bands["t"]))
    return FluctuationReport(model.n, stats.R, rows, None if manifest is None else manifest.to_dict())


def mc_fluctuations(model: Model, R: int, seed: int, ks=(), bands=None, workers: int = 1,
                    min_replicates: int = 1000, min_n: int = 500, published: bool = False,
                    manifest: RunManifest | None = None) -> tuple[FluctuationReport, CensusStats]:
    """Empirical CLT-scale covariances against the rate-function Hessians."""
    if R < min_replicates:
        raise InsufficientReplicates(f"R = {R} < {min_replicates}")
    if model.n < min_n:
        raise PreconditionViolated(f"n = {model.n} < {min_n}")
    ks = [as_typevec(k) for k in ks]
    stats = run_batch(model, R, seed, ks, workers=workers)
    return fluctuation_report(stats, model, bands, published, manifest), stats
