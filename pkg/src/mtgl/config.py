"""Model files.

A model file holds ``key = value`` lines; blank lines and text after ``#``
are ignored.  Recognized keys:

    types  = [a, b]              labels, optionally quoted
    kappa  = [[1, 3], [3, 1]]    row-major matrix
    mu     = [0.5, 0.5]
    n      = 2000
    counts = [1000, 1000]        optional explicit vertex counts

A single-type model may write ``kappa = 2`` and ``mu = 1``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import Model, ModelSpec, validate_model

REQUIRED = ("kappa", "mu", "n")
KNOWN = ("types", "kappa", "mu", "n", "counts")


class ConfigError(ValueError):
    pass


def _parse_labels(text: str) -> list[str]:
    body = text.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    labels = [x.strip().strip("'\"") for x in body.split(",") if x.strip()]
    if not labels:
        raise ConfigError("empty type list")
    return labels


def parse_model_text(text: str) -> dict:
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key == "types":
            out[key] = _parse_labels(value)
            continue
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {lineno}: cannot parse value of {key!r}") from exc
    missing = [k for k in REQUIRED if k not in out]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")
    return out


def spec_from_fields(fields: dict) -> ModelSpec:
    kappa = np.atleast_2d(np.asarray(fields["kappa"], dtype=float))
    mu = np.atleast_1d(np.asarray(fields["mu"], dtype=float))
    n = fields["n"]
    if not isinstance(n, int) or n < 1:
        raise ConfigError("n must be a positive integer")
    d = len(mu)
    labels = fields.get("types") or [str(i) for i in range(d)]
    if len(labels) != d or kappa.shape != (d, d):
        raise ConfigError(f"types/kappa/mu dimensions disagree: {len(labels)}, {kappa.shape}, {d}")
    counts = fields.get("counts")
    return ModelSpec(tuple(labels), kappa, mu, n, None if counts is None else tuple(int(c) for c in counts))


def load_model(path) -> Model:
    text = Path(path).read_text()
    return validate_model(spec_from_fields(parse_model_text(text)))


def format_model(model: Model) -> str:
    lines = [
        f"types = [{', '.join(model.type_labels)}]",
        f"kappa = {json.dumps(model.kappa.tolist())}",
        f"mu = {json.dumps(model.mu.tolist())}",
        f"n = {model.n}",
        f"counts = {json.dumps(list(model.counts))}",
    ]
    return "\n".join(lines) + "\n"
