"""Experiment configuration: flat key = value files.

One assignment per line, ``#`` starts a comment, no sections or includes.
Recognized keys (defaults in parentheses):

    n, n_test, p          problem sizes (required)
    ratio_grid            feature ratios m/n: comma list or log:<lo>:<hi>:<count>
    lambda_grid           ridge levels, comma list
    activations           comma list of activation ids (identity | cube |
                          hermite3 | tanh(c) | relu | abs | poly[c0,c1,...])
    alpha (1.0)           signal scale
    sigma (1.0)           noise level
    estimators            subset of empirical,trace_form,lozenge,square
    trials (100)          Monte Carlo trials per grid point
    seed (0)              master seed
    profile               constant:<v> | csv:<path> | mixture-csv:<path> |
                          mixture-synthetic:<K>[:<seed>]
    profile_test (same)   same grammar, or "same" to reuse the class vectors
                          with counts scaled to n_test
    target_s2 (1.0)       row-mean normalization target; "none" disables
    chaos_form (variance) chaos coefficient convention: variance | series
    entry_law (gaussian)  gaussian | rademacher
    c_eta (1.0), eta_exponent (0.2), delta (0.5)   imaginary-shift schedule
    threads (1)           worker threads for sweep grid points
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gaussfun import parse_activation
from .profiles import (
    VarianceProfile,
    build_mixture_profile,
    constant_profile,
    normalize_row_stochastic,
    read_profile_csv,
    synthetic_class_vectors,
)

_VALID_ESTIMATORS = ("empirical", "trace_form", "lozenge", "square")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    n_test: int
    p: int
    ratio_grid: tuple[float, ...]
    lambda_grid: tuple[float, ...]
    activations: tuple[str, ...]
    estimators: tuple[str, ...]
    profile: str
    profile_test: str = "same"
    alpha: float = 1.0
    sigma: float = 1.0
    trials: int = 100
    seed: int = 0
    target_s2: float | None = 1.0
    chaos_form: str = "variance"
    entry_law: str = "gaussian"
    c_eta: float = 1.0
    eta_exponent: float = 0.2
    delta: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if not self.ratio_grid or not self.lambda_grid or not self.activations:
            raise ConfigError("ratio_grid, lambda_grid and activations must be nonempty")
        for e in self.estimators:
            if e not in _VALID_ESTIMATORS:
                raise ConfigError(f"unknown estimator {e!r}")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        for a in self.activations:
            parse_activation(a)  # fail fast on bad ids
        if self.chaos_form not in ("variance", "series"):
            raise ConfigError(f"unknown chaos_form {self.chaos_form!r}")


def parse_ratio_grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    if text.startswith("log:"):
        try:
            _, lo, hi, count = text.split(":")
            grid = np.geomspace(float(lo), float(hi), int(count))
        except ValueError as exc:
            raise ConfigError(f"bad log grid spec {text!r}") from exc
        return tuple(float(x) for x in grid)
    return tuple(float(tok) for tok in text.split(","))


def _parse_scalar_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(","))


def parse_config_text(text: str, overrides: dict | None = None) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = (tok.strip() for tok in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    if overrides:
        raw.update({k: str(v) for k, v in overrides.items() if v is not None})
    try:
        kwargs = {
            "n": int(raw["n"]),
            "n_test": int(raw["n_test"]),
            "p": int(raw["p"]),
            "ratio_grid": parse_ratio_grid(raw["ratio_grid"]),
            "lambda_grid": _parse_scalar_list(raw["lambda_grid"]),
            "activations": tuple(t.strip() for t in raw["activations"].split(",")),
            "estimators": tuple(t.strip() for t in raw["estimators"].split(",")),
            "profile": raw["profile"],
        }
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r}") from exc
    opt: dict = {}
    if "profile_test" in raw:
        opt["profile_test"] = raw["profile_test"]
    for key, conv in (
        ("alpha", float), ("sigma", float), ("trials", int), ("seed", int),
        ("chaos_form", str), ("entry_law", str), ("c_eta", float),
        ("eta_exponent", float), ("delta", float), ("threads", int),
    ):
        if key in raw:
            opt[key] = conv(raw[key])
    if "target_s2" in raw:
        opt["target_s2"] = None if raw["target_s2"].lower() == "none" else float(raw["target_s2"])
    return ExperimentConfig(**kwargs, **opt)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), overrides)


# =====================
# Profile sources
# =====================

def _profile_from_source(source: str, rows: int, p: int) -> VarianceProfile:
    kind, _, rest = source.partition(":")
    if kind == "constant":
        return constant_profile(rows, p, float(rest) if rest else 1.0)
    if kind == "csv":
        prof = read_profile_csv(rest)
        if prof.rows != rows or prof.cols != p:
            raise ConfigError(
                f"profile {rest} is {prof.rows}x{prof.cols}, expected {rows}x{p}"
            )
        return prof
    if kind == "mixture-csv":
        vectors_profile = read_profile_csv(rest)
        if vectors_profile.cols != p:
            raise ConfigError(f"class vectors in {rest} have length {vectors_profile.cols}, expected {p}")
        vectors = [row for row in vectors_profile.entries]
        return _mixture(vectors, rows)
    if kind == "mixture-synthetic":
        parts = rest.split(":")
        K = int(parts[0])
        seed = int(parts[1]) if len(parts) > 1 else 0
        return _mixture(synthetic_class_vectors(K, p, seed=seed), rows)
    raise ConfigError(f"unknown profile source {source!r}")


def _mixture(vectors, rows: int) -> VarianceProfile:
    K = len(vectors)
    if rows % K != 0:
        raise ConfigError(f"row count {rows} is not a multiple of the {K} classes")
    return build_mixture_profile(vectors, [rows // K] * K)


def build_profiles(cfg: ExperimentConfig) -> tuple[VarianceProfile, VarianceProfile]:
    """Materialize the train and test profiles, normalized if requested."""
    profile = _profile_from_source(cfg.profile, cfg.n, cfg.p)
    if cfg.profile_test == "same":
        if profile.structure is not None:
            profile_test = _mixture(list(profile.structure.class_vectors), cfg.n_test)
        elif cfg.profile.startswith("constant:"):
            profile_test = _profile_from_source(cfg.profile, cfg.n_test, cfg.p)
        else:
            raise ConfigError(
                "profile_test=same needs a class-structured or constant train profile"
            )
    else:
        profile_test = _profile_from_source(cfg.profile_test, cfg.n_test, cfg.p)
    if cfg.target_s2 is not None:
        profile = normalize_row_stochastic(profile, cfg.target_s2)
        profile_test = normalize_row_stochastic(profile_test, cfg.target_s2)
    return profile, profile_test
