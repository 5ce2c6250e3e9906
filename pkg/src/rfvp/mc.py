"""Monte Carlo risk estimators for random-features ridge regression.

Three sampling-based estimators share this module:

* ``empirical``  — fit the ridge estimator on sampled data and measure the
  squared errors directly;
* ``trace_form`` — same sampled design and features, but the expectations
  over the regression coefficients and the noise are taken analytically,
  leaving trace functionals of the resolvent (a large variance reduction);
* ``lozenge``    — the same trace functionals evaluated on the Gaussian
  linear-plus-chaos surrogate of the feature matrix instead of the activated
  matrix itself.

Trials use counter-based Philox streams keyed by (seed, trial) so results are
reproducible regardless of scheduling; per-trial values are reduced with
numpy's pairwise summation in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gaussfun import ActivationSpec, surrogate_diagonals
from .profiles import VarianceProfile


class EstimatorError(ValueError):
    """Estimator precondition not met."""


@dataclass(frozen=True)
class ModelParams:
    """Signal scale, noise level, ridge penalty and entry law of the design."""

    alpha: float = 1.0
    sigma_noise: float = 1.0
    lam: float = 1e-2
    entry_law: str = "gaussian"

    def __post_init__(self):
        if self.lam <= 0:
            raise EstimatorError("ridge parameter must be strictly positive")
        if self.alpha < 0 or self.sigma_noise < 0:
            raise EstimatorError("alpha and sigma_noise must be >= 0")
        if self.entry_law not in ("gaussian", "rademacher"):
            raise EstimatorError(f"unknown entry law {self.entry_law!r}")


@dataclass
class SampleSet:
    """One sampled train/test instance of the regression problem."""

    X: np.ndarray
    X_test: np.ndarray
    W: np.ndarray
    beta_star: np.ndarray
    Y: np.ndarray
    Y_test: np.ndarray
    H: np.ndarray
    H_test: np.ndarray


@dataclass
class RiskReport:
    estimator: str
    e_train: float
    e_test: float
    trials: int
    std_err_train: float = 0.0
    std_err_test: float = 0.0
    flags: tuple[str, ...] = ()


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one trial; independent across all keys."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, trial))
    return np.random.Generator(np.random.Philox(ss))


def _iid_entries(rng, shape, law):
    if law == "rademacher":
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    return rng.standard_normal(shape)


# =====================
# Sampling and fitting
# =====================

def sample_design(profile: VarianceProfile, rng, law: str = "gaussian") -> np.ndarray:
    """Matrix with independent centered entries, Var(X_ij) = gamma_ij^2."""
    return profile.sqrt_entries() * _iid_entries(rng, (profile.rows, profile.cols), law)


def rf_features(W: np.ndarray, X: np.ndarray, h: ActivationSpec) -> np.ndarray:
    """Activated feature matrix h(W X^T / sqrt(p)), one column per data point."""
    if W.shape[1] != X.shape[1]:
        raise EstimatorError("W and X must share the feature dimension p")
    return h(W @ X.T / np.sqrt(X.shape[1]))


def ridge_fit(H: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Ridge weights through the smaller of the two Gram systems.

    (H H^T + n lam I_m)^{-1} H Y and H (H^T H + n lam I_n)^{-1} Y agree by
    the push-through identity; the cheaper side is solved.
    """
    if lam <= 0:
        raise EstimatorError("ridge parameter must be strictly positive")
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(Y))):
        raise EstimatorError("non-finite inputs to ridge solve")
    m, n = H.shape
    if n <= m:
        return H @ np.linalg.solve(H.T @ H + n * lam * np.eye(n), Y)
    return np.linalg.solve(H @ H.T + n * lam * np.eye(m), H @ Y)


def sample_trial(
    profile: VarianceProfile,
    profile_test: VarianceProfile,
    h: ActivationSpec,
    params: ModelParams,
    m: int,
    rng,
    beta: np.ndarray | None = None,
) -> SampleSet:
    """Draw one full train/test instance (W has iid unit-variance entries)."""
    p = profile.cols
    X = sample_design(profile, rng, params.entry_law)
    X_test = sample_design(profile_test, rng, params.entry_law)
    W = _iid_entries(rng, (m, p), params.entry_law)
    if beta is None:
        beta = rng.standard_normal(p) * (params.alpha / np.sqrt(p))
    Y = X @ beta + params.sigma_noise * rng.standard_normal(profile.rows)
    Y_test = X_test @ beta + params.sigma_noise * rng.standard_normal(profile_test.rows)
    H = rf_features(W, X, h)
    H_test = rf_features(W, X_test, h)
    return SampleSet(X, X_test, W, beta, Y, Y_test, H, H_test)


# =====================
# Per-trial risk values
# =====================

def empirical_risk_values(s: SampleSet, theta: np.ndarray) -> tuple[float, float]:
    e_train = float(np.mean((s.Y - s.H.T @ theta) ** 2))
    e_test = float(np.mean((s.Y_test - s.H_test.T @ theta) ** 2))
    return e_train, e_test


def _resolvent(H: np.ndarray, lam: float) -> np.ndarray:
    n = H.shape[1]
    return np.linalg.inv(H.T @ H / n + lam * np.eye(n))


def trace_form_values(
    X: np.ndarray,
    X_test: np.ndarray,
    H: np.ndarray,
    H_test: np.ndarray,
    test_variance_total: float,
    params: ModelParams,
    Q: np.ndarray | None = None,
) -> tuple[float, float]:
    """Risk values with beta/noise expectations taken analytically.

    Uses Q'(-lam) = Q(-lam)^2.  ``test_variance_total`` is the sum of all
    test-profile variances (the deterministic second moment of the test
    design); the signal cross term needs the sampled test design itself.
    """
    a2, s2, lam = params.alpha**2, params.sigma_noise**2, params.lam
    n, p = X.shape
    nt = H_test.shape[1]
    if Q is None:
        Q = _resolvent(H, lam)
    Q2 = Q @ Q
    XXt = X @ X.T
    e_train = lam**2 * a2 / (n * p) * float(np.vdot(Q2, XXt)) + lam**2 * s2 / n * float(
        np.trace(Q2)
    )
    B = Q @ H.T @ H_test                     # n x nt
    XtB = X.T @ B                            # p x nt
    e_test = (
        s2
        + a2 / (p * nt) * test_variance_total
        + a2 / (nt * p * n**2) * float(np.sum(XtB * XtB))
        + s2 / (nt * n**2) * float(np.sum(B * B))
        - 2.0 * a2 / (nt * n * p) * float(np.sum(X_test * XtB.T))
    )
    return e_train, e_test


def _aggregate(values: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(values))
    if values.shape[0] < 2:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / np.sqrt(values.shape[0]))


def monte_carlo_risks(
    profile: VarianceProfile,
    profile_test: VarianceProfile,
    h: ActivationSpec,
    params: ModelParams,
    m: int,
    trials: int = 100,
    seed: int = 0,
    estimators: Sequence[str] = ("empirical", "trace_form"),
    fixed_beta: bool = False,
    stream: int = 0,
) -> dict[str, RiskReport]:
    """Run empirical and/or trace-form estimators on shared sampled trials."""
    want_emp = "empirical" in estimators
    want_tr = "trace_form" in estimators
    if not (want_emp or want_tr):
        raise EstimatorError("no estimator requested")
    test_total = float(profile_test.entries.sum())
    beta = None
    if fixed_beta:
        beta = trial_rng(seed, 0, stream=stream + 1000).standard_normal(profile.cols) * (
            params.alpha / np.sqrt(profile.cols)
        )
    emp = np.empty((trials, 2))
    tr = np.empty((trials, 2))
    for t in range(trials):
        rng = trial_rng(seed, t, stream=stream)
        s = sample_trial(profile, profile_test, h, params, m, rng, beta=beta)
        if want_emp:
            theta = ridge_fit(s.H, s.Y, params.lam)
            emp[t] = empirical_risk_values(s, theta)
        if want_tr:
            tr[t] = trace_form_values(s.X, s.X_test, s.H, s.H_test, test_total, params)
    out = {}
    if want_emp:
        (etr, se_tr), (ete, se_te) = _aggregate(emp[:, 0]), _aggregate(emp[:, 1])
        out["empirical"] = RiskReport("empirical", etr, ete, trials, se_tr, se_te)
    if want_tr:
        (etr, se_tr), (ete, se_te) = _aggregate(tr[:, 0]), _aggregate(tr[:, 1])
        out["trace_form"] = RiskReport("trace_form", etr, ete, trials, se_tr, se_te)
    return out


# =====================
# Linear-plus-chaos surrogate
# =====================

@dataclass
class LozengeSample:
    """Surrogate feature matrices plus the Gaussian ingredients they use."""

    H: np.ndarray
    H_test: np.ndarray
    W: np.ndarray
    X: np.ndarray
    X_test: np.ndarray
    Z: np.ndarray
    Z_test: np.ndarray


def build_lozenge(
    profile_x: VarianceProfile,
    profile_x_test: VarianceProfile,
    d_lin: np.ndarray,
    d_chaos: np.ndarray,
    m: int,
    rng,
    d_lin_test: np.ndarray | None = None,
    d_chaos_test: np.ndarray | None = None,
) -> LozengeSample:
    """Sample H = W X^T D_lin / sqrt(p) + Z D_chaos and its test twin.

    All Gaussian ingredients (W, X, X_test, Z, Z_test) are freshly drawn; the
    W profile is constant with unit variance.
    """
    p = profile_x.cols
    n, nt = profile_x.rows, profile_x_test.rows
    if d_lin_test is None:
        d_lin_test = d_lin[:1].repeat(nt) if len(set(d_lin.tolist())) == 1 else None
    if d_chaos_test is None:
        d_chaos_test = d_chaos[:1].repeat(nt) if len(set(d_chaos.tolist())) == 1 else None
    if d_lin_test is None or d_chaos_test is None:
        raise EstimatorError("non-constant diagonals: pass d_lin_test/d_chaos_test explicitly")
    W = rng.standard_normal((m, p))
    X = sample_design(profile_x, rng, "gaussian")
    X_test = sample_design(profile_x_test, rng, "gaussian")
    Z = rng.standard_normal((m, n))
    Z_test = rng.standard_normal((m, nt))
    H = (W @ X.T) * d_lin / np.sqrt(p) + Z * d_chaos
    H_test = (W @ X_test.T) * d_lin_test / np.sqrt(p) + Z_test * d_chaos_test
    return LozengeSample(H, H_test, W, X, X_test, Z, Z_test)


def build_lozenge_general(
    profile_x: VarianceProfile,
    profile_w: VarianceProfile,
    theta_lin_mat: np.ndarray,
    theta_chaos_mat: np.ndarray,
    rng,
) -> np.ndarray:
    """General Hadamard surrogate for arbitrary W profiles.

    H = Theta_lin o (W X^T) / sqrt(p) + Theta_chaos o Z with W, X drawn from
    their profiles and Z iid standard normal.
    """
    m, n = profile_w.rows, profile_x.rows
    if theta_lin_mat.shape != (m, n) or theta_chaos_mat.shape != (m, n):
        raise EstimatorError("coefficient matrices must be m x n")
    W = sample_design(profile_w, rng, "gaussian")
    X = sample_design(profile_x, rng, "gaussian")
    Z = rng.standard_normal((m, n))
    p = profile_x.cols
    return theta_lin_mat * (W @ X.T) / np.sqrt(p) + theta_chaos_mat * Z


def lozenge_trace_values(
    sample: LozengeSample,
    theta_lin: float,
    d_chaos: np.ndarray,
    test_weights: np.ndarray,
    s2_profile: float,
    params: ModelParams,
    row_stochastic: bool,
) -> tuple[float, float]:
    """Trace-form risks on one surrogate sample.

    ``row_stochastic`` selects the specialization where the test-design
    second moment is replaced by its deterministic diagonal (the column-sum
    weights); otherwise the sampled test surrogate is used directly in the
    generic trace expressions.
    """
    a2, s2, lam = params.alpha**2, params.sigma_noise**2, params.lam
    H, X, W = sample.H, sample.X, sample.W
    n, p = X.shape
    Q = _resolvent(H, lam)
    Q2 = Q @ Q
    if not row_stochastic:
        total = float(test_weights.sum() * sample.H_test.shape[1])
        return trace_form_values(X, sample.X_test, H, sample.H_test, total, params, Q=Q)
    XXt = X @ X.T
    e_train = lam**2 * a2 / (n * p) * float(np.vdot(Q2, XXt)) + lam**2 * s2 / n * float(
        np.trace(Q2)
    )
    nu2 = float(np.mean(d_chaos**2))
    QmlQ2 = Q - lam * Q2
    A = W.T @ (H @ Q)                        # p x n
    M = A @ X                                # p x p (only diagonal-weighted sums needed)
    t1 = nu2 * a2 / (n * p) * float(np.vdot(QmlQ2, XXt))
    t2 = theta_lin**2 * a2 / (p**2 * n**2) * float(np.dot(test_weights, np.sum(M * M, axis=1)))
    t3 = nu2 * s2 / n * float(np.trace(QmlQ2))
    t4 = theta_lin**2 * s2 / (n**2 * p) * float(np.dot(test_weights, np.einsum("ij,ji->i", A, Q @ H.T @ W)))
    cross = np.einsum("ji,ij->j", X.T, Q @ H.T @ W) / np.sqrt(p)
    t5 = -2.0 * theta_lin * a2 / (n * p) * float(np.dot(test_weights, cross))
    e_test = s2 + a2 * s2_profile + t1 + t2 + t3 + t4 + t5
    return e_train, e_test


def lozenge_risks(
    profile: VarianceProfile,
    profile_test: VarianceProfile,
    h: ActivationSpec,
    params: ModelParams,
    m: int,
    trials: int = 100,
    seed: int = 0,
    chaos: str = "variance",
    stream: int = 0,
) -> RiskReport:
    """Surrogate-based risk estimator (constant unit-variance W profile).

    Under a row-stochastic data profile the test-ensemble expectations are
    deterministic and the specialized expressions are used; otherwise the
    generic trace expressions run on sampled test surrogates.
    """
    d_lin, d_chaos = surrogate_diagonals(h, profile, chaos=chaos)
    d_lin_t, d_chaos_t = surrogate_diagonals(h, profile_test, chaos=chaos)
    s2_profile = float(profile.row_means().mean())
    row_sto = profile.is_row_stochastic(s2_profile) and profile_test.is_row_stochastic(s2_profile)
    theta_lin = float(d_lin[0]) if row_sto else 0.0
    test_weights = profile_test.column_sums() / profile_test.rows
    vals = np.empty((trials, 2))
    for t in range(trials):
        rng = trial_rng(seed, t, stream=stream)
        sample = build_lozenge(
            profile, profile_test, d_lin, d_chaos, m, rng,
            d_lin_test=d_lin_t, d_chaos_test=d_chaos_t,
        )
        vals[t] = lozenge_trace_values(
            sample, theta_lin, d_chaos, test_weights, s2_profile, params, row_sto
        )
    (etr, se_tr), (ete, se_te) = _aggregate(vals[:, 0]), _aggregate(vals[:, 1])
    flags = () if h.odd else ("activation is not odd",)
    return RiskReport("lozenge", etr, ete, trials, se_tr, se_te, flags=flags)


# =====================
# Lambda-grid runners (samples shared across ridge levels)
# =====================

def monte_carlo_risk_grid(
    profile: VarianceProfile,
    profile_test: VarianceProfile,
    h: ActivationSpec,
    params: ModelParams,
    m: int,
    lambdas: Sequence[float],
    trials: int = 100,
    seed: int = 0,
    estimators: Sequence[str] = ("empirical", "trace_form"),
    stream: int = 0,
) -> dict[float, dict[str, RiskReport]]:
    """Empirical/trace-form reports for every ridge level on shared samples.

    The expensive part of a trial (design, features) does not depend on lam,
    so one sampled trial serves the whole lambda grid; this is a common
    random-numbers scheme, not extra dependence across grid points.
    """
    want_emp = "empirical" in estimators
    want_tr = "trace_form" in estimators
    if not (want_emp or want_tr):
        raise EstimatorError("no estimator requested")
    lambdas = list(lambdas)
    test_total = float(profile_test.entries.sum())
    emp = np.empty((len(lambdas), trials, 2))
    tr = np.empty((len(lambdas), trials, 2))
    for t in range(trials):
        rng = trial_rng(seed, t, stream=stream)
        s = sample_trial(profile, profile_test, h, params, m, rng)
        for i, lam in enumerate(lambdas):
            pl = ModelParams(params.alpha, params.sigma_noise, lam, params.entry_law)
            Q = _resolvent(s.H, lam)
            if want_emp:
                theta = s.H @ (Q @ s.Y) / s.H.shape[1]
                emp[i, t] = empirical_risk_values(s, theta)
            if want_tr:
                tr[i, t] = trace_form_values(
                    s.X, s.X_test, s.H, s.H_test, test_total, pl, Q=Q
                )
    out: dict[float, dict[str, RiskReport]] = {}
    for i, lam in enumerate(lambdas):
        per = {}
        if want_emp:
            (a, sa), (b, sb) = _aggregate(emp[i, :, 0]), _aggregate(emp[i, :, 1])
            per["empirical"] = RiskReport("empirical", a, b, trials, sa, sb)
        if want_tr:
            (a, sa), (b, sb) = _aggregate(tr[i, :, 0]), _aggregate(tr[i, :, 1])
            per["trace_form"] = RiskReport("trace_form", a, b, trials, sa, sb)
        out[lam] = per
    return out


def lozenge_risk_grid(
    profile: VarianceProfile,
    profile_test: VarianceProfile,
    h: ActivationSpec,
    params: ModelParams,
    m: int,
    lambdas: Sequence[float],
    trials: int = 100,
    seed: int = 0,
    chaos: str = "variance",
    stream: int = 0,
) -> dict[float, RiskReport]:
    """Surrogate trace-form reports for every ridge level on shared samples."""
    d_lin, d_chaos = surrogate_diagonals(h, profile, chaos=chaos)
    d_lin_t, d_chaos_t = surrogate_diagonals(h, profile_test, chaos=chaos)
    s2_profile = float(profile.row_means().mean())
    row_sto = profile.is_row_stochastic(s2_profile) and profile_test.is_row_stochastic(s2_profile)
    theta_lin = float(d_lin[0]) if row_sto else 0.0
    test_weights = profile_test.column_sums() / profile_test.rows
    lambdas = list(lambdas)
    vals = np.empty((len(lambdas), trials, 2))
    for t in range(trials):
        rng = trial_rng(seed, t, stream=stream)
        sample = build_lozenge(
            profile, profile_test, d_lin, d_chaos, m, rng,
            d_lin_test=d_lin_t, d_chaos_test=d_chaos_t,
        )
        for i, lam in enumerate(lambdas):
            pl = ModelParams(params.alpha, params.sigma_noise, lam, params.entry_law)
            vals[i, t] = lozenge_trace_values(
                sample, theta_lin, d_chaos, test_weights, s2_profile, pl, row_sto
            )
    flags = () if h.odd else ("activation is not odd",)
    out = {}
    for i, lam in enumerate(lambdas):
        (a, sa), (b, sb) = _aggregate(vals[i, :, 0]), _aggregate(vals[i, :, 1])
        out[lam] = RiskReport("lozenge", a, b, trials, sa, sb, flags=flags)
    return out
