"""Gaussian functionals of the activation function.

Everything downstream of the activation h enters the risk theory only through
Gaussian expectations: theta1 = E[h(s xi)^2], theta2 = E[s h'(s xi)]^2, the
linear coefficient theta_lin = E[h'(s xi)], and two flavours of "chaos"
coefficient for the nonlinear remainder (see ``theta_lin_chaos`` and
``chaos_std``).  Polynomials are evaluated exactly through Gaussian moments;
smooth activations go through Gauss-Hermite quadrature plus derivative-free
Hermite-series identities, so no symbolic differentiation is ever required.
Activations with a kink at the origin (relu, abs) are integrated adaptively
with the origin as an interval endpoint, since Gauss-Hermite converges only
algebraically across a kink.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate

from .profiles import VarianceProfile

_MAX_GH_NODES = 320  # numpy hermgauss loses weight finiteness beyond ~320 nodes


class QuadratureError(ArithmeticError):
    """Gaussian expectation failed to stabilize under node doubling."""


class SeriesTruncationError(ArithmeticError):
    """Hermite series tail above tolerance at the configured cutoff."""


@dataclass(frozen=True)
class ActivationSpec:
    """An activation h plus its numerical evaluation policy.

    Polynomial kinds carry ascending coefficients and are handled exactly.
    Smooth kinds carry a vectorized callable; ``odd`` records whether h is an
    odd function (some guarantees only hold for odd activations, and the
    violation is flagged in reports rather than silently ignored).
    """

    name: str
    coeffs: tuple[float, ...] | None = None
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    odd: bool = True
    kink_at_zero: bool = False
    quadrature: int = 128
    series_cutoff: int = 40
    tail_tol: float = 1e-8

    def __post_init__(self):
        if (self.coeffs is None) == (self.fn is None):
            raise ValueError("activation needs exactly one of coeffs or fn")
        if self.coeffs is not None and len(self.coeffs) == 0:
            raise ValueError("polynomial coefficient sequence must be nonempty")
        if self.quadrature < 64:
            raise ValueError("quadrature node count must be >= 64")
        if self.series_cutoff < 2:
            raise ValueError("series cutoff must be >= 2")

    @property
    def is_polynomial(self) -> bool:
        return self.coeffs is not None

    def __call__(self, x):
        if self.is_polynomial:
            return P.polyval(np.asarray(x, dtype=np.float64), self.coeffs)
        return self.fn(np.asarray(x, dtype=np.float64))


def _tanh_scaled(c: float):
    return lambda x: np.tanh(c * x)


_NAMED = {
    "identity": lambda: ActivationSpec("identity", coeffs=(0.0, 1.0)),
    "cube": lambda: ActivationSpec("cube", coeffs=(0.0, 0.0, 0.0, 1.0)),
    "hermite3": lambda: ActivationSpec("hermite3", coeffs=(0.0, -3.0, 0.0, 1.0)),
    "relu": lambda: ActivationSpec(
        "relu", fn=lambda x: np.maximum(x, 0.0), odd=False, kink_at_zero=True
    ),
    "abs": lambda: ActivationSpec("abs", fn=np.abs, odd=False, kink_at_zero=True),
}


def parse_activation(text: str) -> ActivationSpec:
    """Parse an activation id: identity | cube | hermite3 | tanh(c) | relu | abs | poly[c0,c1,...]."""
    text = text.strip()
    if text in _NAMED:
        return _NAMED[text]()
    m = re.fullmatch(r"tanh\(([^)]+)\)", text)
    if m:
        c = float(m.group(1))
        return ActivationSpec(f"tanh({m.group(1)})", fn=_tanh_scaled(c))
    m = re.fullmatch(r"poly\[([^\]]+)\]", text)
    if m:
        coeffs = tuple(float(tok) for tok in m.group(1).split(","))
        odd = all(c == 0.0 for c in coeffs[0::2])
        return ActivationSpec(text, coeffs=coeffs, odd=odd)
    raise ValueError(f"unknown activation {text!r}")


# =====================
# Quadrature machinery
# =====================

@lru_cache(maxsize=32)
def _gh_nodes(nq: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes/weights such that E[g(xi)] = sum_i w_i g(x_i) for xi ~ N(0, 1)
    t, w = np.polynomial.hermite.hermgauss(nq)
    return math.sqrt(2.0) * t, w / math.sqrt(math.pi)


def _double_factorial_moment(k: int) -> float:
    # E[xi^k]: 0 for odd k, (k-1)!! for even k
    if k % 2 == 1:
        return 0.0
    out = 1.0
    for j in range(k - 1, 0, -2):
        out *= j
    return out


def poly_gauss_expect(coeffs, sigma: float) -> float:
    """Exact E[q(sigma xi)] for a polynomial q given by ascending coefficients."""
    return float(sum(c * sigma**k * _double_factorial_moment(k) for k, c in enumerate(coeffs)))


def _gh_stable(value_at_nodes, nq0: int, tol: float, fallback=None):
    """Evaluate a node-count-dependent quantity, doubling nodes until stable.

    ``value_at_nodes(nq)`` returns a float or ndarray; convergence is sup-norm
    relative change below ``tol``.  When the node budget runs out the
    ``fallback`` (adaptive quadrature) is used instead if provided.
    """
    nq = max(min(nq0, _MAX_GH_NODES), 64)
    prev = np.asarray(value_at_nodes(nq), dtype=np.float64)
    while 2 * nq <= _MAX_GH_NODES:
        nq *= 2
        cur = np.asarray(value_at_nodes(nq), dtype=np.float64)
        if np.max(np.abs(cur - prev)) <= tol * (1.0 + np.max(np.abs(cur))):
            return cur
        prev = cur
    if fallback is not None:
        return fallback()
    raise QuadratureError(f"Gauss-Hermite not converged below {tol:g} by {_MAX_GH_NODES} nodes")


def _quad_split(fn_scalar, rtol: float) -> float:
    """Adaptive Gaussian expectation with the origin as an interval endpoint."""
    dens = lambda x: math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    g = lambda x: fn_scalar(x) * dens(x)
    hi, err_hi = integrate.quad(g, 0.0, np.inf, limit=300, epsabs=1e-13, epsrel=1e-11)
    lo, err_lo = integrate.quad(g, -np.inf, 0.0, limit=300, epsabs=1e-13, epsrel=1e-11)
    val = hi + lo
    if err_hi + err_lo > max(rtol * (1.0 + abs(val)), 1e-11):
        raise QuadratureError(f"adaptive quadrature error {err_hi + err_lo:g} above tolerance")
    return val


def gauss_expect(f, sigma: float, nodes: int = 128, rtol: float = 1e-9) -> float:
    """E[f(sigma xi)] with xi standard normal.

    Polynomial specs are integrated exactly via even moments.  Smooth specs
    and plain callables use Gauss-Hermite quadrature with node doubling until
    the value is stable (raising :class:`QuadratureError` if it never is);
    kink-flagged specs go through adaptive quadrature split at the origin.
    """
    if not np.isfinite(sigma):
        raise ValueError("sigma must be finite")
    if isinstance(f, ActivationSpec) and f.is_polynomial:
        return poly_gauss_expect(f.coeffs, sigma)
    if isinstance(f, ActivationSpec) and f.kink_at_zero:
        return _quad_split(lambda x: float(f.fn(np.asarray([sigma * x]))[0]), rtol)
    fn = f.fn if isinstance(f, ActivationSpec) else f

    def value(nq):
        x, w = _gh_nodes(nq)
        return float(np.dot(w, fn(sigma * x)))

    adaptive = lambda: _quad_split(lambda x: float(np.asarray(fn(np.asarray([sigma * x])))[0]), rtol)
    return float(_gh_stable(value, nodes, rtol, fallback=adaptive))


# =====================
# Hermite polynomials and coefficient tables
# =====================

def hermite_he_table(lmax: int, x: np.ndarray) -> np.ndarray:
    """He_0..He_lmax at the points x (probabilists'), shape (lmax+1, len(x)).

    Recurrence: He_{l+1}(x) = x He_l(x) - l He_{l-1}(x).
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((lmax + 1, x.shape[0]))
    out[0] = 1.0
    if lmax >= 1:
        out[1] = x
    for l in range(1, lmax):
        out[l + 1] = x * out[l] - l * out[l - 1]
    return out


def _he_normalized_scalar(l: int, x: float) -> float:
    # He_l(x) / sqrt(l!) via the scaled recurrence; stays O(1) under the
    # Gaussian weight even for large l
    a, b = 1.0, x
    if l == 0:
        return a
    for k in range(1, l):
        a, b = b, (x * b - math.sqrt(k) * a) / math.sqrt(k + 1)
    return b


def hermite_coefficients(spec: ActivationSpec, s: float, lmax: int) -> np.ndarray:
    """c_l = E[h(s xi) He_l(xi)] / l! for l = 0..lmax."""
    fact = np.array([math.factorial(l) for l in range(lmax + 1)], dtype=np.float64)
    if spec.is_polynomial:
        # exact: c_l = E[h^{(l)}(s xi)] s^l / l!
        out = np.empty(lmax + 1)
        deg = len(spec.coeffs) - 1
        for l in range(lmax + 1):
            if l > deg:
                out[l] = 0.0
            else:
                d = tuple(P.polyder(np.asarray(spec.coeffs), m=l)) if l else spec.coeffs
                out[l] = poly_gauss_expect(d, s) * s**l / fact[l]
        return out
    if spec.kink_at_zero:
        return _adaptive_coefficient_table(spec, s, lmax) / np.sqrt(fact)

    def table(nq):
        x, w = _gh_nodes(nq)
        he = hermite_he_table(lmax, x)
        return (he @ (w * spec.fn(s * x))) / fact

    tol = min(spec.tail_tol * 1e-2, 1e-10)
    adaptive = lambda: _adaptive_coefficient_table(spec, s, lmax) / np.sqrt(fact)
    return _gh_stable(table, max(spec.quadrature, 2 * lmax + 32), tol, fallback=adaptive)


def _adaptive_coefficient_table(spec: ActivationSpec, s: float, lmax: int) -> np.ndarray:
    # E[h(s xi) He_l(xi)] / sqrt(l!) per l; the orthonormal Hermite keeps the
    # integrand O(1) under the Gaussian weight even for large l
    raw = np.empty(lmax + 1)
    for l in range(lmax + 1):
        fl = lambda x: float(spec.fn(np.asarray([s * x]))[0]) * _he_normalized_scalar(l, x)
        raw[l] = _quad_split(fl, 1e-9)
    return raw


# =====================
# Scalar theta functionals
# =====================

def _poly_derivative(coeffs, order=1):
    return tuple(P.polyder(np.asarray(coeffs, dtype=np.float64), m=order))


def theta_pair(spec: ActivationSpec, sigma_x: float) -> tuple[float, float]:
    """(theta1, theta2) = (E[h(s xi)^2], E[s h'(s xi)]^2) at scale s = sigma_x.

    The derivative is taken through the Stein identity
    E[s h'(s xi)] = E[xi h(s xi)], so only values of h are needed.
    """
    if sigma_x <= 0:
        raise ValueError("sigma_x must be > 0")
    if spec.is_polynomial:
        sq = tuple(P.polymul(spec.coeffs, spec.coeffs))
        theta1 = poly_gauss_expect(sq, sigma_x)
        stein = sigma_x * poly_gauss_expect(_poly_derivative(spec.coeffs), sigma_x)
        return theta1, stein**2
    if spec.kink_at_zero:
        theta1 = _quad_split(lambda x: float(spec.fn(np.asarray([sigma_x * x]))[0]) ** 2, 1e-9)
        stein = _quad_split(lambda x: x * float(spec.fn(np.asarray([sigma_x * x]))[0]), 1e-9)
        return theta1, stein**2

    def pair(nq):
        x, w = _gh_nodes(nq)
        v = spec.fn(sigma_x * x)
        return np.array([np.dot(w, v * v), np.dot(w, x * v)])

    def adaptive():
        t1 = _quad_split(lambda x: float(spec.fn(np.asarray([sigma_x * x]))[0]) ** 2, 1e-10)
        st = _quad_split(lambda x: x * float(spec.fn(np.asarray([sigma_x * x]))[0]), 1e-10)
        return np.array([t1, st])

    theta1, stein = _gh_stable(pair, spec.quadrature, 1e-10, fallback=adaptive)
    return float(theta1), float(stein) ** 2


def theta_lin_chaos(spec: ActivationSpec, s: float) -> tuple[float, float]:
    """Linear coefficient E[h'(s xi)] and the derivative-series chaos sum.

    theta_chaos here is sum_{l>=2} E[h^(l)(s xi)] / l!; polynomials are summed
    exactly to their degree, smooth kinds use the derivative-free identity
    E[h^(l)(s xi)] = s^{-l} E[h(s xi) He_l(xi)] truncated at the configured
    cutoff with a tail check.  See :func:`chaos_std` for the
    second-moment-matching coefficient used by the surrogate builders.
    """
    if s <= 0:
        raise ValueError("scale s must be > 0")
    if spec.is_polynomial:
        deg = len(spec.coeffs) - 1
        lin = poly_gauss_expect(_poly_derivative(spec.coeffs), s)
        chaos = 0.0
        for l in range(2, deg + 1):
            chaos += poly_gauss_expect(_poly_derivative(spec.coeffs, l), s) / math.factorial(l)
        return lin, chaos
    lmax = spec.series_cutoff
    c = hermite_coefficients(spec, s, lmax)
    terms = c * s ** -np.arange(lmax + 1)  # term l equals E[h^(l)(s xi)] / l!
    lin = float(terms[1])
    chaos = float(terms[2:].sum())
    tail = float(np.abs(terms[-2:]).sum())
    if tail > spec.tail_tol:
        raise SeriesTruncationError(
            f"chaos series tail {tail:g} above {spec.tail_tol:g} at cutoff {lmax}"
        )
    return lin, chaos


def chaos_std(spec: ActivationSpec, s: float) -> float:
    """Standard deviation of the order->=2 Hermite remainder of h(s xi).

    sqrt(theta1 - theta2 - E[h(s xi)]^2): the coefficient that makes an
    independent Gaussian term reproduce the entry variance of the activated
    matrix beyond its linear component.  Equals sqrt(theta1 - theta2) for odd
    (mean-zero) activations.
    """
    theta1, theta2 = theta_pair(spec, s)
    mean = gauss_expect(spec, s)
    return math.sqrt(max(theta1 - theta2 - mean**2, 0.0))


# =====================
# Per-row diagonals and general matrices
# =====================

def _row_scales(profile: VarianceProfile) -> np.ndarray:
    return np.sqrt(profile.row_means())


def _check_scale_support(spec: ActivationSpec, scales) -> None:
    # the derivative-free identities divide by the scale, so zero-variance
    # rows are only usable for polynomials (abs/relu in particular have no
    # derivative at 0)
    if np.any(np.asarray(scales) <= 0) and not spec.is_polynomial:
        raise ValueError(f"activation {spec.name} cannot be evaluated at zero scale")


def _zero_scale_pair(spec: ActivationSpec, chaos: str) -> tuple[float, float]:
    lin = float(spec.coeffs[1]) if len(spec.coeffs) > 1 else 0.0
    if chaos == "variance":
        return lin, 0.0
    return lin, float(sum(spec.coeffs[2:]))


def _pair_at_scale(spec: ActivationSpec, s: float, chaos: str) -> tuple[float, float]:
    if s == 0.0:
        return _zero_scale_pair(spec, chaos)
    if chaos == "series":
        return theta_lin_chaos(spec, s)
    return theta_lin_chaos(spec, s)[0], chaos_std(spec, s)


def dlin_dchaos_diagonals(
    spec: ActivationSpec, profile: VarianceProfile
) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise (d_lin, d_chaos) with the derivative-series chaos convention.

    Row i is evaluated at scale sigma_i = sqrt(mean_j gamma_ij^2).
    """
    return _diagonals(spec, profile, "series")


def surrogate_diagonals(
    spec: ActivationSpec, profile: VarianceProfile, chaos: str = "variance"
) -> tuple[np.ndarray, np.ndarray]:
    """(d_lin, d_chaos) for building Gaussian surrogates of the feature matrix.

    ``chaos="variance"`` uses :func:`chaos_std` per row (matches entry second
    moments; default for the risk pipelines), ``chaos="series"`` the
    derivative-series sum.
    """
    if chaos not in ("variance", "series"):
        raise ValueError(f"unknown chaos convention {chaos!r}")
    return _diagonals(spec, profile, chaos)


def _diagonals(spec, profile, chaos):
    scales = _row_scales(profile)
    _check_scale_support(spec, scales)
    d_lin = np.empty(profile.rows)
    d_chaos = np.empty(profile.rows)
    cache: dict[float, tuple[float, float]] = {}
    for i, s in enumerate(scales):
        key = float(s)
        if key not in cache:
            cache[key] = _pair_at_scale(spec, key, chaos)
        d_lin[i], d_chaos[i] = cache[key]
    return d_lin, d_chaos


def theta_matrices(
    spec: ActivationSpec,
    profile_x: VarianceProfile,
    profile_w: VarianceProfile,
    chaos: str = "series",
) -> tuple[np.ndarray, np.ndarray]:
    """m x n matrices of linear/chaos coefficients for a general W profile.

    Entry (i, j) evaluates the scalar functionals at scale
    M2(i, j) = sqrt(sum_k gamma^w_ik^2 gamma^x_jk^2 / p).  For a constant
    unit W profile every row collapses to the per-row diagonals of
    ``profile_x``.  Entries go through a cache of distinct scales; intended
    for test-scale inputs.
    """
    if profile_w.cols != profile_x.cols:
        raise ValueError("W and X profiles must share the feature dimension p")
    m2 = np.sqrt(profile_w.entries @ profile_x.entries.T / profile_x.cols)
    _check_scale_support(spec, m2.ravel())
    lin = np.empty_like(m2)
    ch = np.empty_like(m2)
    cache: dict[float, tuple[float, float]] = {}
    for idx, s in np.ndenumerate(m2):
        key = float(s)
        if key not in cache:
            cache[key] = _pair_at_scale(spec, key, chaos)
        lin[idx], ch[idx] = cache[key]
    return lin, ch


@dataclass(frozen=True)
class GaussFunctionals:
    """Bundle of scalar/diagonal functionals for one activation and profile."""

    theta1: float
    theta2: float
    theta_lin: float
    theta_chaos: float          # derivative-series convention
    chaos_std: float            # second-moment-matching convention
    d_lin: np.ndarray
    d_chaos_series: np.ndarray
    d_chaos_std: np.ndarray
    odd: bool

    @property
    def assumption_flags(self) -> list[str]:
        return [] if self.odd else ["activation is not odd"]


def compute_functionals(spec: ActivationSpec, profile: VarianceProfile) -> GaussFunctionals:
    s = float(np.sqrt(profile.row_means().mean()))
    theta1, theta2 = theta_pair(spec, s)
    lin, chaos = theta_lin_chaos(spec, s)
    d_lin, d_series = dlin_dchaos_diagonals(spec, profile)
    _, d_std = surrogate_diagonals(spec, profile, chaos="variance")
    return GaussFunctionals(
        theta1=theta1,
        theta2=theta2,
        theta_lin=lin,
        theta_chaos=chaos,
        chaos_std=chaos_std(spec, s),
        d_lin=d_lin,
        d_chaos_series=d_series,
        d_chaos_std=d_std,
        odd=spec.odd,
    )
