"""Marchenko-Pastur resolvent trace for the pure-chaos surrogate.

When the linear coefficient vanishes the surrogate feature matrix is
theta_chaos * Z with Z an m x n standard Gaussian matrix, and the normalized
resolvent trace m(-lam) = (1/n) Tr (Z^T Z theta^2 / n + lam)^{-1} has a
closed form: it solves the self-consistent equation

    m * (lam + theta^2 / (phi * (1 + theta^2 * m))) = 1,    phi = n / m,

equivalently the quadratic

    phi lam theta^2 m^2 + (phi lam + theta^2 (1 - phi)) m - phi = 0.

The admissible root is the one that is positive on the negative real axis
and satisfies the Stieltjes normalization lam * m(-lam) -> 1 as lam -> inf;
it is computed in a cancellation-free form and validated against an
eigenvalue Monte Carlo oracle in the tests.
"""

from __future__ import annotations

import math


class BranchError(ArithmeticError):
    """No root satisfies positivity plus Stieltjes normalization."""


def mp_stieltjes(lam: float, phi_m: float, theta_chaos: float) -> tuple[float, float]:
    """(m(-lam), m'(-lam)) of the Marchenko-Pastur trace, derivative in z.

    ``phi_m`` is the sample-to-feature ratio n/m; ``theta_chaos`` the entry
    standard deviation of the chaos matrix.  The derivative is with respect
    to the spectral argument z evaluated at z = -lam (so it is positive).
    """
    if lam <= 0 or phi_m <= 0 or theta_chaos <= 0:
        raise ValueError("lam, phi_m and theta_chaos must all be > 0")
    t2 = theta_chaos**2
    b = phi_m * lam + t2 * (1.0 - phi_m)
    disc = math.sqrt(b * b + 4.0 * phi_m**2 * lam * t2)
    if b >= 0:
        # rationalized form avoids cancellation between -b and +disc
        m = 2.0 * phi_m / (b + disc)
    else:
        m = (-b + disc) / (2.0 * phi_m * lam * t2)
    if not (m > 0 and math.isfinite(m)):
        raise BranchError(f"no positive root at lam={lam}, phi_m={phi_m}, theta={theta_chaos}")
    # implicit differentiation of the quadratic; sign flipped from d/dlam
    mp = phi_m * m * (t2 * m + 1.0) / (2.0 * phi_m * lam * t2 * m + b)
    return m, mp
