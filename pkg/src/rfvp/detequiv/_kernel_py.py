"""Pure-numpy fallback for the compact class-structured iteration kernel.

Mirrors the compiled extension's API exactly: the state is modified in place
and the function returns (iterations, last sup-norm change of the undamped
update).  The compact state is one complex entry per class on the sample
group, a single complex scalar on the feature group, and three p-vectors for
the coupled input-dimension cells.
"""

from __future__ import annotations

import numpy as np


def primal_iterate(q1, q2, q3, q4, q34, S, w, dlin2, dchaos2,
                   n, m, lam, eta, damping, tol, max_iter):
    om = damping
    ieta = 1j * eta
    p = q3.shape[0]
    wdl = w * dlin2
    wdc = w * dchaos2
    change = np.inf
    for it in range(1, max_iter + 1):
        r2 = np.dot(wdc, q1) + q4.sum() / p
        r3 = S.T @ (wdl * q1)
        r4 = (m / p) * q2[0]
        n1 = 1.0 / (lam - ieta - (dchaos2 * (m * q2[0]) + dlin2 * (S @ q3)) / n)
        n2 = 1.0 / (-1.0 - ieta - r2)
        a = -ieta - r3
        b = -ieta - r4
        inv = 1.0 / (a * b - 1.0)
        n3 = b * inv
        n4 = a * inv
        n34 = inv
        change = max(
            np.abs(n1 - q1).max(),
            abs(n2 - q2[0]),
            np.abs(n3 - q3).max(),
            np.abs(n4 - q4).max(),
            np.abs(n34 - q34).max(),
        )
        q1 += om * (n1 - q1)
        q2[0] += om * (n2 - q2[0])
        q3 += om * (n3 - q3)
        q4 += om * (n4 - q4)
        q34 += om * (n34 - q34)
        if change * om < tol:
            return it, change
    return max_iter, change
