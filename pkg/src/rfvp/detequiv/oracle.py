"""Dense sampling oracles for the block linearization (test scale only).

These assemble the full N x N pencil from sampled Gaussian ingredients,
invert it densely, and expose the blockwise diagonals, so that the
structured solver can be validated end to end.  The Schur-complement
identities tying pencil blocks to the surrogate ridge resolvent are checked
on request.
"""

from __future__ import annotations

import numpy as np

from ..profiles import Dimensions, VarianceProfile
from .linearization import SquareState, block_diagonals_dense


class OracleError(ValueError):
    pass


def sample_pencil(
    profile_x: VarianceProfile,
    d_lin: np.ndarray,
    d_chaos: np.ndarray,
    dims: Dimensions,
    rng,
) -> dict:
    """Draw the Gaussian ingredients and assemble the symmetric pencil L.

    Returns the pencil together with the surrogate feature matrix it
    linearizes and the raw factors (W, X, Z).
    """
    n, m, p, N = dims.n, dims.m, dims.p, dims.N
    W = rng.standard_normal((m, p))
    X = profile_x.sqrt_entries() * rng.standard_normal((n, p))
    Z = rng.standard_normal((m, n))
    Dl = np.diag(d_lin)
    Dc = np.diag(d_chaos)
    H = (W @ X.T) @ Dl / np.sqrt(p) + Z @ Dc
    L = np.zeros((N, N))
    s1, s2 = slice(0, n), slice(n, n + m)
    s3, s4 = slice(n + m, n + m + p), slice(n + m + p, N)
    L[s1, s2] = Dc @ Z.T / np.sqrt(n)
    L[s2, s1] = L[s1, s2].T
    L[s1, s3] = -(Dl @ X) / np.sqrt(n)
    L[s3, s1] = L[s1, s3].T
    L[s2, s2] = -np.eye(m)
    L[s2, s4] = -W / np.sqrt(p)
    L[s4, s2] = L[s2, s4].T
    L[s3, s4] = -np.eye(p)
    L[s4, s3] = -np.eye(p)
    return {"L": L, "H": H, "W": W, "X": X, "Z": Z}


def schur_errors(sample: dict, d_lin: np.ndarray, dims: Dimensions, lam: float) -> dict:
    """Max-abs errors of the pencil-resolvent block identities at -lam.

    Block (1,1) must equal the surrogate ridge resolvent, block (2,1) its
    product with the feature matrix, block (1,4) the data-block coupling.
    """
    n, m, p, N = dims.n, dims.m, dims.p, dims.N
    L, H, X = sample["L"], sample["H"], sample["X"]
    Lam = np.zeros(N)
    Lam[:n] = -lam
    Q_pencil = np.linalg.inv(L - np.diag(Lam))
    Q = np.linalg.inv(H.T @ H / n + lam * np.eye(n))
    s1, s2 = slice(0, n), slice(n, n + m)
    s4 = slice(n + m + p, N)
    return {
        "block11": float(np.max(np.abs(Q_pencil[s1, s1] - Q))),
        "block21": float(np.max(np.abs(Q_pencil[s2, s1] - H @ Q / np.sqrt(n)))),
        "block14": float(
            np.max(np.abs(Q_pencil[s1, s4] + Q @ (d_lin[:, None] * X) / np.sqrt(n)))
        ),
    }


def dense_resolvent_oracle(
    profile_x: VarianceProfile,
    d_lin: np.ndarray,
    d_chaos: np.ndarray,
    dims: Dimensions,
    Lambda: np.ndarray,
    trials: int,
    rng,
    check_schur_lam: float | None = None,
) -> tuple[SquareState, dict]:
    """Average the blockwise diagonals of sampled dense pencil resolvents.

    ``Lambda`` is the full complex diagonal shift.  When ``check_schur_lam``
    is given the first sample also verifies the block identities at that
    ridge level and reports the max-abs errors.
    """
    if dims.N > 400:
        raise OracleError("dense oracle is restricted to N <= 400")
    acc = SquareState.zeros(dims)
    info: dict = {}
    Lam = np.asarray(Lambda, dtype=np.complex128)
    for t in range(trials):
        sample = sample_pencil(profile_x, d_lin, d_chaos, dims, rng)
        M = sample["L"].astype(np.complex128) - np.diag(Lam)
        Q_pencil = np.linalg.inv(M)
        st = block_diagonals_dense(dims, Q_pencil)
        for a, b in zip(acc.arrays(), st.arrays()):
            a += b
        if t == 0 and check_schur_lam is not None:
            info["schur"] = schur_errors(sample, np.asarray(d_lin), dims, check_schur_lam)
    for a in acc.arrays():
        a /= trials
    return acc, info
