"""Block linearization of the surrogate feature model.

The surrogate H = W X^T D_lin / sqrt(p) + Z D_chaos embeds into a symmetric
N x N degree-one pencil L (N = n + m + 2p) whose resolvent blocks encode the
ridge resolvent and every matrix product the risk formulas need.  L is an
additive deformation C_N of a GOE matrix with a structured variance profile
Gamma_L; this module holds that structured profile, the diagonal map R_N
driven by it, and the O(N) inverse of the block-diagonal matrices the fixed
point iterates on.

Index groups along the diagonal: 1 = training samples (n), 2 = random
features (m), 3 and 4 = two copies of the input dimension (p each).  The
nonzero variance blocks are (1,2) rank-one in the chaos diagonal, (1,3)
carrying the data profile scaled by the linear diagonal, and the constant
(2,4) feature block; C_N places -I on the (2,2) diagonal and on the
(3,4)/(4,3) diagonals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..profiles import Dimensions, VarianceProfile


class LinearizationError(ValueError):
    pass


class SingularCellError(ArithmeticError):
    """A 2x2 cell of the block inverse is numerically singular."""


@dataclass
class SquareState:
    """Blockwise diagonals of an N x N matrix under the group-diagonal map.

    q1 (n), q2 (m), q3, q4 (p each) are the main-diagonal segments; q34/q43
    are the diagonals of the off-diagonal (3,4)/(4,3) cells, the only
    off-diagonal blocks the map retains.
    """

    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    q4: np.ndarray
    q34: np.ndarray
    q43: np.ndarray

    def copy(self) -> "SquareState":
        return SquareState(*(v.copy() for v in self.arrays()))

    def arrays(self):
        return (self.q1, self.q2, self.q3, self.q4, self.q34, self.q43)

    def main_diagonal(self) -> np.ndarray:
        return np.concatenate([self.q1, self.q2, self.q3, self.q4])

    def sup_distance(self, other: "SquareState") -> float:
        return max(
            float(np.max(np.abs(a - b))) for a, b in zip(self.arrays(), other.arrays())
        )

    def imag_min(self) -> float:
        return min(float(np.min(v.imag)) for v in self.arrays()[:4])

    @staticmethod
    def zeros(dims: Dimensions) -> "SquareState":
        z = lambda k: np.zeros(k, dtype=np.complex128)
        return SquareState(z(dims.n), z(dims.m), z(dims.p), z(dims.p), z(dims.p), z(dims.p))


@dataclass
class LinearizationProfile:
    """Structured variance profile Gamma_L plus the deformation pattern.

    Stores the data profile and the two surrogate diagonals rather than any
    N x N matrix; ``gamma_max`` is the largest standard deviation appearing
    in Gamma_L.  ``class_data`` carries the compact per-class representation
    when the data profile is a mixture (used by the fast solver path).
    """

    dims: Dimensions
    profile: VarianceProfile
    d_lin: np.ndarray
    d_chaos: np.ndarray

    def __post_init__(self):
        n, p = self.dims.n, self.dims.p
        if self.profile.entries.shape != (n, p):
            raise LinearizationError(
                f"profile shape {self.profile.entries.shape} does not match dims ({n}, {p})"
            )
        if self.d_lin.shape != (n,) or self.d_chaos.shape != (n,):
            raise LinearizationError("surrogate diagonals must have length n")
        self.d_lin = np.asarray(self.d_lin, dtype=np.float64)
        self.d_chaos = np.asarray(self.d_chaos, dtype=np.float64)

    @property
    def gamma_max(self) -> float:
        c_n, c_p = self.dims.c_n, self.dims.c_p
        g12 = c_n * float(np.max(np.abs(self.d_chaos))) if self.dims.n else 0.0
        g13 = c_n * float(
            np.max(np.abs(self.d_lin) * np.sqrt(self.profile.entries.max(axis=1)))
        )
        return max(g12, g13, c_p)

    @property
    def class_data(self):
        """(S, counts, d_lin_k, d_chaos_k) for mixture profiles, else None."""
        st = self.profile.structure
        if st is None:
            return None
        counts = np.asarray(st.class_counts)
        idx = np.concatenate([[0], np.cumsum(counts)])[:-1]
        d_lk = self.d_lin[idx]
        d_ck = self.d_chaos[idx]
        # diagonals must actually be constant within each class
        for k, (start, c) in enumerate(zip(idx, counts)):
            if not (
                np.all(self.d_lin[start : start + c] == d_lk[k])
                and np.all(self.d_chaos[start : start + c] == d_ck[k])
            ):
                return None
        S = np.stack(st.class_vectors)
        return S, counts, d_lk, d_ck


def build_linearization_profile(
    profile_x: VarianceProfile,
    d_lin: np.ndarray,
    d_chaos: np.ndarray,
    dims: Dimensions,
) -> LinearizationProfile:
    """Assemble the structured N x N variance profile for a constant W profile."""
    return LinearizationProfile(dims, profile_x, np.asarray(d_lin), np.asarray(d_chaos))


def lambda_diagonal(dims: Dimensions, lam: float, eta: float = 0.0) -> np.ndarray:
    """The spectral shift: -lam on the sample group, i*eta everywhere."""
    out = np.full(dims.N, 1j * eta, dtype=np.complex128)
    out[: dims.n] -= lam
    return out


def split_groups(dims: Dimensions, v: np.ndarray):
    n, m, p = dims.n, dims.m, dims.p
    return v[:n], v[n : n + m], v[n + m : n + m + p], v[n + m + p :]


def r_transform_apply(lp: LinearizationProfile, q: np.ndarray) -> np.ndarray:
    """The diagonal self-energy map r_i = sum_j Gamma_L(i,j) q_j / N.

    Uses the block structure: O(np) through two profile matvecs in general,
    O(Kp) for class-structured profiles.
    """
    dims = lp.dims
    n, m, p = dims.n, dims.m, dims.p
    q1, q2, q3, q4 = split_groups(dims, np.asarray(q, dtype=np.complex128))
    sum_q2 = q2.sum()
    cd = lp.class_data
    if cd is not None:
        S, counts, d_lk, d_ck = cd
        w = counts / n
        r1_k = (d_ck**2 * sum_q2 + d_lk**2 * (S @ q3)) / n
        r1 = np.repeat(r1_k, counts)
        r3 = S.T @ (w * d_lk**2 * _class_means(q1, counts))
    else:
        gam = lp.profile.entries
        r1 = (lp.d_chaos**2 * sum_q2 + lp.d_lin**2 * (gam @ q3)) / n
        r3 = gam.T @ (lp.d_lin**2 * q1) / n
    r2_val = (lp.d_chaos**2 @ q1) / n + q4.sum() / p
    r4_val = sum_q2 / p
    out = np.empty(dims.N, dtype=np.complex128)
    out[:n] = r1
    out[n : n + m] = r2_val
    out[n + m : n + m + p] = r3
    out[n + m + p :] = r4_val
    return out


def _class_means(q1, counts):
    out = np.empty(len(counts), dtype=np.complex128)
    start = 0
    for k, c in enumerate(counts):
        out[k] = q1[start : start + c].mean()
        start += c
    return out


def structured_block_inverse(
    lp: LinearizationProfile, Lambda: np.ndarray, r: np.ndarray
) -> SquareState:
    """Blockwise diagonals of (C_N - Lambda - diag(r))^{-1} in O(N).

    Groups 1 and 2 are scalar reciprocals; groups {3,4} couple through
    per-index cells [[a_k, -1], [-1, b_k]].
    """
    dims = lp.dims
    L1, L2, L3, L4 = split_groups(dims, np.asarray(Lambda, dtype=np.complex128))
    if np.isscalar(r) and r == 0:
        r1 = r2 = r3 = r4 = 0.0
    else:
        r1, r2, r3, r4 = split_groups(dims, np.asarray(r, dtype=np.complex128))
    q1 = 1.0 / (-L1 - r1)
    q2 = 1.0 / (-1.0 - L2 - r2)
    a = -L3 - r3
    b = -L4 - r4
    det = a * b - 1.0
    tiny = np.abs(det) < 1e-300
    if np.any(tiny):
        raise SingularCellError(f"singular 2x2 cell at index {int(np.argmax(tiny))}")
    inv = 1.0 / det
    return SquareState(q1, q2, b * inv, a * inv, inv.copy(), inv.copy())


# =====================
# Dense oracles (test-scale only)
# =====================

def gamma_L_dense(lp: LinearizationProfile) -> np.ndarray:
    """Materialize the N x N variance matrix Gamma_L = Upsilon_L**2 (entrywise)."""
    dims = lp.dims
    n, m, p, N = dims.n, dims.m, dims.p, dims.N
    c_n2, c_p2 = dims.c_n**2, dims.c_p**2
    G = np.zeros((N, N))
    s1, s2 = slice(0, n), slice(n, n + m)
    s3, s4 = slice(n + m, n + m + p), slice(n + m + p, N)
    G[s1, s2] = c_n2 * (lp.d_chaos**2)[:, None]
    G[s2, s1] = G[s1, s2].T
    G[s1, s3] = c_n2 * (lp.d_lin**2)[:, None] * lp.profile.entries
    G[s3, s1] = G[s1, s3].T
    G[s2, s4] = c_p2
    G[s4, s2] = c_p2
    return G


def r_transform_dense(gamma_L: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Reference diagonal self-energy for an explicit variance matrix."""
    N = gamma_L.shape[0]
    return gamma_L @ np.asarray(q, dtype=np.complex128) / N


def c_N_dense(dims: Dimensions) -> np.ndarray:
    N, n, m, p = dims.N, dims.n, dims.m, dims.p
    C = np.zeros((N, N))
    C[n : n + m, n : n + m] = -np.eye(m)
    C[n + m : n + m + p, n + m + p :] = -np.eye(p)
    C[n + m + p :, n + m : n + m + p] = -np.eye(p)
    return C


def block_diagonals_dense(dims: Dimensions, M: np.ndarray) -> SquareState:
    """Apply the group-diagonal extraction map to a dense N x N matrix."""
    n, m, p = dims.n, dims.m, dims.p
    d = np.diag(M)
    q34 = np.diag(M[n + m : n + m + p, n + m + p :]).astype(np.complex128)
    q43 = np.diag(M[n + m + p :, n + m : n + m + p]).astype(np.complex128)
    return SquareState(
        d[:n].astype(np.complex128),
        d[n : n + m].astype(np.complex128),
        d[n + m : n + m + p].astype(np.complex128),
        d[n + m + p :].astype(np.complex128),
        q34,
        q43,
    )
