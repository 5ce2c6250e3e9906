import numpy as np
import pytest

from rfvp.detequiv.linearization import (
    SingularCellError,
    SquareState,
    build_linearization_profile,
    block_diagonals_dense,
    c_N_dense,
    gamma_L_dense,
    lambda_diagonal,
    r_transform_apply,
    r_transform_dense,
    structured_block_inverse,
)
from rfvp.gaussfun import parse_activation, surrogate_diagonals
from rfvp.profiles import Dimensions, VarianceProfile, constant_profile

CUBE = parse_activation("cube")
H3 = parse_activation("hermite3")
IDENTITY = parse_activation("identity")


def make_lp(n=6, m=6, p=6, n_test=3, spec=IDENTITY, seed=0, chaos="variance"):
    rng = np.random.default_rng(seed)
    prof = VarianceProfile(rng.uniform(0.3, 2.0, size=(n, p)))
    dims = Dimensions(n, m, p, n_test)
    d_lin, d_chaos = surrogate_diagonals(spec, prof, chaos=chaos)
    return build_linearization_profile(prof, d_lin, d_chaos, dims), prof, dims


class TestProfileBlocks:
    def test_identity_blocks(self):
        prof = constant_profile(4, 5, 1.0)
        dims = Dimensions(4, 3, 5, 2)
        d_lin, d_chaos = surrogate_diagonals(IDENTITY, prof)
        lp = build_linearization_profile(prof, d_lin, d_chaos, dims)
        G = gamma_L_dense(lp)
        n, m, p = 4, 3, 5
        # chaos block (1,2) vanishes, data block (1,3) carries c_n^2 gamma^2
        assert np.all(G[:n, n : n + m] == 0.0)
        np.testing.assert_allclose(G[:n, n + m : n + m + p], dims.c_n**2 * prof.entries)

    def test_pure_chaos_blocks(self):
        prof = constant_profile(4, 5, 1.0)
        dims = Dimensions(4, 3, 5, 2)
        d_lin, d_chaos = surrogate_diagonals(H3, prof, chaos="series")
        lp = build_linearization_profile(prof, d_lin, d_chaos, dims)
        G = gamma_L_dense(lp)
        n, m, p = 4, 3, 5
        np.testing.assert_allclose(G[:n, n : n + m], dims.c_n**2)
        assert np.all(G[:n, n + m : n + m + p] == 0.0)

    def test_dense_profile_symmetric(self):
        lp, _, _ = make_lp(spec=CUBE)
        G = gamma_L_dense(lp)
        np.testing.assert_array_equal(G, G.T)

    def test_feature_block_constant(self):
        lp, _, dims = make_lp()
        G = gamma_L_dense(lp)
        n, m, p = dims.n, dims.m, dims.p
        np.testing.assert_allclose(G[n : n + m, n + m + p :], dims.c_p**2)

    def test_gamma_max(self):
        lp, prof, dims = make_lp(spec=CUBE)
        G = gamma_L_dense(lp)
        assert lp.gamma_max == pytest.approx(np.sqrt(G.max()), rel=1e-12)

    def test_dimension_mismatch_rejected(self):
        prof = constant_profile(4, 5)
        with pytest.raises(Exception):
            build_linearization_profile(prof, np.ones(4), np.ones(4), Dimensions(5, 3, 5, 2))


class TestRTransform:
    def test_zero_profile(self):
        prof = VarianceProfile(np.zeros((4, 5)))
        dims = Dimensions(4, 3, 5, 2)
        lp = build_linearization_profile(prof, np.zeros(4), np.zeros(4), dims)
        # feature block stays constant even for a zero data profile
        q = np.ones(dims.N, dtype=complex)
        out = r_transform_apply(lp, q)
        dense = r_transform_dense(gamma_L_dense(lp), q)
        np.testing.assert_allclose(out, dense, atol=1e-15)

    def test_uniform_profile_gives_mean(self):
        # reference identity on the dense map: constant Gamma_L returns the mean
        rng = np.random.default_rng(1)
        N = 20
        q = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        out = r_transform_dense(np.full((N, N), 2.5), q)
        np.testing.assert_allclose(out, 2.5 * q.mean() * np.ones(N), rtol=1e-12)

    @pytest.mark.parametrize("spec", [IDENTITY, CUBE, H3])
    def test_structured_matches_dense(self, spec):
        lp, _, dims = make_lp(n=12, m=16, p=16, spec=spec, seed=3)
        assert dims.N == 60
        rng = np.random.default_rng(2)
        q = rng.standard_normal(dims.N) + 1j * rng.standard_normal(dims.N)
        out = r_transform_apply(lp, q)
        dense = r_transform_dense(gamma_L_dense(lp), q)
        assert np.max(np.abs(out - dense)) <= 1e-12 * max(1.0, np.max(np.abs(dense)))

    def test_class_structured_fast_path_matches_dense(self):
        from rfvp.profiles import build_mixture_profile

        prof = build_mixture_profile(
            [np.array([0.5, 1.0, 2.0]), np.array([2.0, 0.3, 0.7])], [3, 3]
        )
        dims = Dimensions(6, 4, 3, 2)
        d_lin, d_chaos = surrogate_diagonals(CUBE, prof)
        lp = build_linearization_profile(prof, d_lin, d_chaos, dims)
        assert lp.class_data is not None
        rng = np.random.default_rng(4)
        q = rng.standard_normal(dims.N) + 1j * rng.standard_normal(dims.N)
        np.testing.assert_allclose(
            r_transform_apply(lp, q), r_transform_dense(gamma_L_dense(lp), q), atol=1e-12
        )


class TestBlockInverse:
    def test_undeformed_hand_values(self):
        lp, _, dims = make_lp()
        lam, eta = 0.7, 0.01
        Lam = lambda_diagonal(dims, lam, eta)
        st = structured_block_inverse(lp, Lam, 0)
        np.testing.assert_allclose(st.q1, 1.0 / (lam - 1j * eta))
        np.testing.assert_allclose(st.q2, -1.0 / (1.0 + 1j * eta))
        np.testing.assert_allclose(st.q34, 1.0 / ((-1j * eta) ** 2 - 1.0))
        assert np.max(np.abs(st.q3)) == pytest.approx(eta / (1 + eta**2), rel=1e-12)

    def test_group1_scalar_resolvent(self):
        lp, _, dims = make_lp()
        Lam = np.full(dims.N, 1j, dtype=complex)
        st = structured_block_inverse(lp, Lam, 0)
        np.testing.assert_allclose(st.q1, 1j)  # 1 / (-i) = i

    def test_matches_dense_inverse(self):
        lp, _, dims = make_lp(n=10, m=10, p=10, seed=5, spec=CUBE)
        assert dims.N == 40
        rng = np.random.default_rng(6)
        Lam = rng.standard_normal(dims.N) + 1j * rng.uniform(0.5, 1.5, dims.N)
        r = rng.standard_normal(dims.N) + 1j * rng.uniform(0.0, 0.5, dims.N)
        st = structured_block_inverse(lp, Lam, r)
        dense = np.linalg.inv(
            c_N_dense(dims).astype(complex) - np.diag(Lam) - np.diag(r)
        )
        ref = block_diagonals_dense(dims, dense)
        assert st.sup_distance(ref) <= 1e-10

    def test_singular_cell_reports_index(self):
        lp, _, dims = make_lp()
        Lam = lambda_diagonal(dims, 0.5, 0.0)  # a = b = 0 on the cells -> det = -1
        st = structured_block_inverse(lp, Lam, 0)
        assert np.all(st.q34 == -1.0)
        # force det = 0 via r: a = b = -1 -> det = 0 on one cell
        r = np.zeros(dims.N, dtype=complex)
        r[dims.n + dims.m] = 1.0
        r[dims.n + dims.m + dims.p] = 1.0
        with pytest.raises(SingularCellError):
            structured_block_inverse(lp, Lam, r)


class TestSquareState:
    def test_sup_distance_and_diag(self):
        dims = Dimensions(2, 2, 2, 1)
        a = SquareState.zeros(dims)
        b = SquareState.zeros(dims)
        b.q4[1] = 3.0 + 4.0j
        assert a.sup_distance(b) == pytest.approx(5.0)
        assert a.main_diagonal().shape == (8,)
