import numpy as np
import pytest

from rfvp.detequiv import AssumptionError, EtaSchedule, square_risks
from rfvp.gaussfun import parse_activation
from rfvp.mc import ModelParams
from rfvp.profiles import (
    Dimensions,
    VarianceProfile,
    build_mixture_profile,
    constant_profile,
    normalize_row_stochastic,
    synthetic_class_vectors,
)

CUBE = parse_activation("cube")
H3 = parse_activation("hermite3")
IDENTITY = parse_activation("identity")


def mixture(n, p, K=5, seed=11):
    prof = build_mixture_profile(synthetic_class_vectors(K, p, seed=seed), [n // K] * K)
    return normalize_row_stochastic(prof, 1.0)


class TestSquareRisks:
    def test_null_model_zero_both_branches(self):
        prof = constant_profile(40, 30)
        proft = constant_profile(20, 30)
        dims = Dimensions(40, 30, 30, 20)
        params = ModelParams(alpha=0.0, sigma_noise=0.0, lam=0.5)
        closed, _ = square_risks(prof, proft, H3, params, dims)
        fixed, _ = square_risks(prof, proft, CUBE, params, dims)
        for rep in (closed, fixed):
            assert rep.e_train == pytest.approx(0.0, abs=1e-12)
            assert rep.e_test == pytest.approx(0.0, abs=1e-12)

    def test_large_lambda_limits(self):
        prof = constant_profile(40, 30)
        proft = constant_profile(20, 30)
        dims = Dimensions(40, 30, 30, 20)
        params = ModelParams(alpha=1.0, sigma_noise=0.7, lam=1e6)
        rep, _ = square_risks(prof, proft, H3, params, dims)
        null = 1.0 + 0.7**2
        assert rep.e_train == pytest.approx(null, rel=1e-4)
        assert rep.e_test == pytest.approx(null, rel=1e-4)

    @pytest.mark.parametrize("lam", [0.1, 1.0])
    def test_pure_chaos_cross_oracle(self, lam):
        # general fixed-point evaluation against the closed forms
        prof = constant_profile(400, 400)
        proft = constant_profile(100, 400)
        dims = Dimensions(400, 400, 400, 100)
        params = ModelParams(lam=lam)
        closed, d1 = square_risks(prof, proft, H3, params, dims)
        fixed, d2 = square_risks(prof, proft, H3, params, dims, force_fixed_point=True)
        assert d1["path"] == "closed_form" and d2["path"] == "fixed_point"
        assert abs(fixed.e_train - closed.e_train) / closed.e_train < 0.01
        assert abs(fixed.e_test - closed.e_test) / closed.e_test < 0.01

    def test_row_mean_violation_rejected(self):
        prof = VarianceProfile(np.array([[1.0, 1.0], [4.0, 4.0]]))
        proft = constant_profile(2, 2)
        dims = Dimensions(2, 2, 2, 2)
        with pytest.raises(AssumptionError):
            square_risks(prof, proft, CUBE, ModelParams(lam=0.1), dims)

    def test_diagnostics_present(self):
        prof = mixture(40, 32, K=4)
        proft = mixture(16, 32, K=4)
        dims = Dimensions(40, 30, 32, 16)
        rep, diag = square_risks(prof, proft, CUBE, ModelParams(lam=0.3), dims)
        assert diag["path"] == "fixed_point"
        assert diag["iterations"] > 0
        assert diag["imag_residue"] < 1e-6
        assert rep.estimator == "square"

    def test_scaling_consistency(self):
        # doubling every dimension (class vectors tiled to keep the same
        # structured profile) moves the deterministic values by less than 1%
        K, p = 4, 48
        base = synthetic_class_vectors(K, p, seed=3)
        params = ModelParams(lam=0.05)
        values = []
        for scale in (1, 2):
            n, m, nt = 40 * scale, 52 * scale, 16 * scale
            vecs = [np.tile(v, scale) for v in base]
            prof = normalize_row_stochastic(build_mixture_profile(vecs, [n // K] * K))
            proft = normalize_row_stochastic(build_mixture_profile(vecs, [nt // K] * K))
            rep, _ = square_risks(prof, proft, CUBE, params, Dimensions(n, m, p * scale, nt))
            values.append((rep.e_train, rep.e_test))
        (tr1, te1), (tr2, te2) = values
        assert abs(tr2 - tr1) / tr1 < 0.01
        assert abs(te2 - te1) / te1 < 0.01

    def test_eta_insensitivity(self):
        prof = mixture(300, 64, K=4, seed=5)
        proft = mixture(100, 64, K=4, seed=5)
        dims = Dimensions(300, 310, 64, 100)
        params = ModelParams(lam=0.05)
        rep1, _ = square_risks(prof, proft, CUBE, params, dims, schedule=EtaSchedule(c_eta=1.0))
        rep2, _ = square_risks(prof, proft, CUBE, params, dims, schedule=EtaSchedule(c_eta=0.5))
        assert abs(rep1.e_test - rep2.e_test) / rep1.e_test < 0.005
        assert abs(rep1.e_train - rep2.e_train) / rep1.e_train < 0.005

    def test_identity_activation_runs(self):
        prof = mixture(60, 48, K=4)
        proft = mixture(24, 48, K=4)
        dims = Dimensions(60, 80, 48, 24)
        rep, _ = square_risks(prof, proft, IDENTITY, ModelParams(lam=0.01), dims)
        assert rep.e_test > 0

    def test_chaos_series_convention_selectable(self):
        prof = constant_profile(60, 60)
        proft = constant_profile(30, 60)
        dims = Dimensions(60, 60, 60, 30)
        a, _ = square_risks(prof, proft, CUBE, ModelParams(lam=0.1), dims, chaos="variance")
        b, _ = square_risks(prof, proft, CUBE, ModelParams(lam=0.1), dims, chaos="series")
        assert a.e_test != b.e_test  # the conventions genuinely differ for cube


class TestDenseProfilePath:
    def test_unstructured_profile_runs_generic_solver(self):
        # row-normalized but not class-structured: exercises the full-length
        # iteration inside the continuation rather than the compact kernel
        rng = np.random.default_rng(17)
        n, nt, p, m = 150, 50, 120, 180
        prof = normalize_row_stochastic(VarianceProfile(rng.uniform(0.3, 2.0, (n, p))))
        proft = normalize_row_stochastic(VarianceProfile(rng.uniform(0.3, 2.0, (nt, p))))
        assert prof.structure is None
        params = ModelParams(lam=0.2)
        rep, diag = square_risks(prof, proft, CUBE, params, Dimensions(n, m, p, nt))
        assert diag["path"] == "fixed_point" and not diag["compiled_kernel"]
        from rfvp.mc import lozenge_risks

        loz = lozenge_risks(prof, proft, CUBE, params, m=m, trials=150, seed=31)
        # deterministic values sit within finite-size reach of the surrogate
        # Monte Carlo at this scale
        assert abs(rep.e_test - loz.e_test) / loz.e_test < 0.02
        assert abs(rep.e_train - loz.e_train) / loz.e_train < 0.06
