"""Deterministic risk values from the solved block fixed point.

Both risks are evaluated from the blockwise diagonals at the real spectral
parameter (the continuation drives the imaginary shift to zero), so the
imaginary residue of every reported value is a pure numerical diagnostic and
is required to stay below 1e-6 relative.

The evaluation requires row-stochastic train and test profiles (all row
means equal); under that assumption the surrogate diagonals are the scalars
theta_lin and the chaos coefficient, and the sample-group quantities reduce
them out exactly, which keeps every term finite in the theta_lin -> 0 limit:

* the group-4 trace divided by theta_lin^2 is evaluated through the reduced
  column response rho3 = Gamma^T q1 / n, never by dividing by theta_lin;
* the quadratic test term uses the group-4-source linear response, which
  captures the off-diagonal mass of the coupled cells that a product of
  diagonal equivalents would miss.

With theta_lin = 0 the closed Marchenko-Pastur forms apply and are used by
default (``force_fixed_point`` runs the general path anyway, which the test
suite uses as a cross-oracle).
"""

from __future__ import annotations

import numpy as np

from ..gaussfun import ActivationSpec, chaos_std, theta_lin_chaos
from ..mc import ModelParams, RiskReport
from ..profiles import Dimensions, VarianceProfile
from .linearization import build_linearization_profile
from .mp import mp_stieltjes
from .solver import EtaSchedule, SquareSolution, continuation_solve


class AssumptionError(ValueError):
    """Profile does not satisfy the equal-row-means requirement."""


class ResidueError(ArithmeticError):
    """Imaginary residue of a reported risk above the diagnostic threshold."""


def check_row_stochastic(profile: VarianceProfile, profile_test: VarianceProfile,
                         rtol: float = 1e-8) -> float:
    """Verify both profiles share a common row mean; return that s^2."""
    s2 = float(profile.row_means().mean())
    for name, prof in (("train", profile), ("test", profile_test)):
        err = float(np.max(np.abs(prof.row_means() - s2)))
        if err > rtol * abs(s2):
            raise AssumptionError(
                f"{name} profile rows are not equal-mean (max deviation {err:g}); "
                "normalize the profiles first"
            )
    return s2


def _real_with_residue(value: complex, residues: list[float]) -> float:
    residues.append(abs(value.imag))
    return float(value.real)


def square_risks(
    profile: VarianceProfile,
    profile_test: VarianceProfile,
    h: ActivationSpec,
    params: ModelParams,
    dims: Dimensions,
    chaos: str = "variance",
    schedule: EtaSchedule = EtaSchedule(),
    tol: float = 1e-10,
    max_iter: int = 200000,
    damping: float = 0.5,
    force_fixed_point: bool = False,
    use_compiled: bool | None = None,
) -> tuple[RiskReport, dict]:
    """Deterministic train/test risk for one (activation, dims, lam) point.

    Returns the report plus a diagnostics dict (iterations, residual,
    imaginary residue, evaluation path).
    """
    s2 = check_row_stochastic(profile, profile_test)
    s = float(np.sqrt(s2))
    theta_lin = theta_lin_chaos(h, s)[0]
    nu = chaos_std(h, s) if chaos == "variance" else theta_lin_chaos(h, s)[1]
    flags = () if h.odd else ("activation is not odd",)
    if theta_lin == 0.0 and not force_fixed_point and nu > 0.0:
        e_train, e_test = _closed_form_risks(params, dims, s2, nu)
        report = RiskReport("square", e_train, e_test, 0, flags=flags)
        return report, {"path": "closed_form", "iterations": 0, "imag_residue": 0.0}
    d_lin = np.full(dims.n, theta_lin)
    d_chaos = np.full(dims.n, nu)
    lp = build_linearization_profile(profile, d_lin, d_chaos, dims)
    sol = continuation_solve(
        lp, params.lam, schedule=schedule, tol=tol, max_iter=max_iter,
        damping=damping, use_compiled=use_compiled,
    )
    e_train, e_test, residue = _fixed_point_risks(
        sol, profile, profile_test, dims, params, theta_lin, nu, s2
    )
    diagnostics = dict(sol.diagnostics)
    diagnostics.update({"path": "fixed_point", "imag_residue": residue})
    for value, label in ((e_train, "train"), (e_test, "test")):
        if residue > 1e-6 * (1.0 + abs(value)):
            raise ResidueError(f"imaginary residue {residue:g} too large for e_{label}")
    report = RiskReport("square", e_train, e_test, 0, flags=flags)
    return report, diagnostics


def _closed_form_risks(params: ModelParams, dims: Dimensions, s2: float, nu: float):
    a2, sg2, lam = params.alpha**2, params.sigma_noise**2, params.lam
    m_val, m_der = mp_stieltjes(lam, dims.n / dims.m, nu)
    e_train = lam**2 * a2 * s2 * m_der + lam**2 * sg2 * m_der
    e_test = sg2 + a2 * s2 + nu**2 * (a2 * s2 + sg2) * (m_val - lam * m_der)
    return e_train, e_test


def _fixed_point_risks(
    sol: SquareSolution,
    profile: VarianceProfile,
    profile_test: VarianceProfile,
    dims: Dimensions,
    params: ModelParams,
    theta_lin: float,
    nu: float,
    s2: float,
):
    a2, sg2, lam = params.alpha**2, params.sigma_noise**2, params.lam
    n, p = dims.n, dims.p
    st, dv, g4 = sol.state, sol.derivative, sol.response4
    weights = profile_test.column_sums() / profile_test.rows  # p-vector, mean s2

    # group-4 traces divided by theta_lin^2, via the reduced column response
    rho3 = profile.entries.T @ st.q1 / n
    rho3p = profile.entries.T @ dv.q1 / n
    det = 1.0 / st.q34
    detp = -dv.q34 * det * det
    T44 = np.sum(-rho3 / det)
    T44p = np.sum((-rho3p * det + rho3 * detp) / (det * det))

    residues: list[float] = []
    e_train = _real_with_residue(
        lam**2 * a2 / p * T44p + lam**2 * sg2 / n * np.sum(dv.q1), residues
    )
    # diag of the coupled-cell product (Q34 + I)(Q43 + I) including the
    # off-diagonal mass carried by the group-4 response
    prod_diag = g4.q3 + st.q34 + st.q43 + 1.0
    e_test = _real_with_residue(
        sg2
        + a2 * s2
        + nu**2 * a2 / p * T44
        - lam * nu**2 * a2 / p * T44p
        + a2 / p * np.dot(weights, prod_diag)
        + nu**2 * sg2 / n * np.sum(dv.q2)
        + theta_lin**2 * sg2 / n * np.dot(weights, dv.q3)
        - 2.0 * a2 / p * np.dot(weights, st.q43 + 1.0),
        residues,
    )
    return e_train, e_test, max(residues)
