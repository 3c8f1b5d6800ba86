"""Estimating-equation fitting of the relative-effect regression model.

The coefficient vector beta = (beta0, beta1, beta2) solves

    0 = U(beta) = (1/(n1*n2)) * sum_{i1,i2} z * mu'(eta) * (pseudo - mu(eta)),

with z = (1, Z1[i1], Z2[i2]) and eta = beta' z.  The identity link admits a
closed-form linear solve; other links go through a damped Newton iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .pseudo import PseudoMatrix
from .survival import TwoSampleDataset

__all__ = [
    "Link",
    "IDENTITY",
    "LOGIT",
    "FitResult",
    "estimating_function",
    "jacobian",
    "objective",
    "solve_closed_form_identity",
    "solve_newton",
    "fit",
    "sandwich_covariance_uncensored",
    "design_second_moment",
]


@dataclass(frozen=True)
class Link:
    """Strictly increasing inverse link with its first two derivatives."""

    mu: Callable[[np.ndarray], np.ndarray]
    mu_prime: Callable[[np.ndarray], np.ndarray]
    mu_double_prime: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"

    def validate(self, grid=None, rtol=1e-6):
        """Check derivative consistency by central finite differences."""
        if grid is None:
            grid = np.linspace(-3.0, 3.0, 25)
        grid = np.asarray(grid, dtype=float)
        h = 1e-5
        fd1 = (self.mu(grid + h) - self.mu(grid - h)) / (2 * h)
        fd2 = (self.mu_prime(grid + h) - self.mu_prime(grid - h)) / (2 * h)
        scale1 = np.maximum(np.abs(fd1), 1e-8)
        scale2 = np.maximum(np.abs(self.mu_double_prime(grid)), 1.0)
        if np.any(np.abs(self.mu_prime(grid) - fd1) / scale1 > rtol * 100):
            raise ValueError(f"link {self.name!r}: mu_prime inconsistent with mu")
        if np.any(np.abs(self.mu_double_prime(grid) - fd2) / scale2 > rtol * 100):
            raise ValueError(f"link {self.name!r}: mu_double_prime inconsistent with mu_prime")
        if np.any(self.mu_prime(grid) <= 0):
            raise ValueError(f"link {self.name!r}: mu_prime must be positive")


def _expit(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


IDENTITY = Link(
    mu=lambda x: np.asarray(x, dtype=float),
    mu_prime=lambda x: np.ones_like(np.asarray(x, dtype=float)),
    mu_double_prime=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
    name="identity",
)

LOGIT = Link(
    mu=_expit,
    mu_prime=lambda x: _expit(x) * (1.0 - _expit(x)),
    mu_double_prime=lambda x: _expit(x) * (1.0 - _expit(x)) * (1.0 - 2.0 * _expit(x)),
    name="logit",
)

LINKS = {"identity": IDENTITY, "logit": LOGIT}


@dataclass
class FitResult:
    beta: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    method: str
    covariance: Optional[np.ndarray] = None
    used_pinv: bool = False
    message: str = ""


def _linear_predictor(beta, Z1, Z2):
    p1 = Z1.shape[1]
    p2 = Z2.shape[1]
    b0 = beta[0]
    b1 = beta[1 : 1 + p1]
    b2 = beta[1 + p1 : 1 + p1 + p2]
    return b0 + (Z1 @ b1)[:, None] + (Z2 @ b2)[None, :]


def _check_dims(beta, matrix, Z1, Z2):
    n1, n2 = matrix.shape
    if Z1.shape[0] != n1 or Z2.shape[0] != n2:
        raise ValueError("covariate rows do not match pseudo-matrix dimensions")
    p = 1 + Z1.shape[1] + Z2.shape[1]
    if beta.shape != (p,):
        raise ValueError(f"beta must have length {p}, got {beta.shape}")


def _paired_quadratic(G, Z1, Z2):
    """sum_{i1,i2} G[i1,i2] * z z' for z = (1, Z1[i1], Z2[i2]), unnormalized."""
    rs = G.sum(axis=1)
    cs = G.sum(axis=0)
    s = G.sum()
    a1 = Z1.T @ rs
    a2 = Z2.T @ cs
    B11 = (Z1 * rs[:, None]).T @ Z1
    B22 = (Z2 * cs[:, None]).T @ Z2
    B12 = Z1.T @ G @ Z2
    top = np.concatenate(([s], a1, a2))
    mid = np.concatenate((a1[:, None], B11, B12), axis=1)
    bot = np.concatenate((a2[:, None], B12.T, B22), axis=1)
    return np.vstack((top, mid, bot))


def estimating_function(beta, matrix: np.ndarray, Z1, Z2, link: Link) -> np.ndarray:
    """Normalized score U(beta); zero at the fitted coefficients."""
    beta = np.asarray(beta, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=float))
    Z2 = np.atleast_2d(np.asarray(Z2, dtype=float))
    _check_dims(beta, matrix, Z1, Z2)
    n1, n2 = matrix.shape
    eta = _linear_predictor(beta, Z1, Z2)
    W = link.mu_prime(eta) * (matrix - link.mu(eta))
    u0 = W.sum()
    u1 = Z1.T @ W.sum(axis=1)
    u2 = Z2.T @ W.sum(axis=0)
    return np.concatenate(([u0], u1, u2)) / (n1 * n2)


def jacobian(beta, matrix: np.ndarray, Z1, Z2, link: Link) -> np.ndarray:
    """Analytic Jacobian of ``estimating_function``; symmetric."""
    beta = np.asarray(beta, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=float))
    Z2 = np.atleast_2d(np.asarray(Z2, dtype=float))
    _check_dims(beta, matrix, Z1, Z2)
    n1, n2 = matrix.shape
    eta = _linear_predictor(beta, Z1, Z2)
    mp = link.mu_prime(eta)
    G = link.mu_double_prime(eta) * (matrix - link.mu(eta)) - mp * mp
    return _paired_quadratic(G, Z1, Z2) / (n1 * n2)


def objective(beta, matrix: np.ndarray, Z1, Z2, link: Link) -> float:
    """Potential whose gradient is the estimating function."""
    beta = np.asarray(beta, dtype=float)
    matrix = np.asarray(matrix, dtype=float)
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=float))
    Z2 = np.atleast_2d(np.asarray(Z2, dtype=float))
    eta = _linear_predictor(beta, Z1, Z2)
    mu = link.mu(eta)
    return float(np.mean((matrix - 0.5 * mu) * mu))


def design_second_moment(Z1, Z2) -> np.ndarray:
    """Average over all pairs of the outer product of (1, z1, z2)."""
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=float))
    Z2 = np.atleast_2d(np.asarray(Z2, dtype=float))
    n1, n2 = Z1.shape[0], Z2.shape[0]
    m1 = Z1.mean(axis=0)
    m2 = Z2.mean(axis=0)
    S11 = Z1.T @ Z1 / n1
    S22 = Z2.T @ Z2 / n2
    top = np.concatenate(([1.0], m1, m2))
    mid = np.concatenate((m1[:, None], S11, np.outer(m1, m2)), axis=1)
    bot = np.concatenate((m2[:, None], np.outer(m2, m1), S22), axis=1)
    return np.vstack((top, mid, bot))


def _solve_maybe_pinv(A, b, strict=False):
    p = A.shape[0]
    if np.linalg.matrix_rank(A) < p:
        if strict:
            raise np.linalg.LinAlgError("design second-moment matrix is singular")
        return np.linalg.pinv(A) @ b, True
    return np.linalg.solve(A, b), False


def solve_closed_form_identity(
    matrix: PseudoMatrix, Z1, Z2, strict_singular: bool = False
) -> FitResult:
    """Exact identity-link solution of the estimating equation."""
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=float))
    Z2 = np.atleast_2d(np.asarray(Z2, dtype=float))
    n1, n2 = matrix.n1, matrix.n2
    Sigma = design_second_moment(Z1, Z2)
    psi = np.concatenate(
        (
            [matrix.grand_mean],
            Z1.T @ matrix.row_means / n1,
            Z2.T @ matrix.col_means / n2,
        )
    )
    beta, used_pinv = _solve_maybe_pinv(Sigma, psi, strict=strict_singular)
    grad = estimating_function(beta, matrix.values, Z1, Z2, IDENTITY)
    return FitResult(
        beta=beta,
        converged=True,
        iterations=0,
        gradient_norm=float(np.max(np.abs(grad))),
        method="closed-form",
        used_pinv=used_pinv,
        message="singular design, pseudo-inverse used" if used_pinv else "",
    )


def solve_newton(
    matrix: PseudoMatrix,
    Z1,
    Z2,
    link: Link,
    x0=None,
    tol: float = 1e-10,
    max_iter: int = 50,
    max_halvings: int = 10,
    warm_start_identity: bool = False,
) -> FitResult:
    """Damped Newton iteration on the estimating function.

    Non-convergence is reported honestly: the last iterate is returned with
    ``converged=False``.
    """
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=float))
    Z2 = np.atleast_2d(np.asarray(Z2, dtype=float))
    p = 1 + Z1.shape[1] + Z2.shape[1]
    if x0 is not None:
        beta = np.asarray(x0, dtype=float).copy()
    elif warm_start_identity:
        beta = solve_closed_form_identity(matrix, Z1, Z2).beta
    else:
        beta = np.zeros(p)

    used_pinv = False
    U = estimating_function(beta, matrix.values, Z1, Z2, link)
    norm = float(np.max(np.abs(U)))
    for it in range(1, max_iter + 1):
        if norm < tol:
            return FitResult(beta, True, it - 1, norm, "newton", used_pinv=used_pinv)
        J = jacobian(beta, matrix.values, Z1, Z2, link)
        try:
            step = np.linalg.solve(J, -U)
        except np.linalg.LinAlgError:
            step = np.linalg.pinv(J) @ (-U)
            used_pinv = True
        scale = 1.0
        improved = False
        for _ in range(max_halvings + 1):
            cand = beta + scale * step
            U_cand = estimating_function(cand, matrix.values, Z1, Z2, link)
            cand_norm = float(np.max(np.abs(U_cand)))
            if np.isfinite(cand_norm) and cand_norm < norm:
                beta, U, norm = cand, U_cand, cand_norm
                improved = True
                break
            scale *= 0.5
        if not improved:
            return FitResult(
                beta, False, it, norm, "newton",
                used_pinv=used_pinv, message="line search stalled",
            )
    converged = norm < tol
    return FitResult(
        beta, converged, max_iter, norm, "newton",
        used_pinv=used_pinv, message="" if converged else "max iterations reached",
    )


def fit(
    matrix: PseudoMatrix, Z1, Z2, link: Link = IDENTITY, strict_singular: bool = False
) -> FitResult:
    """Dispatch: closed form for the identity link, Newton otherwise."""
    if link.name == "identity":
        return solve_closed_form_identity(matrix, Z1, Z2, strict_singular=strict_singular)
    return solve_newton(matrix, Z1, Z2, link, warm_start_identity=True)


def sandwich_covariance_uncensored(
    data: TwoSampleDataset, beta=None, Z1=None, Z2=None
) -> np.ndarray:
    """Plug-in asymptotic covariance of the identity-link coefficients.

    Valid only on fully observed data, where each pair contribution is the
    indicator 1{T1 > T2, T2 < tau}.  The meat matrices are built from the
    fitted residuals, which is what the linearization
    beta_hat - beta = Sigma_hat^{-1}(Psi_hat - Sigma_hat beta) calls for;
    building them from raw indicators ignores the coupling between
    Sigma_hat and Psi_hat through the covariates and badly overestimates
    the variance whenever the covariates have nonzero second moments.
    Under censoring use bootstrap inference instead.
    """
    if not data.uncensored:
        raise ValueError(
            "analytic covariance requires fully observed data; "
            "use bootstrap inference under censoring"
        )
    Z1 = data.covariates1 if Z1 is None else np.atleast_2d(np.asarray(Z1, dtype=float))
    Z2 = data.covariates2 if Z2 is None else np.atleast_2d(np.asarray(Z2, dtype=float))
    n1, n2 = data.n1, data.n2
    D = ((data.times1[:, None] > data.times2[None, :]) & (data.times2[None, :] < data.tau)).astype(float)
    if beta is None:
        matrix = PseudoMatrix(values=D, theta_hat=float(D.mean()))
        beta = solve_closed_form_identity(matrix, Z1, Z2).beta
    beta = np.asarray(beta, dtype=float)
    R = D - _linear_predictor(beta, Z1, Z2)

    rs = R.sum(axis=1)
    cs = R.sum(axis=0)
    m = np.concatenate(([R.sum()], Z1.T @ rs, Z2.T @ cs)) / (n1 * n2)

    U = np.concatenate((rs[:, None], rs[:, None] * Z1, R @ Z2), axis=1)
    V = np.concatenate((cs[:, None], R.T @ Z1, cs[:, None] * Z2), axis=1)
    omega1 = U.T @ U / (n1 * n2**2) - np.outer(m, m)
    omega2 = V.T @ V / (n1**2 * n2) - np.outer(m, m)
    lam = n1 / (n1 + n2)
    omega = (1.0 - lam) * omega1 + lam * omega2

    Sigma = design_second_moment(Z1, Z2)
    Sigma_inv = np.linalg.pinv(Sigma)
    cov = Sigma_inv @ omega @ Sigma_inv.T * (n1 + n2) / (n1 * n2)
    return 0.5 * (cov + cov.T)


def omega_components_uncensored(data: TwoSampleDataset):
    """Empirical covariance building blocks (same-pair, shared-row, shared-column)."""
    if not data.uncensored:
        raise ValueError("omega components are defined for fully observed data only")
    Z1, Z2 = data.covariates1, data.covariates2
    n1, n2 = data.n1, data.n2
    D = ((data.times1[:, None] > data.times2[None, :]) & (data.times2[None, :] < data.tau)).astype(float)
    rs = D.sum(axis=1)
    cs = D.sum(axis=0)
    m = np.concatenate(([D.sum()], Z1.T @ rs, Z2.T @ cs)) / (n1 * n2)
    B = _paired_quadratic(D, Z1, Z2)
    omega0 = B / (n1 * n2) - np.outer(m, m)
    U = np.concatenate((rs[:, None], rs[:, None] * Z1, D @ Z2), axis=1)
    V = np.concatenate((cs[:, None], D.T @ Z1, cs[:, None] * Z2), axis=1)
    omega1 = U.T @ U / (n1 * n2**2) - np.outer(m, m)
    omega2 = V.T @ V / (n1**2 * n2) - np.outer(m, m)
    return omega0, omega1, omega2
