"""Factor-augmented regression pipeline.

Builds the block design Phi = [xi_hat | X_tilde] (standardized factor
scores next to the projected, rescaled predictors), fits the penalized
path on it, and maps each solution back to coefficients of the
unprojected model:

    beta_hat[j]  = beta_tilde[j] / s[j]
    alpha_hat[r] = alpha_tilde[r] - sqrt(p * lambda_r) * sum_j psi[r, j] * beta_hat[j]

where s[j] is the post-projection column normalizer.  The back-transform
leaves fitted values unchanged: sum_r alpha_tilde[r] xi_hat[i, r] +
sum_j beta_tilde[j] X_tilde[i, j] equals sum_r alpha_hat[r] xi_hat[i, r]
+ sum_j beta_hat[j] X[i, j] for every i.

Also provides the plain-Lasso baseline on the raw predictors, in-sample
and population prediction-error metrics against a known generating law,
the nonsparse coefficient vector the baseline implicitly targets, and a
randomized restricted-eigenvalue diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import (
    CovarianceSpectrum,
    DataMatrix,
    DegenerateColumnError,
    FactorScores,
    empirical_covariance,
    eigendecompose_scaled,
    factor_scores,
    project_standardize,
)
from .errors import InputError
from .lasso import LassoPath, lasso_path


@dataclass(frozen=True)
class AugmentedDesign:
    """The n x (k+p) block design, its normalizers, and the spectrum used."""

    phi: np.ndarray  # (n, k + p); first k columns are factor scores
    k: int
    col_norms: np.ndarray  # (p,) normalizers s_j of the projected columns
    spectrum: CovarianceSpectrum
    p: int

    @property
    def n(self):
        return self.phi.shape[0]

    @property
    def scores(self):
        return self.phi[:, : self.k]

    @property
    def standardized(self):
        return self.phi[:, self.k :]

    def gram(self):
        """(1/n) * Phi^T Phi; identity k-block and zero off-blocks by construction."""
        return self.phi.T @ self.phi / self.n


@dataclass(frozen=True)
class CoefficientEstimate:
    """Back-transformed coefficients at one penalty, plus the raw solution."""

    alpha: np.ndarray  # (k,)
    beta: np.ndarray  # (p,)
    rho: float
    tilde_theta: np.ndarray  # (k + p,) projected-model coefficients


@dataclass(frozen=True)
class AugmentedFit:
    """A penalized path on the augmented design with per-point estimates."""

    design: AugmentedDesign
    path: LassoPath
    estimates: list  # list[CoefficientEstimate], one per grid point


@dataclass(frozen=True)
class StandardFit:
    """Plain-Lasso baseline on the raw predictors.

    The path is fit on internally standardized columns; ``betas`` holds
    the un-standardized coefficients, one row per grid point.
    """

    path: LassoPath
    betas: np.ndarray  # (G, p)
    col_norms: np.ndarray  # (p,) standardizers used internally


@dataclass(frozen=True)
class PopulationModel:
    """Generating law for a two-sided prediction-error accounting.

    The predictors follow X = sum_r sqrt(p * lambda_r) * xi_r * psi_r + Z
    with unit-variance factors xi, loadings psi_r (rows of ``loadings``),
    and isotropic idiosyncratic noise Var(Z_j) = idio_var.  ``alpha`` and
    ``beta`` are the true regression coefficients.
    """

    loadings: np.ndarray  # (k0, p), orthonormal rows
    factor_vars: np.ndarray  # (k0,)
    idio_var: float
    alpha: np.ndarray  # (k0,)
    beta: np.ndarray  # (p,)

    @property
    def k0(self):
        return self.loadings.shape[0]

    @property
    def p(self):
        return self.loadings.shape[1]


def build_augmented_design(data: DataMatrix, k, spectrum=None) -> AugmentedDesign:
    """Assemble Phi = [scores | projected-and-rescaled predictors].

    ``spectrum`` may be supplied to reuse (or re-sign) an existing
    eigendecomposition; otherwise it is computed from the data.
    """
    k = int(k)
    if k < 1:
        raise InputError(f"k must be >= 1 for the augmented design, got {k}")
    if spectrum is None:
        spectrum = eigendecompose_scaled(empirical_covariance(data))
    scores = factor_scores(data, spectrum, k)
    proj = project_standardize(data, spectrum, k)
    phi = np.hstack([scores.scores, proj.standardized])
    return AugmentedDesign(
        phi=phi, k=k, col_norms=proj.col_norms, spectrum=spectrum, p=data.p
    )


def back_transform(tilde_theta, design: AugmentedDesign, rho=float("nan")) -> CoefficientEstimate:
    """Map projected-model coefficients to the unprojected model."""
    tilde_theta = np.asarray(tilde_theta, dtype=float)
    k, p = design.k, design.p
    if tilde_theta.shape != (k + p,):
        raise InputError(
            f"tilde_theta must have shape ({k + p},), got {tilde_theta.shape}"
        )
    beta = tilde_theta[k:] / design.col_norms
    lam = design.spectrum.leading_values(k)
    psi = design.spectrum.leading_vectors(k)
    alpha = tilde_theta[:k] - np.sqrt(p * lam) * (psi.T @ beta)
    return CoefficientEstimate(
        alpha=alpha, beta=beta, rho=float(rho), tilde_theta=tilde_theta.copy()
    )


def fit_augmented(design: AugmentedDesign, response, grid_spec=None) -> AugmentedFit:
    """Penalized path on the augmented design, back-transformed per point."""
    path = lasso_path(design.phi, response, grid_spec)
    estimates = [
        back_transform(path.coefficients[g], design, rho=path.grid[g])
        for g in range(path.grid.size)
    ]
    return AugmentedFit(design=design, path=path, estimates=estimates)


def fit_standard(data: DataMatrix, response, grid_spec=None) -> StandardFit:
    """Plain-Lasso baseline: standardize columns, fit, un-standardize."""
    x = data.values
    col_norms = np.sqrt(np.mean(x**2, axis=0))
    bad = np.flatnonzero(col_norms <= 1e-12)
    if bad.size:
        raise DegenerateColumnError(
            f"{bad.size} column(s) have (near-)zero second moment: "
            f"indices {bad.tolist()}",
            indices=bad,
        )
    path = lasso_path(x / col_norms, response, grid_spec)
    return StandardFit(path=path, betas=path.coefficients / col_norms, col_norms=col_norms)


def sample_prediction_error(
    true_alpha, true_beta, true_xi, data: DataMatrix, estimate: CoefficientEstimate, scores
) -> float:
    """In-sample squared distance between true and fitted signal,

        (1/n) * sum_i (sum_r alpha_r xi[i, r] + beta . x_i
                       - sum_r alpha_hat_r xi_hat[i, r] - beta_hat . x_i)^2.

    For a baseline estimate with no factor part, pass an estimate with an
    empty alpha and ``scores=None``.
    """
    true_alpha = np.asarray(true_alpha, dtype=float)
    true_beta = np.asarray(true_beta, dtype=float)
    x = data.values
    f_true = x @ true_beta
    if true_alpha.size:
        xi = np.asarray(true_xi, dtype=float)
        if xi.shape != (x.shape[0], true_alpha.size):
            raise InputError(
                f"true_xi must have shape ({x.shape[0]}, {true_alpha.size}), "
                f"got {xi.shape}"
            )
        f_true = f_true + xi @ true_alpha
    f_hat = x @ estimate.beta
    if estimate.alpha.size:
        if scores is None:
            raise InputError("scores are required when the estimate has factor terms")
        score_mat = scores.scores if isinstance(scores, FactorScores) else np.asarray(scores, float)
        f_hat = f_hat + score_mat[:, : estimate.alpha.size] @ estimate.alpha
    diff = f_true - f_hat
    return float(diff @ diff / x.shape[0])


def exact_prediction_error(
    model: PopulationModel, estimate: CoefficientEstimate, spectrum: CovarianceSpectrum
) -> float:
    """Expected squared prediction discrepancy on a fresh observation.

    The fitted predictor uses estimated scores
    xi_hat_r = psi_hat_r . X / sqrt(p * lambda_hat_r), so the error is the
    quadratic form E[(alpha . xi + b . X)^2] with
    b = beta - beta_hat - M^T alpha_hat, M the (k, p) matrix of rows
    psi_hat_r / sqrt(p * lambda_hat_r), evaluated under the joint Gaussian
    law with Cov(xi) = I, Cov(xi_r, X) = sqrt(p * lambda_r) * psi_r and
    Cov(X) = sum_r p lambda_r psi_r psi_r^T + idio_var * I.
    """
    if not isinstance(model, PopulationModel):
        raise InputError("a PopulationModel with the generating law is required")
    k = estimate.alpha.size
    p = model.p
    if estimate.beta.shape != (p,):
        raise InputError(
            f"estimate.beta must have shape ({p},), got {estimate.beta.shape}"
        )
    b = model.beta - estimate.beta
    if k:
        if spectrum is None or spectrum.p != p:
            raise InputError("a spectrum matching the model dimension is required")
        lam = spectrum.leading_values(k)
        psi_hat = spectrum.leading_vectors(k)
        b = b - psi_hat @ (estimate.alpha / np.sqrt(p * lam))

    proj_true = model.loadings @ b  # (k0,) entries psi_r . b
    err = float(model.alpha @ model.alpha)
    err += 2.0 * float(model.alpha @ (np.sqrt(p * model.factor_vars) * proj_true))
    err += float(np.sum(p * model.factor_vars * proj_true**2))
    err += model.idio_var * float(b @ b)
    return err


def population_beta_lr(model: PopulationModel) -> np.ndarray:
    """Nonsparse coefficient vector absorbing the factor effects.

    Uses the analytic eigenpairs of the scaled population covariance for
    the isotropic-noise construction: delta_r = psi_r and
    mu_r = lambda_r + idio_var / p.
    """
    mu = model.factor_vars + model.idio_var / model.p
    weights = model.alpha / np.sqrt(model.p * mu)
    return model.beta + model.loadings.T @ weights


def re_constant_estimate(design, s, c0, budget, rng=0) -> float:
    """Randomized lower-envelope search for the restricted-eigenvalue ratio.

    Samples supports J0 with |J0| <= s and directions Delta in the cone
    ||Delta_{J0^c}||_1 <= c0 * ||Delta_{J0}||_1, returning the smallest
    observed

        sqrt(Delta^T G Delta) / ||Delta_{J0}||_2,    G = (1/n) D^T D.

    The result is an upper bound on the true constant (a search minimum)
    and is non-increasing in ``budget`` for a fixed seed, because a larger
    budget extends the same trial stream.
    """
    design = np.asarray(design, dtype=float)
    if design.ndim != 2:
        raise InputError(f"design must be 2-d, got shape {design.shape}")
    n, m = design.shape
    s = int(s)
    if not (1 <= s <= m // 2):
        raise InputError(f"support size must be in [1, m/2] = [1, {m // 2}], got {s}")
    if not (np.isfinite(c0) and c0 > 0):
        raise InputError(f"c0 must be > 0, got {c0}")
    budget = int(budget)
    if budget < 1:
        raise InputError(f"budget must be >= 1, got {budget}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    def ratio(idx, vals, support_mask):
        fitted = design[:, idx] @ vals
        quad = max(float(fitted @ fitted) / n, 0.0)
        denom = float(vals[support_mask] @ vals[support_mask])
        if denom <= 0.0:
            return np.inf
        return np.sqrt(quad) / np.sqrt(denom)

    best = np.inf
    for trial in range(budget):
        size = int(gen.integers(1, s + 1))
        j0 = gen.choice(m, size=size, replace=False)
        mode = trial % 3
        if mode == 0:
            # Direction supported on J0 only.
            vals = gen.standard_normal(size)
            best = min(best, ratio(j0, vals, np.ones(size, dtype=bool)))
        elif mode == 1:
            # Cone-boundary pair: one support coordinate against one outside.
            j = int(j0[0])
            j2 = int(gen.integers(0, m - 1))
            if j2 >= j:
                j2 += 1
            sign = 1.0 if gen.integers(0, 2) else -1.0
            idx = np.array([j, j2])
            vals = np.array([1.0, sign * c0])
            best = min(best, ratio(idx, vals, np.array([True, False])))
        else:
            # General interior direction with a random off-support block.
            vals0 = gen.standard_normal(size)
            n_out = int(gen.integers(1, min(m - size, 3 * s) + 1))
            outside = np.setdiff1d(
                gen.choice(m, size=n_out + size, replace=False), j0, assume_unique=False
            )[:n_out]
            u = gen.uniform(0.0, 1.0)
            vout = gen.standard_normal(outside.size)
            if outside.size and np.abs(vout).sum() > 0:
                vout *= u * c0 * np.abs(vals0).sum() / np.abs(vout).sum()
            idx = np.concatenate([j0, outside])
            vals = np.concatenate([vals0, vout])
            mask = np.zeros(idx.size, dtype=bool)
            mask[:size] = True
            best = min(best, ratio(idx, vals, mask))
    return float(best)
