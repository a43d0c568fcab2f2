"""Covariance eigenstructure and latent-factor estimation.

Implements the first stage of the factor-augmented regression pipeline:
the empirical covariance of the predictors, the eigendecomposition of its
scaled version (1/p) * Sigma_hat, standardized factor scores, projection
of the predictors onto the orthogonal complement of the leading
eigenvectors, and the information-criterion rule for choosing how many
factors to keep.

Conventions
-----------
* Eigenvalues are those of (1/p) * Sigma_hat, sorted non-increasing.
* Eigenvectors are unit length, mutually orthogonal, and sign-normalized
  so the entry of largest absolute value is positive (ties break toward
  the lowest index).
* Factor scores are scaled so their empirical second-moment matrix is the
  identity: xi[i, r] = psi_r . x_i / sqrt(p * lambda_r).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateColumnError,
    DegenerateFactorError,
    InputError,
    NumericalError,
)

# Relative floor below which a factor cannot be told apart from noise rank.
FACTOR_RANK_TOL = 1e-12
# Columns of the projected design with second moment below this are degenerate.
COLUMN_MOMENT_TOL = 1e-12
# Eigenvalues in (-EIG_CLAMP_TOL * scale, 0) are rounding debris and clamp to 0.
EIG_CLAMP_TOL = 1e-10


def _validated_matrix(values, name="values"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise InputError(f"{name} must be a 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class DataMatrix:
    """An n x p matrix of observations (rows) by predictors (columns).

    ``centered`` records whether column means were already subtracted;
    the estimators here never center implicitly.
    """

    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        arr = _validated_matrix(self.values)
        if arr.shape[0] < 2:
            raise InputError(f"need at least 2 observations, got {arr.shape[0]}")
        if arr.shape[1] < 1:
            raise InputError("need at least 1 predictor column")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_array(cls, values, center=False):
        """Build a DataMatrix, optionally subtracting column means."""
        arr = _validated_matrix(values)
        if center:
            arr = arr - arr.mean(axis=0)
        return cls(values=arr, centered=bool(center))

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def p(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class CovarianceSpectrum:
    """Full eigenstructure of the scaled covariance (1/p) * S.

    Attributes
    ----------
    p : int
        Predictor dimension.
    eigenvalues : np.ndarray, shape (p,)
        Non-increasing, non-negative (tiny negatives clamped to zero).
    eigenvectors : np.ndarray, shape (p, p)
        Column r holds the unit eigenvector paired with ``eigenvalues[r]``.
    """

    p: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def leading_values(self, k):
        return self.eigenvalues[:k]

    def leading_vectors(self, k):
        return self.eigenvectors[:, :k]

    def explained_shares(self):
        """Share of total scaled variance carried by each eigenvalue."""
        total = self.eigenvalues.sum()
        if total <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total

    def with_aligned_signs(self, reference_vectors):
        """Return a copy whose leading eigenvectors are sign-aligned.

        ``reference_vectors`` is a (p, k) array; eigenvector r is flipped
        when its inner product with reference column r is negative.  Used
        by simulations where the generator's loadings fix the "right"
        sign version; the fit itself is sign-equivariant.
        """
        ref = np.asarray(reference_vectors, dtype=float)
        vecs = self.eigenvectors.copy()
        for r in range(ref.shape[1]):
            if vecs[:, r] @ ref[:, r] < 0:
                vecs[:, r] = -vecs[:, r]
        return CovarianceSpectrum(self.p, self.eigenvalues, vecs)


@dataclass(frozen=True)
class FactorScores:
    """Standardized scores of the k leading empirical principal components."""

    scores: np.ndarray  # (n, k)
    k: int
    lambda_used: np.ndarray  # (k,) leading eigenvalues


@dataclass(frozen=True)
class ProjectionResult:
    """Predictors projected off the leading factor span, plus normalizers.

    ``standardized[i, j] = projected[i, j] / col_norms[j]`` has unit
    empirical second moment in every column.
    """

    projected: np.ndarray  # (n, p)
    col_norms: np.ndarray  # (p,)
    standardized: np.ndarray  # (n, p)


def empirical_covariance(data: DataMatrix) -> np.ndarray:
    """Second-moment matrix (1/n) * sum_i x_i x_i^T of the stored values.

    Column means are *not* subtracted here; build the DataMatrix with
    ``center=True`` if centering is wanted.
    """
    x = data.values
    s = x.T @ x / x.shape[0]
    # BLAS results can be asymmetric in the last bit; symmetrize exactly.
    return (s + s.T) / 2.0


def eigendecompose_scaled(s, k_max=None) -> CovarianceSpectrum:
    """Eigendecompose (1/p) * S for a symmetric (covariance) matrix S.

    Parameters
    ----------
    s : np.ndarray, shape (p, p)
        Symmetric within 1e-12 relative tolerance.
    k_max : int, optional
        Sanity bound only (must be <= p); the full spectrum is returned.

    Returns
    -------
    CovarianceSpectrum
        Sorted non-increasing, sign-normalized; eigenvalues in
        (-1e-10 * scale, 0) are clamped to zero.

    Raises
    ------
    InputError
        Non-square/asymmetric input, invalid k_max, or eigenvalues more
        negative than rounding can explain.
    NumericalError
        The underlying eigensolver failed to converge.
    """
    s = _validated_matrix(s, "covariance matrix")
    p = s.shape[0]
    if s.shape[1] != p:
        raise InputError(f"covariance matrix must be square, got {s.shape}")
    scale = max(1.0, float(np.abs(s).max()))
    asym = float(np.abs(s - s.T).max())
    if asym > 1e-12 * scale:
        raise InputError(
            f"matrix is not symmetric: max |S - S^T| = {asym:.3e} "
            f"exceeds 1e-12 relative tolerance"
        )
    if k_max is not None and not (1 <= int(k_max) <= p):
        raise InputError(f"k_max must be in [1, {p}], got {k_max}")

    try:
        eigvals, eigvecs = np.linalg.eigh(s / p)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver did not converge: {exc}") from exc

    # eigh returns ascending order; flip to non-increasing.
    eigvals = eigvals[::-1].copy()
    eigvecs = eigvecs[:, ::-1].copy()

    clamp = EIG_CLAMP_TOL * max(1.0, float(eigvals[0]) if eigvals.size else 1.0)
    if eigvals.size and eigvals[-1] < -clamp:
        raise InputError(
            f"matrix is not positive semidefinite: smallest eigenvalue "
            f"{eigvals[-1]:.3e} of (1/p)*S is below -{clamp:.1e}"
        )
    np.clip(eigvals, 0.0, None, out=eigvals)

    # Sign convention: largest-|entry| coordinate positive, ties -> lowest index.
    for r in range(p):
        col = eigvecs[:, r]
        if col[np.argmax(np.abs(col))] < 0:
            eigvecs[:, r] = -col

    return CovarianceSpectrum(p=p, eigenvalues=eigvals, eigenvectors=eigvecs)


def factor_scores(data: DataMatrix, spectrum: CovarianceSpectrum, k) -> FactorScores:
    """Standardized scores xi[i, r] = psi_r . x_i / sqrt(p * lambda_r).

    Raises DegenerateFactorError when lambda_k is numerically
    indistinguishable from zero rank (k too large for the data).
    """
    k = int(k)
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if k > spectrum.p:
        raise InputError(f"k = {k} exceeds dimension p = {spectrum.p}")
    lam = spectrum.leading_values(k)
    floor = FACTOR_RANK_TOL * max(1.0, float(spectrum.eigenvalues[0]))
    if lam[-1] <= floor:
        raise DegenerateFactorError(
            f"eigenvalue {k} is {lam[-1]:.3e}, at or below the rank floor "
            f"{floor:.3e}; reduce k"
        )
    scores = (data.values @ spectrum.leading_vectors(k)) / np.sqrt(spectrum.p * lam)
    return FactorScores(scores=scores, k=k, lambda_used=lam.copy())


def project_standardize(data: DataMatrix, spectrum: CovarianceSpectrum, k) -> ProjectionResult:
    """Remove the span of the k leading eigenvectors, then rescale columns.

    k = 0 keeps the data as-is (identity projection).  Columns whose
    post-projection second moment is at or below 1e-12 trigger
    DegenerateColumnError listing the offending indices.
    """
    k = int(k)
    if k < 0:
        raise InputError(f"k must be >= 0, got {k}")
    if k > spectrum.p:
        raise InputError(f"k = {k} exceeds dimension p = {spectrum.p}")
    x = data.values
    if k == 0:
        projected = x.copy()
    else:
        vk = spectrum.leading_vectors(k)
        projected = x - (x @ vk) @ vk.T
    col_norms = np.sqrt(np.mean(projected**2, axis=0))
    bad = np.flatnonzero(col_norms <= COLUMN_MOMENT_TOL)
    if bad.size:
        raise DegenerateColumnError(
            f"{bad.size} column(s) have (near-)zero variance after removing "
            f"{k} component(s): indices {bad.tolist()}",
            indices=bad,
        )
    return ProjectionResult(
        projected=projected,
        col_norms=col_norms,
        standardized=projected / col_norms,
    )


def _residual_mean_square(data: DataMatrix, spectrum: CovarianceSpectrum, kappa):
    x = data.values
    if kappa == 0:
        resid = x
    else:
        vk = spectrum.leading_vectors(kappa)
        resid = x - (x @ vk) @ vk.T
    return float(np.mean(resid**2))


def bai_ng_sigma2(data: DataMatrix, spectrum: CovarianceSpectrum, k_max) -> float:
    """Mean squared residual after removing the k_max leading components.

    This is the variance scale plugged into the factor-count criterion.
    """
    k_max = int(k_max)
    n, p = data.values.shape
    if not (1 <= k_max <= min(n, p) - 1):
        raise InputError(f"k_max must be in [1, min(n, p) - 1] = [1, {min(n, p) - 1}]")
    return _residual_mean_square(data, spectrum, k_max)


def bai_ng_select(data: DataMatrix, spectrum: CovarianceSpectrum, k_max):
    """Choose the factor count by penalized residual variance.

    For kappa = 1..k_max the criterion is

        V(kappa) + kappa * sigma2 * ((n + p) / (n * p)) * log(min(n, p))

    with V(kappa) the mean squared residual after removing kappa
    components and sigma2 = V(k_max).  Ties break toward the smallest
    kappa.

    Returns
    -------
    (k_hat, values) : (int, np.ndarray)
        The minimizing kappa and the criterion values for kappa=1..k_max.
    """
    k_max = int(k_max)
    n, p = data.values.shape
    if not (1 <= k_max <= min(n, p) - 1):
        raise InputError(f"k_max must be in [1, min(n, p) - 1] = [1, {min(n, p) - 1}]")
    sigma2 = bai_ng_sigma2(data, spectrum, k_max)
    penalty_unit = sigma2 * ((n + p) / (n * p)) * np.log(min(n, p))
    values = np.empty(k_max)
    for kappa in range(1, k_max + 1):
        values[kappa - 1] = (
            _residual_mean_square(data, spectrum, kappa) + kappa * penalty_unit
        )
    k_hat = int(np.argmin(values)) + 1  # argmin takes the first = smallest kappa
    return k_hat, values


def default_k_max(n, p):
    """Default search bound for the factor-count criterion."""
    return min(8, n - 1, p - 1)
