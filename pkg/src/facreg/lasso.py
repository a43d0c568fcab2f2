"""L1-penalized least squares by cyclic coordinate descent.

Solves

    min over theta of (1/n) * ||y - D theta||_2^2 + 2 * rho * ||theta||_1

for designs whose columns have unit empirical second moment
((1/n) * sum_i D[i, j]^2 = 1).  Under that normalization each coordinate
update is a plain soft threshold

    theta_j <- S((1/n) * D_j . (r + D_j * theta_j), rho),

swept cyclically (fixed order, for determinism).  Paths over a
descending penalty grid reuse the previous solution as a warm start.

Penalty scales: ``rho`` above is the internal convention; results also
expose the "table scale" n * rho / 2 used by LARS-style software.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConvergenceError, InputError, NumericalError

COLUMN_NORM_TOL = 1e-8  # allowed deviation of column second moments from 1
KKT_TOL = 1e-6  # postcondition tolerance on the stationarity residual
COORD_TOL = 1e-8  # per-sweep relative coordinate-change convergence test
SWEEP_CAP = 10_000  # hard cap on total sweeps per grid point


@njit(cache=True)
def _cd_solve(d, rho, theta, resid, sweep_budget, tol):
    """Cyclic coordinate descent; mutates ``theta`` and ``resid`` in place.

    ``d`` must be Fortran-ordered so column slices are contiguous.
    Convergence is declared only on a full sweep whose largest coordinate
    change is below tol * max(1, ||theta||_inf); sweeps over the current
    active set in between are an acceleration, not a convergence test.
    Returns (sweeps_used, converged).
    """
    n, m = d.shape
    inv_n = 1.0 / n
    active = np.empty(m, np.int64)
    sweeps = 0
    while sweeps < sweep_budget:
        # Full pass over all coordinates.
        sweeps += 1
        max_delta = 0.0
        max_abs = 0.0
        n_active = 0
        for j in range(m):
            old = theta[j]
            z = 0.0
            for i in range(n):
                z += d[i, j] * resid[i]
            z = z * inv_n + old
            if z > rho:
                new = z - rho
            elif z < -rho:
                new = z + rho
            else:
                new = 0.0
            if new != old:
                diff = new - old
                for i in range(n):
                    resid[i] -= diff * d[i, j]
                theta[j] = new
                adiff = abs(diff)
                if adiff > max_delta:
                    max_delta = adiff
            if new != 0.0:
                active[n_active] = j
                n_active += 1
                anew = abs(new)
                if anew > max_abs:
                    max_abs = anew
        if max_delta < tol * max(1.0, max_abs):
            return sweeps, True
        # Refine on the active set until it stops moving, then re-check all.
        while sweeps < sweep_budget:
            sweeps += 1
            max_delta = 0.0
            max_abs = 0.0
            for jj in range(n_active):
                j = active[jj]
                old = theta[j]
                z = 0.0
                for i in range(n):
                    z += d[i, j] * resid[i]
                z = z * inv_n + old
                if z > rho:
                    new = z - rho
                elif z < -rho:
                    new = z + rho
                else:
                    new = 0.0
                if new != old:
                    diff = new - old
                    for i in range(n):
                        resid[i] -= diff * d[i, j]
                    theta[j] = new
                    adiff = abs(diff)
                    if adiff > max_delta:
                        max_delta = adiff
                anew = abs(new)
                if anew > max_abs:
                    max_abs = anew
            if max_delta < tol * max(1.0, max_abs):
                break
    return sweeps, False


def _check_columns(design):
    design = np.asarray(design, dtype=float)
    if design.ndim != 2:
        raise InputError(f"design must be 2-d, got shape {design.shape}")
    if not np.all(np.isfinite(design)):
        raise InputError("design contains non-finite entries")
    moments = np.mean(design**2, axis=0)
    off = np.abs(moments - 1.0)
    worst = int(np.argmax(off))
    if off[worst] > COLUMN_NORM_TOL:
        raise InputError(
            f"design columns must have unit empirical second moment; "
            f"column {worst} has {moments[worst]:.12f}"
        )
    return design


def _check_response(response, n):
    y = np.asarray(response, dtype=float)
    if y.shape != (n,):
        raise InputError(f"response must have shape ({n},), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise InputError("response contains non-finite entries")
    return y


@dataclass(frozen=True)
class LassoProblem:
    """A single penalized fit: unit-column design, response, penalty rho."""

    design: np.ndarray
    response: np.ndarray
    rho: float

    def __post_init__(self):
        design = _check_columns(self.design)
        y = _check_response(self.response, design.shape[0])
        if not (np.isfinite(self.rho) and self.rho >= 0):
            raise InputError(f"rho must be >= 0, got {self.rho}")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def n(self):
        return self.design.shape[0]

    @property
    def m(self):
        return self.design.shape[1]


@dataclass(frozen=True)
class GridSpec:
    """Geometric penalty grid: n_points from rho_max down to ratio*rho_max."""

    n_points: int = 100
    ratio: float = 1e-3

    def __post_init__(self):
        if self.n_points < 1:
            raise InputError(f"n_points must be >= 1, got {self.n_points}")
        if not (0 < self.ratio <= 1):
            raise InputError(f"ratio must be in (0, 1], got {self.ratio}")

    def build(self, rho_top):
        if rho_top <= 0:
            return np.array([0.0])
        if self.n_points == 1 or self.ratio == 1:
            return np.array([float(rho_top)])
        exponents = np.arange(self.n_points) / (self.n_points - 1)
        return rho_top * self.ratio**exponents


def _resolve_grid(grid_spec, rho_top):
    if grid_spec is None:
        grid_spec = GridSpec()
    if isinstance(grid_spec, GridSpec):
        return grid_spec.build(rho_top)
    if (
        isinstance(grid_spec, tuple)
        and len(grid_spec) == 2
        and isinstance(grid_spec[0], (int, np.integer))
    ):
        return GridSpec(n_points=grid_spec[0], ratio=float(grid_spec[1])).build(rho_top)
    grid = np.asarray(grid_spec, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InputError("explicit grid must be a non-empty 1-d sequence")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise InputError("grid values must be finite and non-negative")
    if grid.size > 1 and not np.all(np.diff(grid) < 0):
        raise InputError("explicit grid must be strictly descending")
    return grid


@dataclass(frozen=True)
class LassoPath:
    """Solutions along a descending penalty grid, with solver metadata."""

    grid: np.ndarray  # (G,) descending penalties, internal scale
    coefficients: np.ndarray  # (G, m)
    n_active: np.ndarray  # (G,) nonzero counts
    converged: np.ndarray  # (G,) bool
    sweeps: np.ndarray  # (G,) total sweeps per point
    rss: np.ndarray  # (G,) residual sum of squares ||y - D theta||^2
    kkt: np.ndarray  # (G,) max stationarity violation per point
    n: int  # sample size (for the table-scale conversion)

    @property
    def grid_table_scale(self):
        """Penalties in LARS-style table scale, n * rho / 2."""
        return self.n * self.grid / 2.0


@dataclass(frozen=True)
class CpReport:
    """Mallows-Cp values along a path: RSS/sigma2 - n + 2 * df."""

    cp_values: np.ndarray  # (G,), NaN at non-converged points
    sigma2_used: float
    argmin_index: int


def rho_max(design, response) -> float:
    """Smallest penalty at which the all-zero solution is optimal.

    Equals (1/n) * max_j |D_j . y| for unit-normalized columns.
    """
    design = _check_columns(design)
    y = _check_response(response, design.shape[0])
    return float(np.max(np.abs(design.T @ y)) / design.shape[0])


def _kkt_violation(design, response, theta, rho):
    grad = design.T @ (response - design @ theta) / design.shape[0]
    viol = np.where(
        theta != 0.0,
        np.abs(grad - rho * np.sign(theta)),
        np.maximum(np.abs(grad) - rho, 0.0),
    )
    return float(viol.max()) if viol.size else 0.0


def _fit_point(design_f, response, rho, theta, sweep_budget):
    """Run the kernel to coordinate convergence, then verify the KKT
    postcondition on a freshly computed residual; tighten and resume if
    accumulated update error left a violation.  Returns
    (sweeps_used, converged, rss, kkt)."""
    total = 0
    tol = COORD_TOL
    while True:
        resid = response - design_f @ theta
        sweeps, ok = _cd_solve(design_f, rho, theta, resid, sweep_budget - total, tol)
        total += sweeps
        if not ok:
            return total, False, float("nan"), float("nan")
        resid = response - design_f @ theta
        kkt = _kkt_violation(design_f, response, theta, rho)
        if kkt <= KKT_TOL:
            return total, True, float(resid @ resid), kkt
        if total >= sweep_budget:
            return total, False, float("nan"), kkt
        tol *= 1e-2


def lasso_fit(problem: LassoProblem, warm_start=None) -> np.ndarray:
    """Solve one penalized least-squares problem.

    Parameters
    ----------
    problem : LassoProblem
    warm_start : np.ndarray, optional
        Initial coefficient vector (copied, not mutated).

    Returns
    -------
    np.ndarray, shape (m,)
        Coefficients satisfying the stationarity conditions within 1e-6:
        |(1/n) D_j . r| <= rho for inactive j and
        (1/n) D_j . r = rho * sign(theta_j) for active j.

    Raises
    ------
    ConvergenceError
        Sweep cap exceeded; the exception carries the last iterate.
    """
    design_f = np.asfortranarray(problem.design)
    if warm_start is None:
        theta = np.zeros(problem.m)
    else:
        theta = np.array(warm_start, dtype=float)
        if theta.shape != (problem.m,):
            raise InputError(
                f"warm_start must have shape ({problem.m},), got {theta.shape}"
            )
    sweeps, ok, _, _ = _fit_point(
        design_f, problem.response, problem.rho, theta, SWEEP_CAP
    )
    if not ok:
        raise ConvergenceError(
            f"coordinate descent did not converge within {SWEEP_CAP} sweeps "
            f"at rho = {problem.rho:.6g}",
            last_iterate=theta,
            sweeps=sweeps,
        )
    return theta


def lasso_path(design, response, grid_spec=None) -> LassoPath:
    """Fit a warm-started path of penalized solutions.

    Parameters
    ----------
    design : np.ndarray, shape (n, m)
        Unit empirical second moment in every column.
    response : np.ndarray, shape (n,)
    grid_spec : GridSpec, (count, ratio) tuple, or explicit descending
        sequence of penalties.  Default: GridSpec(100, 1e-3) anchored at
        rho_max(design, response).

    Raises
    ------
    ConvergenceError
        From any grid point, with the index attached to the message.
    """
    design = _check_columns(design)
    n, m = design.shape
    y = _check_response(response, n)
    top = rho_max(design, y)
    grid = _resolve_grid(grid_spec, top)

    design_f = np.asfortranarray(design)
    n_points = grid.size
    coefficients = np.zeros((n_points, m))
    n_active = np.zeros(n_points, dtype=int)
    converged = np.zeros(n_points, dtype=bool)
    sweeps = np.zeros(n_points, dtype=int)
    rss = np.zeros(n_points)
    kkt = np.zeros(n_points)

    theta = np.zeros(m)
    for g, rho in enumerate(grid):
        used, ok, point_rss, point_kkt = _fit_point(design_f, y, float(rho), theta, SWEEP_CAP)
        if not ok:
            raise ConvergenceError(
                f"path point {g} (rho = {rho:.6g}) did not converge within "
                f"{SWEEP_CAP} sweeps",
                last_iterate=theta.copy(),
                sweeps=used,
            )
        coefficients[g] = theta
        n_active[g] = int(np.count_nonzero(theta))
        converged[g] = True
        sweeps[g] = used
        rss[g] = point_rss
        kkt[g] = point_kkt

    return LassoPath(
        grid=grid,
        coefficients=coefficients,
        n_active=n_active,
        converged=converged,
        sweeps=sweeps,
        rss=rss,
        kkt=kkt,
        n=n,
    )


def cp_statistic(path: LassoPath, response, sigma2) -> CpReport:
    """Mallows-Cp along a path, using the nonzero count as degrees of freedom.

    Cp(rho) = RSS(rho) / sigma2 - n + 2 * df(rho).  Non-converged points
    are excluded from the argmin (their Cp is NaN).
    """
    if not (np.isfinite(sigma2) and sigma2 > 0):
        raise InputError(f"sigma2 must be > 0, got {sigma2}")
    y = np.asarray(response, dtype=float)
    n = y.shape[0]
    if n != path.n:
        raise InputError(f"response length {n} does not match path sample size {path.n}")
    cp = path.rss / sigma2 - n + 2.0 * path.n_active
    cp = np.where(path.converged, cp, np.nan)
    finite = np.isfinite(cp)
    if not finite.any():
        raise NumericalError("no converged grid points; Cp undefined")
    masked = np.where(finite, cp, np.inf)
    return CpReport(
        cp_values=cp,
        sigma2_used=float(sigma2),
        argmin_index=int(np.argmin(masked)),
    )


def objective_value(design, response, theta, rho) -> float:
    """(1/n) * ||y - D theta||^2 + 2 * rho * ||theta||_1."""
    resid = np.asarray(response, float) - np.asarray(design, float) @ theta
    return float(resid @ resid / len(resid) + 2.0 * rho * np.abs(theta).sum())


def kkt_residual(design, response, theta, rho) -> float:
    """Max stationarity violation of a candidate solution."""
    return _kkt_violation(np.asarray(design, float), np.asarray(response, float), theta, rho)
