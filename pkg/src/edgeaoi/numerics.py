"""Special functions and stochastic-matrix utilities used by the analyses."""

from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp

ENTRY_TOL = 1e-12
ROW_SUM_TOL = 1e-9
PROBABILITY_TOL = 1e-9


class NumericsError(ArithmeticError):
    """A numerical contract was violated (bad matrix, divergent series, ...)."""


def poisson_pmf(count, mean):
    """Poisson probability mass, evaluated in log space to stay finite for
    large ``mean`` and vectorized over either argument."""
    count = np.asarray(count)
    mean = np.asarray(mean, dtype=float)
    if np.any(count < 0) or np.any(mean < 0):
        raise ValueError("poisson_pmf needs count >= 0 and mean >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = count * np.log(mean) - mean - _sp.gammaln(count + 1)
    out = np.where(mean > 0, np.exp(logp), np.where(count == 0, 1.0, 0.0))
    if out.ndim == 0:
        return float(out)
    return out


def lower_incomplete_gamma(k: int, x: float) -> float:
    """Integral of ``exp(-t) t^(k-1)`` over [0, x] for integer ``k >= 1``."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"order k must be an integer >= 1, got {k!r}")
    if x < 0:
        raise ValueError(f"argument x must be nonnegative, got {x!r}")
    if k > 170:
        # (k-1)! overflows double precision; callers use the regularized form.
        raise OverflowError("use erlang_cdf for orders above 170")
    return math.gamma(k) * float(_sp.gammainc(k, x))


def erlang_cdf(k: int, rate: float, t):
    """CDF at ``t`` of an Erlang(k, rate) sum of exponentials; equivalently the
    regularized lower incomplete gamma of integer order ``k`` at ``rate*t``."""
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"shape k must be an integer >= 1, got {k!r}")
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate!r}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    out = _sp.gammainc(k, rate * t)
    if out.ndim == 0:
        return float(out)
    return out


def check_stochastic(matrix, *, substochastic: bool = False,
                     entry_tol: float = ENTRY_TOL, row_tol: float = ROW_SUM_TOL):
    """Validate a (sub)stochastic matrix and return it with entries clipped to
    [0, 1].  Violations beyond tolerance raise instead of being clamped."""
    P = np.asarray(matrix, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise NumericsError(f"expected a square matrix, got shape {P.shape}")
    if np.any(P < -entry_tol) or np.any(P > 1.0 + entry_tol):
        worst = P.min() if P.min() < -entry_tol else P.max()
        raise NumericsError(f"matrix entry {worst!r} outside [0, 1] beyond tolerance")
    sums = P.sum(axis=1)
    if substochastic:
        if np.any(sums > 1.0 + row_tol):
            raise NumericsError(f"substochastic row sum {sums.max()!r} exceeds 1")
    elif np.any(np.abs(sums - 1.0) > row_tol):
        worst = sums[np.argmax(np.abs(sums - 1.0))]
        raise NumericsError(f"row sum {worst!r} differs from 1 beyond tolerance")
    return np.clip(P, 0.0, 1.0)


def clamp_probability(values, tol: float = PROBABILITY_TOL):
    """Clip values to [0, 1]; excursions beyond ``tol`` are an error."""
    arr = np.asarray(values, dtype=float)
    if np.any(arr < -tol) or np.any(arr > 1.0 + tol):
        worst = arr.min() if arr.min() < -tol else arr.max()
        raise NumericsError(f"probability {worst!r} outside [0, 1] beyond tolerance")
    out = np.clip(arr, 0.0, 1.0)
    if out.ndim == 0:
        return float(out)
    return out


def stationary_distribution(P, support=None, residual_tol: float = 1e-9):
    """Stationary probability vector of a row-stochastic matrix.

    Solves the balance equations directly (one linear solve with the
    normalization constraint replacing a redundant equation), which also
    converges for periodic chains where plain power iteration would not.
    ``support`` optionally restricts the solve to the single recurrent class;
    states outside it get probability zero.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if support is None:
        idx = np.arange(n)
    else:
        idx = np.asarray(sorted(support), dtype=int)
        if idx.size == 0:
            raise NumericsError("empty support")
    A = P[np.ix_(idx, idx)]
    check_stochastic(A)

    m = idx.size
    M = A.T - np.eye(m)
    M[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    try:
        v = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        stacked = np.vstack([A.T - np.eye(m), np.ones((1, m))])
        target = np.zeros(m + 1)
        target[-1] = 1.0
        v, *_ = np.linalg.lstsq(stacked, target, rcond=None)

    if v.min() < -1e-10:
        raise NumericsError(f"stationary solve produced negative mass {v.min()!r}")
    v = np.clip(v, 0.0, None)
    v /= v.sum()

    pi = np.zeros(n)
    pi[idx] = v
    residual = np.max(np.abs(pi @ P - pi))
    if residual > residual_tol:
        raise NumericsError(
            f"stationary distribution residual {residual!r} exceeds {residual_tol!r}"
        )
    if abs(pi.sum() - 1.0) > 1e-10:
        raise NumericsError("stationary distribution does not normalize")
    return pi


def matrix_power(P, m: int):
    """m-step transition matrix, with the 0th power being the identity."""
    if not isinstance(m, (int, np.integer)) or m < 0:
        raise ValueError(f"exponent must be a nonnegative integer, got {m!r}")
    P = np.asarray(P, dtype=float)
    out = np.linalg.matrix_power(P, int(m))
    return check_stochastic(out)


def spectral_radius_estimate(Q, steps: int = 50) -> float:
    """Power-iteration estimate of the spectral radius of ``abs(Q)``."""
    A = np.abs(np.asarray(Q, dtype=float))
    v = np.ones(A.shape[0])
    rho = 0.0
    for _ in range(steps):
        w = A @ v
        top = w.max()
        if top <= 0.0:
            return 0.0
        rho = top / v.max()
        v = w / top
    return rho


def _require_contractive(Q):
    rho = spectral_radius_estimate(Q)
    if rho >= 1.0 - 1e-9:
        raise NumericsError(
            f"spectral radius estimate {rho!r} too close to 1; series diverges"
        )


def neumann_first_moment(Q):
    """Closed form of ``sum_{m>=1} m Q^(m-1)``, i.e. ``(I - Q)^-2``.

    Evaluated with two linear solves, which is exact whenever the series
    converges, unlike approximate diagonalization."""
    Q = np.asarray(Q, dtype=float)
    _require_contractive(Q)
    eye = np.eye(Q.shape[0])
    first = np.linalg.solve(eye - Q, eye)
    return np.linalg.solve(eye - Q, first)


def neumann_second_moment(Q):
    """Closed form of ``sum_{m>=1} m^2 Q^(m-1)``, i.e. ``(I + Q)(I - Q)^-3``."""
    Q = np.asarray(Q, dtype=float)
    _require_contractive(Q)
    eye = np.eye(Q.shape[0])
    inv3 = eye
    for _ in range(3):
        inv3 = np.linalg.solve(eye - Q, inv3)
    return (eye + Q) @ inv3


def perturbed_diagonalization_moments(Q, variance: float = 1e-6,
                                      max_attempts: int = 5, rng=None):
    """Approximate the two Neumann series through eigendecomposition.

    Kept as a comparison path: when ``Q`` is defective its eigenvector matrix
    is singular, so a small Gaussian perturbation of the diagonal is applied
    and the decomposition retried.  The first attempt uses no noise, making
    the result exact for diagonalizable inputs.  Returns ``(first, second)``
    moment matrices; accuracy degrades with the perturbation size."""
    Q = np.asarray(Q, dtype=float)
    _require_contractive(Q)
    if rng is None:
        rng = np.random.default_rng(0)
    n = Q.shape[0]
    sigma = math.sqrt(variance)
    last_error = None
    for attempt in range(max_attempts):
        perturbed = Q if attempt == 0 else Q + np.diag(rng.normal(0.0, sigma, n))
        vals, vecs = np.linalg.eig(perturbed)
        try:
            cond = np.linalg.cond(vecs)
        except np.linalg.LinAlgError:
            continue
        if not np.isfinite(cond) or cond > 1e12:
            last_error = f"eigenvector condition number {cond!r}"
            continue
        inv = np.linalg.inv(vecs)
        first = (vecs * (1.0 / (1.0 - vals) ** 2)) @ inv
        second = (vecs * ((1.0 + vals) / (1.0 - vals) ** 3)) @ inv
        return np.real(first), np.real(second)
    raise NumericsError(
        f"diagonalization failed after {max_attempts} attempts ({last_error})"
    )
