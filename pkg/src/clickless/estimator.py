"""Moment inversion of no-click probabilities.

Single mode: two transmittances give Tr(gamma) and det(gamma) in closed
form, and from them the squeezing variance and purity. N modes: 2N or more
transmittances give the characteristic-polynomial coefficients f_n of gamma
by (weighted) least squares; the smallest root of that polynomial is the
squeezing variance.

First-order (delta-method) standard errors come from binomial shot noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import (
    DegenerateSettings,
    IllConditioned,
    InsufficientSettings,
    InvalidParameter,
    InvalidProbability,
    NegativeDiscriminant,
    NoRealRoot,
    NonpositiveDeterminant,
    NumericalFailure,
    ZeroNoClick,
)
from .optics import TallyTable

DISCRIMINANT_TOL = 1e-9
MAX_CONDITION = 1e12
ROOT_IMAG_TOL = 1e-8
#: Cluster radii (relative to the root scale) tried in turn when merging perturbed multiple roots.
_CLUSTER_RADII = (0.0,) + tuple(10.0 ** np.arange(-9, 0.25, 0.5))
#: Relative rounding level of least-squares coefficients, multiplied by the condition number.
_ROUNDING = 64 * np.finfo(float).eps
_MULTIPLICITY_SLACK = 100.0
_DIFF_STEP = 1e-6


@dataclass(frozen=True)
class CharPolyCoefficients:
    """Coefficients f_1..f_2N of det(lambda I - gamma) = sum_n (-1)^n f_n lambda^(2N-n)."""

    f: np.ndarray
    mode_count: int
    condition_number: float = float("nan")
    covariance: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        f = np.array(self.f, dtype=float)
        if f.shape != (2 * self.mode_count,):
            raise InvalidParameter(f"expected {2 * self.mode_count} coefficients, got {f.shape}")
        f.flags.writeable = False
        object.__setattr__(self, "f", f)

    @property
    def trace(self) -> float:
        return float(self.f[0])

    @property
    def det(self) -> float:
        return float(self.f[-1])


@dataclass(frozen=True)
class SingleModeEstimate:
    tr_gamma: float
    det_gamma: float
    lam: float
    purity: float
    std_errors: dict
    physical: bool
    physicality_gap: float = 0.0
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "tr_gamma": self.tr_gamma,
            "det_gamma": self.det_gamma,
            "lambda": self.lam,
            "purity": self.purity,
            "std_errors": dict(self.std_errors),
            "physical": self.physical,
            "physicality_gap": self.physicality_gap,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class MultimodeEstimate:
    coefficients: CharPolyCoefficients
    lam: float
    purity: float
    std_errors: dict
    physical: bool
    physicality_gap: float = 0.0
    flags: tuple = ()

    @property
    def det_gamma(self) -> float:
        return self.coefficients.det

    @property
    def tr_gamma(self) -> float:
        return self.coefficients.trace

    def to_dict(self) -> dict:
        return {
            "mode_count": self.coefficients.mode_count,
            "f": self.coefficients.f.tolist(),
            "condition_number": self.coefficients.condition_number,
            "tr_gamma": self.tr_gamma,
            "det_gamma": self.det_gamma,
            "lambda": self.lam,
            "purity": self.purity,
            "std_errors": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                           for k, v in self.std_errors.items()},
            "physical": self.physical,
            "physicality_gap": self.physicality_gap,
            "flags": list(self.flags),
        }


# -- validation helpers ---------------------------------------------------

def _check_probability(p):
    if not 0 < p <= 1:
        raise InvalidProbability(f"no-click probability must lie in (0, 1], got {p}")


def _check_transmittance(t):
    if not 0 < t <= 1:
        raise InvalidParameter(f"transmittance must lie in (0, 1], got {t}")


# -- single mode ----------------------------------------------------------

def invert_single_mode(P1: float, T1: float, P2: float, T2: float) -> tuple[float, float]:
    """Trace and determinant of a zero-mean single-mode covariance from two settings.

    Solves det(T gamma + (2-T) I) = 4/P^2 at both transmittances. No
    projection onto physical values is applied.
    """
    for p in (P1, P2):
        _check_probability(p)
    for t in (T1, T2):
        _check_transmittance(t)
    if abs(T1 - T2) < 1e-6:
        raise DegenerateSettings(f"transmittances {T1} and {T2} are too close to invert")
    tr = 2 / (T2 - T1) * (T2 / (T1 * P1**2) - T1 / (T2 * P2**2)) + 2 - 2 / T1 - 2 / T2
    det = (2 / (T1 - T2) * ((2 - T2) / (T1 * P1**2) - (2 - T1) / (T2 * P2**2))
           + (2 - T1) * (2 - T2) / (T1 * T2))
    return float(tr), float(det)


def lambda_single_mode(tr_gamma: float, det_gamma: float) -> float:
    """Smaller eigenvalue of a 2x2 symmetric matrix from its trace and determinant."""
    disc = tr_gamma**2 - 4 * det_gamma
    if disc < 0:
        if disc < -DISCRIMINANT_TOL * max(1.0, tr_gamma**2):
            raise NegativeDiscriminant(
                f"Tr^2 - 4 det = {disc:.3g} < 0: trace and determinant are inconsistent"
            )
        disc = 0.0
    return float(0.5 * (tr_gamma - np.sqrt(disc)))


def purity_from_det(det_gamma: float) -> float:
    if not det_gamma > 0:
        raise NonpositiveDeterminant(f"det(gamma) = {det_gamma} must be positive")
    return float(det_gamma**-0.5)


# -- multimode ------------------------------------------------------------

def design_matrix(T, n_modes: int) -> np.ndarray:
    """Rows T^n (2-T)^(2N-n), n = 1..2N."""
    T = np.asarray(T, dtype=float)[:, None]
    n = np.arange(1, 2 * n_modes + 1)[None, :]
    return T**n * (2 - T) ** (2 * n_modes - n)


def _distinct_count(T) -> int:
    t = np.sort(np.asarray(T, dtype=float))
    return int(1 + np.sum(np.diff(t) >= 1e-6))


def solve_multimode(P, T, n_modes: int, var_p=None) -> CharPolyCoefficients:
    """Coefficients f_1..f_2N from no-click probabilities at transmittances ``T``.

    ``var_p`` holds the sampling variances of the probabilities. With more
    than 2N settings and finite variances the fit is weighted by the inverse
    variance of 4^N / P^2; the returned coefficients carry their propagated
    covariance in either case (zero when ``var_p`` is None).
    """
    P = np.asarray(P, dtype=float)
    T = np.asarray(T, dtype=float)
    dim = 2 * n_modes
    if P.shape != T.shape or P.ndim != 1:
        raise InvalidParameter("P and T must be 1-D sequences of equal length")
    for p in P:
        _check_probability(p)
    for t in T:
        _check_transmittance(t)
    if P.size < dim or _distinct_count(T) < dim:
        raise InsufficientSettings(
            f"{n_modes}-mode inversion needs {dim} distinct transmittances, got {_distinct_count(T)}"
        )

    a = design_matrix(T, n_modes)
    y = 4.0**n_modes / P**2 - (2 - T) ** dim
    cond = float(np.linalg.cond(a))
    if not cond <= MAX_CONDITION:
        raise IllConditioned(f"design matrix condition number {cond:.3g} exceeds {MAX_CONDITION:.0e}")

    var_y = None if var_p is None else (2 * 4.0**n_modes / P**3) ** 2 * np.asarray(var_p, dtype=float)
    if var_y is not None and P.size > dim and np.all(var_y > 0) and np.all(np.isfinite(var_y)):
        w = 1 / var_y
    else:
        w = np.ones_like(y)
    sw = np.sqrt(w)
    f, *_ = np.linalg.lstsq(a * sw[:, None], y * sw, rcond=None)

    if var_y is None:
        cov = np.zeros((dim, dim))
    else:
        # sandwich form so unweighted fits get the right covariance too
        ata_inv = np.linalg.inv(a.T @ (w[:, None] * a))
        meat = a.T @ ((w**2 * var_y)[:, None] * a)
        cov = ata_inv @ meat @ ata_inv
    return CharPolyCoefficients(f, n_modes, cond, cov)


def _clusters(z: np.ndarray, radius: float) -> list[np.ndarray]:
    """Single-linkage groups of points closer than ``radius``."""
    parent = list(range(z.size))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(z.size):
        for j in range(i + 1, z.size):
            if abs(z[i] - z[j]) < radius:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(z.size):
        groups.setdefault(find(i), []).append(z[i])
    return [np.array(g) for g in groups.values()]


def _rounding_noise(f: CharPolyCoefficients) -> np.ndarray:
    """Absolute rounding level of each f_n after the least-squares solve.

    Sampling noise is deliberately ignored: merging is meant to undo the
    splitting of exact multiple roots, not to smooth over noisy data.
    """
    cond = f.condition_number if np.isfinite(f.condition_number) else 1.0
    return _ROUNDING * max(cond, 1.0) * np.abs(f.f)


def _taylor_with_tolerance(poly: np.ndarray, noise: np.ndarray, c: complex, m: int):
    """Taylor coefficients t_0..t_m of ``poly`` at ``c`` and their noise-induced tolerances."""
    deg = poly.size - 1
    ascending = poly[::-1]
    noise_asc = np.concatenate([noise[::-1], [0.0]])  # leading coefficient is exact
    i = np.arange(deg + 1)
    t, tol = [], []
    for k in range(m + 1):
        binom = np.array([comb(int(j), k) if j >= k else 0 for j in i], dtype=float)
        shift = np.clip(i - k, 0, None)
        t.append(abs(np.sum(ascending * binom * c**shift)))
        tol.append(_MULTIPLICITY_SLACK * np.sum(noise_asc * binom * np.abs(c) ** shift))
    return np.array(t), np.array(tol)


def _resolved(poly, noise, groups) -> bool:
    """Every group is an m-fold root within noise and its uncertainty radius
    (tol_0 / |t_m|)^(1/m) is well below the distance to the other groups."""
    means = np.array([g.mean() for g in groups])
    for j, g in enumerate(groups):
        m = g.size
        t, tol = _taylor_with_tolerance(poly, noise, means[j], m)
        if np.any(t[:m] > tol[:m]) or t[m] == 0:
            return False
        rho = (max(tol[0], t[0]) / t[m]) ** (1.0 / m)
        others = np.delete(means, j)
        if others.size and rho >= 0.5 * np.min(np.abs(others - means[j])):
            return False
    return True


def lambda_multimode(f: CharPolyCoefficients) -> float:
    """Smallest real root of the characteristic polynomial.

    Roots are companion-matrix eigenvalues. A k-fold root comes back as k
    roots spread by about (noise)^(1/k), often off the real axis, so roots
    are merged with a growing single-linkage radius until every group is a
    numerically consistent root of its own multiplicity (judged against the
    coefficient noise). Each group is replaced by its mean, which is
    accurate to the noise level even when the members are not.
    """
    coeffs = np.asarray(f.f, dtype=float)
    if not np.all(np.isfinite(coeffs)):
        raise NoRealRoot("non-finite polynomial coefficients")
    n = np.arange(1, coeffs.size + 1)
    poly = np.concatenate([[1.0], (-1.0) ** n * coeffs])
    noise = _rounding_noise(f)
    try:
        roots = np.roots(poly)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"companion eigenvalues failed: {exc}") from exc
    scale = max(1.0, float(np.max(np.abs(coeffs) ** (1.0 / n))))
    imag_tol = ROOT_IMAG_TOL * scale

    groups = [np.array([z]) for z in roots]
    for radius in _CLUSTER_RADII:
        groups = _clusters(roots, radius * scale)
        if _resolved(poly, noise, groups):
            break
    means = [g.mean() for g in groups]
    real = [c.real for c in means if abs(c.imag) < imag_tol]
    if real:
        return float(min(real))
    raise NoRealRoot(f"characteristic polynomial has no real root (roots {np.round(roots, 6)})")


# -- observations and error propagation -----------------------------------

def wilson_halfwidth(count: int, shots: int, z: float = 1.0) -> float:
    p = count / shots
    denom = 1 + z**2 / shots
    return float(z / denom * np.sqrt(p * (1 - p) / shots + z**2 / (4 * shots**2)))


@dataclass(frozen=True)
class Observation:
    """A measured (or exact, ``shots=None``) no-click probability at one setting."""

    T: float
    eta: float
    probability: float
    shots: int | None = None
    label: str = ""
    phi: float = 0.0


def observations(source):
    """Observed probabilities, effective transmittances, their variances and flags.

    ``source`` is a :class:`TallyTable` or a sequence of :class:`Observation`.
    Rows where every shot clicked are rejected; rows where no shot clicked use
    the Wilson half-width as standard error and are flagged. Exact rows have
    zero variance.
    """
    rows = list(source.rows if isinstance(source, TallyTable) else source)
    if not rows:
        raise InsufficientSettings("no observations")
    p, t, var, flags = [], [], [], []
    for row in rows:
        if isinstance(row, Observation):
            ph, shots = row.probability, row.shots
            count = None if shots is None else ph * shots
        else:
            ph, shots, count = row.frequency if row.shots > 0 else 0.0, row.shots, row.no_click_count
        if shots is not None and shots <= 0:
            raise InvalidParameter(f"row {row.label!r} has no shots")
        if ph == 0:
            raise ZeroNoClick(f"row {row.label!r}: every shot clicked, 1/P^2 diverges")
        _check_probability(ph)
        if shots is None:
            var.append(0.0)
        elif ph == 1:
            var.append(wilson_halfwidth(count, shots) ** 2)
            flags.append(f"wilson:{row.label}")
        else:
            var.append(ph * (1 - ph) / shots)
        p.append(ph)
        t.append(row.eta * row.T)
    return np.array(p), np.array(t), np.array(var), tuple(flags)


def numerical_gradient(fn, x: np.ndarray) -> np.ndarray:
    """Central differences with step 1e-6 relative; failures give infinite slopes."""
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for i in range(x.size):
        h = _DIFF_STEP * max(abs(x[i]), 1e-12)
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        try:
            grad[i] = (fn(up) - fn(dn)) / (2 * h)
        except (NumericalFailure, FloatingPointError, ValueError):
            grad[i] = np.inf
    return grad


def _propagate(grad: np.ndarray, cov: np.ndarray) -> float:
    if not np.any(cov):
        return 0.0
    if not np.all(np.isfinite(grad)):
        return float("inf")
    return float(np.sqrt(max(grad @ cov @ grad, 0.0)))


def _single_mode_cov(P, T, var_p) -> np.ndarray:
    """Covariance of (tr, det) from the two-setting linear inversion."""
    # y = 4/P^2 = T^2 det + T(2-T) tr + (2-T)^2, linear in (tr, det)
    a = np.column_stack([T * (2 - T), T**2])
    dy = -8 / P**3
    jac = np.linalg.solve(a, np.diag(dy))
    return jac @ np.diag(var_p) @ jac.T


def estimate_single_mode(P, T, var_p=None, flags=()) -> SingleModeEstimate:
    """Invariants of a zero-mean single-mode state from two or more settings."""
    P = np.asarray(P, dtype=float)
    T = np.asarray(T, dtype=float)
    if P.size < 2:
        raise InsufficientSettings("single-mode inversion needs at least two settings")
    if P.size == 2:
        tr, det = invert_single_mode(P[0], T[0], P[1], T[1])
        cov = np.zeros((2, 2)) if var_p is None else _single_mode_cov(P, T, np.asarray(var_p))
    else:
        coeffs = solve_multimode(P, T, 1, var_p)
        tr, det = coeffs.f
        cov = coeffs.covariance
    pur = purity_from_det(det)
    flags = tuple(flags)
    x = np.array([tr, det])
    disc = tr**2 - 4 * det
    se_disc = _propagate(np.array([2 * tr, -4.0]), cov)

    clipped = False

    def lam_of(v):
        return 0.5 * v[0] if clipped else lambda_single_mode(*v)

    try:
        lam = lambda_single_mode(tr, det)
    except NegativeDiscriminant:
        if disc >= -3 * se_disc:
            # eigenvalues degenerate within shot noise
            clipped = True
            lam = 0.5 * tr
            flags += ("discriminant-clipped",)
        else:
            lam = float("nan")
            flags += ("negative-discriminant",)

    se_tr, se_det = np.sqrt(np.clip(np.diag(cov), 0, None))
    se = {
        "tr_gamma": float(se_tr),
        "det_gamma": float(se_det),
        "lambda": _propagate(numerical_gradient(lam_of, x), cov) if np.isfinite(lam) else float("nan"),
        "purity": _propagate(numerical_gradient(lambda v: purity_from_det(v[1]), x), cov),
    }
    physical = det >= 1 - 3 * se_det and tr >= 2 - 3 * se_tr
    gap = max(0.0, 1 - det, 2 - tr)
    return SingleModeEstimate(tr, det, lam, pur, se, bool(physical), float(gap), flags)


def estimate_multimode(P, T, n_modes: int, var_p=None, flags=()) -> MultimodeEstimate:
    coeffs = solve_multimode(P, T, n_modes, var_p)
    flags = tuple(flags)
    try:
        lam = lambda_multimode(coeffs)
    except NoRealRoot:
        # determinant-based quantities stay usable; the squeezing variance is undefined
        lam = float("nan")
        flags += ("no-real-root",)
    pur = purity_from_det(coeffs.det)
    cov = coeffs.covariance

    def lam_of(f):
        return lambda_multimode(CharPolyCoefficients(f, n_modes, coeffs.condition_number))

    se_f = np.sqrt(np.clip(np.diag(cov), 0, None))
    unit_last = np.zeros(2 * n_modes)
    unit_last[-1] = -0.5 * coeffs.det**-1.5
    se = {
        "f": se_f,
        "tr_gamma": float(se_f[0]),
        "det_gamma": float(se_f[-1]),
        "lambda": _propagate(numerical_gradient(lam_of, coeffs.f), cov) if np.isfinite(lam) else float("nan"),
        "purity": _propagate(unit_last, cov),
    }
    physical = coeffs.det >= 1 - 3 * se_f[-1] and coeffs.trace >= 2 * n_modes - 3 * se_f[0]
    gap = max(0.0, 1 - coeffs.det, 2 * n_modes - coeffs.trace)
    if n_modes >= 4:
        flags += ("condition-warning:N>=4",)
    return MultimodeEstimate(coeffs, lam, pur, se, bool(physical), float(gap), flags)


def estimate_from_tally(tally, n_modes: int = 1):
    """Run the single-mode or N-mode estimator on a tally table or observation list."""
    p, t, var, flags = observations(tally)
    if n_modes == 1:
        return estimate_single_mode(p, t, var, flags)
    return estimate_multimode(p, t, n_modes, var, flags)


def propagate_errors(tally: TallyTable, kind: str = "single-mode", n_modes: int = 1) -> dict:
    """Delta-method standard errors for the invariants recovered from ``tally``.

    ``kind`` is ``"single-mode"`` or ``"multimode"``.
    """
    if kind == "single-mode":
        return estimate_from_tally(tally, 1).std_errors
    if kind == "multimode":
        return estimate_from_tally(tally, n_modes).std_errors
    raise InvalidParameter(f"unknown estimate kind {kind!r}")
