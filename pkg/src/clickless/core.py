r"""Gaussian states of N bosonic modes and exact linear-optics transformations.

Conventions used throughout the package:

* quadratures are interleaved, ``r = (x1, p1, x2, p2, ...)`` with
  :math:`[x_j, p_k] = i\delta_{jk}`;
* the covariance matrix is the symmetrized second moment
  :math:`\gamma_{jk} = \langle\Delta r_j\Delta r_k + \Delta r_k\Delta r_j\rangle`,
  so the **vacuum covariance is the identity** (not I/2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidParameter,
    NumericalFailure,
    Unphysical,
)

CONVENTION = "vacuum=identity"
TOL_PHYS = 1e-10
_SYM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form with 2x2 blocks ``[[0, 1], [-1, 0]]``."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def rotation(phi: float) -> np.ndarray:
    """U(phi) = [[cos, sin], [-sin, cos]]; a phase shift on mode B sends sigma_AB to sigma_AB @ U(phi)."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [-s, c]])


@dataclass(frozen=True, eq=False)
class QuadratureVector:
    entries: np.ndarray

    def __post_init__(self):
        v = _frozen(np.ravel(self.entries))
        if v.size % 2:
            raise DimensionMismatch(f"quadrature vector needs even length, got {v.size}")
        object.__setattr__(self, "entries", v)

    @property
    def mode_count(self) -> int:
        return self.entries.size // 2

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other):
        return type(other) is type(self) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.entries.shape, self.entries.tobytes()))


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Real symmetric 2N x 2N covariance matrix.

    Construction rejects asymmetric input beyond rounding and then
    symmetrizes exactly. Physicality is checked by :func:`make_state`, not
    here, so unphysical matrices can still be inspected.
    """

    entries: np.ndarray

    def __post_init__(self):
        g = np.array(self.entries, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
            raise DimensionMismatch(f"covariance must be 2N x 2N, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise InvalidParameter("covariance has non-finite entries")
        scale = max(1.0, float(np.max(np.abs(g))))
        if np.max(np.abs(g - g.T)) > _SYM_TOL * scale:
            raise InvalidParameter("covariance matrix is not symmetric")
        object.__setattr__(self, "entries", _frozen((g + g.T) / 2))

    @property
    def mode_count(self) -> int:
        return self.entries.shape[0] // 2

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other):
        return type(other) is type(self) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash((self.entries.shape, self.entries.tobytes()))


@dataclass(frozen=True)
class GaussianState:
    """Displacement vector and covariance matrix of an N-mode Gaussian state.

    Build instances with :func:`make_state`, which runs the physicality
    check and fills ``spectrum`` and ``marginal``.
    """

    displacement: QuadratureVector
    covariance: CovarianceMatrix
    spectrum: tuple = field(default=(), compare=False)
    marginal: bool = field(default=False, compare=False)

    @property
    def mode_count(self) -> int:
        return self.covariance.mode_count

    @property
    def xi(self) -> np.ndarray:
        return self.displacement.entries

    @property
    def gamma(self) -> np.ndarray:
        return self.covariance.entries

    def to_dict(self) -> dict:
        return {
            "convention": CONVENTION,
            "displacement": self.xi.tolist(),
            "covariance": self.gamma.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianState":
        conv = data.get("convention", CONVENTION)
        if conv != CONVENTION:
            raise InvalidParameter(f"unsupported convention {conv!r}, expected {CONVENTION!r}")
        return make_state(data["displacement"], data["covariance"])


def make_state(xi, gamma) -> GaussianState:
    """Validate and assemble a Gaussian state.

    Raises:
        DimensionMismatch: displacement length differs from 2N.
        Unphysical: a symplectic eigenvalue is below ``1 - TOL_PHYS``.
    """
    if not isinstance(gamma, CovarianceMatrix):
        gamma = CovarianceMatrix(np.asarray(gamma, dtype=float))
    if not isinstance(xi, QuadratureVector):
        xi = QuadratureVector(np.asarray(xi, dtype=float))
    if xi.entries.size != gamma.entries.shape[0]:
        raise DimensionMismatch(
            f"displacement has length {xi.entries.size}, covariance is "
            f"{gamma.entries.shape[0]}x{gamma.entries.shape[0]}"
        )
    spec = symplectic_spectrum(gamma)
    low = min(spec)
    if low < 1 - TOL_PHYS:
        raise Unphysical(f"symplectic eigenvalue {low:.12g} < 1 violates the uncertainty principle")
    return GaussianState(xi, gamma, tuple(spec), marginal=bool(low < 1))


def _state(xi, gamma) -> GaussianState:
    return make_state(QuadratureVector(xi), CovarianceMatrix(gamma))


# -- standard states ------------------------------------------------------

def vacuum(n_modes: int = 1) -> GaussianState:
    if n_modes < 1:
        raise InvalidParameter("need at least one mode")
    return _state(np.zeros(2 * n_modes), np.eye(2 * n_modes))


def thermal(nbar: float) -> GaussianState:
    if nbar < 0:
        raise InvalidParameter(f"mean photon number must be >= 0, got {nbar}")
    return _state(np.zeros(2), (2 * nbar + 1) * np.eye(2))


def squeezed_vacuum(r: float, theta: float = 0.0) -> GaussianState:
    """Squeezed vacuum; ``theta`` rotates the squeezed quadrature away from x."""
    rot = rotation(-theta)
    g = rot @ np.diag([np.exp(-2 * r), np.exp(2 * r)]) @ rot.T
    return _state(np.zeros(2), g)


def coherent(alpha: complex) -> GaussianState:
    alpha = complex(alpha)
    return _state(np.sqrt(2) * np.array([alpha.real, alpha.imag]), np.eye(2))


def two_mode_squeezed_vacuum(r: float) -> GaussianState:
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    sigma = s * np.diag([1.0, -1.0])
    g = np.block([[c * np.eye(2), sigma], [sigma.T, c * np.eye(2)]])
    return _state(np.zeros(4), g)


def displace(state: GaussianState, xi) -> GaussianState:
    """Shift the mean quadratures by ``xi``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != state.xi.shape:
        raise DimensionMismatch(f"displacement shape {xi.shape} != {state.xi.shape}")
    return _state(state.xi + xi, state.gamma)


def tensor(*states: GaussianState) -> GaussianState:
    """Product state; modes are ordered as the arguments."""
    if not states:
        raise InvalidParameter("tensor() needs at least one state")
    xi = np.concatenate([s.xi for s in states])
    dims = [s.gamma.shape[0] for s in states]
    g = np.zeros((sum(dims), sum(dims)))
    k = 0
    for s, d in zip(states, dims):
        g[k:k + d, k:k + d] = s.gamma
        k += d
    return _state(xi, g)


def random_covariance(n_modes: int, rng: np.random.Generator, max_squeezing: float = 1.0,
                      max_nbar: float = 2.0) -> np.ndarray:
    """Random physical covariance matrix: passive o squeezing o passive acting on thermal noise."""
    from scipy.stats import unitary_group

    def passive():
        u = unitary_group.rvs(n_modes, random_state=rng) if n_modes > 1 else np.exp(
            2j * np.pi * rng.random()) * np.ones((1, 1))
        o = np.zeros((2 * n_modes, 2 * n_modes))
        o[0::2, 0::2] = u.real
        o[0::2, 1::2] = -u.imag
        o[1::2, 0::2] = u.imag
        o[1::2, 1::2] = u.real
        return o

    r = rng.uniform(0, max_squeezing, n_modes)
    sq = np.diag(np.exp(np.ravel(np.column_stack([-r, r]))))
    nu = 1 + 2 * rng.uniform(0, max_nbar, n_modes)
    s = passive() @ sq @ passive()
    g = s @ np.diag(np.repeat(nu, 2)) @ s.T
    return (g + g.T) / 2


# -- transformations ------------------------------------------------------

def _check_mode(state: GaussianState, mode: int) -> int:
    if not isinstance(mode, (int, np.integer)) or not 0 <= mode < state.mode_count:
        raise IndexOutOfRange(f"mode {mode} out of range for {state.mode_count}-mode state")
    return int(mode)


def _transform(state: GaussianState, s: np.ndarray, noise=None) -> GaussianState:
    g = s @ state.gamma @ s.T
    if noise is not None:
        g = g + noise
    return _state(s @ state.xi, (g + g.T) / 2)


def beam_splitter_matrix(n_modes: int, mode_a: int, mode_b: int, T: float) -> np.ndarray:
    """Orthogonal symplectic matrix of a beam splitter with transmittance ``T``.

    out_a = sqrt(T) in_a + sqrt(1-T) in_b, out_b = -sqrt(1-T) in_a + sqrt(T) in_b,
    applied identically to x and p.
    """
    t, r = np.sqrt(T), np.sqrt(1 - T)
    s = np.eye(2 * n_modes)
    for q in (0, 1):
        a, b = 2 * mode_a + q, 2 * mode_b + q
        s[a, a], s[a, b] = t, r
        s[b, a], s[b, b] = -r, t
    return s


def apply_beam_splitter(state: GaussianState, mode_a: int, mode_b: int, T: float) -> GaussianState:
    mode_a, mode_b = _check_mode(state, mode_a), _check_mode(state, mode_b)
    if mode_a == mode_b:
        raise IndexOutOfRange("beam splitter needs two distinct modes")
    if not 0 <= T <= 1:
        raise InvalidParameter(f"transmittance must lie in [0, 1], got {T}")
    return _transform(state, beam_splitter_matrix(state.mode_count, mode_a, mode_b, T))


def apply_phase_shift(state: GaussianState, mode: int, phi: float) -> GaussianState:
    """Phase shift exp(i phi n) on one mode; its quadratures go to U(phi)^T r."""
    mode = _check_mode(state, mode)
    s = np.eye(2 * state.mode_count)
    s[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] = rotation(phi).T
    return _transform(state, s)


def apply_loss(state: GaussianState, mode: int, eta: float) -> GaussianState:
    """Pure loss: beam splitter of transmittance ``eta`` against vacuum, ancilla traced out."""
    mode = _check_mode(state, mode)
    if not 0 <= eta <= 1:
        raise InvalidParameter(f"efficiency must lie in [0, 1], got {eta}")
    scale = np.ones(2 * state.mode_count)
    scale[2 * mode:2 * mode + 2] = np.sqrt(eta)
    noise = np.zeros_like(state.gamma)
    noise[2 * mode, 2 * mode] = noise[2 * mode + 1, 2 * mode + 1] = 1 - eta
    return _transform(state, np.diag(scale), noise)


def reduce(state: GaussianState, modes: Iterable[int]) -> GaussianState:
    """Marginal state on ``modes`` (kept in the order given)."""
    modes = [_check_mode(state, m) for m in modes]
    if not modes:
        raise IndexOutOfRange("need at least one mode to keep")
    if len(set(modes)) != len(modes):
        raise IndexOutOfRange(f"repeated modes in {modes}")
    idx = np.ravel([[2 * m, 2 * m + 1] for m in modes])
    return _state(state.xi[idx], state.gamma[np.ix_(idx, idx)])


# -- invariants -----------------------------------------------------------

def _matrix(gamma) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] % 2:
        raise DimensionMismatch(f"covariance must be 2N x 2N, got shape {g.shape}")
    return g


def symplectic_spectrum(gamma) -> list[float]:
    """Symplectic eigenvalues of ``gamma``, sorted descending.

    These are the moduli of the eigenvalues of i*Omega*gamma, which come in
    +/- pairs. For positive-definite input the Hermitian matrix
    i g^(1/2) Omega g^(1/2) with the same spectrum is diagonalized instead.
    """
    g = _matrix(gamma)
    n = g.shape[0] // 2
    omega = symplectic_form(n)
    try:
        w, v = np.linalg.eigh(g)
        if w.min() > 0:
            root = (v * np.sqrt(w)) @ v.T
            ev = np.linalg.eigvalsh(1j * root @ omega @ root)
        else:
            ev = np.linalg.eigvals(1j * omega @ g)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigen-solver failed: {exc}") from exc
    mags = np.sort(np.abs(ev))[::-1]
    return [float(x) for x in (mags[0::2] + mags[1::2]) / 2]


def squeezing_variance(gamma) -> float:
    """Smallest eigenvalue of the covariance matrix: the minimal quadrature variance."""
    try:
        return float(np.linalg.eigvalsh(_matrix(gamma))[0])
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc


def purity(gamma) -> float:
    d = float(np.linalg.det(_matrix(gamma)))
    if not d > 0:
        raise NumericalFailure(f"determinant {d} is not positive")
    return d ** -0.5


def charpoly_coefficients(gamma) -> np.ndarray:
    """Elementary symmetric polynomials e_1..e_2N of the eigenvalues of ``gamma``.

    det(lambda*I - gamma) = sum_n (-1)^n e_n lambda^(2N-n), so e_1 is the trace
    and e_2N the determinant.
    """
    w = np.linalg.eigvalsh(_matrix(gamma))
    return np.poly(w)[1:] * (-1.0) ** np.arange(1, w.size + 1)


def blocks(gamma) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a two-mode covariance into (gamma_A, gamma_B, sigma_AB)."""
    g = _matrix(gamma)
    if g.shape != (4, 4):
        raise DimensionMismatch(f"expected a two-mode covariance, got shape {g.shape}")
    return g[:2, :2], g[2:, 2:], g[:2, 2:]


def partial_transpose(gamma, mode: int = 1) -> np.ndarray:
    """Partial transposition at the covariance level: flip the sign of ``mode``'s momentum."""
    g = np.array(_matrix(gamma))
    flip = np.ones(g.shape[0])
    flip[2 * mode + 1] = -1
    return g * np.outer(flip, flip)
