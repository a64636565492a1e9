"""No-click detection of Gaussian light behind a variable beam splitter.

Exact no-click probabilities, seeded finite-shot tallies, the two-copy
zero-displacement preparation, and a quadrature oracle for the vacuum
overlap that does not use the closed-form probability.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .core import GaussianState, apply_beam_splitter, reduce, tensor
from .errors import (
    CutoffTooSmall,
    DimensionMismatch,
    InvalidParameter,
    NonzeroDisplacement,
    NumericalFailure,
)

log = logging.getLogger(__name__)

#: Above this many shots a setting is drawn as one binomial variate instead of per-shot events.
BINOMIAL_THRESHOLD = 10_000


@dataclass(frozen=True)
class DetectorSetting:
    """One measurement configuration: beam-splitter transmittance ``T``, detector
    efficiency ``eta``, ``shots`` repetitions, and the phase ``phi`` applied to mode B
    (entanglement protocols only)."""

    T: float
    eta: float = 1.0
    shots: int = 1
    phi: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not 0 < self.T <= 1:
            raise InvalidParameter(f"transmittance must lie in (0, 1], got {self.T}")
        if not 0 < self.eta <= 1:
            raise InvalidParameter(f"efficiency must lie in (0, 1], got {self.eta}")
        if int(self.shots) != self.shots or self.shots < 1:
            raise InvalidParameter(f"shots must be a positive integer, got {self.shots}")

    @property
    def effective_transmittance(self) -> float:
        return self.eta * self.T


@dataclass(frozen=True)
class SettingSchedule:
    settings: tuple
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "settings", tuple(self.settings))
        if not self.settings:
            raise InvalidParameter("schedule has no settings")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise InvalidParameter(f"seed must fit in 64 unsigned bits, got {self.rng_seed}")

    @classmethod
    def from_grid(cls, transmittances, shots, eta=1.0, seed=0, phi=0.0, prefix="T"):
        settings = [
            DetectorSetting(float(t), float(eta), int(shots), float(phi), f"{prefix}#{j}")
            for j, t in enumerate(transmittances)
        ]
        return cls(tuple(settings), int(seed))

    def __len__(self):
        return len(self.settings)

    def __iter__(self):
        return iter(self.settings)


@dataclass(frozen=True)
class TallyRow:
    label: str
    T: float
    eta: float
    phi: float
    shots: int
    no_click_count: int
    events: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.no_click_count <= self.shots:
            raise InvalidParameter(
                f"row {self.label!r}: no_click_count {self.no_click_count} outside [0, {self.shots}]"
            )

    @property
    def frequency(self) -> float:
        return self.no_click_count / self.shots


@dataclass(frozen=True)
class TallyTable:
    rows: tuple
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def select(self, prefix: str) -> "TallyTable":
        """Rows whose label is ``prefix`` or starts with ``prefix + '#'``."""
        rows = [r for r in self.rows if r.label == prefix or r.label.startswith(prefix + "#")]
        return TallyTable(tuple(rows), self.seed)

    def experiments(self) -> list[str]:
        """Distinct experiment names (label text before ``#``) in row order."""
        seen = {}
        for r in self.rows:
            seen.setdefault(r.label.split("#", 1)[0], None)
        return list(seen)


# -- probabilities --------------------------------------------------------

def _effective(T, eta):
    if not 0 < eta <= 1:
        raise InvalidParameter(f"efficiency must lie in (0, 1], got {eta}")
    t_eff = eta * T
    if not 0 < t_eff <= 1:
        raise InvalidParameter(f"effective transmittance eta*T = {t_eff} outside (0, 1]")
    return t_eff


def no_click_probability(state: GaussianState, T: float, eta: float = 1.0) -> float:
    """Probability that an ideal on/off detector behind transmittance ``eta*T`` stays silent.

    Efficiency is folded into the transmittance before anything else, so
    ``(T, eta)`` and ``(eta*T, 1)`` share one code path.
    """
    if state.mode_count != 1:
        raise DimensionMismatch(f"single-mode probability needs 1 mode, got {state.mode_count}")
    t = _effective(T, eta)
    g = t * state.gamma + (2 - t) * np.eye(2)
    xi = state.xi
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    quad = (g[1, 1] * xi[0] ** 2 + g[0, 0] * xi[1] ** 2 - 2 * g[0, 1] * xi[0] * xi[1]) / det
    return float(2 / np.sqrt(det) * np.exp(-t * quad))


def multimode_no_click_probability(state: GaussianState, T: float, eta: float = 1.0) -> float:
    """Probability that none of N detectors, all behind the same ``eta*T``, clicks.

    The state must have zero displacement (as produced by :func:`prepare_minus_mode`).
    """
    if np.max(np.abs(state.xi), initial=0.0) > 1e-10:
        raise NonzeroDisplacement("multimode no-click path assumes zero displacement")
    t = _effective(T, eta)
    n = state.mode_count
    sign, logdet = np.linalg.slogdet(t * state.gamma + (2 - t) * np.eye(2 * n))
    if sign <= 0:
        raise NumericalFailure("det(T*gamma + (2-T)*I) is not positive")
    return float(np.exp(n * np.log(2) - 0.5 * logdet))


def setting_probability(state: GaussianState, setting: DetectorSetting) -> float:
    if state.mode_count == 1:
        return no_click_probability(state, setting.T, setting.eta)
    return multimode_no_click_probability(state, setting.T, setting.eta)


# -- sampling -------------------------------------------------------------

def stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for setting ``index`` under ``seed``; order independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def derive_seed(seed: int, label: str) -> int:
    """Stable 64-bit sub-seed for a named sub-experiment."""
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def draw_no_clicks(p: float, shots: int, rng: np.random.Generator, keep_events: bool = False):
    """Return ``(count, events)``; events is the per-shot no-click record or None."""
    if shots > BINOMIAL_THRESHOLD:
        return int(rng.binomial(shots, p)), None
    events = rng.random(shots) < p
    return int(events.sum()), (events if keep_events else None)


def simulate_tallies(state: GaussianState, schedule: SettingSchedule, keep_events: bool = False) -> TallyTable:
    """Draw no-click counts for every setting in ``schedule``.

    Each setting gets its own Philox stream keyed by ``(rng_seed, index)``,
    so results are bit-reproducible and do not depend on evaluation order.
    """
    rows = []
    for j, s in enumerate(schedule.settings):
        p = setting_probability(state, s)
        count, events = draw_no_clicks(p, s.shots, stream(schedule.rng_seed, j), keep_events)
        rows.append(TallyRow(s.label or f"T#{j}", s.T, s.eta, s.phi, s.shots, count, events))
    return TallyTable(tuple(rows), schedule.rng_seed)


# -- state preparation ----------------------------------------------------

def prepare_minus_mode(state: GaussianState) -> GaussianState:
    """Interfere two copies of ``state`` mode by mode on balanced beam splitters.

    The returned "minus" modes carry the input covariance and zero
    displacement.
    """
    n = state.mode_count
    both = tensor(state, state)
    for k in range(n):
        both = apply_beam_splitter(both, k, n + k, 0.5)
    return reduce(both, range(n, 2 * n))


# -- independent oracle ---------------------------------------------------

def fock_no_click_oracle(state: GaussianState, cutoff: int = 60) -> float:
    """Vacuum population <0|rho|0> by phase-space quadrature.

    The Husimi function at the origin is the Wigner function smoothed by the
    vacuum Wigner function, so

        <0|rho|0> = (2 pi)^N integral W_rho(r) W_0(r) dr.

    The integral is evaluated with the trapezoid rule on a uniform grid
    covering the cube of half-width sqrt(2*cutoff); the grid step is set
    from the narrowest direction of the integrand, where the trapezoid rule
    converges super-exponentially for Gaussians. The step-doubled subgrid
    gives a convergence estimate, logged at DEBUG level.

    Raises:
        CutoffTooSmall: ``cutoff < 20`` or the integrand mass outside the
            domain may exceed 1e-9.
    """
    if cutoff < 20:
        raise CutoffTooSmall(f"cutoff must be >= 20, got {cutoff}")
    n = state.mode_count
    dim = 2 * n
    g = state.gamma
    xi = state.xi
    ginv = np.linalg.inv(g)
    det = np.linalg.det(g)
    radius = np.sqrt(2 * cutoff)

    # W_rho <= 1/(pi^N sqrt(det g)); bound the integrand outside the ball by the vacuum tail.
    tail = 2**n / np.sqrt(det) * chi2.sf(2 * radius**2, dim)
    if tail > 1e-9:
        raise CutoffTooSmall(f"integrand tail mass estimate {tail:.3g} exceeds 1e-9")

    b = ginv + np.eye(dim)
    sigma_min = 1 / np.sqrt(2 * np.linalg.eigvalsh(b)[-1])
    h = 0.75 * sigma_min
    k = int(np.ceil(radius / h))
    axis = h * np.arange(-k, k + 1)
    even = (np.arange(-k, k + 1) % 2) == 0

    inner = min(dim, 3)
    mesh = np.stack(np.meshgrid(*([axis] * inner), indexing="ij"), axis=-1).reshape(-1, inner)
    mesh_even = np.all(np.stack(np.meshgrid(*([even] * inner), indexing="ij"), axis=-1).reshape(-1, inner), axis=1)

    fine = coarse = 0.0
    for outer in itertools.product(range(axis.size), repeat=dim - inner):
        head = axis[list(outer)]
        pts = np.concatenate([np.broadcast_to(head, (mesh.shape[0], head.size)), mesh], axis=1)
        d = pts - xi
        q = np.einsum("ij,jk,ik->i", d, ginv, d) + np.einsum("ij,ij->i", pts, pts)
        vals = np.exp(-q)
        fine += vals.sum()
        if all(even[list(outer)]):
            coarse += vals[mesh_even].sum()

    norm = 2**n / (np.pi**n * np.sqrt(det))
    p_fine = norm * fine * h**dim
    p_coarse = norm * coarse * (2 * h) ** dim
    log.debug("vacuum-overlap quadrature: %d points/axis, step %.3g, |fine-coarse| = %.3g",
              axis.size, h, abs(p_fine - p_coarse))
    return float(p_fine)
