"""Two-mode entanglement from determinants of covariance blocks.

The smaller symplectic eigenvalue of the partially transposed covariance,
zeta2, follows from det(gamma_A), det(gamma_B), det(sigma_AB) and
det(gamma_AB). All of these are reachable with no-click detectors: the
local and global determinants directly, det(sigma_AB) through mixing A
with B at three phases of a shifter on B and mixing A and B across two
copies.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import core, optics
from .errors import (
    InconclusiveEntanglement,
    InvalidParameter,
    MissingSigma,
    NegativeDiscriminant,
    NonpositiveRoot,
)
from .estimator import numerical_gradient, estimate_from_tally, estimate_multimode, estimate_single_mode

DISCRIMINANT_TOL = 1e-9
#: Absolute slack (relative to the size of the terms) below which exact inequalities count as equalities.
NUMERIC_TOL = 1e-9
PHASES = (0.0, np.pi / 4, np.pi / 2)
DEFAULT_TRANSMITTANCES = (0.5, 1.0)
DEFAULT_MULTIMODE_TRANSMITTANCES = (0.5, 0.6667, 0.8333, 1.0)


class Verdict(str, enum.Enum):
    """Outcome of an entanglement test; truthy only for ENTANGLED."""

    ENTANGLED = "entangled"
    NOT_DETECTED = "not-detected"
    INCONCLUSIVE = "inconclusive"

    def __bool__(self):
        return self is Verdict.ENTANGLED


@dataclass(frozen=True)
class TwoModeDeterminants:
    det_A: float
    det_B: float
    det_AB: float
    det_sigma: float | None = None
    std_errors: dict = field(default_factory=dict)

    def se(self, name: str) -> float:
        return float(self.std_errors.get(name, 0.0))

    def to_dict(self) -> dict:
        return {
            "det_A": self.det_A,
            "det_B": self.det_B,
            "det_AB": self.det_AB,
            "det_sigma": self.det_sigma,
            "std_errors": dict(self.std_errors),
        }


def determinants(gamma) -> TwoModeDeterminants:
    """Exact block determinants of a two-mode covariance matrix."""
    ga, gb, sigma = core.blocks(gamma)
    return TwoModeDeterminants(
        float(np.linalg.det(ga)), float(np.linalg.det(gb)),
        float(np.linalg.det(np.asarray(gamma, dtype=float))), float(np.linalg.det(sigma)),
    )


def symplectic_pt_spectrum(dets: TwoModeDeterminants) -> tuple[float, float]:
    """Symplectic eigenvalues (zeta1 >= zeta2) of the partially transposed covariance."""
    if dets.det_sigma is None:
        raise MissingSigma("det_sigma is required for the partially transposed spectrum")
    d = dets.det_A + dets.det_B - 2 * dets.det_sigma
    disc = d * d - 4 * dets.det_AB
    if disc < 0:
        if disc < -DISCRIMINANT_TOL * max(1.0, d * d):
            raise NegativeDiscriminant(f"D^2 - 4 det(gamma_AB) = {disc:.3g} < 0")
        disc = 0.0
    root = np.sqrt(disc)
    z1sq, z2sq = 0.5 * (d + root), 0.5 * (d - root)
    if not z2sq > 0:
        raise NonpositiveRoot(f"zeta2^2 = {z2sq:.3g} is not positive")
    return float(np.sqrt(z1sq)), float(np.sqrt(z2sq))


def log_negativity(zeta2: float) -> float:
    """max(0, -log2 zeta2), in ebits."""
    if not zeta2 > 0:
        raise InvalidParameter(f"zeta2 must be positive, got {zeta2}")
    return float(max(0.0, -np.log2(zeta2)))


def _verdict(margin: float, se: float, scale: float, sigmas: float) -> Verdict:
    band = sigmas * se
    if margin > band + NUMERIC_TOL * scale:
        return Verdict.ENTANGLED
    if band > 0 and margin >= -band:
        return Verdict.INCONCLUSIVE
    return Verdict.NOT_DETECTED


def criterion_nec_suf(dets: TwoModeDeterminants, sigmas: float = 3.0) -> Verdict:
    """det A + det B - 2 det sigma > 1 + det AB, beyond ``sigmas`` combined standard errors."""
    if dets.det_sigma is None:
        raise MissingSigma("the necessary-and-sufficient test needs det_sigma")
    lhs = dets.det_A + dets.det_B - 2 * dets.det_sigma
    rhs = 1 + dets.det_AB
    se = np.sqrt(dets.se("det_A") ** 2 + dets.se("det_B") ** 2
                 + 4 * dets.se("det_sigma") ** 2 + dets.se("det_AB") ** 2)
    return _verdict(lhs - rhs, se, max(1.0, abs(lhs), abs(rhs)), sigmas)


def criterion_local_sufficient(det_A: float, det_B: float, det_AB: float,
                               std_errors: dict | None = None, sigmas: float = 3.0) -> Verdict:
    """det A + det B > 1 + det AB.

    Needs only local determinants, but it is sufficient, not necessary:
    some entangled Gaussian states are not detected.
    """
    se_map = std_errors or {}
    se = np.sqrt(sum(float(se_map.get(k, 0.0)) ** 2 for k in ("det_A", "det_B", "det_AB")))
    lhs, rhs = det_A + det_B, 1 + det_AB
    return _verdict(lhs - rhs, se, max(1.0, abs(lhs), abs(rhs)), sigmas)


def sigma_from_sums(det_plus: float, det_minus: float, det_ApB: float) -> float:
    """det(sigma + sigma^T) from det gamma_+, det gamma_- and det((gamma_A + gamma_B)/2)."""
    return 2 * det_plus + 2 * det_minus - 4 * det_ApB


def y_phi(sigma, phi: float) -> float:
    """det(sigma U(phi) + U(phi)^T sigma^T)."""
    m = np.asarray(sigma, dtype=float) @ core.rotation(phi)
    return float(np.linalg.det(m + m.T))


def sigma_det_from_phases(y0: float, y_quarter: float, y_half: float) -> tuple[float, float]:
    """det(sigma_AB) and the symmetrizing phase from y at phi = 0, pi/4, pi/2.

    y(phi) = y0 cos^2 + y_half sin^2 + yt sin(2 phi) with
    yt = y_quarter - (y0 + y_half)/2; its maximum over phi equals 4 det(sigma).
    A maximizer that is non-unique (to 1e-9 relative) is reported as phi* = 0.
    """
    yt = y_quarter - 0.5 * (y0 + y_half)
    det_sigma = 0.125 * (y0 + y_half + np.sqrt((y0 - y_half) ** 2 + 4 * yt**2))
    a, b = 0.5 * (y0 - y_half), yt
    scale = max(1.0, abs(y0), abs(y_quarter), abs(y_half))
    tie = np.hypot(a, b) <= NUMERIC_TOL * scale
    phi_star = 0.0 if tie else 0.5 * np.arctan2(b, a) % np.pi
    return float(det_sigma), float(phi_star)


# -- measurement pipeline -------------------------------------------------

@dataclass(frozen=True)
class NegativityReport:
    zeta1: float
    zeta2: float
    log_negativity: float
    entangled_sufficient_local: Verdict
    entangled_nec_suf: Verdict
    phi_star: float
    determinants: TwoModeDeterminants
    y: tuple = ()
    std_errors: dict = field(default_factory=dict)
    sub_experiments: dict = field(default_factory=dict)
    tallies: optics.TallyTable | None = None
    inconclusive: bool = False

    def to_dict(self) -> dict:
        return {
            "zeta1": self.zeta1,
            "zeta2": self.zeta2,
            "log_negativity": self.log_negativity,
            "log_base": 2,
            "entangled_sufficient_local": self.entangled_sufficient_local.value,
            "entangled_nec_suf": self.entangled_nec_suf.value,
            "phi_star": self.phi_star,
            "determinants": self.determinants.to_dict(),
            "y": {"0": self.y[0], "pi/4": self.y[1], "pi/2": self.y[2]} if self.y else {},
            "std_errors": dict(self.std_errors),
            "sub_experiments": {k: v.to_dict() for k, v in self.sub_experiments.items()},
            "inconclusive": self.inconclusive,
        }


@dataclass(frozen=True)
class SubExperiment:
    label: str
    state: core.GaussianState
    transmittances: tuple
    weight: float = 1.0


def sub_experiments(state: core.GaussianState, transmittances=DEFAULT_TRANSMITTANCES,
                    multimode_transmittances=DEFAULT_MULTIMODE_TRANSMITTANCES,
                    weights: dict | None = None) -> list[SubExperiment]:
    """States reaching the detectors in each step of the determinant protocol.

    The input is first interfered with a copy of itself so that every
    detected mode has zero displacement. Then:

    * ``A``, ``B``: local modes; ``AB``: both modes, all detectors behind one T;
    * per phase phi_k on mode B: ``plus_k``/``minus_k`` are the outputs of a
      balanced beam splitter mixing A and B, and ``sum_k`` mixes A of one
      copy with B of a second, independent copy.
    """
    if state.mode_count != 2:
        raise InvalidParameter(f"negativity pipeline needs a two-mode state, got {state.mode_count} modes")
    weights = weights or {}
    prep = optics.prepare_minus_mode(state)
    T1, T2 = tuple(transmittances), tuple(multimode_transmittances)
    exps = [
        SubExperiment("A", core.reduce(prep, [0]), T1),
        SubExperiment("B", core.reduce(prep, [1]), T1),
        SubExperiment("AB", prep, T2),
    ]
    for k, phi in enumerate(PHASES):
        shifted = core.apply_phase_shift(prep, 1, phi)
        mixed = core.apply_beam_splitter(shifted, 0, 1, 0.5)
        cross = core.apply_beam_splitter(core.tensor(shifted, shifted), 0, 3, 0.5)
        exps += [
            SubExperiment(f"plus_{k}", core.reduce(mixed, [0]), T1),
            SubExperiment(f"minus_{k}", core.reduce(mixed, [1]), T1),
            SubExperiment(f"sum_{k}", core.reduce(cross, [0]), T1),
        ]
    return [SubExperiment(e.label, e.state, e.transmittances, float(weights.get(e.label, 1.0)))
            for e in exps]


def _phase_of(label: str) -> float:
    return PHASES[int(label.rsplit("_", 1)[1])] if "_" in label else 0.0


def simulate_sub_experiments(exps: list[SubExperiment], total_shots: int, seed: int,
                             eta: float = 1.0) -> optics.TallyTable:
    """Split ``total_shots`` over the sub-experiments by weight, then evenly over settings."""
    wsum = sum(e.weight for e in exps)
    rows = []
    for e in exps:
        per_setting = int(total_shots * e.weight / wsum) // len(e.transmittances)
        if per_setting < 1:
            raise InvalidParameter(f"shot budget leaves no shots for sub-experiment {e.label!r}")
        sched = optics.SettingSchedule.from_grid(
            e.transmittances, per_setting, eta, optics.derive_seed(seed, e.label),
            phi=_phase_of(e.label), prefix=e.label,
        )
        rows.extend(optics.simulate_tallies(e.state, sched).rows)
    return optics.TallyTable(tuple(rows), seed)


def _exact_estimates(exps: list[SubExperiment], eta: float) -> dict:
    out = {}
    for e in exps:
        t = np.asarray(e.transmittances, dtype=float)
        p = [optics.setting_probability(e.state, optics.DetectorSetting(float(x), eta)) for x in t]
        if e.state.mode_count == 1:
            out[e.label] = estimate_single_mode(p, eta * t)
        else:
            out[e.label] = estimate_multimode(p, eta * t, e.state.mode_count)
    return out


def _tally_estimates(records) -> dict:
    """Group tally rows or observations by experiment label and estimate each group."""
    groups = {}
    for r in (records.rows if isinstance(records, optics.TallyTable) else records):
        groups.setdefault(r.label.split("#", 1)[0], []).append(r)
    return {label: estimate_from_tally(rows, 2 if label == "AB" else 1) for label, rows in groups.items()}


def assemble_report(estimates: dict, tallies: optics.TallyTable | None = None, sigmas: float = 3.0,
                    strict: bool = True) -> NegativityReport:
    """Combine sub-experiment estimates into the entanglement report.

    Raises:
        InconclusiveEntanglement: with ``strict``, when zeta2 +/- sigmas*se straddles 1.
    """
    names = ["A", "B", "AB"] + [f"{kind}_{k}" for k in range(3) for kind in ("plus", "minus", "sum")]
    missing = [n for n in names if n not in estimates]
    if missing:
        raise InvalidParameter(f"missing sub-experiments: {', '.join(missing)}")
    x = np.array([estimates[n].det_gamma for n in names])
    se_x = np.array([estimates[n].std_errors["det_gamma"] for n in names])

    def ys(v):
        return [sigma_from_sums(v[3 + 3 * k], v[4 + 3 * k], v[5 + 3 * k]) for k in range(3)]

    def det_sigma_of(v):
        return sigma_det_from_phases(*ys(v))[0]

    def zeta2_of(v):
        return symplectic_pt_spectrum(TwoModeDeterminants(v[0], v[1], v[2], det_sigma_of(v)))[1]

    y = ys(x)
    det_sigma, phi_star = sigma_det_from_phases(*y)
    cov = np.diag(se_x**2)

    def se_of(fn):
        if not np.any(se_x):
            return 0.0
        g = numerical_gradient(fn, x)
        return float(np.sqrt(g @ cov @ g)) if np.all(np.isfinite(g)) else float("inf")

    se = {"det_A": float(se_x[0]), "det_B": float(se_x[1]), "det_AB": float(se_x[2]),
          "det_sigma": se_of(det_sigma_of)}
    dets = TwoModeDeterminants(x[0], x[1], x[2], det_sigma, se)
    zeta1, zeta2 = symplectic_pt_spectrum(dets)
    nec_suf = criterion_nec_suf(dets, sigmas)
    local = criterion_local_sufficient(dets.det_A, dets.det_B, dets.det_AB, se, sigmas)
    if nec_suf is Verdict.NOT_DETECTED:
        # past the linear test the state is separable; zeta2 carries square-root-amplified rounding
        zeta2 = max(zeta2, 1.0)
    se["zeta2"] = se_of(zeta2_of)
    en = log_negativity(zeta2)
    se["log_negativity"] = se["zeta2"] / (zeta2 * np.log(2)) if en > 0 else 0.0
    inconclusive = bool(se["zeta2"] > 0 and abs(zeta2 - 1) <= sigmas * se["zeta2"])
    report = NegativityReport(zeta1, zeta2, en, local, nec_suf, phi_star, dets, tuple(y), se,
                              estimates, tallies, inconclusive)
    if strict and inconclusive:
        raise InconclusiveEntanglement(
            f"zeta2 = {zeta2:.6g} +/- {se['zeta2']:.3g} straddles the separability boundary", report
        )
    return report


def measure_negativity_pipeline(state: core.GaussianState, total_shots: int | None = None, seed: int = 0,
                                eta: float = 1.0, transmittances=DEFAULT_TRANSMITTANCES,
                                multimode_transmittances=DEFAULT_MULTIMODE_TRANSMITTANCES,
                                weights: dict | None = None, sigmas: float = 3.0,
                                strict: bool = True) -> NegativityReport:
    """Estimate the logarithmic negativity of a two-mode state with no-click detectors.

    ``total_shots=None`` feeds exact probabilities (infinite statistics).
    Detector efficiency ``eta`` is compensated by inverting with eta*T.
    """
    exps = sub_experiments(state, transmittances, multimode_transmittances, weights)
    if total_shots is None:
        return assemble_report(_exact_estimates(exps, eta), None, sigmas, strict)
    tallies = simulate_sub_experiments(exps, total_shots, seed, eta)
    return assemble_report(_tally_estimates(tallies), tallies, sigmas, strict)


def estimate_negativity_from_tally(tally, sigmas: float = 3.0, strict: bool = True) -> NegativityReport:
    """Negativity report from a tally table (or labelled observations) of all sub-experiments."""
    table = tally if isinstance(tally, optics.TallyTable) else None
    return assemble_report(_tally_estimates(tally), table, sigmas, strict)

