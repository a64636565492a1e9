"""Partial-transpose spectrum, negativity, criteria and the determinant protocol."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from clickless import core
from clickless import entanglement as en
from clickless.errors import InconclusiveEntanglement, InvalidParameter, MissingSigma
from conftest import random_state

seeds = st.integers(0, 2**32 - 1)
E, NS = en.Verdict.ENTANGLED, en.Verdict.NOT_DETECTED

# entangled (zeta2 < 1) but missed by the local test; first hit of a random search, rounded
WEAK = np.array([
    [1.9621, 0.4605, 1.8878, 1.2748],
    [0.4605, 5.2851, 0.1154, -4.2984],
    [1.8878, 0.1154, 4.4042, 2.9533],
    [1.2748, -4.2984, 2.9533, 7.1469],
])


def pt_zeta2(g):
    """Smallest symplectic eigenvalue of the partial transpose, generic eigensolver route."""
    pt = core.partial_transpose(g)
    return float(np.min(np.abs(np.linalg.eigvals(1j * core.symplectic_form(2) @ pt))))


def tmsv_dets(r):
    return en.TwoModeDeterminants(np.cosh(2 * r) ** 2, np.cosh(2 * r) ** 2, 1.0, -np.sinh(2 * r) ** 2)


class TestSpectrum:
    def test_tmsv(self):
        z1, z2 = en.symplectic_pt_spectrum(tmsv_dets(0.3))
        assert z2 == pytest.approx(np.exp(-0.6), rel=1e-12)
        assert z1 == pytest.approx(np.exp(0.6), rel=1e-12)
        assert z2 == pytest.approx(0.548812, abs=1e-6)

    def test_product(self):
        assert en.symplectic_pt_spectrum(en.TwoModeDeterminants(1, 1, 1, 0))[1] == pytest.approx(1)
        assert en.symplectic_pt_spectrum(en.TwoModeDeterminants(9, 9, 81, 0))[1] == pytest.approx(3)

    def test_missing_sigma(self):
        with pytest.raises(MissingSigma):
            en.symplectic_pt_spectrum(en.TwoModeDeterminants(1, 1, 1))

    @given(seeds)
    def test_matches_generic_route(self, seed):
        g = random_state(seed, 2).gamma
        assert en.symplectic_pt_spectrum(en.determinants(g))[1] == pytest.approx(pt_zeta2(g), rel=1e-10)

    @pytest.mark.parametrize("z,e", [(1, 0), (np.exp(-0.6), 0.6 / np.log(2)), (2, 0)])
    def test_log_negativity(self, z, e):
        assert en.log_negativity(z) == pytest.approx(e, abs=1e-15)

    def test_log_negativity_value(self):
        assert en.log_negativity(np.exp(-0.6)) == pytest.approx(0.865617, abs=1e-6)

    def test_log_negativity_invalid(self):
        with pytest.raises(InvalidParameter):
            en.log_negativity(0)


class TestCriteria:
    def test_nec_suf(self):
        assert en.criterion_nec_suf(tmsv_dets(0.3)) is E
        assert en.criterion_nec_suf(en.TwoModeDeterminants(1, 1, 1, 0)) is NS

    def test_classically_correlated(self):
        g = np.block([[1.5 * np.eye(2), 0.4 * np.eye(2)], [0.4 * np.eye(2), 1.5 * np.eye(2)]])
        core.make_state(np.zeros(4), g)
        assert pt_zeta2(g) >= 1
        assert en.criterion_nec_suf(en.determinants(g)) is NS

    @pytest.mark.parametrize("r", [0.01, 0.3, 1.0])
    def test_local_tmsv(self, r):
        d = tmsv_dets(r)
        assert en.criterion_local_sufficient(d.det_A, d.det_B, d.det_AB) is E

    def test_local_vacuum(self):
        assert en.criterion_local_sufficient(1, 1, 1) is NS

    def test_local_not_necessary(self):
        core.make_state(np.zeros(4), WEAK)
        d = en.determinants(WEAK)
        assert pt_zeta2(WEAK) == pytest.approx(0.876130447372814, rel=1e-10)
        assert d.det_A + d.det_B <= 1 + d.det_AB
        assert en.criterion_nec_suf(d) is E
        assert en.criterion_local_sufficient(d.det_A, d.det_B, d.det_AB) is NS

    @given(seeds)
    def test_local_implies_nec_suf(self, seed):
        d = en.determinants(random_state(seed, 2).gamma)
        if en.criterion_local_sufficient(d.det_A, d.det_B, d.det_AB) is E:
            assert en.criterion_nec_suf(d) is E

    def test_inconclusive_band(self):
        d = en.TwoModeDeterminants(1.0, 1.0, 1.0, -0.001, {"det_sigma": 0.01})
        assert en.criterion_nec_suf(d) is en.Verdict.INCONCLUSIVE
        assert en.criterion_nec_suf(d, sigmas=0) is E
        assert not en.Verdict.INCONCLUSIVE


class TestSigmaProtocol:
    def test_product_sums(self):
        assert en.sigma_from_sums(2.0, 2.0, 2.0) == 0

    def test_tmsv_sums(self):
        r = 0.3
        c = np.cosh(2 * r)
        # sigma = sinh(2r) diag(1, -1): gamma_+- = diag(c +- s, c -+ s), both of unit determinant
        val = en.sigma_from_sums(1.0, 1.0, c**2)
        assert val == pytest.approx(-4 * np.sinh(0.6) ** 2, rel=1e-12)
        assert val == pytest.approx(-1.621311, abs=1e-6)

    @given(seeds)
    def test_sum_identity(self, seed):
        ga, gb, sigma = core.blocks(random_state(seed, 2).gamma)
        sym = sigma + sigma.T
        plus, minus = (ga + gb + sym) / 2, (ga + gb - sym) / 2
        lhs = np.linalg.det(sym)
        rhs = en.sigma_from_sums(np.linalg.det(plus), np.linalg.det(minus), np.linalg.det((ga + gb) / 2))
        assert rhs == pytest.approx(lhs, abs=1e-10 * max(1, np.max(np.abs(ga + gb)) ** 2))

    @given(seeds, st.lists(st.floats(-np.pi, np.pi), min_size=5, max_size=5))
    def test_y_decomposition(self, seed, phis):
        sigma = np.random.default_rng(seed).normal(size=(2, 2)) * 2
        y0, yq, yh = (en.y_phi(sigma, p) for p in en.PHASES)
        yt = yq - (y0 + yh) / 2
        for p in phis:
            expected = y0 * np.cos(p) ** 2 + yh * np.sin(p) ** 2 + yt * np.sin(2 * p)
            assert en.y_phi(sigma, p) == pytest.approx(expected, abs=1e-10 * max(1, np.sum(sigma**2)))

    @given(seeds)
    def test_closed_form_max_vs_grid(self, seed):
        sigma = np.random.default_rng(seed).normal(size=(2, 2))
        y = [en.y_phi(sigma, p) for p in en.PHASES]
        det, phi_star = en.sigma_det_from_phases(*y)
        grid = np.linspace(0, np.pi, 10_000, endpoint=False)
        vals = np.array([en.y_phi(sigma, p) for p in grid])
        j = int(np.argmax(vals))
        h = grid[1] - grid[0]
        res = minimize_scalar(lambda p: -en.y_phi(sigma, p), bounds=(grid[j] - h, grid[j] + h),
                              method="bounded", options={"xatol": 1e-10})
        assert 4 * det == pytest.approx(max(-res.fun, vals[j]), abs=1e-8)
        assert en.y_phi(sigma, phi_star) == pytest.approx(4 * det, abs=1e-10)

    @given(seeds)
    def test_sym_bound(self, seed):
        sigma = np.random.default_rng(seed).normal(size=(2, 2))
        assert np.linalg.det(sigma + sigma.T) <= 4 * np.linalg.det(sigma) + 1e-12
        s = sigma + sigma.T
        assert np.linalg.det(s + s.T) == pytest.approx(4 * np.linalg.det(s), abs=1e-12)

    def test_tmsv_phases(self):
        r = 0.3
        sigma = core.blocks(core.two_mode_squeezed_vacuum(r).gamma)[2]
        det, phi_star = en.sigma_det_from_phases(*(en.y_phi(sigma, p) for p in en.PHASES))
        assert det == pytest.approx(-np.sinh(2 * r) ** 2, rel=1e-12)
        assert det == pytest.approx(np.linalg.det(sigma), rel=1e-12)
        assert phi_star == 0

    def test_zero_sigma(self):
        assert en.sigma_det_from_phases(0, 0, 0) == (0.0, 0.0)

    def test_tie(self):
        assert en.sigma_det_from_phases(2.0, 2.0, 2.0)[1] == 0


class TestPipeline:
    @pytest.mark.parametrize("r", [0.1, 0.3, 0.6])
    def test_tmsv_exact(self, r):
        rep = en.measure_negativity_pipeline(core.two_mode_squeezed_vacuum(r))
        assert rep.log_negativity == pytest.approx(2 * r / np.log(2), abs=1e-6)
        assert rep.entangled_nec_suf is E and rep.entangled_sufficient_local is E

    def test_vacuum_exact(self):
        rep = en.measure_negativity_pipeline(core.vacuum(2))
        assert rep.log_negativity == 0.0
        assert rep.entangled_nec_suf is NS and rep.entangled_sufficient_local is NS

    def test_efficiency_compensated(self):
        a = en.measure_negativity_pipeline(core.two_mode_squeezed_vacuum(0.3))
        b = en.measure_negativity_pipeline(core.two_mode_squeezed_vacuum(0.3), eta=0.7)
        assert b.log_negativity == pytest.approx(a.log_negativity, abs=1e-6)

    @given(seeds, st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
    def test_local_phase_invariance(self, seed, pa, pb):
        s = random_state(seed, 2, max_squeezing=0.8, max_nbar=0.5)
        shifted = core.apply_phase_shift(core.apply_phase_shift(s, 0, pa), 1, pb)
        a = en.measure_negativity_pipeline(s, strict=False)
        b = en.measure_negativity_pipeline(shifted, strict=False)
        assert b.log_negativity == pytest.approx(a.log_negativity, abs=1e-9)

    def test_weak_state_through_pipeline(self):
        rep = en.measure_negativity_pipeline(core.make_state(np.zeros(4), WEAK))
        assert rep.zeta2 == pytest.approx(0.876130447372814, rel=1e-9)
        assert rep.entangled_nec_suf is E and rep.entangled_sufficient_local is NS

    def test_sub_experiment_states(self):
        s = random_state(8, 2)
        exps = {e.label: e.state for e in en.sub_experiments(s)}
        assert len(exps) == 12
        ga, gb, sigma = core.blocks(s.gamma)
        np.testing.assert_allclose(exps["sum_0"].gamma, (ga + gb) / 2, atol=1e-12)
        np.testing.assert_allclose(exps["plus_0"].gamma, (ga + gb + sigma + sigma.T) / 2, atol=1e-12)

    def test_needs_two_modes(self):
        with pytest.raises(InvalidParameter):
            en.measure_negativity_pipeline(core.vacuum(1))

    def test_finite_shots_tmsv(self):
        rep = en.measure_negativity_pipeline(core.two_mode_squeezed_vacuum(0.6), 120_000_000, seed=5)
        assert abs(rep.log_negativity - 1.2 / np.log(2)) < 4 * rep.std_errors["log_negativity"]
        assert rep.tallies is not None and len(rep.tallies) == 26

    def test_finite_shots_vacuum_inconclusive(self):
        with pytest.raises(InconclusiveEntanglement) as info:
            en.measure_negativity_pipeline(core.vacuum(2), 1_200_000, seed=1)
        assert info.value.report is not None and info.value.report.inconclusive

    def test_report_dict(self):
        d = en.measure_negativity_pipeline(core.two_mode_squeezed_vacuum(0.3)).to_dict()
        assert d["log_base"] == 2 and d["entangled_nec_suf"] == "entangled"
        assert set(d["sub_experiments"]) >= {"A", "B", "AB", "plus_0", "minus_2", "sum_1"}
