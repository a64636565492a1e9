"""Acceptance criteria 1-9, each at its stated tolerance and runtime budget.

Every test records one ``[criterion N] PASS|FAIL ...`` line; the lines are
printed in the "acceptance criteria" section of the pytest summary.
"""

import json
import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from clickless import core, estimator, optics
from clickless import entanglement as en
from clickless.cli import main
from conftest import ACCEPTANCE_LINES


def report_line(n, ok, detail, elapsed, budget=None):
    limit = f" (budget {budget:g} s)" if budget else ""
    line = f"[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}; {elapsed:.2f} s{limit}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def exact_p(state, T, eta=1.0):
    return np.array([optics.setting_probability(state, optics.DetectorSetting(float(t), eta)) for t in T])


def brute_charpoly(g):
    c = np.poly(g)[1:]
    return c * (-1.0) ** np.arange(1, c.size + 1)


CORPUS = ([("vacuum", core.vacuum())]
          + [(f"thermal({n})", core.thermal(n)) for n in (0.5, 1, 2)]
          + [(f"squeezed({r})", core.squeezed_vacuum(r)) for r in (0.2, 0.5, 1.0)])


def test_criterion_1_single_mode_closed_loop():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    T = np.array([0.5, 1.0])
    worst = 0.0
    for _ in range(1000):
        g = core.random_covariance(1, rng)
        est = estimator.estimate_single_mode(exact_p(core.make_state([0, 0], g), T), T)
        truth = (np.trace(g), np.linalg.det(g), np.linalg.eigvalsh(g)[0], np.linalg.det(g) ** -0.5)
        got = (est.tr_gamma, est.det_gamma, est.lam, est.purity)
        worst = max(worst, max(abs(a - b) / abs(b) for a, b in zip(got, truth)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 5
    report_line(1, ok, f"max relative error {worst:.2e} < 1e-9", elapsed, 5)
    assert worst < 1e-9
    assert elapsed < 5


def test_criterion_2_oracle_agreement():
    t0 = time.perf_counter()
    worst = 0.0
    for _, s in CORPUS:
        for T in (0.3, 0.7, 1.0):
            for eta in (0.6, 1.0):
                p = optics.no_click_probability(s, T, eta)
                lossy = core.apply_loss(s, 0, eta * T)
                worst = max(worst, abs(p - optics.fock_no_click_oracle(lossy, cutoff=60)))
    elapsed = time.perf_counter() - t0
    report_line(2, worst < 1e-8 and elapsed < 30, f"max |closed form - oracle| {worst:.2e} < 1e-8", elapsed, 30)
    assert worst < 1e-8
    assert elapsed < 30


def test_criterion_3_shot_noise():
    t0 = time.perf_counter()
    s = core.squeezed_vacuum(0.5)
    lams, ses = [], []
    for seed in range(200):
        sched = optics.SettingSchedule.from_grid((0.5, 1.0), 10**6, seed=seed)
        est = estimator.estimate_from_tally(optics.simulate_tallies(s, sched))
        lams.append(est.lam)
        ses.append(est.std_errors["lambda"])
    lams, se = np.array(lams), float(np.mean(ses))
    spread = float(np.std(lams, ddof=1))
    ratio = spread / se
    bias = abs(lams.mean() - np.exp(-1))
    elapsed = time.perf_counter() - t0
    ok = 0.5 <= ratio <= 2 and bias <= 3 * se and elapsed < 60
    report_line(3, ok, f"spread/predicted {ratio:.3f} in [0.5, 2], |mean - 1/e| {bias:.2e} <= 3se {3 * se:.2e}",
                elapsed, 60)
    # seeded values, pinned after the first run
    assert spread == pytest.approx(0.0045317075348718415, rel=1e-9)
    assert se == pytest.approx(0.004356800977620363, rel=1e-9)
    assert 0.5 <= ratio <= 2
    assert bias <= 3 * se
    assert elapsed < 60


def test_criterion_4_efficiency_compensation():
    t0 = time.perf_counter()
    T = np.array([0.5, 1.0])
    worst = 0.0
    for _, s in CORPUS:
        lossy = estimator.estimate_single_mode(exact_p(s, T, 0.6), 0.6 * T)
        ideal = estimator.estimate_single_mode(exact_p(s, 0.6 * T, 1.0), 0.6 * T)
        for k in ("tr_gamma", "det_gamma", "lam", "purity"):
            worst = max(worst, abs(getattr(lossy, k) - getattr(ideal, k)))
    elapsed = time.perf_counter() - t0
    report_line(4, worst <= 1e-12, f"max |eta=0.6 compensated - eta=1| {worst:.2e} <= 1e-12", elapsed)
    assert worst <= 1e-12


def test_criterion_5_multimode_closed_loop():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    stats = {}
    for n, count, tol in ((2, 200, 1e-7), (3, 20, 1e-6)):
        T = np.linspace(0.5, 1.0, 2 * n)
        f_err = lam_err = 0.0
        for _ in range(count):
            g = core.random_covariance(n, rng)
            est = estimator.estimate_multimode(exact_p(core.make_state(np.zeros(2 * n), g), T), T, n)
            ref = brute_charpoly(g)
            f_err = max(f_err, float(np.max(np.abs(est.coefficients.f - ref) / np.abs(ref))))
            lam_err = max(lam_err, abs(est.lam - np.linalg.eigvalsh(g)[0]))
        stats[n] = (f_err, lam_err, tol)
    elapsed = time.perf_counter() - t0
    ok = (stats[2][0] < 1e-7 and stats[2][1] < 1e-8 and stats[3][0] < 1e-6 and stats[3][1] < 1e-6
          and elapsed < 20)
    report_line(5, ok, "; ".join(f"N={n}: f rel {f:.1e}, lambda abs {l:.1e} (tol {t:g})"
                                 for n, (f, l, t) in stats.items()), elapsed, 20)
    assert stats[2][0] < 1e-7 and stats[2][1] < 1e-8
    assert stats[3][0] < 1e-6 and stats[3][1] < 1e-6
    assert elapsed < 20


def test_criterion_6_negativity_pipeline():
    t0 = time.perf_counter()
    errs = []
    for r in (0.1, 0.3, 0.6):
        rep = en.measure_negativity_pipeline(core.two_mode_squeezed_vacuum(r))
        errs.append(abs(rep.log_negativity - 2 * r / np.log(2)))
    vac = en.measure_negativity_pipeline(core.vacuum(2)).log_negativity
    elapsed = time.perf_counter() - t0
    ok = max(errs) < 1e-6 and vac == 0.0 and elapsed < 10
    report_line(6, ok, f"max |E_N - 2r/ln2| {max(errs):.2e} < 1e-6; vacuum E_N = {vac}", elapsed, 10)
    assert max(errs) < 1e-6
    assert vac == 0.0
    assert elapsed < 10


def test_criterion_7_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = {"sum identity": 0.0, "y decomposition": 0.0, "sym bound violation": 0.0, "grid max": 0.0}
    grid = np.linspace(0, np.pi, 10_000, endpoint=False)
    h = grid[1] - grid[0]
    for _ in range(1000):
        ga, gb, sigma = core.blocks(core.random_covariance(2, rng))
        sym = sigma + sigma.T
        lhs = np.linalg.det(sym)
        rhs = en.sigma_from_sums(np.linalg.det((ga + gb + sym) / 2), np.linalg.det((ga + gb - sym) / 2),
                                 np.linalg.det((ga + gb) / 2))
        worst["sum identity"] = max(worst["sum identity"], abs(lhs - rhs) / max(1, abs(lhs)))

        y = [en.y_phi(sigma, p) for p in en.PHASES]
        yt = y[1] - (y[0] + y[2]) / 2
        for p in rng.uniform(0, 2 * np.pi, 50):
            dec = y[0] * np.cos(p) ** 2 + y[2] * np.sin(p) ** 2 + yt * np.sin(2 * p)
            worst["y decomposition"] = max(worst["y decomposition"], abs(en.y_phi(sigma, p) - dec))

        worst["sym bound violation"] = max(worst["sym bound violation"], lhs - 4 * np.linalg.det(sigma))

        det, _ = en.sigma_det_from_phases(*y)
        # vectorized y(phi) on the grid, then a bounded polish around the best node
        c, s = np.cos(grid), np.sin(grid)
        m00 = sigma[0, 0] * c - sigma[0, 1] * s
        m01 = sigma[0, 0] * s + sigma[0, 1] * c
        m10 = sigma[1, 0] * c - sigma[1, 1] * s
        m11 = sigma[1, 0] * s + sigma[1, 1] * c
        vals = 4 * m00 * m11 - (m01 + m10) ** 2
        j = int(np.argmax(vals))
        res = minimize_scalar(lambda p: -en.y_phi(sigma, p), bounds=(grid[j] - h, grid[j] + h),
                              method="bounded", options={"xatol": 1e-10})
        worst["grid max"] = max(worst["grid max"], abs(4 * det - max(-res.fun, vals[j])))
    elapsed = time.perf_counter() - t0
    tols = {"sum identity": 1e-10, "y decomposition": 1e-10, "sym bound violation": 1e-12, "grid max": 1e-8}
    ok = all(worst[k] <= tols[k] for k in tols) and elapsed < 20
    report_line(7, ok, ", ".join(f"{k} {worst[k]:.1e} <= {tols[k]:g}" for k in tols), elapsed, 20)
    for k in tols:
        assert worst[k] <= tols[k], k
    assert elapsed < 20


def test_criterion_8_criteria_behaviour():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    rs = [0.06, 0.1, 0.2, 0.5, 1.0, 2.0]
    tmsv_ok = True
    for r in rs:
        d = en.determinants(core.two_mode_squeezed_vacuum(r).gamma)
        tmsv_ok &= en.criterion_local_sufficient(d.det_A, d.det_B, d.det_AB) is en.Verdict.ENTANGLED
    false_pos = 0
    for _ in range(500):
        g = core.tensor(core.thermal(rng.uniform(0, 3)), core.thermal(rng.uniform(0, 3))).gamma
        d = en.determinants(g)
        false_pos += en.criterion_local_sufficient(d.det_A, d.det_B, d.det_AB) is en.Verdict.ENTANGLED
    disagree = 0
    for _ in range(500):
        d = en.determinants(core.random_covariance(2, rng))
        zeta2 = en.symplectic_pt_spectrum(d)[1]
        disagree += (en.criterion_nec_suf(d) is en.Verdict.ENTANGLED) != (zeta2 < 1)
    elapsed = time.perf_counter() - t0
    ok = tmsv_ok and false_pos == 0 and disagree == 0 and elapsed < 20
    report_line(8, ok, f"TMSV flagged for r in {rs}: {tmsv_ok}; thermal false positives {false_pos}/500; "
                       f"nec-suf vs zeta2 disagreements {disagree}/500", elapsed, 20)
    assert tmsv_ok
    assert false_pos == 0
    assert disagree == 0
    assert elapsed < 20


@pytest.mark.parametrize("cfg", [
    {"version": 1, "pipeline": "single-mode", "state": {"kind": "squeezed_vacuum", "r": 0.5},
     "schedule": {"shots": 10**6, "seed": 42}},
    {"version": 1, "pipeline": "negativity", "state": {"kind": "two_mode_squeezed_vacuum", "r": 0.3},
     "schedule": {"total_shots": 12_000_000, "seed": 42}},
], ids=["single-mode", "negativity"])
def test_criterion_9_determinism(tmp_path, cfg):
    t0 = time.perf_counter()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for run in ("a", "b"):
        assert main(["pipeline", "--config", str(path), "--out", str(tmp_path / run)]) == 0
        outs.append(((tmp_path / run / "tally.csv").read_bytes(), (tmp_path / run / "report.json").read_bytes()))
    same = outs[0] == outs[1]
    report_line(9, same, f"{cfg['pipeline']}: tally CSV and report JSON byte-identical across two runs",
                time.perf_counter() - t0)
    assert same
