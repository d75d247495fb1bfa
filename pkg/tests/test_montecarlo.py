import math

import mpmath as mp
import numpy as np
import pytest
from scipy import stats

from fblbc import bounds, montecarlo as mc
from fblbc.bounds import cap_c
from fblbc.model import PowerAllocation, SystemConfig


# --- shells ---------------------------------------------------------------------

def test_shell_norms():
    gen = np.random.default_rng(0)
    for n in (1, 2, 7, 300):
        for r in (0.1, 3.0, 1e3):
            cw = mc.sample_shell(n, r, gen)
            assert abs(np.linalg.norm(cw.x) / r - 1) <= 1e-9 and cw.radius == r


def test_shell_n1_signs_balanced():
    gen = np.random.default_rng(1)
    pos = sum(mc.sample_shell(1, 2.0, gen).x[0] > 0 for _ in range(10_000))
    assert stats.chisquare([pos, 10_000 - pos]).pvalue > 0.001


def test_shell_n3_coordinates_uniform():
    gen = np.random.default_rng(2)
    x = np.array([mc.sample_shell(3, 2.0, gen).x[0] for _ in range(100_000)])
    assert stats.kstest(x, stats.uniform(-2, 4).cdf).pvalue > 0.001


def test_shell_rejects_empty():
    with pytest.raises(ValueError):
        mc.sample_shell(0, 1.0, 0)


# --- cos^2 of independent shell directions -----------------------------------------

@pytest.mark.parametrize("n", [2, 10, 50])
def test_cos2_mean_and_sphere_law(n):
    rep = mc.cos2_check(n, 100_000, 7)
    assert abs(rep.z_score) <= 3
    assert rep.analytic_value == 1 / n
    assert rep.extras["ks_pvalue_sphere"] > 0.01


def test_cos2_two_dimensions_is_arcsine():
    # in the plane cos^2 of a uniform angle is Beta(1/2, 1/2), not uniform
    rep = mc.cos2_check(2, 100_000, 3)
    assert rep.extras["ks_pvalue"] < 1e-6
    assert not rep.passed


def test_cos2_rejects_n1():
    with pytest.raises(ValueError):
        mc.cos2_check(1, 10, 0)


# --- encoding failure -------------------------------------------------------------------

@pytest.mark.parametrize("n12", [5, 10, 20])
@pytest.mark.parametrize("rho", [0.2, 0.5, 0.8])
def test_encoding_sim_matches_cap_law(n12, rho):
    rep = mc.encoding_error_sim(n12, rho, 2, 2, 40_000, 11)
    assert abs(rep.extras["z_exact"]) <= 3
    assert rep.std_error == pytest.approx(math.sqrt(rep.estimate * (1 - rep.estimate) / rep.trials))


def test_encoding_exact_law_hemispheres_oracle():
    # rho = 0: two hemispheres at angle t meet in a lune of measure (pi - t)/(2 pi)
    for n in (3, 6):
        dens = lambda t: mp.sin(t) ** (n - 2) / mp.beta(mp.mpf(1) / 2, mp.mpf(n - 1) / 2)
        want = mp.quad(lambda t: ((mp.pi - t) / (2 * mp.pi)) ** 3 * dens(t), [0, mp.pi])
        assert mc.encoding_failure_exact(n, 0.0, 2, 3) == pytest.approx(float(want), rel=1e-9)


def test_encoding_exact_law_circle_oracle():
    # n = 2: arcs of half-width phi at uniform angle t overlap on max(0, 2 phi - t)
    rho, L = 0.5, 2
    phi = mp.acos(rho)
    p = phi / mp.pi
    want = mp.quad(lambda t: (1 - 2 * p + mp.mpf(max(0, 2 * phi - t)) / (2 * mp.pi)) ** L / mp.pi,
                   [0, 2 * phi, mp.pi])
    assert mc.encoding_failure_exact(2, rho, 2, L) == pytest.approx(float(want), rel=1e-9)


def test_encoding_exact_law_symmetric_in_lists():
    assert mc.encoding_failure_exact(7, 0.3, 2, 5) == mc.encoding_failure_exact(7, 0.3, 5, 2)
    assert math.isnan(mc.encoding_failure_exact(7, 0.3, 3, 3))


def test_encoding_pairs_are_not_independent():
    # shared codewords correlate the pair events; the product law is visibly off at small n
    rep = mc.encoding_error_sim(5, 0.2, 2, 2, 200_000, 5)
    p = 1 - mc.encoding_failure_exact(5, 0.2, 1, 1)
    indep = (1 - p) ** 4
    assert abs(rep.estimate - indep) / rep.std_error > 5
    assert abs(rep.extras["z_exact"]) <= 3


def test_encoding_exact_law_is_half_cap():
    # one pair: P(cos >= rho) = (1 - I_{rho^2}(1/2, (n-1)/2)) / 2
    p = 1 - mc.encoding_failure_exact(10, 0.3, 1, 1)
    rng = np.random.default_rng(4)
    u = rng.standard_normal((200_000, 10))
    c = u[:, 0] / np.linalg.norm(u, axis=1)
    emp = float(np.mean(c >= 0.3))
    assert abs(emp - p) <= 3 * math.sqrt(p * (1 - p) / 200_000)


def test_encoding_sim_monotone_in_bins():
    vals = [mc.encoding_error_sim(10, 0.5, L, L, 20_000, 5).estimate for L in (1, 2, 4)]
    assert vals[0] > vals[1] > vals[2]


def test_encoding_sim_guard():
    with pytest.raises(mc.BudgetError, match="pair tests"):
        mc.encoding_error_sim(10, 0.5, 1000, 1000, 1001, 0)
    with pytest.raises(ValueError):
        mc.encoding_error_sim(1, 0.5, 2, 2, 10, 0)


# --- Marton selection ---------------------------------------------------------------------

def _constructed(cfg, pa, cos):
    n = int(cfg.n12)
    e1, e2 = np.eye(n)[0], np.eye(n)[1]
    r12 = math.sqrt(n * pa.beta12 * cfg.P)
    r21 = math.sqrt(n * pa.beta21 * cfg.P)
    x12 = (r12 * e1)[None, None, :]
    x21 = (r21 * (cos * e1 + math.sqrt(1 - cos * cos) * e2))[None, None, :]
    return mc.Codebooks(np.zeros((1, 0)), x12, x21, np.zeros((1, 0)))


def test_marton_exact_correlation_selected():
    cfg = SystemConfig(0, 12, 0, 2.0)
    pa = PowerAllocation.from_ratio(0, 1, 0, 0.6, 1.5)
    sel = mc.marton_encode(cfg, pa, _constructed(cfg, pa, 0.6), 0, 0)
    assert sel.present and (sel.l1, sel.l2) == (0, 0)
    assert sel.rho_star == pytest.approx(0.6, rel=1e-12)
    # alpha normalizes the realized power b12 + b21 + 2 rho* sqrt(b12 b21)
    want = math.sqrt(pa.betac / (pa.beta12 + pa.beta21 + 2 * 0.6 * math.sqrt(pa.beta12 * pa.beta21)))
    assert sel.alpha == pytest.approx(want, rel=1e-12)
    assert float(sel.xc @ sel.xc) == pytest.approx(12 * pa.betac * 2.0, rel=1e-9)


def test_marton_orthogonal_pair_rejected():
    cfg = SystemConfig(0, 12, 0, 2.0)
    pa = PowerAllocation.from_ratio(0, 1, 0, 0.6, 1.5)
    assert not mc.marton_encode(cfg, pa, _constructed(cfg, pa, 0.0), 0, 0).present


def test_marton_random_codebooks_invariants():
    cfg = SystemConfig(0, 10, 0, 3.0)
    pa = PowerAllocation.from_ratio(0, 1, 0, 0.4, 0.7)
    gen = np.random.default_rng(8)
    lo, hi = 10 * math.sqrt(pa.beta12 * pa.beta21) * 3.0 * np.array([0.4, 1.0])
    hits, trials = 0, 4000
    for _ in range(trials):
        cb = mc.draw_codebooks(cfg, pa, 3, 2, 3, 2, gen)
        m1, m2 = 2, 1
        sel = mc.marton_encode(cfg, pa, cb, m1, m2)
        ip = cb.x12[m1] @ cb.x21[m2].T
        ok = (ip >= lo) & (ip <= hi)
        assert sel.present == bool(ok.any())
        if sel.present:
            hits += 1
            assert (sel.l1, sel.l2) == tuple(np.argwhere(ok)[0])
            assert lo * (1 - 1e-12) <= ip[sel.l1, sel.l2] <= hi * (1 + 1e-12)
            assert 0.4 - 1e-12 <= sel.rho_star <= 1.0
            assert float(sel.xc @ sel.xc) == pytest.approx(10 * pa.betac * 3.0, rel=1e-9)
    p = 1 - mc.encoding_failure_exact(10, 0.4, 3, 2)
    assert abs(hits / trials - p) <= 3 * math.sqrt(p * (1 - p) / trials)


def test_selected_pair_law_matches_explicit_search():
    n, rho = 8, 0.5
    gen = np.random.default_rng(9)
    explicit = []
    while len(explicit) < 3000:
        u = mc._unit(gen, (3, n))
        w = mc._unit(gen, (3, n))
        ip = u @ w.T
        hits = np.argwhere(ip >= rho)
        if hits.size:
            explicit.append(ip[tuple(hits[0])])
    _, _, c = mc._selected_pair(np.random.default_rng(10), 20_000, n, rho, 1.0, 1.0)
    assert c.min() >= rho - 1e-12
    assert stats.ks_2samp(explicit, c).pvalue > 0.001


# --- information density moments --------------------------------------------------------------

def test_p2p_mean_is_capacity():
    cfg = SystemConfig(30, 0, 0, 2.0)
    pa = PowerAllocation(1, 0, 0, 0, 0, 0)
    rep = mc.info_density_moments(cfg, pa, 1, 40_000, 3, free=None)
    assert abs(rep.E_hat - 30 * cap_c(2.0)) <= 3 * rep.se_E
    assert rep.encoding_failure_prob == 0.0


def test_moments_vanish_without_power():
    cfg = SystemConfig(20, 20, 0, 1e-8)
    pa = PowerAllocation.from_ratio(1, 1, 0, 0.8, 1)
    rep = mc.info_density_moments(cfg, pa, 1, 10_000, 4)
    assert abs(rep.E_hat) < 1e-3 and rep.V_hat < 1e-3 and rep.T_hat < 1e-5


def test_moments_checks_reported():
    cfg = SystemConfig(20, 20, 0, 1.0)
    pa = PowerAllocation.from_ratio(1, 1, 0, 0.8, 1)
    rep = mc.info_density_moments(cfg, pa, 1, 10_000, 5)
    assert set(rep.checks) == {"E", "V", "T"}
    assert rep.encoding_failure_prob == pytest.approx(mc.encoding_failure_exact(20, 0.8, 1, 1))
    with pytest.raises(ValueError):
        mc.info_density_moments(cfg, pa, 1, 9_999, 5)


# --- end to end ------------------------------------------------------------------------------------

def _small():
    cfg = SystemConfig(8, 8, 8, 5.0)
    return cfg, PowerAllocation.from_ratio(1, 1, 1, 0.5, 1)


def test_e2e_single_message_never_errs():
    cfg, pa = _small()
    r1, r2 = mc.end_to_end_sim(cfg, pa, 1, 4, 2, 2, 200, 0)
    assert r1.estimate == 0.0 and r1.analytic_value == 0.0
    assert r2.trials == 200


def test_e2e_noiseless_errors_are_encoding_failures():
    cfg = SystemConfig(8, 8, 8, 5.0, ((1e-6, 1e-6), (1e-6, 1e-6)))
    pa = PowerAllocation.from_ratio(1, 1, 1, 0.5, 1)
    reps = mc.end_to_end_sim(cfg, pa, 4, 4, 2, 2, 300, 1)
    for r in reps:
        assert r.extras["conditional_error"] == 0.0
        assert r.estimate == r.extras["encoding_failures"] / 300


def test_e2e_guards():
    cfg, pa = _small()
    with pytest.raises(mc.BudgetError):
        mc.end_to_end_sim(cfg, pa, 200, 2, 2, 2, 10, 0)
    with pytest.raises(mc.BudgetError):
        mc.end_to_end_sim(SystemConfig(40, 30, 8, 5.0), pa, 2, 2, 2, 2, 10, 0)


# --- determinism -------------------------------------------------------------------------------------

def test_seeded_runs_repeat_exactly():
    assert mc.encoding_error_sim(10, 0.5, 2, 2, 10_000, 3) == mc.encoding_error_sim(10, 0.5, 2, 2, 10_000, 3)
    cfg, pa = _small()
    assert mc.end_to_end_sim(cfg, pa, 4, 4, 2, 2, 300, 2) == mc.end_to_end_sim(cfg, pa, 4, 4, 2, 2, 300, 2)


def test_parallel_blocks_match_serial(monkeypatch):
    serial = mc.cos2_check(10, 3 * mc.BLOCK + 17, 12)
    monkeypatch.setenv("FBL_THREADS", "2")
    par = mc.cos2_check(10, 3 * mc.BLOCK + 17, 12)
    assert serial == par


def test_generator_stream_is_reproducible():
    a = mc.encoding_error_sim(10, 0.5, 2, 2, 5_000, np.random.default_rng(1))
    b = mc.encoding_error_sim(10, 0.5, 2, 2, 5_000, np.random.default_rng(1))
    assert a == b
