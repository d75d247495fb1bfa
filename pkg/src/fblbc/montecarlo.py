"""Monte Carlo checks of the random-coding construction.

Codewords are uniform on power shells (normalized Gaussian vectors). Random
streams are Philox generators keyed by (seed, stream tag, block index) with
fixed-size blocks of trials, so a run is reproducible and independent of how
blocks are spread over workers.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from . import bounds
from ._parallel import pmap
from .bounds import LOG2E, cap_c, disp_v
from .model import AuxCodebookSizes, ValidationError, validate

__all__ = [
    "BLOCK", "BudgetError", "ShellCodeword", "MartonSelection", "Codebooks",
    "SimulationReport", "MomentReport", "block_rng", "sample_shell",
    "cos2_check", "encoding_error_sim", "encoding_failure_exact",
    "marton_encode", "draw_codebooks", "info_density_moments",
    "end_to_end_sim",
]

BLOCK = 4096
PAIR_TEST_BUDGET = 10 ** 9
_TAGS = {"cos2": 1, "enc": 2, "moments": 3, "e2e": 4, "shell": 5}


class BudgetError(RuntimeError):
    """Requested simulation exceeds the computational guard."""


def block_rng(seed, tag, block):
    """Generator for one block of trials."""
    ss = np.random.SeedSequence([int(seed), _TAGS.get(tag, 0), int(block)])
    return np.random.Generator(np.random.Philox(ss))


def _blocks(trials, block=BLOCK):
    out, start = [], 0
    while start < trials:
        out.append((len(out), min(block, trials - start)))
        start += block
    return out


def _run_blocks(fn, rng, tag, trials, block=BLOCK):
    """Apply fn(gen, count) per block; rng is an int seed or a Generator."""
    blocks = _blocks(trials, block)
    if isinstance(rng, np.random.Generator):
        return [fn(rng, cnt) for _, cnt in blocks]
    seed = int(rng)
    return pmap(_BlockCall(fn, seed, tag), blocks)


class _BlockCall:
    def __init__(self, fn, seed, tag):
        self.fn, self.seed, self.tag = fn, seed, tag

    def __call__(self, blk):
        idx, cnt = blk
        return self.fn(block_rng(self.seed, self.tag, idx), cnt)


def _unit(gen, shape):
    g = gen.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# types

@dataclass(frozen=True)
class ShellCodeword:
    x: np.ndarray
    radius: float


@dataclass(frozen=True)
class MartonSelection:
    l1: int = None
    l2: int = None
    rho_star: float = math.nan
    alpha: float = math.nan
    xc: np.ndarray = field(default=None, compare=False, repr=False)

    @property
    def present(self):
        return self.l1 is not None


@dataclass(frozen=True)
class SimulationReport:
    estimate: float
    trials: int
    std_error: float
    analytic_value: float
    z_score: float
    extras: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.extras.get("passed", abs(self.z_score) <= 3.0))


def _bernoulli_report(fails, trials, analytic, **extras):
    p = fails / trials
    se = math.sqrt(p * (1.0 - p) / trials)
    return SimulationReport(p, trials, se, analytic, _bernoulli_z(p, analytic, se, trials), extras)


def _z(est, ref, se):
    if se > 0:
        return (est - ref) / se
    return 0.0 if est == ref else math.copysign(math.inf, est - ref)


def _bernoulli_z(p, ref, se, trials):
    """z-score; at p in {0, 1} the plug-in error is 0, so use the one under ref."""
    if se == 0 and 0.0 < ref < 1.0:
        se = math.sqrt(ref * (1.0 - ref) / trials)
    return _z(p, ref, se)


# ---------------------------------------------------------------------------
# shells and the cos^2 law

def sample_shell(n, radius, rng):
    """Uniform point on the sphere of the given radius in R^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = rng if isinstance(rng, np.random.Generator) else block_rng(rng, "shell", 0)
    x = _unit(gen, (n,)) * radius
    return ShellCodeword(x, float(radius))


def _cos2_block(n):
    def fn(gen, cnt):
        u = _unit(gen, (cnt, n))
        w = _unit(gen, (cnt, n))
        return np.einsum("ij,ij->i", u, w) ** 2
    return fn


class _Cos2Block:
    def __init__(self, n):
        self.n = n

    def __call__(self, gen, cnt):
        return _cos2_block(self.n)(gen, cnt)


def cos2_check(n, trials, rng):
    """cos^2 of the angle between independent shell samples against 1-(1-x)^(n-1).

    The report also carries the KS test against Beta(1/2, (n-1)/2), the law
    of a squared coordinate of a uniform point on the sphere.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    c2 = np.concatenate(_run_blocks(_Cos2Block(n), rng, "cos2", trials))
    ks = stats.kstest(c2, lambda x: -np.expm1((n - 1) * np.log1p(-np.clip(x, 0, 1))))
    ks_sphere = stats.kstest(c2, stats.beta(0.5, 0.5 * (n - 1)).cdf)
    mean = float(c2.mean())
    se = float(c2.std(ddof=1) / math.sqrt(trials))
    return SimulationReport(
        mean, trials, se, 1.0 / n, _z(mean, 1.0 / n, se),
        {"ks_stat": float(ks.statistic), "ks_pvalue": float(ks.pvalue),
         "passed": bool(ks.pvalue > 0.01),
         "ks_stat_sphere": float(ks_sphere.statistic),
         "ks_pvalue_sphere": float(ks_sphere.pvalue)})


# ---------------------------------------------------------------------------
# encoding failure

def _cap_prob(n, rho):
    """P(cos(theta) >= rho) for a uniform direction on the unit sphere in R^n."""
    return 0.5 * (1.0 - special.betainc(0.5, 0.5 * (n - 1), rho * rho))


def _cap_pair_prob(n, rho, c):
    """P(w lies in both caps cos >= rho) for cap centres with inner product c."""
    if n == 2:
        phi, theta = math.acos(rho), math.acos(min(1.0, max(-1.0, c)))
        return max(0.0, 2.0 * phi - theta) / (2.0 * math.pi)
    st = math.sqrt(max(0.0, 1.0 - c * c))
    if st == 0.0:
        return _cap_prob(n, rho) if c > 0 else 0.0
    bnorm = special.beta(0.5, 0.5 * (n - 1))

    def tail(t):
        # P(T >= t) where T^2 ~ Beta(1/2, (n-2)/2), T symmetric
        if t >= 1.0:
            return 0.0
        if t <= -1.0:
            return 1.0
        h = 0.5 * (1.0 - special.betainc(0.5, 0.5 * (n - 2), t * t))
        return h if t >= 0 else 1.0 - h

    def f(x1):
        s = math.sqrt(max(0.0, 1.0 - x1 * x1))
        if s == 0.0:
            return 0.0
        return s ** (n - 3) / bnorm * tail((rho - x1 * c) / (st * s))

    # the boundary of the second cap meets the unit circle of (x1, x2) here
    disc = math.sqrt(max(0.0, (1.0 - rho * rho) * (1.0 - c * c)))
    brk = [x for x in (rho * c - disc, rho * c + disc) if rho < x < 1.0]
    return integrate.quad(f, rho, 1.0, points=brk or None, epsabs=1e-13, epsrel=1e-10,
                          limit=200)[0]


def encoding_failure_exact(n12, rho, L1, L2):
    """Failure probability of the pair search for uniform shells.

    One pair succeeds when cos(theta) >= rho, with probability
    p = (1 - I_{rho^2}(1/2, (n-1)/2)) / 2. Pairs sharing a codeword are
    dependent, so with two codewords on the short side the miss probability
    is averaged over their angle: E[(1 - 2p + q(theta))^L], q the cap
    intersection. Returns nan when both lists have more than two codewords.
    """
    la, lb = sorted((int(L1), int(L2)))
    p = _cap_prob(n12, rho)
    if la == 1:
        return float((1.0 - p) ** lb)
    if la > 2:
        return math.nan
    if n12 == 2:
        # angle between the two centres is uniform on [0, pi]
        f = lambda th: (1.0 - 2.0 * p + _cap_pair_prob(2, rho, math.cos(th))) ** lb / math.pi
        brk = [min(math.pi, 2.0 * math.acos(rho))]
        return float(integrate.quad(f, 0.0, math.pi, points=brk, epsabs=1e-13, limit=200)[0])
    bnorm = special.beta(0.5, 0.5 * (n12 - 1))
    f = lambda c: ((1.0 - c * c) ** (0.5 * (n12 - 3)) / bnorm
                   * (1.0 - 2.0 * p + _cap_pair_prob(n12, rho, c)) ** lb)
    # caps are disjoint below cos(2 acos rho)
    brk = [math.cos(min(math.pi, 2.0 * math.acos(rho)))]
    return float(integrate.quad(f, -1.0, 1.0, points=brk, epsabs=1e-13, epsrel=1e-10, limit=200)[0])


def _closed_form_failure(n12, rho, L1, L2):
    q = (1.0 - rho * rho) ** (n12 - 1)
    return (1.0 - q) ** (L1 * L2)


class _EncBlock:
    def __init__(self, n, rho, L1, L2):
        self.n, self.rho, self.L1, self.L2 = n, rho, L1, L2

    def __call__(self, gen, cnt):
        u = _unit(gen, (cnt, self.L1, self.n))
        w = _unit(gen, (cnt, self.L2, self.n))
        ip = np.einsum("bin,bjn->bij", u, w)
        ok = ((ip >= self.rho) & (ip <= 1.0)).any(axis=(1, 2))
        return int(cnt - ok.sum())


def encoding_error_sim(n12, rho, L1, L2, trials, rng):
    """Frequency with which no bin pair lands in the correlation window."""
    if L1 * L2 * trials > PAIR_TEST_BUDGET:
        raise BudgetError(
            f"{L1 * L2 * trials} pair tests requested; the guard is {PAIR_TEST_BUDGET}")
    if n12 < 2:
        raise ValueError("n12 must be >= 2")
    block = max(1, min(BLOCK, 2 ** 22 // (n12 * (L1 + L2) + L1 * L2)))
    fails = sum(_run_blocks(_EncBlock(n12, rho, L1, L2), rng, "enc", trials, block))
    exact = encoding_failure_exact(n12, rho, L1, L2)
    rep = _bernoulli_report(fails, trials, _closed_form_failure(n12, rho, L1, L2),
                            failures=fails, exact_value=exact)
    rep.extras["z_exact"] = _bernoulli_z(rep.estimate, exact, rep.std_error, trials)
    return rep


# ---------------------------------------------------------------------------
# Marton encoding

@dataclass(frozen=True)
class Codebooks:
    """Shell codebooks: x11 (M1, n11), x12 (M1, L1, n12), x21 (M2, L2, n12), x22 (M2, n22)."""

    x11: np.ndarray
    x12: np.ndarray
    x21: np.ndarray
    x22: np.ndarray


def draw_codebooks(cfg, pa, M1, M2, L1, L2, gen):
    n11, n12, n22 = int(cfg.n11), int(cfg.n12), int(cfg.n22)
    P = cfg.P
    return Codebooks(
        _unit(gen, (M1, n11)) * math.sqrt(n11 * pa.beta11 * P),
        _unit(gen, (M1, L1, n12)) * math.sqrt(n12 * pa.beta12 * P),
        _unit(gen, (M2, L2, n12)) * math.sqrt(n12 * pa.beta21 * P),
        _unit(gen, (M2, n22)) * math.sqrt(n22 * pa.beta22 * P))


def _window(cfg, pa):
    s = cfg.n12 * math.sqrt(pa.beta12 * pa.beta21) * cfg.P
    return s * pa.rho, s


def _alpha(pa, rho_star):
    """Power normalization so that ||alpha (x12 + x21)||^2 = n12 beta_c P."""
    realized = pa.beta12 + pa.beta21 + 2.0 * rho_star * math.sqrt(pa.beta12 * pa.beta21)
    return math.sqrt(pa.betac / realized)


def marton_encode(cfg, pa, codebooks, m1, m2, tol=1e-12):
    """Lexicographically first bin pair whose inner product lies in the window."""
    u = codebooks.x12[m1]
    w = codebooks.x21[m2]
    lo, hi = _window(cfg, pa)
    ip = u @ w.T
    slack = tol * hi
    ok = (ip >= lo - slack) & (ip <= hi + slack)
    hits = np.argwhere(ok)
    if hits.size == 0:
        return MartonSelection()
    l1, l2 = (int(t) for t in hits[0])
    rho_star = float(min(ip[l1, l2] / hi, 1.0))
    alpha = _alpha(pa, rho_star)
    return MartonSelection(l1, l2, rho_star, alpha, alpha * (u[l1] + w[l2]))


# ---------------------------------------------------------------------------
# information density moments

def _cap_cos(gen, n, rho, size):
    """cos(theta) of a uniform direction conditioned on cos(theta) >= rho."""
    a, b = 0.5, 0.5 * (n - 1)
    lo = special.betainc(a, b, rho * rho)
    u = lo + (1.0 - lo) * gen.random(size)
    return np.sqrt(special.betaincinv(a, b, np.minimum(u, 1.0)))


def _selected_pair(gen, cnt, n, rho, r12, r21):
    """Selected Marton pair: x12 uniform, x21 uniform on the cap cos >= rho around x12."""
    e1 = _unit(gen, (cnt, n))
    g = gen.standard_normal((cnt, n))
    g -= np.einsum("ij,ij->i", g, e1)[:, None] * e1
    e2 = g / np.linalg.norm(g, axis=1, keepdims=True)
    c = _cap_cos(gen, n, rho, cnt)
    s = np.sqrt(np.maximum(1.0 - c * c, 0.0))
    return e1 * r12, (c[:, None] * e1 + s[:, None] * e2) * r21, c


def _q_params(cfg, pa, i):
    """Mean scale and variance of the Gaussian surrogate Q_{Y|X} on the overlap."""
    j = 2 if i == 1 else 1
    bij, bji = pa.share(i), pa.share(j)
    mu = math.sqrt(pa.betac / pa.beta_tilde_c) * (1.0 + pa.rho * math.sqrt(bji / bij))
    var = (1.0 - pa.rho ** 2) * bji * cfg.P + cfg.var(i, j)
    return mu, var


class _MomentBlock:
    def __init__(self, cfg, pa, i):
        self.cfg, self.pa, self.i = cfg, pa, i

    def __call__(self, gen, cnt):
        cfg, pa, i = self.cfg, self.pa, self.i
        j = 2 if i == 1 else 1
        P = cfg.P
        n_own, n_ov = int(cfg.blocklength(i, i)), int(cfg.n12)
        dens = np.zeros(cnt)
        if n_own > 0:
            s2 = cfg.var(i, i)
            sy2 = pa.own(i) * P + s2
            x = _unit(gen, (cnt, n_own)) * math.sqrt(n_own * pa.own(i) * P)
            z = gen.standard_normal((cnt, n_own)) * math.sqrt(s2)
            y = x + z
            dens += (-np.einsum("ij,ij->i", z, z) / (2 * s2) + np.einsum("ij,ij->i", y, y) / (2 * sy2)
                     + 0.5 * n_own * math.log(sy2 / s2))
        if n_ov > 0:
            s2 = cfg.var(i, j)
            sy2 = pa.betac * P + s2
            x_own, x_oth, c = _selected_pair(
                gen, cnt, n_ov, pa.rho,
                math.sqrt(n_ov * pa.share(i) * P), math.sqrt(n_ov * pa.share(j) * P))
            alpha = np.sqrt(pa.betac / (pa.beta12 + pa.beta21 + 2 * c * math.sqrt(pa.beta12 * pa.beta21)))
            y = alpha[:, None] * (x_own + x_oth) + gen.standard_normal((cnt, n_ov)) * math.sqrt(s2)
            mu, qv = _q_params(cfg, pa, i)
            d = y - mu * x_own
            dens += (-np.einsum("ij,ij->i", d, d) / (2 * qv) + np.einsum("ij,ij->i", y, y) / (2 * sy2)
                     + 0.5 * n_ov * math.log(sy2 / qv))
        return dens


@dataclass(frozen=True)
class MomentReport:
    """Moments of the modified information density (E in bits, V in bits^2, T in nats^3)."""

    trials: int
    E_hat: float
    V_hat: float
    T_hat: float
    se_E: float
    se_V: float
    se_T: float
    E_min: float
    V_min: float
    log_T_max: float
    encoding_failure_prob: float

    @property
    def checks(self):
        tmax = math.exp(self.log_T_max) if self.log_T_max < 709 else math.inf
        return {
            "E": self.E_hat >= self.E_min - 3 * self.se_E,
            "V": self.V_hat >= self.V_min - 3 * self.se_V,
            "T": self.T_hat <= tmax + 3 * self.se_T,
        }


def info_density_moments(cfg, pa, i, trials, rng, free=None):
    """Sample the modified information density of receiver i and compare its
    moments with E_min, the dispersion sum and T_max.

    The selected Marton pair is drawn from its exact law (first-admissible
    search over independent codewords): x_ii uniform, x_ji uniform on the
    cap cos >= rho around x_ij. The encoding-failure event is thereby
    conditioned out; its probability for one pair is reported.
    """
    if trials < 10_000:
        raise ValueError("trials must be >= 10^4")
    bad = validate(pa, cfg)
    if bad:
        raise ValidationError("; ".join(bad))
    dens = np.concatenate(_run_blocks(_MomentBlock(cfg, pa, i), rng, "moments", trials))
    bits = dens * LOG2E
    m = bits.mean()
    dev = bits - m
    v = float((dev ** 2).mean())
    se_v = math.sqrt(max(float((dev ** 4).mean()) - v * v, 0.0) / trials)
    a3 = np.abs(dens - dens.mean()) ** 3
    t = float(a3.mean())
    se_t = float(a3.std(ddof=1) / math.sqrt(trials))
    view = bounds.receiver_view(cfg, pa, i)
    vmin = view.n_own * disp_v(view.om_own) + view.n_ov * disp_v(view.om_ov)
    mp = bounds._resolve_free(cfg, pa, i, view, free)[0]
    ltm = bounds.t_max(cfg, pa, i, mp) if mp is not None else math.inf
    fail = 0.0
    if cfg.n12 > 1 and pa.rho > 0:
        fail = encoding_failure_exact(int(cfg.n12), pa.rho, 1, 1)
    return MomentReport(trials, float(m), v, t, float(bits.std(ddof=1) / math.sqrt(trials)),
                        se_v, se_t, bounds.e_min(cfg, pa, i), vmin, ltm, fail)


# ---------------------------------------------------------------------------
# end-to-end simulation

class _E2EBlock:
    def __init__(self, cfg, pa, M1, M2, L1, L2):
        self.cfg, self.pa = cfg, pa
        self.M1, self.M2, self.L1, self.L2 = M1, M2, L1, L2

    def __call__(self, gen, cnt):
        cfg, pa = self.cfg, self.pa
        errs = np.zeros(2, dtype=np.int64)
        cond = np.zeros(2, dtype=np.int64)
        enc_fail = 0
        for _ in range(cnt):
            cb = draw_codebooks(cfg, pa, self.M1, self.M2, self.L1, self.L2, gen)
            sel = marton_encode(cfg, pa, cb, 0, 0)
            failed = not sel.present
            if failed:
                enc_fail += 1
                sel = _plant_pair(cfg, pa, cb, gen)
            for i in (1, 2):
                wrong = _decode(cfg, pa, cb, sel, i, gen) != 0
                cond[i - 1] += wrong
                errs[i - 1] += wrong or failed
        return errs, cond, enc_fail


def _plant_pair(cfg, pa, cb, gen):
    """Overwrite bins (0, 0) of messages (0, 0) with a pair from the law of a
    successful selection; used in place of resampling after an encoding failure."""
    n = int(cfg.n12)
    x12, x21, _ = _selected_pair(gen, 1, n, pa.rho, math.sqrt(n * pa.beta12 * cfg.P),
                                 math.sqrt(n * pa.beta21 * cfg.P))
    cb.x12[0, 0] = x12[0]
    cb.x21[0, 0] = x21[0]
    return marton_encode(cfg, pa, cb, 0, 0)


def _decode(cfg, pa, cb, sel, i, gen):
    """Receiver i's message estimate maximizing the Gaussian-surrogate metric."""
    j = 2 if i == 1 else 1
    P = cfg.P
    n_own, n_ov = int(cfg.blocklength(i, i)), int(cfg.n12)
    x_own = cb.x11 if i == 1 else cb.x22
    x_ov = cb.x12 if i == 1 else cb.x21
    M = x_own.shape[0]
    score = np.zeros((M, x_ov.shape[1]))
    if n_own > 0:
        s2 = cfg.var(i, i)
        y = x_own[0] + gen.standard_normal(n_own) * math.sqrt(s2)
        d = y[None, :] - x_own
        score += (-np.einsum("mk,mk->m", d, d) / (2 * s2))[:, None]
    if n_ov > 0:
        s2 = cfg.var(i, j)
        y = sel.xc + gen.standard_normal(n_ov) * math.sqrt(s2)
        mu, qv = _q_params(cfg, pa, i)
        d = y[None, None, :] - mu * x_ov
        score += -np.einsum("mlk,mlk->ml", d, d) / (2 * qv)
    return int(np.unravel_index(np.argmax(score), score.shape)[0])


def end_to_end_sim(cfg, pa, M1, M2, L1, L2, trials, rng, free=(None, None)):
    """Error frequencies of the full scheme (random codebooks per trial).

    An encoding failure counts as an error at both receivers, and the trial
    continues with a planted successful pair so that the conditional decoding
    error is also estimated (extras["conditional_error"]). The analytic
    value is the error probability certified by the finite-blocklength bound
    at log M = log2 M_i and log L = log2 L_i (capped at 1).
    """
    for i, (M, L) in enumerate(((M1, L1), (M2, L2)), 1):
        if M * L > 256:
            raise BudgetError(f"receiver {i}: M*L = {M * L} exceeds 256")
        if cfg.blocklength(i, i) + cfg.n12 > 64:
            raise BudgetError(f"receiver {i}: more than 64 channel uses")
    bad = validate(pa, cfg)
    if bad:
        raise ValidationError("; ".join(bad))
    outs = _run_blocks(_E2EBlock(cfg, pa, M1, M2, L1, L2), rng, "e2e", trials, block=256)
    errs = sum(o[0] for o in outs)
    cond = sum(o[1] for o in outs)
    enc = sum(o[2] for o in outs)
    sizes = AuxCodebookSizes(math.log2(L1), math.log2(L2))
    reps = []
    for i, M in ((1, M1), (2, M2)):
        if M == 1:
            analytic = 0.0
        else:
            analytic = bounds.theorem1_epsilon(cfg, pa, sizes, i, math.log2(M), free[i - 1])
        rep = _bernoulli_report(int(errs[i - 1]) if M > 1 else 0, trials, analytic,
                                encoding_failures=int(enc),
                                conditional_error=(int(cond[i - 1]) if M > 1 else 0) / trials)
        rep.extras["passed"] = rep.estimate <= analytic + 3.0 * rep.std_error
        reps.append(rep)
    return tuple(reps)
