"""Achievability bounds for the two-user broadcast channel and its special cases.

Units: rates, log M, log L, capacities and the normal-approximation terms are
in bits. The modified information density and its moment bounds (E_min's
correction terms, kappa, T_max) are natural-log quantities; they are
converted once where they meet a bit-valued expression. The Berry-Esseen
ratio T/V^{3/2} is evaluated with V in nats^2 so that it is unit-free.
"""
import math
from dataclasses import dataclass, field, replace

from . import specfun
from .model import (
    AuxCodebookSizes, PowerAllocation, SystemConfig, ValidationError,
    derive_snrs, j_broadcast, log2_j_p2p, validate,
)
from .specfun import DEFAULT_PRECISION, gamma_ratio_half, q_func, q_inv

__all__ = [
    "InfeasibleParamsError", "MomentBoundParams", "BoundResult", "RatePoint",
    "Prop2Region", "ReceiverView", "DEFAULT_FREE",
    "cap_c", "disp_v", "receiver_view", "moment_params", "a_poly", "t_max",
    "e_min", "delta_i", "l_constraint", "theorem1_rate", "theorem1_epsilon",
    "theorem2_rate", "theorem3_rate", "theorem4_rates", "prop1_rate",
    "prop1_l_constraint", "prop2_region", "normal_approx",
    "parallel_normal_approx", "l_split_from_lambda", "rate_from_terms",
]

LN2 = math.log(2.0)
LOG2E = 1.0 / LN2
SQRT2 = math.sqrt(2.0)
DEFAULT_FREE = (1.5, 2.0, 2.0)
_ZETA_MARGIN = 1e-6


class InfeasibleParamsError(ValueError):
    """Free parameters (kappa, zeta, zeta_t) violate the tail-bound admissibility."""


# ---------------------------------------------------------------------------
# capacity / dispersion

def cap_c(x):
    """Gaussian capacity 0.5*log2(1+x) in bits."""
    if x < 0:
        raise specfun.DomainError("cap_c needs x >= 0")
    return 0.5 * math.log1p(x) * LOG2E


def disp_v(x):
    """Gaussian dispersion x(2+x)/(2(1+x)^2) * (log2 e)^2 in bits^2."""
    if x < 0:
        raise specfun.DomainError("disp_v needs x >= 0")
    return x * (2.0 + x) / (2.0 * (1.0 + x) ** 2) * LOG2E * LOG2E


# ---------------------------------------------------------------------------
# per-receiver view

@dataclass(frozen=True)
class ReceiverView:
    """Everything the bound of one receiver depends on.

    Powers are stored as products beta*P; the share ratios are scale free, so
    the degenerate substitutions (beta_ji = 0, n_ij = 0) stay finite.
    """

    i: int
    n_own: float
    n_ov: float
    var_own: float
    var_ov: float
    p_own: float        # beta_ii P
    pc: float           # beta_c P
    p_ov_own: float     # beta_ij P
    p_ov_other: float   # beta_ji P
    rho: float
    s_ratio: float      # sqrt(beta_c / beta~_c)
    s_ratio_inv: float  # sqrt(beta~_c / beta_c)
    r_other: float      # sqrt(beta_ji / beta_ij)
    frac_other: float   # beta_ji / beta~_c
    om_own: float
    om_ov: float
    log2_j: float
    j_kind: str
    eps: float
    K: float

    @property
    def n_total(self):
        return self.n_own + self.n_ov


def receiver_view(cfg, pa, i):
    """Resolve cfg/pa into the quantities of receiver i's bound."""
    if i not in (1, 2):
        raise ValueError("receiver index must be 1 or 2")
    bad = validate(pa, cfg)
    if bad:
        raise ValidationError("; ".join(bad))
    j = 2 if i == 1 else 1
    snr = derive_snrs(cfg, pa)
    P = cfg.P
    n_own, n_ov = cfg.blocklength(i, i), cfg.n12
    bij, bji = pa.share(i), pa.share(j)
    var_own, var_ov = cfg.var(i, i), cfg.var(i, j)
    p_own = pa.own(i) * P
    if n_ov > 0 and bij > 0 and bji > 0:
        kind = "broadcast"
        log2_j = j_broadcast(cfg, pa, i)
    elif n_ov > 0 and bij > 0:
        kind = "parallel"
        log2_j = log2_j_p2p(var_ov, bij * P)
        if n_own > 0:
            log2_j += log2_j_p2p(var_own, p_own)
    elif n_ov > 0:
        raise ValueError(f"receiver {i} has no Marton share on the overlap phase")
    else:
        kind = "p2p"
        log2_j = log2_j_p2p(var_own, p_own)
    btc = pa.beta_tilde_c
    if n_ov > 0:
        s_ratio = math.sqrt(pa.betac / btc)
        s_ratio_inv = math.sqrt(btc / pa.betac)
        r_other = math.sqrt(bji / bij)
        frac_other = bji / btc
    else:
        s_ratio = s_ratio_inv = 1.0
        r_other = frac_other = 0.0
    return ReceiverView(
        i=i, n_own=n_own, n_ov=n_ov, var_own=var_own, var_ov=var_ov,
        p_own=p_own, pc=pa.betac * P, p_ov_own=bij * P, p_ov_other=bji * P,
        rho=pa.rho, s_ratio=s_ratio, s_ratio_inv=s_ratio_inv, r_other=r_other,
        frac_other=frac_other, om_own=snr(i, i), om_ov=snr(i, j),
        log2_j=log2_j, j_kind=kind, eps=cfg.eps(i), K=cfg.K(i))


# ---------------------------------------------------------------------------
# moment bounds

@dataclass(frozen=True)
class MomentBoundParams:
    kappa: float
    zeta: float
    zeta_t: float
    k: float
    k_t: float
    b: float
    b_t: float
    c: float
    c_t: float
    kappa_t: float
    c_clamped: bool = False
    c_t_clamped: bool = False
    violations: tuple = ()

    @property
    def admissible(self):
        return not self.violations


def _gamma_half(n):
    return gamma_ratio_half(n) if n > 0 else 0.0


def _c_value(kappa_sum, k, b):
    """0.5*(sqrt(kappa_sum/(2k)) - b/2)^2, clamped at 0 when the inner term is negative."""
    if kappa_sum < 0:
        return 0.0, True
    d = math.sqrt(kappa_sum / (2.0 * k)) - 0.5 * b
    if d < 0:
        return 0.0, True
    return 0.5 * d * d, False


def _scalars(v):
    """k, b, k~, b~, kappa~ of a receiver view."""
    om, s2o = v.om_own, v.var_own
    k = (2.0 + om) / (2.0 * s2o * (1.0 + om))
    b = math.sqrt(v.n_own * om) / (k * math.sqrt(s2o) * (1.0 + om))
    s2, pc = v.var_ov, v.pc
    k_t = (2.0 * s2 + pc) / (2.0 * s2 * (pc + s2))
    a_own = math.sqrt(v.n_ov * v.p_ov_own)
    a_oth = math.sqrt(v.n_ov * v.p_ov_other)
    b_t = (a_oth + a_own / (k_t * s2) * (1.0 - v.s_ratio * (1.0 + v.rho * v.r_other))
           + a_own / (k_t * (pc + s2)))
    kap_t = (k * b * b / 4.0 + k_t * b_t * b_t / 4.0
             - 0.5 * v.n_own * math.log1p(om)
             - 0.5 * v.n_ov * math.log((pc + s2) / s2)
             - v.n_own * om / (2.0 * (1.0 + om))
             - k_t * b_t
             - v.n_ov * v.p_ov_own / (2.0 * (pc + s2))
             + 0.5 * s2 * (k_t * (b_t - a_oth) - a_own / (pc + s2)) ** 2)
    return k, b, k_t, b_t, kap_t


def _admissibility(n, zeta, c, label):
    if n <= 2:
        return f"{label}: tail bound needs n > 2 (n = {n})"
    lhs = zeta / ((zeta - 1.0) * (0.5 * n - 1.0))
    if not lhs < c:
        return f"{label}: zeta/((zeta-1)(n/2-1)) = {lhs!r} not < c = {c!r}"
    return None


def _params_from_view(v, free, check=True):
    kappa, zeta, zeta_t = free
    if not (kappa > 1 and zeta > 1 and zeta_t > 1):
        raise InfeasibleParamsError("free parameters must all exceed 1")
    k, b, k_t, b_t, kap_t = _scalars(v)
    c, cl = _c_value(kap_t + kappa, k, b)
    c_t, cl_t = _c_value(kap_t + kappa, k_t, b_t)
    viol = []
    if v.n_own > 0:
        msg = _admissibility(v.n_own, zeta, c, "own phase")
        if msg:
            viol.append(msg)
    if v.n_ov > 0:
        msg = _admissibility(v.n_ov, zeta_t, c_t, "overlap phase")
        if msg:
            viol.append(msg)
    mp = MomentBoundParams(kappa, zeta, zeta_t, k, k_t, b, b_t, c, c_t, kap_t,
                           cl, cl_t, tuple(viol))
    if check and viol:
        raise InfeasibleParamsError("; ".join(viol))
    return mp


def moment_params(cfg, pa, i, free=DEFAULT_FREE, check=True):
    """Derived tail-bound scalars of receiver i for free = (kappa, zeta, zeta_t)."""
    return _params_from_view(receiver_view(cfg, pa, i), free, check)


def kappa_floor(v, zeta=math.inf, zeta_t=math.inf):
    """Smallest kappa admissible for the given zetas (inf when none is)."""
    k, b, k_t, b_t, kap_t = _scalars(v)
    lo = 1.0
    for n, z, kk, bb in ((v.n_own, zeta, k, b), (v.n_ov, zeta_t, k_t, b_t)):
        if n <= 0:
            continue
        if n <= 2:
            return math.inf
        g = 1.0 / (0.5 * n - 1.0) if math.isinf(z) else z / ((z - 1.0) * (0.5 * n - 1.0))
        need = 2.0 * kk * (0.5 * bb + math.sqrt(2.0 * g)) ** 2 - kap_t
        lo = max(lo, need)
    return lo


_SQ = SQRT2


def _a_terms(n, k, b, kappa_t):
    u = kappa_t + 1.0
    kb2 = k * b * b
    h = 0.5 * n
    return (
        (u ** 3 - k ** 3 * b ** 6 / 8.0 - 1.5 * u * kb2 * (u - 0.5 * kb2), -h + 1.0),
        (-3.0 * k * (5.0 * k * k * b ** 4 + 4.0 * u * (u - 3.0 * kb2)), -h),
        (-96.0 * _SQ * k ** 3 * b, -h - 1.5),
        (-3.0 * k * b * (k * k * b ** 4 / _SQ + 2.0 * _SQ * u * b * (u - kb2)), -h + 0.5),
        (-64.0 * k ** 3, -h - 2.0),
        (8.0 * _SQ * k * k * b * (6.0 * u - 5.0 * kb2), -h - 0.5),
        (24.0 * k * (2.0 * u * u - 5.0 * k * k * b * b), -h - 1.0),
    )


def a_poly(n, k, b, c, kappa_t, prec=DEFAULT_PRECISION, phi=None):
    """A(n, k, b, c) as (log|A|, sign); sign 0 means A == 0.

    ``phi(s, a, prec)`` returns (log value, sign) of Phi(1/e, s, a); it
    defaults to the specfun series and is a seam for tests.
    """
    if n < 2:
        raise specfun.DomainError("a_poly needs n >= 2")
    if c < 0:
        raise specfun.DomainError("a_poly needs c >= 0")
    phi = phi or specfun.lerch_phi_einv
    parts = []
    for coef, s in _a_terms(n, k, b, kappa_t):
        if coef == 0.0:
            continue
        lphi, sphi = phi(s, c, prec)
        if sphi == 0:
            continue
        parts.append((math.log(abs(coef)) + lphi, (1 if coef > 0 else -1) * sphi))
    return _signed_logsum(parts)


def _signed_logsum(parts):
    if not parts:
        return -math.inf, 0
    m = max(p[0] for p in parts)
    if math.isinf(m):
        return m, (0 if m < 0 else parts[0][1])
    tot = math.fsum(sg * math.exp(lv - m) for lv, sg in parts)
    if tot == 0.0:
        return -math.inf, 0
    return m + math.log(abs(tot)), (1 if tot > 0 else -1)


def _branch(n, zeta, c, k, b, kappa_t, prec, phi=None):
    """log|.| and sign of zeta 2^{(n-2)/4} e^{-c} A / Gamma(n/2); inactive when n == 0."""
    if n <= 0:
        return -math.inf, 0
    la, sa = a_poly(n, k, b, c, kappa_t, prec, phi)
    if sa == 0:
        return -math.inf, 0
    return math.log(zeta) + 0.25 * (n - 2) * LN2 - c + la - math.lgamma(0.5 * n), sa


def _log_tmax(v, mp, prec=DEFAULT_PRECISION, phi=None):
    """(ln T_max, info) for admissible params."""
    br = (_branch(v.n_own, mp.zeta, mp.c, mp.k, mp.b, mp.kappa_t, prec, phi),
          _branch(v.n_ov, mp.zeta_t, mp.c_t, mp.k_t, mp.b_t, mp.kappa_t, prec, phi))
    # the max of the two branch values; an inactive branch is exactly 0
    vals = [(lv, sg) for lv, sg in br if sg != 0] or [(-math.inf, 0)]
    pos = [lv for lv, sg in vals if sg > 0]
    if pos:
        lmax, clamped = max(pos), False
    else:
        lmax, clamped = -math.inf, any(sg < 0 for _, sg in vals)
    l8k = math.log(8.0 * mp.kappa)
    lt = l8k if lmax == -math.inf else _logaddexp(l8k, math.log(16.0) + lmax)
    return lt, {"branches": br, "negative_max_clamped": clamped}


def _logaddexp(x, y):
    if x < y:
        x, y = y, x
    if y == -math.inf:
        return x
    return x + math.log1p(math.exp(y - x))


def t_max(cfg, pa, i, params, prec=DEFAULT_PRECISION, phi=None):
    """ln T_max,i (T_max in nats^3) at admissible params (MomentBoundParams or a free triple)."""
    v = receiver_view(cfg, pa, i)
    if not isinstance(params, MomentBoundParams):
        params = _params_from_view(v, params)
    elif not params.admissible:
        raise InfeasibleParamsError("; ".join(params.violations))
    return _log_tmax(v, params, prec, phi)[0]


def _emin_parts(v):
    """(leading part in bits, remaining corrections in nats)."""
    lead = 0.5 * (v.n_own * math.log1p(v.om_own) + v.n_ov * math.log1p(v.om_ov)) * LOG2E
    k, b, _, _, _ = _scalars(v)
    s2o = v.var_own
    corr = (1.0 - s2o) * v.n_own * v.om_own / (2.0 * (1.0 + v.om_own))
    corr -= SQRT2 * s2o * _gamma_half(v.n_own) * k * b
    if v.n_ov > 0:
        n, s2, pc, rho = v.n_ov, v.var_ov, v.pc, v.rho
        g = _gamma_half(n)
        den = s2 * (pc + s2)
        corr -= n * s2 * pc / (2.0 * (s2 + pc))
        corr -= pc * v.p_ov_other * n / (2.0 * den)
        pref = pc * n * v.frac_other / (2.0 * den)
        corr += pref * (s2 + (pc - s2) * (v.s_ratio_inv - 1.0 - rho * v.r_other) ** 2)
        # pref * (-sqrt(2P) beta~_c Gamma / sqrt(n beta_ji)), written without the 0/0 at beta_ji = 0
        corr -= pc * SQRT2 * g * math.sqrt(n * v.p_ov_other) / (2.0 * den)
        corr += (math.sqrt(n * v.p_ov_own)
                 * (v.s_ratio * (1.0 / (s2 + pc) + 1.0 + rho * v.r_other) - 1.0 / s2)
                 * (rho * math.sqrt(n * v.p_ov_other) - s2 * SQRT2 * g))
    return lead, corr


def e_min(cfg, pa, i):
    """Lower bound on the mean of the modified information density, in bits."""
    lead, corr = _emin_parts(receiver_view(cfg, pa, i))
    return lead + corr * LOG2E


# ---------------------------------------------------------------------------
# Delta and the L constraint

def _log_encoding_fail(n_ov, rho, log2_ll):
    """ln of (1 - (1-rho^2)^(n-1))^(L1 L2), with L1 L2 = 2^log2_ll."""
    if n_ov <= 0:
        return -math.inf
    lq = (n_ov - 1) * math.log1p(-rho * rho) if rho < 1 else (-math.inf if n_ov > 1 else 0.0)
    q = math.exp(lq)
    if q == 1.0:
        return -math.inf
    # ln(-ln(1-q)), accurate when q underflows
    lnd = lq + q / 2.0 if q < 1e-8 else math.log(-math.log1p(-q))
    x = log2_ll * LN2 + lnd
    return -math.exp(x) if x < 709.0 else -math.inf


def l_constraint(cfg, pa):
    """Minimum of log L1 + log L2 (bits) keeping the encoding failure below eps12.

    Returns 0 when there is nothing to constrain (rho = 0 or n12 <= 1) and
    inf for rho = 1.
    """
    rho, n = pa.rho, cfg.n12
    if rho <= 0.0 or n <= 1:
        return 0.0
    if rho >= 1.0:
        return math.inf
    lq = (n - 1) * math.log1p(-rho * rho)
    q = math.exp(lq)
    lnd = lq + q / 2.0 if q < 1e-8 else math.log(-math.log1p(-q))
    return (cfg.log_neg_log_eps12() - lnd) * LOG2E


def prop1_l_constraint(cfg, pa):
    """Large-n form log2(-ln eps12) - n12 log2(1 - rho^2)."""
    rho = pa.rho
    if not 0.0 < rho < 1.0:
        raise specfun.DomainError("prop1_l_constraint needs rho in (0, 1)")
    return cfg.log_neg_log_eps12() * LOG2E - cfg.n12 * math.log2(1.0 - rho * rho)


def _safe_exp(x):
    return math.exp(x) if x < 709.0 else math.inf


def _delta_view(v, mp, log2_ll, prec=DEFAULT_PRECISION, phi=None):
    """Delta terms of a receiver view; returns (delta, terms, logs, info)."""
    vsum_bits = v.n_own * disp_v(v.om_own) + v.n_ov * disp_v(v.om_ov)
    if not vsum_bits > 0:
        raise specfun.DomainError("dispersion sum is zero")
    info = {}
    if mp is None:
        lbe = math.inf
    else:
        lt, info = _log_tmax(v, mp, prec, phi)
        lbe = math.log(6.0) + lt - 1.5 * math.log(vsum_bits / (LOG2E * LOG2E))
    lcom = _log_com(v)
    lenc = _log_encoding_fail(v.n_ov, v.rho, log2_ll)
    terms = (_safe_exp(lbe), _safe_exp(lcom), math.exp(lenc))
    return sum(terms), terms, (lbe, lcom, lenc), info


def _log_com(v):
    """ln of the change-of-measure term; the leading sum cancels analytically."""
    _, corr = _emin_parts(v)
    log2_val = -corr * LOG2E + v.K * math.log2(v.n_total) - v.log2_j
    return log2_val * LN2


def delta_i(cfg, pa, sizes, i, free=None, prec=DEFAULT_PRECISION):
    """(Delta_i, (berry_esseen, change_of_measure, encoding)); free=None tightens."""
    v = receiver_view(cfg, pa, i)
    mp = _resolve_free(cfg, pa, i, v, free)[0]
    d, terms, _, _ = _delta_view(v, mp, sizes.logL1 + sizes.logL2, prec)
    return d, terms


def _resolve_free(cfg, pa, i, v, free):
    if free is not None:
        return _params_from_view(v, free), {"tightened": False}
    from .optimizer import tighten_free_params
    trip, info = tighten_free_params(cfg, pa, i, return_info=True)
    if info.get("fallback"):
        try:
            return _params_from_view(v, trip), info
        except InfeasibleParamsError:
            return None, info
    return _params_from_view(v, trip), info


# ---------------------------------------------------------------------------
# results

@dataclass(frozen=True)
class BoundResult:
    logM: float
    logL: float
    rate: float          # per own window, log M / (n_ii + n12)
    rate_total: float    # log M / n
    delta: float
    delta_terms: tuple
    feasible: bool
    capacity: float = math.nan
    dispersion: float = math.nan
    log_term: float = math.nan
    eps: float = math.nan
    meta: dict = field(default_factory=dict, compare=False)

    def numbers(self):
        """All numeric fields, for exact comparisons."""
        return (self.logM, self.logL, self.rate, self.rate_total, self.delta,
                *self.delta_terms, self.feasible, self.capacity, self.dispersion,
                self.log_term, self.eps)


@dataclass(frozen=True)
class RatePoint:
    R1: float
    R2: float
    normalization: str = "per-own-window"

    def __post_init__(self):
        if self.normalization not in ("per-own-window", "per-total-n"):
            raise ValueError("normalization must be per-own-window or per-total-n")


def rate_from_terms(capacity, dispersion, log_term, eps, delta):
    """capacity - sqrt(dispersion) Q^{-1}(eps - delta) + log_term, or nan if eps - delta not in (0,1)."""
    x = eps - delta
    if not 0.0 < x < 1.0:
        return math.nan
    return capacity - math.sqrt(dispersion) * q_inv(x) + log_term


def theorem1_rate(cfg, pa, sizes=None, i=1, free=None, prec=DEFAULT_PRECISION, theorem="theorem1"):
    """Finite-blocklength bound on log M_i for receiver i.

    ``free`` fixes (kappa, zeta, zeta_t); by default they are tightened. When
    the parameter-free addends already use up eps_i the result is infeasible
    for every choice and the tightening is skipped.
    """
    sizes = sizes or AuxCodebookSizes()
    v = receiver_view(cfg, pa, i)
    cap = v.n_own * cap_c(v.om_own) + v.n_ov * cap_c(v.om_ov)
    disp = v.n_own * disp_v(v.om_own) + v.n_ov * disp_v(v.om_ov)
    lterm = v.K * math.log2(v.n_total) if v.n_total > 0 else 0.0
    logL = sizes.logL(i)
    meta = {"theorem": theorem, "receiver": i, "j_kind": v.j_kind}
    lc = l_constraint(cfg, pa) if v.j_kind == "broadcast" else 0.0
    l_ok = sizes.logL1 + sizes.logL2 >= lc - 1e-9
    meta["l_constraint"] = lc
    meta["l_ok"] = l_ok
    if not disp > 0:
        meta["reason"] = "zero dispersion (no power or no channel uses)"
        return BoundResult(math.nan, logL, math.nan, math.nan, math.inf,
                           (math.inf, math.inf, 0.0), False, cap, disp, lterm, v.eps, meta)
    log2_ll = sizes.logL1 + sizes.logL2
    mp, finfo = None, {}
    if free is not None:
        try:
            mp = _params_from_view(v, free)
        except InfeasibleParamsError as e:
            meta["reason"] = f"inadmissible free parameters: {e}"
    else:
        # parameter-free part plus the smallest possible Berry-Esseen term
        kfl = kappa_floor(v)
        lcom = _log_com(v)
        lenc = _log_encoding_fail(v.n_ov, v.rho, log2_ll)
        lbe_lb = math.log(48.0 * kfl) - 1.5 * math.log(disp / (LOG2E * LOG2E)) if kfl < math.inf else math.inf
        floor = _safe_exp(lcom) + math.exp(lenc) + _safe_exp(lbe_lb)
        if floor >= v.eps:
            meta["tightened"] = False
            meta["skip_reason"] = "eps exhausted for every free-parameter choice"
            trip = _repaired_default(v)
            if trip is not None:
                mp = _params_from_view(v, trip)
        else:
            mp, finfo = _resolve_free(cfg, pa, i, v, None)
            meta["tightened"] = not finfo.get("fallback", False)
    if mp is None and "reason" not in meta:
        meta["reason"] = "no admissible free parameters"
    if mp is not None:
        meta["free"] = (mp.kappa, mp.zeta, mp.zeta_t)
    delta, terms, logs, tinfo = _delta_view(v, mp, log2_ll, prec)
    meta["log_delta_terms"] = logs
    if tinfo.get("negative_max_clamped"):
        meta["negative_max_clamped"] = True
    rhs = rate_from_terms(cap, disp, lterm, v.eps, delta)
    feasible = l_ok and not math.isnan(rhs)
    if not feasible and "reason" not in meta:
        meta["reason"] = "L constraint violated" if not l_ok else "Delta >= eps"
    logM = rhs - logL if feasible else math.nan
    return BoundResult(logM, logL, logM / v.n_total, logM / cfg.n, delta, terms, feasible,
                       cap, disp, lterm, v.eps, meta)


def _repaired_default(v):
    kap, z, zt = DEFAULT_FREE
    kfl = kappa_floor(v, z, zt)
    if kfl == math.inf:
        return None
    if kap <= kfl:
        kap = kfl * (1.0 + 1e-9) + 1e-9
    return (kap, z, zt)


def theorem1_epsilon(cfg, pa, sizes, i, logM, free=None):
    """Error probability the bound certifies for given log M_i, capped at 1."""
    sizes = sizes or AuxCodebookSizes()
    v = receiver_view(cfg, pa, i)
    cap = v.n_own * cap_c(v.om_own) + v.n_ov * cap_c(v.om_ov)
    disp = v.n_own * disp_v(v.om_own) + v.n_ov * disp_v(v.om_ov)
    lterm = v.K * math.log2(v.n_total)
    mp = _resolve_free(cfg, pa, i, v, free)[0]
    delta = _delta_view(v, mp, sizes.logL1 + sizes.logL2)[0]
    z = (cap + lterm - logM - sizes.logL(i)) / math.sqrt(disp)
    return min(1.0, delta + q_func(z))


# ---------------------------------------------------------------------------
# special cases

def _p2p_config(n, omega, eps, K, sigma2):
    if not omega > 0:
        raise specfun.DomainError("omega must be positive")
    cfg = SystemConfig(n, 0, 0, omega * sigma2, ((sigma2, 1.0), (1.0, 1.0)),
                       eps1=eps, eps2=eps, K1=K, K2=K)
    return cfg, PowerAllocation(1.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def theorem2_rate(n, omega, eps, K, sigma2=1.0, free=None):
    """Single point-to-point channel: n uses at SNR omega (noise variance sigma2)."""
    cfg, pa = _p2p_config(n, omega, eps, K, sigma2)
    return theorem1_rate(cfg, pa, None, 1, free, theorem="theorem2")


def _parallel_config(n11, n12, omegas, eps, K, sigma2_11):
    om1, om2 = omegas
    if not (om1 > 0 and om2 > 0):
        raise specfun.DomainError("omegas must be positive")
    P = om1 * sigma2_11
    cfg = SystemConfig(n11, n12, 0, P, ((sigma2_11, P / om2), (1.0, 1.0)),
                       eps1=eps, eps2=eps, K1=K, K2=K)
    return cfg, PowerAllocation(1.0, 1.0, 0.0, 1.0, 0.0, 0.0)


def theorem3_rate(n11, n12, omegas, eps, K, sigma2_11=1.0, free=None):
    """Two parallel point-to-point channels with SNRs omegas over n11 and n12 uses.

    Both phases use full power; the SNR difference comes from the noise
    variances (sigma2_11 given, sigma2_12 = P/omega_2).
    """
    cfg, pa = _parallel_config(n11, n12, omegas, eps, K, sigma2_11)
    return theorem1_rate(cfg, pa, None, 1, free, theorem="theorem3")


def timeshare_configs(cfg, ts, K1t, K2t):
    """Stretched single-user configurations of the time-sharing scheme."""
    ts.check(cfg)
    share = round(ts.eta * cfg.n12)
    c = replace(cfg, n11=cfg.n11 + share, n12=0,
                n22=cfg.n22 + cfg.n12 - share, K1=K1t, K2=K2t)
    pa = PowerAllocation(ts.beta11_ts, 0.0, ts.beta22_ts, 0.0, 0.0, 0.0)
    return c, pa


def theorem4_rates(cfg, ts, K1t, K2t, free=(None, None)):
    """Time sharing of the overlap window: two independent P2P bounds."""
    c, pa = timeshare_configs(cfg, ts, K1t, K2t)
    out = []
    for i in (1, 2):
        if c.blocklength(i, i) <= 0:
            out.append(BoundResult(math.nan, 0.0, math.nan, math.nan, math.inf,
                                   (math.inf, math.inf, 0.0), False,
                                   meta={"theorem": "theorem4", "receiver": i,
                                         "reason": "no channel uses"}))
            continue
        r = theorem1_rate(c, pa, None, i, free[i - 1], theorem="theorem4")
        # rates are reported against the original windows and total length
        out.append(replace(r, rate=r.logM / (cfg.blocklength(i, i) + cfg.n12),
                           rate_total=r.logM / cfg.n))
    return tuple(out)


def prop1_rate(cfg, pa, sizes=None, i=1):
    """Large-n form: Delta dropped, O(log n) term K_i log2(n_i)."""
    sizes = sizes or AuxCodebookSizes()
    v = receiver_view(cfg, pa, i)
    cap = v.n_own * cap_c(v.om_own) + v.n_ov * cap_c(v.om_ov)
    disp = v.n_own * disp_v(v.om_own) + v.n_ov * disp_v(v.om_ov)
    lterm = v.K * math.log2(v.n_total)
    if v.j_kind == "broadcast" and pa.rho > 0:
        lc = prop1_l_constraint(cfg, pa)
    else:
        lc = 0.0
    l_ok = sizes.logL1 + sizes.logL2 >= lc - 1e-9
    rhs = rate_from_terms(cap, disp, lterm, v.eps, 0.0)
    feasible = l_ok and not math.isnan(rhs)
    logM = rhs - sizes.logL(i) if feasible else math.nan
    meta = {"theorem": "prop1", "receiver": i, "l_constraint": lc, "l_ok": l_ok}
    return BoundResult(logM, sizes.logL(i), logM / v.n_total, logM / cfg.n, 0.0,
                       (0.0, 0.0, 0.0), feasible, cap, disp, lterm, v.eps, meta)


@dataclass(frozen=True)
class Prop2Region:
    cap1: float   # bound on R1 + R_L1
    cap2: float   # bound on R2 + R_L2
    floor: float  # bound below on R_L1 + R_L2

    def symmetric_rate(self):
        """Largest R1 = R2 with R_L1 = R_L2 at the floor."""
        return min(self.cap1, self.cap2) - 0.5 * self.floor


def prop2_region(P, sigma2_1, sigma2_2, beta12, beta21, rho):
    """Asymptotic Marton inner bound with unit total Marton power."""
    split = beta12 + beta21 + rho * math.sqrt(beta12 * beta21)
    if abs(split - 1.0) > 1e-9:
        raise ValidationError(f"need beta12 + beta21 + rho sqrt(beta12 beta21) = 1, got {split!r}")
    r2 = rho * rho
    cap1 = 0.5 * math.log2((sigma2_1 + P) / (sigma2_1 + (1.0 - r2) * beta21 * P))
    cap2 = 0.5 * math.log2((sigma2_2 + P) / (sigma2_2 + (1.0 - r2) * beta12 * P))
    floor = math.inf if rho >= 1.0 else -0.5 * math.log2(1.0 - r2)
    return Prop2Region(cap1, cap2, floor)


_OTERMS = ("zero", "half_log", "three_half_log", "k_log")


def _oterm(n, oterm, K):
    if oterm == "zero":
        return 0.0
    if oterm == "half_log":
        return 0.5 * math.log2(n)
    if oterm == "three_half_log":
        return 1.5 * math.log2(n)
    if oterm == "k_log":
        if K is None:
            raise ValueError("oterm k_log needs K")
        return K * math.log2(n)
    raise ValueError(f"oterm must be one of {_OTERMS}")


def normal_approx(n, omega, eps, oterm="zero", K=None):
    """C - sqrt(V/n) Q^{-1}(eps) + oterm/n in bits per channel use."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return cap_c(omega) - math.sqrt(disp_v(omega) / n) * q_inv(eps) + _oterm(n, oterm, K) / n


def parallel_normal_approx(ns, omegas, eps, oterm="zero", K=None):
    """Normal approximation for parallel channels with length-weighted C and V."""
    if len(ns) != len(omegas) or not ns:
        raise ValueError("ns and omegas must be nonempty and of equal length")
    N = float(sum(ns))
    cbar = sum(n * cap_c(o) for n, o in zip(ns, omegas)) / N
    vbar = sum(n * disp_v(o) for n, o in zip(ns, omegas)) / N
    return cbar - math.sqrt(vbar / N) * q_inv(eps) + _oterm(N, oterm, K) / N


def l_split_from_lambda(cfg, pa, lam):
    """Bin sizes at the L-constraint boundary, shifted by lambda per overlap use."""
    lc = l_constraint(cfg, pa)
    if not math.isfinite(lc):
        raise ValueError("L constraint is not finite")
    l1 = 0.5 * lc - 0.5 * cfg.n12 * lam
    l2 = 0.5 * lc + 0.5 * cfg.n12 * lam
    clamped = l1 < 0 or l2 < 0
    return AuxCodebookSizes(max(l1, 0.0), max(l2, 0.0), lam, clamped)
