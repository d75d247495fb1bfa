"""Deterministic grid search over power splits, correlation and bin-size split,
plus the tightening of the free tail-bound parameters."""
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from . import bounds
from ._parallel import pmap
from .bounds import RatePoint
from .model import AuxCodebookSizes, PowerAllocation, TimeSharingConfig, solve_beta_split

__all__ = [
    "SearchSpec", "FrontierPoint", "NoFeasiblePoint", "tighten_free_params",
    "optimize_sum_rate", "rate_region", "evaluate_point", "TimeSharePoint",
    "timeshare_point",
]

_MARGIN = 1e-6


# ---------------------------------------------------------------------------
# free parameters (kappa, zeta, zeta_t)

def _zeta_boundary(n, c):
    """Smallest admissible zeta (times 1+margin) for a branch of length n, or None."""
    m = c * (0.5 * n - 1.0)
    if n <= 2 or m <= 1.0:
        return None
    return m / (m - 1.0) * (1.0 + _MARGIN)


def _profile(v, kappa, base):
    """Free triple at kappa with each active zeta at its admissibility boundary."""
    mp = bounds._params_from_view(v, (kappa, 2.0, 2.0), check=False)
    z, zt = base[1], base[2]
    if v.n_own > 0:
        z = _zeta_boundary(v.n_own, mp.c)
        if z is None:
            return None
    if v.n_ov > 0:
        zt = _zeta_boundary(v.n_ov, mp.c_t)
        if zt is None:
            return None
    return (kappa, z, zt)


def tighten_free_params(cfg, pa, i, t_max_fn=None, return_info=False, start=bounds.DEFAULT_FREE):
    """(kappa, zeta, zeta_t) minimizing T_max,i over the admissible set.

    T_max grows linearly in each zeta, so for fixed kappa the zeta
    coordinates are optimal at their admissibility boundary; the remaining
    kappa coordinate is searched on a log grid and polished with bounded
    Brent. ``t_max_fn(triple)`` replaces the T_max evaluation (test seam).
    """
    v = bounds.receiver_view(cfg, pa, i)

    def obj(trip):
        if trip is None:
            return math.inf
        if t_max_fn is not None:
            return t_max_fn(trip)
        try:
            mp = bounds._params_from_view(v, trip, check=False)
        except bounds.InfeasibleParamsError:
            return math.inf
        if not mp.admissible:
            return math.inf
        return bounds._log_tmax(v, mp)[0]

    info = {"fallback": False, "start_admissible": True}
    best, fbest = tuple(start), obj(tuple(start))
    if not math.isfinite(fbest):
        info["start_admissible"] = False
        rep = bounds._repaired_default(v)
        best, fbest = (rep, obj(rep)) if rep is not None else (tuple(start), math.inf)
        if not math.isfinite(fbest):
            info["fallback"] = True
            out = tuple(start)
            return (out, info) if return_info else out
    if t_max_fn is None:
        best, fbest = _search_kappa(v, obj, best, fbest)
    info["log_tmax"] = fbest
    return (best, info) if return_info else best


def _search_kappa(v, obj, best, fbest):
    klo = bounds.kappa_floor(v)
    if not math.isfinite(klo):
        return best, fbest
    # T >= 8 kappa, so kappa beyond T_best/8 cannot help
    khi = max(best[0], math.exp(min(fbest, 700.0)) / 8.0)
    if khi <= klo:
        return best, fbest
    scale = max(1.0, klo)
    x_lo, x_hi = math.log(1e-10 * scale), math.log(khi - klo)
    if x_hi <= x_lo:
        return best, fbest

    def h(x):
        return obj(_profile(v, klo + math.exp(x), best))

    xs = np.linspace(x_lo, x_hi, 33)
    hs = [h(x) for x in xs]
    j = int(np.argmin(hs))
    if math.isfinite(hs[j]):
        a, b = xs[max(j - 1, 0)], xs[min(j + 1, len(xs) - 1)]
        res = minimize_scalar(h, bounds=(a, b), method="bounded", options={"xatol": 1e-7})
        xbest, fx = (res.x, res.fun) if res.fun < hs[j] else (xs[j], hs[j])
        if fx < fbest:
            trip = _profile(v, klo + math.exp(xbest), best)
            return trip, fx
    return best, fbest


# ---------------------------------------------------------------------------
# operating-point search

@dataclass(frozen=True)
class SearchSpec:
    """Grid sizes per axis (1 keeps the axis at its fixed value)."""

    beta11: int = 9
    betac: int = 9
    ratio: int = 9
    rho: int = 1
    lam: int = 1
    refine_rounds: int = 2
    objective: tuple = ("sum_rate",)
    rho_fixed: float = 0.0
    rho_range: tuple = (0.0, 0.95)
    lam_fixed: float = 0.0
    lam_range: tuple = (-1.0, 1.0)
    ratio_range: tuple = (1.0 / 16.0, 16.0)
    bound: str = "theorem1"
    normalization: str = "per-own-window"
    K_ts: tuple = None

    def __post_init__(self):
        for name in ("beta11", "betac", "ratio", "rho", "lam"):
            g = getattr(self, name)
            if int(g) != g or g < 1:
                raise ValueError(f"grid size {name} must be a positive integer")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be >= 0")
        if self.objective[0] not in ("sum_rate", "weighted", "fix_R1_max_R2"):
            raise ValueError(f"unknown objective {self.objective[0]!r}")
        if self.bound not in ("theorem1", "prop1"):
            raise ValueError("bound must be theorem1 or prop1")


@dataclass(frozen=True)
class FrontierPoint:
    point: RatePoint
    pa: PowerAllocation
    sizes: AuxCodebookSizes
    results: tuple = field(compare=False, default=())
    feasible: bool = True


@dataclass(frozen=True)
class NoFeasiblePoint:
    """Returned when no grid point yields a feasible bound."""

    evaluated: int
    reasons: dict = field(default_factory=dict)
    feasible: bool = False


def _active_axes(cfg, spec):
    """Which power axes are free and which share is eliminated by the power identity."""
    if cfg.n22 > 0:
        elim = "beta22"
    elif cfg.n12 > 0:
        elim = "betac"
    else:
        elim = "beta11"
    return {
        "beta11": cfg.n11 > 0 and elim != "beta11" and spec.beta11 > 1,
        "betac": cfg.n12 > 0 and elim != "betac" and spec.betac > 1,
        "ratio": cfg.n12 > 0 and spec.ratio > 1,
        "rho": cfg.n12 > 0 and spec.rho > 1,
        "lam": cfg.n12 > 0 and spec.lam > 1,
    }, elim


def _complete(cfg, b11, bc, elim):
    """(beta11, betac, beta22) with the eliminated share solved from the power
    identity; shares of empty phases are 0. None if a share leaves [0, 1]."""
    lens = {"beta11": cfg.n11, "betac": cfg.n12, "beta22": cfg.n22}
    b = {"beta11": b11 if cfg.n11 > 0 else 0.0, "betac": bc if cfg.n12 > 0 else 0.0, "beta22": 0.0}
    rest = cfg.n - sum(lens[k] * b[k] for k in b if k != elim)
    b[elim] = rest / lens[elim]
    vals = (b["beta11"], b["betac"], b["beta22"])
    if any(not (-1e-12 <= x <= 1.0 + 1e-12) for x in vals):
        return None
    return tuple(min(max(x, 0.0), 1.0) for x in vals)


def evaluate_point(cfg, x, spec):
    """Rates (R1, R2) at x = (beta11, betac, ratio, rho, lam); None if off the manifold."""
    axes, elim = _active_axes(cfg, spec)
    b11, bc, r, rho, lam = x
    comp = _complete(cfg, b11, bc, elim)
    if comp is None:
        return None
    b11, bc, b22 = comp
    if cfg.n12 > 0:
        b12, b21 = solve_beta_split(bc, rho, r)
    else:
        b12 = b21 = 0.0
        rho = 0.0
    pa = PowerAllocation(b11, bc, b22, b12, b21, rho)
    if cfg.n12 > 0 and rho > 0 and bc > 0:
        lc = bounds.l_constraint(cfg, pa)
        if not math.isfinite(lc):
            return None
        sizes = bounds.l_split_from_lambda(cfg, pa, lam) if spec.bound == "theorem1" else _prop1_split(cfg, pa, lam)
    else:
        sizes = AuxCodebookSizes()
    fn = bounds.theorem1_rate if spec.bound == "theorem1" else bounds.prop1_rate
    res = []
    for i in (1, 2):
        n_i = cfg.blocklength(i, i) + cfg.n12
        if n_i <= 0:
            res.append(None)
            continue
        try:
            res.append(fn(cfg, pa, sizes, i))
        except (ValueError, ArithmeticError) as e:
            res.append(bounds.BoundResult(math.nan, 0.0, math.nan, math.nan, math.inf,
                                          (math.inf, math.inf, 0.0), False,
                                          meta={"reason": str(e)}))
    return pa, sizes, tuple(res)


def _prop1_split(cfg, pa, lam):
    lc = bounds.prop1_l_constraint(cfg, pa)
    l1 = 0.5 * lc - 0.5 * cfg.n12 * lam
    l2 = 0.5 * lc + 0.5 * cfg.n12 * lam
    return AuxCodebookSizes(max(l1, 0.0), max(l2, 0.0), lam, l1 < 0 or l2 < 0)


def _rates(res, spec):
    out = []
    for r in res:
        if r is None:
            out.append(0.0)
        elif not r.feasible or r.logM < 0:
            # fewer than one message is not an operating point
            return None
        else:
            out.append(r.rate if spec.normalization == "per-own-window" else r.rate_total)
    return tuple(out)


def _score(rates, spec):
    obj = spec.objective
    if obj[0] == "sum_rate":
        return rates[0] + rates[1]
    if obj[0] == "weighted":
        return obj[1] * rates[0] + obj[2] * rates[1]
    # fix_R1_max_R2
    return rates[1] if rates[0] >= obj[1] else -math.inf


def _axis_values(lo, hi, g, log=False):
    if g <= 1:
        return None
    if log:
        return [float(v) for v in np.exp(np.linspace(math.log(lo), math.log(hi), g))]
    return [float(v) for v in np.linspace(lo, hi, g)]


def _grid(spec, axes, centre=None, spans=None):
    """Candidate lists per axis (x = beta11, betac, ratio, rho, lam)."""
    lo_hi = {"beta11": (0.0, 1.0), "betac": (0.0, 1.0), "ratio": spec.ratio_range,
             "rho": spec.rho_range, "lam": spec.lam_range}
    fixed = {"beta11": 1.0, "betac": 1.0, "ratio": 1.0, "rho": spec.rho_fixed, "lam": spec.lam_fixed}
    lists = []
    for k, name in enumerate(("beta11", "betac", "ratio", "rho", "lam")):
        g = getattr(spec, name)
        if not axes[name]:
            lists.append([fixed[name] if centre is None else centre[k]])
            continue
        lo, hi = lo_hi[name]
        islog = name == "ratio"
        if centre is not None:
            c, s = centre[k], spans[k]
            if islog:
                lo, hi = max(lo, c / math.exp(s)), min(hi, c * math.exp(s))
            else:
                lo, hi = max(lo, c - s), min(hi, c + s)
        lists.append(_axis_values(lo, hi, g, islog))
    return lists


def _cartesian(lists):
    out = [()]
    for lst in lists:
        out = [t + (v,) for t in out for v in lst]
    return out


class _Eval:
    """Picklable evaluator for the parallel map."""

    def __init__(self, cfg, spec):
        self.cfg, self.spec = cfg, spec

    def __call__(self, x):
        return evaluate_point(self.cfg, x, self.spec)


def optimize_sum_rate(cfg, spec=SearchSpec()):
    """Best grid point for spec.objective, then spec.refine_rounds halved-span refinements."""
    axes, _ = _active_axes(cfg, spec)
    init_spans = [0.5, 0.5, 0.5 * math.log(spec.ratio_range[1] / spec.ratio_range[0]),
                  0.5 * (spec.rho_range[1] - spec.rho_range[0]),
                  0.5 * (spec.lam_range[1] - spec.lam_range[0])]
    ev = _Eval(cfg, spec)
    seen = {}
    best = None
    reasons = {}
    centre, spans = None, None
    for rnd in range(spec.refine_rounds + 1):
        cands = [x for x in _cartesian(_grid(spec, axes, centre, spans)) if x not in seen]
        outs = pmap(ev, cands, chunksize=8)
        for x, out in zip(cands, outs):
            seen[x] = out
            if out is None:
                continue
            pa, sizes, res = out
            rates = _rates(res, spec)
            if rates is None:
                for r in res:
                    if r is not None and not r.feasible:
                        key = r.meta.get("reason", "infeasible")
                        reasons[key] = reasons.get(key, 0) + 1
                continue
            sc = _score(rates, spec)
            if not math.isfinite(sc):
                continue
            # ties go to the lexicographically smallest parameters
            if best is None or sc > best[0] or (sc == best[0] and x < best[1]):
                best = (sc, x, pa, sizes, res, rates)
        if best is None:
            break
        centre = best[1]
        spans = [s / 2.0 ** (rnd + 1) for s in init_spans]
    if best is None:
        return NoFeasiblePoint(len(seen), reasons)
    _, x, pa, sizes, res, rates = best
    return FrontierPoint(RatePoint(rates[0], rates[1], spec.normalization), pa, sizes, res)


def rate_region(cfg, spec, weights):
    """One weighted maximizer per weight pair, sorted by R1, dominated points removed."""
    if not weights:
        raise ValueError("weights must be nonempty")
    pts = []
    for w1, w2 in weights:
        s = SearchSpec(**{**spec.__dict__, "objective": ("weighted", w1, w2)})
        fp = optimize_sum_rate(cfg, s)
        if fp.feasible:
            pts.append(fp)
    pts.sort(key=lambda p: (p.point.R1, p.point.R2))
    keep = []
    for p in pts:
        dom = any((q.point.R1 >= p.point.R1 and q.point.R2 >= p.point.R2)
                  and (q.point.R1 > p.point.R1 or q.point.R2 > p.point.R2) for q in pts)
        dup = any(q.point == p.point for q in keep)
        if not dom and not dup:
            keep.append(p)
    return keep


@dataclass(frozen=True)
class TimeSharePoint:
    point: RatePoint
    ts: TimeSharingConfig
    results: tuple = field(compare=False, default=())
    feasible: bool = True


def timeshare_point(cfg, eta, K_ts=None, bound="theorem1", normalization="per-own-window"):
    """Time-sharing rates with the overlap split eta.

    With shares in [0, 1] and the power identity held with equality, both
    stretched phases run at full power, so there is nothing to search.
    """
    K1t, K2t = K_ts if K_ts is not None else (cfg.K1, cfg.K2)
    w1 = cfg.n11 + eta * cfg.n12
    w2 = (1.0 - eta) * cfg.n12 + cfg.n22
    ts = TimeSharingConfig(eta, 1.0 if w1 > 0 else 0.0, 1.0 if w2 > 0 else 0.0)
    if bound == "theorem1":
        res = bounds.theorem4_rates(cfg, ts, K1t, K2t)
    else:
        c, pa = bounds.timeshare_configs(cfg, ts, K1t, K2t)
        res = []
        for i in (1, 2):
            if c.blocklength(i, i) <= 0:
                res.append(None)
                continue
            r = bounds.prop1_rate(c, pa, None, i)
            res.append(replace(r, rate=r.logM / (cfg.blocklength(i, i) + cfg.n12),
                               rate_total=r.logM / cfg.n))
        res = tuple(res)
    rates = []
    for r in res:
        if r is None or (not r.feasible and r.meta.get("reason") == "no channel uses"):
            rates.append(0.0)
        elif not r.feasible:
            rates.append(math.nan)
        else:
            rates.append(r.rate if normalization == "per-own-window" else r.rate_total)
    feasible = not any(math.isnan(x) for x in rates)
    return TimeSharePoint(RatePoint(rates[0], rates[1], normalization), ts, tuple(res), feasible)
