"""Command-line drivers: figure sweeps as CSV, single-point queries and the
Monte Carlo verification report."""
import argparse
import csv
import io
import math
import numbers
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds, montecarlo, optimizer
from .model import (AuxCodebookSizes, ConfigError, PowerAllocation, SystemConfig,
                    ValidationError, load_config, parse_config, validate)

__all__ = ["SweepSpec", "parse_sweep", "main"]

AXES = ("n", "rho", "lambda", "nu", "n12_partition")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"sweep axis must be one of {AXES}, got {self.axis!r}")
        if not self.step > 0:
            raise ConfigError("sweep step must be positive")
        if self.start > self.stop:
            raise ConfigError("sweep start must not exceed stop")

    def values(self):
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        vals = [self.start + k * self.step for k in range(count)]
        if self.axis in ("n", "n12_partition"):
            return [int(round(v)) for v in vals]
        # grid points are rounded so that e.g. 0.15 prints as 0.15
        return [round(v, 12) for v in vals]


def parse_sweep(text):
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError(f"--sweep expects axis:start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts[1:])
    except ValueError:
        raise ConfigError(f"--sweep has a non-numeric field: {text!r}") from None
    return SweepSpec(parts[0], start, stop, step)


DEFAULT_CONFIG = {
    "p2p": "p2p", "parallel": "parallel", "broadcast": "staggered_n300", "timeshare": "staggered_n300",
    "sweep-rho": "rho_overlap_10db", "sweep-lambda": "asym_n60", "verify": "verify", "point": "staggered_n300",
}
DEFAULT_SWEEP = {
    "p2p": "n:70:2000:10", "parallel": "n:20:2000:10", "broadcast": "n12_partition:0:200:50",
    "timeshare": "n12_partition:0:200:50", "sweep-rho": "rho:0:0.95:0.05",
    "sweep-lambda": "lambda:0:1:0.2",
}


def bundled_configs():
    return sorted(p.name[:-4] for p in resources.files("fblbc").joinpath("configs").iterdir()
                  if p.name.endswith(".cfg"))


def read_config(name):
    """Path to a config file, or the name of a bundled one (e.g. ``p2p``)."""
    path = Path(name)
    if path.exists():
        return load_config(path)
    res = resources.files("fblbc").joinpath("configs", f"{name}.cfg")
    if res.is_file():
        return parse_config(res.read_text(encoding="utf-8"), f"{name}.cfg")
    raise ConfigError(f"config {name!r} not found (bundled: {', '.join(bundled_configs())})")


def fmt(x):
    """Shortest round-trip text for floats, 1/0 for booleans."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, numbers.Integral):
        return str(int(x))
    if isinstance(x, numbers.Real):
        return repr(float(x))
    return str(x)


def _write(out, header, rows):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])


def _sweep(args, cmd, allowed):
    sw = parse_sweep(args.sweep or DEFAULT_SWEEP[cmd])
    if sw.axis not in allowed:
        raise ConfigError(f"{cmd}: sweep axis must be one of {allowed}, got {sw.axis!r}")
    return sw


def _rate(res):
    return res.rate if res.feasible else math.nan


# ---------------------------------------------------------------------------
# commands

def cmd_p2p(rc, args):
    cfg = rc.system
    sw = _sweep(args, "p2p", ("n",))
    omega = cfg.P / cfg.var(1, 1)
    rows = []
    for n in sw.values():
        r = bounds.theorem2_rate(n, omega, cfg.eps1, cfg.K1, cfg.var(1, 1))
        rows.append((n, _rate(r),
                     bounds.normal_approx(n, omega, cfg.eps1, "zero"),
                     bounds.normal_approx(n, omega, cfg.eps1, "half_log"),
                     bounds.normal_approx(n, omega, cfg.eps1, "k_log", cfg.K1), r.feasible))
    return ("n", "thm2_rate", "na_zero", "na_half", "na_klog", "feasible"), rows


def cmd_parallel(rc, args):
    """n11 = n12 = n/2 with Omega_11 = P/sigma11 and Omega_11 = nu * Omega_2."""
    cfg = rc.system
    sw = _sweep(args, "parallel", ("n", "nu"))
    om1 = cfg.P / cfg.var(1, 1)
    if sw.axis == "n":
        pts = [(n, nu) for nu in args.nu for n in sw.values()]
    else:
        pts = [(int(cfg.n11 + cfg.n12), nu) for nu in sw.values()]
    rows = []
    for n, nu in pts:
        n11 = n / 2.0
        om = (om1, om1 / nu)
        r = bounds.theorem3_rate(n11, n - n11, om, cfg.eps1, cfg.K1, cfg.var(1, 1))
        na = [bounds.parallel_normal_approx((n11, n - n11), om, cfg.eps1, o, cfg.K1)
              for o in ("zero", "half_log", "k_log")]
        rows.append((n, nu, _rate(r), *na, r.feasible))
    return ("n", "nu", "thm3_rate", "na_zero", "na_half", "na_klog", "feasible"), rows


def _spec(rc, args, **kw):
    return optimizer.SearchSpec(rho_fixed=rc.get("rho", 0.0), lam_fixed=rc.get("lambda", 0.0),
                                bound=args.bound, normalization=args.normalization, **kw)


def _partition(cfg, n12):
    """Move the second arrival: n11 + n12 is held fixed, n22 unchanged."""
    window = cfg.n11 + cfg.n12
    if not 0 <= n12 <= window:
        raise ConfigError(f"n12_partition value {n12} outside [0, n11 + n12 = {window}]")
    return replace(cfg, n11=window - n12, n12=n12)


_BC_HEADER = ("n12", "scheme", "R1", "R2", "beta11", "betac", "beta22", "beta12",
              "beta21", "rho", "logL1", "logL2", "eta", "feasible")


def _ours_row(cfg, fp, n12):
    if not fp.feasible:
        return (n12, "ours", math.nan, math.nan) + (math.nan,) * 8 + (math.nan, False)
    pa, sz = fp.pa, fp.sizes
    if validate(pa, cfg):
        raise ValidationError(f"optimizer returned an invalid allocation at n12={n12}")
    return (n12, "ours", fp.point.R1, fp.point.R2, pa.beta11, pa.betac, pa.beta22,
            pa.beta12, pa.beta21, pa.rho, sz.logL1, sz.logL2, math.nan, True)


def _ts_row(tp, n12):
    ts = tp.ts
    return (n12, "timesharing", tp.point.R1, tp.point.R2, ts.beta11_ts, math.nan,
            ts.beta22_ts, math.nan, math.nan, math.nan, 0.0, 0.0, ts.eta, tp.feasible)


def cmd_broadcast(rc, args):
    cfg = rc.system
    sw = _sweep(args, "broadcast", ("n12_partition",))
    spec = _spec(rc, args)
    eta = rc.get("eta", 0.5)
    rows = []
    for n12 in sorted(sw.values(), reverse=True):
        c = _partition(cfg, n12)
        rows.append(_ours_row(c, optimizer.optimize_sum_rate(c, spec), n12))
        rows.append(_ts_row(optimizer.timeshare_point(c, eta, None, args.bound,
                                                      args.normalization), n12))
    return _BC_HEADER, rows


def cmd_timeshare(rc, args):
    cfg = rc.system
    sw = _sweep(args, "timeshare", ("n12_partition",))
    eta = rc.get("eta", 0.5)
    rows = []
    for n12 in sorted(sw.values(), reverse=True):
        c = _partition(cfg, n12)
        rows.append(_ts_row(optimizer.timeshare_point(c, eta, None, args.bound,
                                                      args.normalization), n12))
    return _BC_HEADER, rows


def cmd_sweep_rho(rc, args):
    """Overlap-only symmetric setting: beta12 = beta21, L1 = L2, R1 = R2 (per n)."""
    cfg = rc.system
    if cfg.n11 != 0 or cfg.n22 != 0:
        raise ConfigError("sweep-rho needs n11 = n22 = 0")
    sw = _sweep(args, "sweep-rho", ("rho",))
    fn = bounds.theorem1_rate if args.bound == "theorem1" else bounds.prop1_rate
    rows = []
    for rho in sw.values():
        pa = PowerAllocation.from_ratio(1.0, 1.0, 1.0, rho, 1.0)
        ok = True
        if rho > 0:
            lc = bounds.l_constraint(cfg, pa) if args.bound == "theorem1" else bounds.prop1_l_constraint(cfg, pa)
            ok = math.isfinite(lc)
            sizes = AuxCodebookSizes(lc / 2, lc / 2) if ok else None
        else:
            sizes = AuxCodebookSizes()
        if ok:
            r = [fn(cfg, pa, sizes, i) for i in (1, 2)]
            r_thm = min(x.rate if x.feasible else math.nan for x in r)
            ok = all(x.feasible for x in r)
        else:
            r_thm = math.nan
        reg = bounds.prop2_region(cfg.P, cfg.var(1, 2), cfg.var(2, 1), pa.beta12, pa.beta21, rho)
        rows.append((rho, r_thm, reg.symmetric_rate(), ok))
    return ("rho", "R_thm1", "R_marton", "feasible"), rows


def cmd_sweep_lambda(rc, args):
    cfg = rc.system
    sw = _sweep(args, "sweep-lambda", ("lambda",))
    rows = []
    for lam in sw.values():
        spec = optimizer.SearchSpec(rho_fixed=rc.get("rho", 0.0), lam_fixed=lam, bound=args.bound,
                                    normalization=args.normalization)
        fp = optimizer.optimize_sum_rate(cfg, spec)
        if fp.feasible:
            rows.append((lam, fp.point.R1, fp.point.R2, fp.point.R1 + fp.point.R2, True))
        else:
            rows.append((lam, math.nan, math.nan, math.nan, False))
    return ("lambda", "R1", "R2", "R1+R2", "feasible"), rows


def cmd_point(rc, args):
    """Bound terms at the configured operating point (betas, rho, beta_ratio, lambda)."""
    cfg = rc.system
    pa = rc.power_allocation()
    bad = validate(pa, cfg)
    if bad:
        raise ValidationError("; ".join(bad))
    if cfg.n12 > 0 and pa.rho > 0:
        if args.bound == "theorem1":
            sizes = bounds.l_split_from_lambda(cfg, pa, rc.get("lambda", 0.0))
        else:
            sizes = optimizer._prop1_split(cfg, pa, rc.get("lambda", 0.0))
    else:
        sizes = AuxCodebookSizes()
    fn = bounds.theorem1_rate if args.bound == "theorem1" else bounds.prop1_rate
    rows = []
    for i in (1, 2):
        if cfg.blocklength(i, i) + cfg.n12 <= 0:
            continue
        r = fn(cfg, pa, sizes, i)
        be, com, enc = r.delta_terms
        rows.append((i, r.logM, r.logL, r.rate, r.rate_total, r.capacity, r.dispersion,
                     r.log_term, r.delta, be, com, enc, r.feasible))
    return ("receiver", "logM", "logL", "rate", "rate_total", "capacity", "dispersion",
            "log_term", "delta", "delta_be", "delta_com", "delta_enc", "feasible"), rows


# ---------------------------------------------------------------------------
# verification

MOMENT_CONFIG = dict(n11=20, n12=20, n22=0, P=1.0, rho=0.8)
ENC_GRID = [(n, r) for n in (5, 10, 20) for r in (0.2, 0.5, 0.8)]


def run_verify(rc, seed, trials, e2e_trials, out):
    """Monte Carlo checks; writes one line per check and returns True iff all pass."""
    lines = []

    def check(name, ok, detail):
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return ok

    ok = True
    for n in (2, 10, 50):
        r = montecarlo.cos2_check(n, trials, seed)
        ok &= check(f"cos2 n={n}", r.passed,
                    f"KS p={r.extras['ks_pvalue']:.3g} vs 1-(1-x)^(n-1); "
                    f"p={r.extras['ks_pvalue_sphere']:.3g} vs Beta(1/2,(n-1)/2)")
    for n12, rho in ENC_GRID:
        r = montecarlo.encoding_error_sim(n12, rho, 2, 2, trials, seed)
        ok &= check(f"encoding failure n12={n12} rho={rho}", abs(r.z_score) <= 3,
                    f"est={r.estimate:.5f} closed-form={r.analytic_value:.5f} z={r.z_score:.2f}; "
                    f"cap law={r.extras['exact_value']:.5f} z={r.extras['z_exact']:.2f}")
    mc = MOMENT_CONFIG
    cfg = SystemConfig(mc["n11"], mc["n12"], mc["n22"], mc["P"], seed=seed)
    pa = PowerAllocation.from_ratio(1.0, 1.0, 0.0, mc["rho"], 1.0)
    m = montecarlo.info_density_moments(cfg, pa, 1, trials, seed)
    chk = m.checks
    ok &= check("moment E", chk["E"], f"E_hat={m.E_hat:.4f} E_min={m.E_min:.4f} (bits)")
    ok &= check("moment V", chk["V"], f"V_hat={m.V_hat:.4f} sum nV={m.V_min:.4f} (bits^2)")
    ok &= check("moment T", chk["T"], f"T_hat={m.T_hat:.4g} ln T_max={m.log_T_max:.4g} (nats^3)")
    cfg = rc.system
    pa = rc.power_allocation()
    r1, r2 = montecarlo.end_to_end_sim(cfg, pa, 8, 8, 2, 2, e2e_trials, seed)
    for i, r in ((1, r1), (2, r2)):
        ok &= check(f"end-to-end receiver {i}", r.passed,
                    f"eps_hat={r.estimate:.4f} (encoding failures {r.extras['encoding_failures']}, "
                    f"conditional {r.extras['conditional_error']:.4f}) bound eps={r.analytic_value:.4g}")
    out.write("\n".join(lines) + "\n")
    return bool(ok)


COMMANDS = {
    "p2p": cmd_p2p, "parallel": cmd_parallel, "broadcast": cmd_broadcast,
    "timeshare": cmd_timeshare, "sweep-rho": cmd_sweep_rho,
    "sweep-lambda": cmd_sweep_lambda, "point": cmd_point,
}


def build_parser():
    p = argparse.ArgumentParser(prog="fblbc", description=__doc__)
    p.add_argument("command", choices=sorted(list(COMMANDS) + ["verify"]))
    p.add_argument("--config", help="config path or bundled name (default depends on command)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    p.add_argument("--sweep", help="axis:start:stop:step")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--e2e-trials", type=int, default=2000)
    p.add_argument("--nu", type=lambda s: [float(x) for x in s.split(",")], default=[0.5, 1.0],
                   help="SNR ratios for the parallel command (comma separated)")
    p.add_argument("--bound", choices=("theorem1", "prop1"), default="theorem1",
                   help="finite-blocklength bound or its large-n form")
    p.add_argument("--normalization", choices=("per-own-window", "per-total-n"),
                   default="per-own-window")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        rc = read_config(args.config or DEFAULT_CONFIG[args.command])
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be nonnegative")
            rc = rc.with_system(seed=args.seed)
        buf = io.StringIO()
        if args.command == "verify":
            ok = run_verify(rc, rc.system.seed, args.trials, args.e2e_trials, buf)
        else:
            header, rows = COMMANDS[args.command](rc, args)
            _write(buf, header, rows)
            ok = True
    except (ConfigError, ValidationError) as e:
        print(f"fblbc: error: {e}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
