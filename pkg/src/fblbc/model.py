"""System description: blocklengths, power shares, effective SNRs and J factors.

Receivers and phases are indexed 1 and 2. Receiver i decodes over its own
phase (n_ii uses, message i alone) and the shared overlap phase (n12 = n21
uses, both messages superposed through Marton coding).
"""
import math
from dataclasses import dataclass, field, replace

__all__ = [
    "ConfigError", "ValidationError", "SystemConfig", "PowerAllocation",
    "AuxCodebookSizes", "Snrs", "TimeSharingConfig", "RunConfig",
    "CONFIG_KEYS", "validate", "derive_snrs", "j_broadcast", "j_p2p",
    "log2_j_p2p", "solve_beta_split", "blocklengths_from_deadlines",
    "parse_config", "load_config",
]

LOG2E = 1.0 / math.log(2.0)
TOL = 1e-9


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


class ValidationError(ValueError):
    """Power allocation violating the power or Marton-split identities."""


@dataclass(frozen=True)
class SystemConfig:
    """Blocklengths, power, noise variances and error budgets.

    ``sigma2[i-1][j-1]`` is the noise variance seen by receiver i during the
    phase it shares index j with (so ``sigma2[0][1]`` is sigma^2_{1,2}).
    The encoding budget enters only through ln(-ln eps12), which may be given
    directly as ``eps12_loglog``.
    """

    n11: float
    n12: float
    n22: float
    P: float
    sigma2: tuple = ((1.0, 1.0), (1.0, 1.0))
    eps1: float = 1e-3
    eps2: float = 1e-3
    eps12: float = 1e-3
    K1: float = 0.5
    K2: float = 0.5
    seed: int = 0
    eps12_loglog: float = None


    def __post_init__(self):
        s = tuple(tuple(float(v) for v in row) for row in self.sigma2)
        object.__setattr__(self, "sigma2", s)
        for name in ("n11", "n12", "n22"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.n < 1:
            raise ConfigError("n11 + n12 + n22 must be at least 1")
        if len(s) != 2 or any(len(r) != 2 for r in s) or min(min(r) for r in s) <= 0:
            raise ConfigError("sigma2 must be a 2x2 table of positive variances")
        if not self.P > 0:
            raise ConfigError("P must be positive")
        for name in ("eps1", "eps2", "eps12"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.eps12_loglog is not None and not math.isfinite(self.eps12_loglog):
            raise ConfigError("eps12_loglog must be finite")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")

    @property
    def n(self):
        return self.n11 + self.n12 + self.n22

    def blocklength(self, i, j):
        """n_{i,j}; the overlap length is shared, n21 = n12."""
        if i == j:
            return self.n11 if i == 1 else self.n22
        return self.n12

    def var(self, i, j):
        return self.sigma2[i - 1][j - 1]

    def eps(self, i):
        return self.eps1 if i == 1 else self.eps2

    def K(self, i):
        return self.K1 if i == 1 else self.K2

    def log_neg_log_eps12(self):
        """ln(-ln eps12); ``eps12_loglog`` overrides eps12 for budgets within rounding of 1."""
        if self.eps12_loglog is not None:
            return self.eps12_loglog
        return math.log(-math.log(self.eps12))


@dataclass(frozen=True)
class PowerAllocation:
    beta11: float
    betac: float
    beta22: float
    beta12: float
    beta21: float
    rho: float

    @property
    def beta_tilde_c(self):
        return self.beta12 + self.beta21 + math.sqrt(self.beta12 * self.beta21)

    def own(self, i):
        return self.beta11 if i == 1 else self.beta22

    def share(self, i):
        """Marton share of receiver i (beta12 for 1, beta21 for 2)."""
        return self.beta12 if i == 1 else self.beta21

    @classmethod
    def from_ratio(cls, beta11, betac, beta22, rho, r):
        b12, b21 = solve_beta_split(betac, rho, r)
        return cls(beta11, betac, beta22, b12, b21, rho)


@dataclass(frozen=True)
class AuxCodebookSizes:
    """Bin sizes in bits; ``lam`` is (log L2 - log L1)/n12 when known."""

    logL1: float = 0.0
    logL2: float = 0.0
    lam: float = 0.0
    clamped: bool = False

    def __post_init__(self):
        if self.logL1 < 0 or self.logL2 < 0:
            raise ConfigError("logL1 and logL2 must be nonnegative")

    def logL(self, i):
        return self.logL1 if i == 1 else self.logL2


@dataclass(frozen=True)
class Snrs:
    omega: tuple

    def __call__(self, i, j):
        return self.omega[i - 1][j - 1]


@dataclass(frozen=True)
class TimeSharingConfig:
    eta: float
    beta11_ts: float
    beta22_ts: float

    def check(self, cfg):
        if not 0.0 <= self.eta <= 1.0:
            raise ValidationError("eta must lie in [0, 1]")
        share = self.eta * cfg.n12
        if abs(share - round(share)) > 1e-9 * max(1.0, cfg.n12):
            raise ValidationError(f"eta * n12 = {share!r} is not a whole number of channel uses")
        lhs = ((cfg.n11 + self.eta * cfg.n12) * self.beta11_ts
               + ((1.0 - self.eta) * cfg.n12 + cfg.n22) * self.beta22_ts)
        if abs(lhs - cfg.n) > TOL * max(1.0, cfg.n):
            raise ValidationError(
                f"time-sharing power identity violated: {lhs!r} != n = {cfg.n!r}")


def solve_beta_split(betac, rho, r):
    """Shares (beta12, beta21) with beta12/beta21 = r on the Marton identity."""
    if not r > 0:
        raise ValueError("ratio r must be positive")
    b21 = betac / (r + 1.0 + rho * math.sqrt(r))
    return r * b21, b21


def validate(pa, cfg):
    """List of violated constraints (empty when pa is admissible for cfg)."""
    out = []
    for name in ("beta11", "betac", "beta22", "beta12", "beta21", "rho"):
        v = getattr(pa, name)
        if not 0.0 <= v <= 1.0:
            out.append(f"{name}={v!r} outside [0, 1]")
    if out:
        return out
    lhs = cfg.n11 * pa.beta11 + cfg.n12 * pa.betac + cfg.n22 * pa.beta22
    if abs(lhs - cfg.n) > TOL * max(1.0, cfg.n):
        out.append(f"power identity: n11*b11 + n12*bc + n22*b22 = {lhs!r} != n = {cfg.n!r}")
    split = pa.beta12 + pa.beta21 + pa.rho * math.sqrt(pa.beta12 * pa.beta21)
    if abs(split - pa.betac) > TOL:
        out.append(f"Marton split: b12 + b21 + rho*sqrt(b12*b21) = {split!r} != bc = {pa.betac!r}")
    return out


def _require_valid(pa, cfg):
    bad = validate(pa, cfg)
    if bad:
        raise ValidationError("; ".join(bad))


def derive_snrs(cfg, pa):
    """Effective SNRs Omega_{i,j}."""
    _require_valid(pa, cfg)
    P, rho = cfg.P, pa.rho
    om = [[0.0, 0.0], [0.0, 0.0]]
    om[0][0] = pa.beta11 * P / cfg.var(1, 1)
    om[1][1] = pa.beta22 * P / cfg.var(2, 2)
    for i, j in ((1, 2), (2, 1)):
        bij, bji = pa.share(i), pa.share(j)
        num = (bij + rho * rho * bji + rho * math.sqrt(bij * bji)) * P
        om[i - 1][j - 1] = num / (cfg.var(i, j) + (1.0 - rho * rho) * bji * P)
    return Snrs(tuple(tuple(r) for r in om))


def j_broadcast(cfg, pa, i):
    """log2 of the broadcast J_i factor."""
    j = 2 if i == 1 else 1
    bij, bji = pa.share(i), pa.share(j)
    if not (bij > 0 and bji > 0):
        raise ValueError("j_broadcast needs positive Marton shares; use j_p2p")
    om_ii = derive_snrs(cfg, pa)(i, i)
    nij = cfg.blocklength(i, j)
    # e-exponent converted to base 2 here
    expo = 0.5 * nij * (math.log(2.0) - bji * cfg.P) * LOG2E
    lin = 4.0 * math.sqrt(math.pi * bij * bji * (1.0 + 2.0 * om_ii)) / (
        243.0 * (1.0 + om_ii) * (bij + bji))
    return expo + math.log2(lin)


def j_p2p(sigma2, p):
    """Point-to-point J factor sqrt(8(s+2p)) / (27 sqrt(pi) (s+p))."""
    return math.sqrt(8.0 * (sigma2 + 2.0 * p)) / (27.0 * math.sqrt(math.pi) * (sigma2 + p))


def log2_j_p2p(sigma2, p):
    return math.log2(j_p2p(sigma2, p))


def blocklengths_from_deadlines(a1, a2, d1, d2):
    """(n11, n12, n22) from arrival times a1 <= a2 and deadlines d1 <= d2."""
    if not (a1 <= a2 <= d1 + 1 and d1 <= d2):
        raise ConfigError("need a1 <= a2 <= d1 + 1 and d1 <= d2")
    n = d2 - a1 + 1
    n11, n12, n22 = a2 - a1, d1 - a2 + 1, d2 - d1
    assert n11 + n12 + n22 == n
    return n11, n12, n22


# ---------------------------------------------------------------------------
# config files

CONFIG_KEYS = (
    "n11", "n12", "n22", "P", "sigma11", "sigma12", "sigma21", "sigma22",
    "eps1", "eps2", "eps12", "K1", "K2", "beta11", "betac", "beta22", "rho",
    "beta_ratio", "lambda", "eta", "seed",
)
_INT_KEYS = {"n11", "n12", "n22", "seed"}


@dataclass(frozen=True)
class RunConfig:
    """Parsed config file: the system plus optional operating-point values."""

    system: SystemConfig
    values: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def power_allocation(self):
        """PowerAllocation from beta11/betac/beta22/rho/beta_ratio (missing betas -> 1)."""
        v = self.values
        rho = v.get("rho", 0.0)
        betac = v.get("betac", 1.0)
        return PowerAllocation.from_ratio(
            v.get("beta11", 1.0), betac, v.get("beta22", 1.0), rho, v.get("beta_ratio", 1.0))

    def with_system(self, **kw):
        return replace(self, system=replace(self.system, **kw))


def parse_config(text, source="<config>"):
    """Parse key=value lines (``#`` comments); unknown or repeated keys are errors."""
    vals = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in vals:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            if key in _INT_KEYS:
                num = float(val)
                if num != int(num):
                    raise ValueError
                vals[key] = int(num)
            else:
                vals[key] = float(val)
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {val!r}") from None
    for key in ("n11", "n12", "n22", "P"):
        if key not in vals:
            raise ConfigError(f"{source}: missing required key {key!r}")
    sig = ((vals.get("sigma11", 1.0), vals.get("sigma12", 1.0)),
           (vals.get("sigma21", 1.0), vals.get("sigma22", 1.0)))
    kw = {k: vals[k] for k in ("eps1", "eps2", "eps12", "K1", "K2", "seed") if k in vals}
    try:
        system = SystemConfig(vals["n11"], vals["n12"], vals["n22"], vals["P"], sig, **kw)
    except ConfigError as e:
        raise ConfigError(f"{source}: {e}") from None
    extra = {k: v for k, v in vals.items()
             if k in ("beta11", "betac", "beta22", "rho", "beta_ratio", "lambda", "eta")}
    return RunConfig(system, extra)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))
