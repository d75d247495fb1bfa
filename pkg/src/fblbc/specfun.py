"""Special functions used by the bound evaluators.

Gamma, incomplete gamma/beta and the Gaussian tail are thin, domain-checked
wrappers over ``math``/``scipy.special``; the Lerch series Phi(1/e, s, a) is
evaluated here in the log domain because its magnitude grows like (n/2)!.
"""
import math
from dataclasses import dataclass

from scipy import special

from . import kernels

__all__ = [
    "DomainError", "PrecisionError", "EvalPrecision", "DEFAULT_PRECISION",
    "log_gamma", "gamma_ratio_half", "reg_lower_gamma", "reg_inc_beta",
    "q_func", "q_inv", "chi_cdf", "lerch_phi_einv", "lerch_phi_einv_value",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class PrecisionError(ArithmeticError):
    """Series did not converge within the term cap."""

    def __init__(self, msg, log_partial, terms):
        super().__init__(msg)
        self.log_partial = log_partial
        self.terms = terms


@dataclass(frozen=True)
class EvalPrecision:
    rel_tol: float = 1e-14
    max_terms: int = 2_000_000

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-6):
            raise ValueError(f"rel_tol must lie in (0, 1e-6], got {self.rel_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1000:
            raise ValueError(f"max_terms must be an integer >= 1000, got {self.max_terms}")


DEFAULT_PRECISION = EvalPrecision()


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def gamma_ratio_half(n):
    """Gamma((n+1)/2) / Gamma(n/2), the chi-distribution mean factor."""
    if int(n) != n or n < 1:
        raise DomainError(f"gamma_ratio_half needs a positive integer, got {n}")
    x = 0.5 * n
    if x < 25.0:
        return math.exp(math.lgamma(x + 0.5) - math.lgamma(x))
    # the lgamma difference loses ~1e-11 relative at large x; use the expansion
    ix = 1.0 / x
    ix2 = ix * ix
    corr = ix * (-1.0 / 8 + ix2 * (1.0 / 192 + ix2 * (-1.0 / 640 + ix2 * 17.0 / 14336)))
    return math.sqrt(x) * math.exp(corr)


def reg_lower_gamma(a, x):
    """Regularized lower incomplete gamma P(a, x)."""
    if not a > 0:
        raise DomainError(f"reg_lower_gamma needs a > 0, got {a}")
    if not x >= 0:
        raise DomainError(f"reg_lower_gamma needs x >= 0, got {x}")
    return float(special.gammainc(a, x))


def reg_inc_beta(x, a, b):
    """Regularized incomplete beta I_x(a, b)."""
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"reg_inc_beta needs x in [0, 1], got {x}")
    if not (a > 0 and b > 0):
        raise DomainError(f"reg_inc_beta needs a, b > 0, got {a}, {b}")
    if a == 1:
        # closed form 1 - (1-x)^b, kept exact near both ends
        return -math.expm1(b * math.log1p(-x)) if x < 1.0 else 1.0
    return float(special.betainc(a, b, x))


def q_func(x):
    """Gaussian tail Q(x) = Pr[N(0,1) > x]."""
    return 0.5 * math.erfc(x / _SQRT2)


def q_inv(p):
    """Inverse of the Gaussian tail."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"q_inv needs p in (0, 1), got {p}")
    if p > 0.5:
        # 1 - p is exact here
        return -q_inv(1.0 - p)
    x = -float(special.ndtri(p))
    for _ in range(2):
        # Newton on Q(x) - p, relative form to stay accurate deep in the tail
        phi = _INV_SQRT_2PI * math.exp(-0.5 * x * x)
        if phi == 0.0:
            break
        x += (q_func(x) - p) / phi
    return x


def chi_cdf(n, x):
    """CDF of the chi distribution with n degrees of freedom."""
    if not x >= 0:
        raise DomainError(f"chi_cdf needs x >= 0, got {x}")
    return reg_lower_gamma(0.5 * n, 0.5 * x * x)


def lerch_phi_einv(s, a, prec=DEFAULT_PRECISION):
    """Phi(1/e, s, a) = sum_{j>=0} e^{-j} (j+a)^{-s} as (log_value, sign).

    Uses 0^0 = 1, so a = 0 with s = 0 keeps the j=0 term. All terms are
    nonnegative, so the sign is always +1.
    """
    if a < 0:
        raise DomainError(f"lerch_phi_einv needs a >= 0, got {a}")
    if a == 0 and s > 0:
        raise DomainError("lerch_phi_einv with a = 0 needs s <= 0")
    val, terms, ok, partial = kernels.lerch_log(float(s), float(a), prec.rel_tol, int(prec.max_terms))
    if not ok:
        raise PrecisionError(
            f"Lerch series (s={s}, a={a}) not converged after {terms} terms", partial, terms)
    return val, 1


def lerch_phi_einv_value(s, a, prec=DEFAULT_PRECISION):
    """Direct-domain Phi(1/e, s, a); overflows to inf for large magnitudes."""
    lv, sign = lerch_phi_einv(s, a, prec)
    try:
        return sign * math.exp(lv)
    except OverflowError:
        return sign * math.inf
