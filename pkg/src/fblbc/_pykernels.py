"""Pure-Python versions of the compiled kernels (used when the extension is absent)."""
import math


def _logterm(s, a, j):
    base = j + a
    if base == 0.0:
        return 0.0 if s == 0.0 else -math.inf
    return -j - s * math.log(base)


def lerch_log(s, a, rel_tol, max_terms):
    """log of sum_j e^{-j} (j+a)^{-s}; returns (log_value, terms, converged, log_partial)."""
    s = float(s)
    a = float(a)
    jpk = -s - a
    j0 = int(math.floor(jpk)) if jpk > 0 else 0
    # peak beyond the cap: scale by the largest reachable term
    j0 = min(j0, max_terms - 1)
    scale = max(_logterm(s, a, j0), _logterm(s, a, j0 + 1), _logterm(s, a, 0))
    acc = 0.0
    comp = 0.0
    for j in range(max_terms):
        lt = _logterm(s, a, j)
        if lt == -math.inf:
            continue
        t = math.exp(lt - scale)
        tmp = acc + t
        if abs(acc) >= abs(t):
            comp += (acc - tmp) + t
        else:
            comp += (t - tmp) + acc
        acc = tmp
        if j + a > jpk and j + a > 0.0:
            r = math.exp(-1.0 - s * math.log((j + 1 + a) / (j + a)))
            if r < 1.0 and t * r / (1.0 - r) < rel_tol * (acc + comp):
                v = scale + math.log(acc + comp)
                return v, j + 1, True, v
    v = scale + math.log(acc + comp)
    return v, max_terms, False, v
