"""Independent reference evaluations for the tests.

Everything here is written directly from the closed forms in terms of the
raw quantities (n, P, beta, sigma^2) in mpmath at 50 digits, without going
through the package's receiver view or kernels.
"""
import mpmath as mp

mp.mp.dps = 50

LOG2E = 1 / mp.log(2)


def cap(x):
    return mp.log1p(x) * LOG2E / 2


def disp(x):
    x = mp.mpf(x)
    return x * (2 + x) / (2 * (1 + x) ** 2) * LOG2E ** 2


def gamma_ratio(n):
    n = mp.mpf(n)
    return mp.gamma((n + 1) / 2) / mp.gamma(n / 2)


def lerch(s, a, terms=None):
    """sum_{j>=0} e^{-j} (j+a)^{-s} by direct summation (0^0 = 1)."""
    s, a = mp.mpf(s), mp.mpf(a)
    if terms is None:
        terms = int(max(0, -s - a)) * 2 + 200
    tot = mp.mpf(0)
    for j in range(terms):
        base = j + a
        if base == 0:
            tot += 1 if s == 0 else 0
            continue
        tot += mp.e ** (-j) * base ** (-s)
    return tot


def snrs(P, s2, b11, b22, b12, b21, rho):
    """Omega table as a dict keyed by (i, j)."""
    P = mp.mpf(P)
    om = {(1, 1): b11 * P / s2[0][0], (2, 2): b22 * P / s2[1][1]}
    for (i, j), bij, bji in (((1, 2), b12, b21), ((2, 1), b21, b12)):
        bij, bji = mp.mpf(bij), mp.mpf(bji)
        om[(i, j)] = ((bij + rho ** 2 * bji + rho * mp.sqrt(bij * bji)) * P
                      / (s2[i - 1][j - 1] + (1 - rho ** 2) * bji * P))
    return om


def j_broadcast_log2(n_ij, P, om_ii, bij, bji):
    J = (mp.e ** (mp.mpf(n_ij) / 2 * (mp.log(2) - bji * P))
         * 4 * mp.sqrt(mp.pi * bij * bji * (1 + 2 * om_ii))
         / (243 * (1 + om_ii) * (bij + bji)))
    return mp.log(J, 2)


def j_p2p(s2, p):
    return mp.sqrt(8 * (s2 + 2 * p)) / (27 * mp.sqrt(mp.pi) * (s2 + p))


class Receiver:
    """Scalars of receiver i in the broadcast setting (all shares positive)."""

    def __init__(self, n11, n12, n22, P, s2, b11, bc, b22, b12, b21, rho, i):
        mpf = mp.mpf
        j = 2 if i == 1 else 1
        self.nii = mpf(n11 if i == 1 else n22)
        self.nij = mpf(n12)
        self.P = P = mpf(P)
        self.sii = mpf(s2[i - 1][i - 1])
        self.sij = mpf(s2[i - 1][j - 1])
        self.bc = bc = mpf(bc)
        self.bij = mpf(b12 if i == 1 else b21)
        self.bji = mpf(b21 if i == 1 else b12)
        self.btc = mpf(b12) + mpf(b21) + mp.sqrt(mpf(b12) * mpf(b21))
        self.rho = rho = mpf(rho)
        om = snrs(P, s2, b11, b22, b12, b21, rho)
        self.om_ii, self.om_ij = om[(i, i)], om[(i, j)]
        nii, nij, sii, sij = self.nii, self.nij, self.sii, self.sij
        bij, bji, btc = self.bij, self.bji, self.btc
        self.k = (2 + self.om_ii) / (2 * sii * (1 + self.om_ii))
        self.kt = (2 * sij + bc * P) / (2 * sij * (bc * P + sij))
        self.b = mp.sqrt(nii * self.om_ii) / (self.k * mp.sqrt(sii) * (1 + self.om_ii))
        self.bt = (mp.sqrt(nij * bji * P)
                   + mp.sqrt(nij * bij * P) / (self.kt * sij)
                   * (1 - mp.sqrt(bc / btc) * (1 + rho * mp.sqrt(bji / bij)))
                   + mp.sqrt(nij * bij * P) / (self.kt * (bc * P + sij)))
        k, kt, b, bt = self.k, self.kt, self.b, self.bt
        self.kappa_t = (k * b ** 2 / 4 + kt * bt ** 2 / 4
                        - nii / 2 * mp.log(1 + self.om_ii)
                        - nij / 2 * mp.log((bc * P + sij) / sij)
                        - nii * self.om_ii / (2 * (1 + self.om_ii))
                        - kt * bt
                        - nij * bij * P / (2 * (bc * P + sij))
                        + sij / 2 * (kt * (bt - mp.sqrt(nij * bji * P))
                                     - mp.sqrt(nij * bij * P) / (bc * P + sij)) ** 2)

    def c_pair(self, kappa):
        s = self.kappa_t + kappa
        c = (mp.sqrt(s / (2 * self.k)) - self.b / 2) ** 2 / 2
        ct = (mp.sqrt(s / (2 * self.kt)) - self.bt / 2) ** 2 / 2
        return c, ct

    def e_min_bits(self):
        """The full E_min display; leading term in bits, the rest converted from nats."""
        nii, nij, P = self.nii, self.nij, self.P
        sii, sij, bc, btc = self.sii, self.sij, self.bc, self.btc
        bij, bji, rho = self.bij, self.bji, self.rho
        Gii = gamma_ratio(nii) if nii > 0 else 0
        Gij = gamma_ratio(nij) if nij > 0 else 0
        lead = nii / 2 * mp.log(1 + self.om_ii, 2) + nij / 2 * mp.log(1 + self.om_ij, 2)
        rest = ((1 - sii) * nii * self.om_ii / (2 * (1 + self.om_ii))
                - mp.sqrt(2) * sii * Gii * self.k * self.b
                - nij * sij * bc * P / (2 * (sij + bc * P))
                - bc * P ** 2 * nij * bji / (2 * sij * (bc * P + sij))
                + bc * P * nij * bji / (2 * btc * sij * (bc * P + sij))
                * (sij + (bc * P - sij) * (mp.sqrt(btc / bc) - 1 - rho * mp.sqrt(bji / bij)) ** 2
                   - mp.sqrt(2 * P) * btc * Gij / mp.sqrt(nij * bji))
                + mp.sqrt(nij * bij * P)
                * (mp.sqrt(bc / btc) * (1 / (sij + bc * P) + 1 + rho * mp.sqrt(bji / bij)) - 1 / sij)
                * (rho * mp.sqrt(nij * bji * P) - sij * mp.sqrt(2) * Gij))
        return lead + rest * LOG2E, lead, rest


def a_poly(n, k, b, c, kappa_t, phi=lerch):
    """A(n, k, b, c) transcribed term by term."""
    k, b, u = mp.mpf(k), mp.mpf(b), mp.mpf(kappa_t) + 1
    h = mp.mpf(n) / 2
    r2 = mp.sqrt(2)
    return ((u ** 3 - k ** 3 * b ** 6 / 8 - mp.mpf(3) / 2 * u * k * b ** 2 * (u - k * b ** 2 / 2)) * phi(-h + 1, c)
            - 3 * k * (5 * k ** 2 * b ** 4 + 4 * u * (u - 3 * k * b ** 2)) * phi(-h, c)
            - 96 * r2 * k ** 3 * b * phi(-h - mp.mpf(3) / 2, c)
            - 3 * k * b * (k ** 2 * b ** 4 / r2 + 2 * r2 * u * b * (u - b ** 2 * k)) * phi(-h + mp.mpf(1) / 2, c)
            - 64 * k ** 3 * phi(-h - 2, c)
            + 8 * r2 * k ** 2 * b * (6 * u - 5 * k * b ** 2) * phi(-h - mp.mpf(1) / 2, c)
            + 24 * k * (2 * u ** 2 - 5 * k ** 2 * b ** 2) * phi(-h - 1, c))


def t_max(n_ii, n_ij, kappa, zeta, zeta_t, k, b, c, kt, bt, ct, kappa_t):
    """T_max with the two branches; an empty phase contributes 0."""
    def branch(n, z, kk, bb, cc):
        if n <= 0:
            return mp.mpf(0)
        n = mp.mpf(n)
        return z * mp.mpf(2) ** ((n - 2) / 4) * mp.e ** (-cc) * a_poly(n, kk, bb, cc, kappa_t) / mp.gamma(n / 2)
    m = max(branch(n_ii, zeta, k, b, c), branch(n_ij, zeta_t, kt, bt, ct))
    return 8 * kappa + 16 * max(m, 0)
