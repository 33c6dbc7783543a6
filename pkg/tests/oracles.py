"""Independent reference implementations used to check the package.

Everything here is written from the model definitions directly, in mpmath
or vectorised scipy, without calling into the package's own arithmetic.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy.special import erfc

mp.mp.dps = 40


def q_series(x: float, terms: int = 200) -> float:
    """Gaussian tail from the Maclaurin series of erf (valid for moderate x)."""
    x = mp.mpf(x)
    total = mp.mpf(0)
    for n in range(terms):
        total += (-1) ** n * x ** (2 * n + 1) / (mp.factorial(n) * (2 * n + 1) * mp.mpf(2) ** n)
    return float(mp.mpf("0.5") - total / mp.sqrt(2 * mp.pi))


def mp_ber(s, m: int):
    zeta = 4 * (1 - 1 / mp.sqrt(m))
    beta = mp.mpf(3) / (m - 1)
    return zeta / mp.log(m, 2) * mp.erfc(mp.sqrt(beta * s) / mp.sqrt(2)) / 2


def mp_rho(gt, gr, lam):
    return mp.mpf(gt) * gr * mp.mpf(lam) ** 2 / (4 * mp.pi) ** 2


def _mp_gain(tx_pos, rx_pos, pmax, rho_rx, alpha):
    d = mp.sqrt((mp.mpf(tx_pos[0]) - rx_pos[0]) ** 2 + (mp.mpf(tx_pos[1]) - rx_pos[1]) ** 2)
    return mp.mpf(pmax) * rho_rx * d ** (-mp.mpf(alpha))


def mp_sinrs(positions, rows, pmax, sigma, alpha, lam_a, lam_b, gt=1, gr=1):
    """SINR at A1, A2, B1, B2 (receiver band for every incoming link)."""
    rhos = [mp_rho(gt, gr, lam_a)] * 2 + [mp_rho(gt, gr, lam_b)] * 2
    mates = [1, 0, 3, 2]
    out = []
    for r in range(4):
        m = mates[r]
        opp = (2, 3) if r < 2 else (0, 1)
        k = 1 + r % 2
        signal = _mp_gain(positions[m], positions[r], pmax, rhos[r], alpha) * rows[m][0]
        jam = sum(_mp_gain(positions[o], positions[r], pmax, rhos[r], alpha) * rows[o][k] for o in opp)
        out.append(signal / (mp.mpf(sigma) + jam))
    return out


def mp_team_payoff(positions, rows, pmax, sigma, alpha, lam_a, lam_b, m):
    s = mp_sinrs(positions, rows, pmax, sigma, alpha, lam_a, lam_b)
    return mp_ber(s[0], m) + mp_ber(s[1], m) - mp_ber(s[2], m) - mp_ber(s[3], m)


def mp_focal(x0, x1, x2, coeffs, m):
    a, b, c, d, e = (mp.mpf(v) for v in coeffs)
    return mp_ber(a * x0, m) - mp_ber(b / (c + x1), m) - mp_ber(d / (e + x2), m)


def _np_ber(s, m):
    zeta = 4 * (1 - 1 / math.sqrt(m))
    beta = 3.0 / (m - 1)
    return zeta / math.log2(m) * 0.5 * erfc(np.sqrt(beta * s) / math.sqrt(2.0))


def _grid_objective(x0, x1, x2, coeffs, m):
    a, b, c, d, e = coeffs
    return _np_ber(a * x0, m) - _np_ber(b / (c + x1), m) - _np_ber(d / (e + x2), m)


def grid_best_response(coeffs, m, step=1e-3, refine_step=1e-5, refine_halfwidth=2e-3):
    """Brute-force minimiser on a simplex lattice plus one local refinement.

    Returns ``(x, value)``.  g has a square-root singularity at zero SINR, so
    an optimum can sit closer to a face than the refinement spacing; the
    local lattice therefore also carries geometric offsets from every face.
    """
    n = int(round(1.0 / step))
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    mask = i + j <= n
    x1 = i[mask] * step
    x2 = j[mask] * step
    x0 = np.clip(1.0 - x1 - x2, 0.0, None)
    vals = _grid_objective(x0, x1, x2, coeffs, m)
    k = int(np.argmin(vals))
    coarse = np.array([x0[k], x1[k], x2[k]])

    r = np.arange(-refine_halfwidth, refine_halfwidth + refine_step / 2, refine_step)
    near = refine_step * 0.5 ** np.arange(1, 30)
    pts = []
    for p, q in ((1, 2), (0, 1), (0, 2)):
        axes = []
        for c in (coarse[p], coarse[q]):
            ax = np.concatenate([c + r, near, c + near, c - near])
            axes.append(np.unique(ax[(ax >= 0) & (np.abs(ax - c) <= refine_halfwidth + 1e-15)]))
        u, v = (a.ravel() for a in np.meshgrid(*axes, indexing="ij"))
        w = 1.0 - u - v
        ok = w >= 0
        block = np.empty((ok.sum(), 3))
        third = 3 - p - q
        block[:, p], block[:, q], block[:, third] = u[ok], v[ok], w[ok]
        pts.append(block)
    pts = np.vstack(pts)
    vals = _grid_objective(pts[:, 0], pts[:, 1], pts[:, 2], coeffs, m)
    k = int(np.argmin(vals))
    return pts[k], float(vals[k])
