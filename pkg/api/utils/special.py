# api/utils/special.py
"""
Complex log-gamma by the Lanczos approximation (g = 7, 9 coefficients).

Vectorized over numpy arrays. Values left of Re z = 1/2 go through the
reflection formula with an overflow-free log sin(pi z).
"""

import logging
from math import pi, sqrt

import numpy as np

from api.utils.errors import PoleError

logger = logging.getLogger(__name__)

LANCZOS_G = 7
LANCZOS_COEFFS = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])

HALF_LOG_2PI = 0.5 * np.log(2 * pi)
GAMMA_MINUS_HALF = -2.0 * sqrt(pi)


def _lanczos(z: np.ndarray) -> np.ndarray:
    z = z - 1
    acc = np.full(z.shape, LANCZOS_COEFFS[0], dtype=complex)
    for i in range(1, LANCZOS_G + 2):
        acc = acc + LANCZOS_COEFFS[i] / (z + i)
    t = z + LANCZOS_G + 0.5
    return HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


def log_sin_pi(z) -> np.ndarray:
    """log sin(pi z) up to a multiple of 2 pi i, stable for large |Im z|"""
    z = np.asarray(z, dtype=complex)
    upper = z.imag >= 0
    out = np.empty(z.shape, dtype=complex)
    zu = z[upper]
    out[upper] = -1j * pi * zu + np.log(0.5j) + np.log1p(-np.exp(2j * pi * zu))
    zl = z[~upper]
    out[~upper] = 1j * pi * zl + np.log(-0.5j) + np.log1p(-np.exp(-2j * pi * zl))
    return out


def loggamma(z) -> np.ndarray:
    """log Gamma(z) for complex z, exp of the result is Gamma(z)"""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty(z.shape, dtype=complex)
    reflect = z.real < 0.5
    if np.any(reflect):
        zr = z[reflect]
        gap = np.abs(zr - np.round(zr.real))
        if np.any((gap < 1e-15) & (zr.real <= 0.5)):
            bad = zr[np.argmin(gap)]
            raise PoleError(f"Gamma pole at {bad}", location=complex(bad))
        out[reflect] = np.log(pi) - log_sin_pi(zr) - _lanczos(1 - zr)
    if np.any(~reflect):
        out[~reflect] = _lanczos(z[~reflect])
    return out[0] if scalar else out


def gamma(z) -> np.ndarray:
    return np.exp(loggamma(z))
