"""Pure-NumPy fallback for ``_kernels``; same contract, same floating-point operations."""

import math

import numpy as np

STOP_NONE = 0
STOP_TRIGGER = 1
STOP_BANKRUPT = 2
STOP_NONFINITE = 3


def mean(x):
    # sequential left-to-right sum, matching the compiled loop
    return float(np.cumsum(x)[-1]) / x.shape[0]


def advance(x, dt, alpha0, sigma1, sigma2, dB1, dB2, jumps, start, stop, level, check_from, m_out):
    """Advance particles in place over steps ``start .. stop-1``.

    Each step uses the pre-step empirical mean ``m`` and applies
    ``x += m * (alpha0*dt + sigma1*dB1[k] + sigma2*dB2[k] + jumps[k])``.
    Stops early after a step whose new mean is non-finite, ``<= 0`` or (for
    ``k >= check_from``) ``>= level``.  Returns ``(k_end, status)``.
    """
    has_idio = dB2.shape[0] > 0
    has_jumps = jumps.shape[0] > 0
    m = mean(x)
    k = start
    status = STOP_NONE
    while k < stop:
        common = alpha0 * dt + sigma1 * float(dB1[k])
        if has_idio or has_jumps:
            d = np.full(x.shape[0], common)
            if has_idio:
                d = d + sigma2 * dB2[k]
            if has_jumps:
                d = d + jumps[k]
            x += m * d
        else:
            x += m * common
        m = mean(x)
        m_out[k] = m
        k += 1
        if not math.isfinite(m):
            status = STOP_NONFINITE
            break
        if m <= 0.0:
            status = STOP_BANKRUPT
            break
        if k - 1 >= check_from and m >= level:
            status = STOP_TRIGGER
            break
    return k, status
