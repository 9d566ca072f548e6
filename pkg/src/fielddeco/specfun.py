"""Scalar special functions used by the field model.

Everything here is pure and deterministic. Functions accept Python floats or
numpy arrays unless noted otherwise.
"""

import math

import numpy as np

__all__ = [
    "jacobi_theta3",
    "bessel_j0",
    "gaussian_hankel",
    "inv_norm_cdf",
    "norm_cdf",
]

_THETA_TOL = 1e-16


def jacobi_theta3(q, z=0.0):
    """Jacobi theta function theta_3(z, q) at z = 0, by direct series.

    Sums ``1 + 2 * sum_{n>=1} q**(n*n)`` until a term drops below 1e-16.
    Only ``z = 0`` is supported.
    """
    if z != 0:
        raise ValueError("only z = 0 is supported")
    q = float(q)
    if not 0.0 <= q < 1.0:
        raise ValueError(f"nome q must lie in [0, 1), got {q!r}")
    total = 0.0
    n = 1
    while True:
        term = q ** (n * n)
        if term < _THETA_TOL:
            break
        total += term
        n += 1
    return 1.0 + 2.0 * total


# J0 is split in three regions: power series (no cancellation problem below 8),
# trapezoidal rule on the periodic Bessel integral, Hankel asymptotics.
_J0_SERIES_MAX = 8.0
_J0_ASYMPTOTIC_MIN = 25.0


def _j0_series(x):
    y = -0.25 * x * x
    term = 1.0
    total = 1.0
    k = 1
    while True:
        term *= y / (k * k)
        total += term
        if abs(term) < 1e-18 * max(1.0, abs(total)):
            return total
        k += 1


def _j0_trapezoid(x):
    # (1/pi) int_0^pi cos(x sin t) dt; error ~ J_{2M}(x), negligible for 2M >> x
    m = 64 + int(abs(x))
    theta = np.pi * np.arange(m) / m
    return float(np.cos(x * np.sin(theta)).sum() / m)


def _j0_asymptotic(x):
    x = abs(x)
    p = 0.0
    q = 0.0
    a = 1.0
    prev = math.inf
    k = 0
    while True:
        term = a / x**k
        if term >= prev or term < 1e-17:
            break
        prev = term
        if k % 2 == 0:
            p += -term if (k // 2) % 2 else term
        else:
            q += -term if ((k + 1) // 2) % 2 else term
        k += 1
        a *= (2 * k - 1) ** 2 / (8.0 * k)
    chi = x - 0.25 * math.pi
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def _j0_scalar(x):
    x = abs(float(x))
    if not math.isfinite(x):
        raise ValueError("bessel_j0 requires a finite argument")
    if x <= _J0_SERIES_MAX:
        return _j0_series(x)
    if x < _J0_ASYMPTOTIC_MIN:
        return _j0_trapezoid(x)
    return _j0_asymptotic(x)


def bessel_j0(x):
    """Bessel function of the first kind of order zero.

    Absolute error is below 1e-10 for ``|x| <= 100``.
    """
    if np.ndim(x) == 0:
        return _j0_scalar(x)
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    for idx, val in np.ndenumerate(arr):
        out[idx] = _j0_scalar(val)
    return out


def gaussian_hankel(noise, s):
    """Hankel transform ``int_0^inf r g_r(r) J0(s r) dr`` of the Gaussian kick pdf.

    With ``g_r(r) = exp(-r^2 / 2 sigma_g^2) / sigma_g^2`` the transform is
    ``exp(-sigma_g^2 s^2 / 2)``.
    """
    return np.exp(-0.5 * noise.sigma_g_sq * np.square(s))


def norm_cdf(z):
    """Standard normal CDF via ``math.erfc`` (scalar)."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


# Wichura, algorithm AS 241 (PPND16): relative accuracy about 1e-16.
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083,
      5394.1960214247511077, 21213.794301586595867, 39307.89580009271061,
      28729.085735721942674, 5226.495278852545925)
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494,
      0.68976733498510000455, 0.14810397642748007459, 0.0151986665636164571966,
      5.475938084995344946e-4, 1.05075007164441684324e-9)
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531,
      0.0148753612908506148525, 7.868691311456132591e-4, 1.8463183175100546818e-5,
      1.4215117583164458887e-7, 2.04426310338993978564e-15)


def _poly(coeffs, x):
    acc = np.zeros_like(x) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


def inv_norm_cdf(u):
    """Inverse of the standard normal CDF.

    Raises ValueError if any input is outside the open interval (0, 1).
    """
    scalar = np.ndim(u) == 0
    p = np.asarray(u, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise ValueError("inv_norm_cdf requires 0 < u < 1")
    q = p - 0.5
    out = np.empty_like(p)

    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)

    tail = ~central
    if np.any(tail):
        qt = q[tail]
        r = np.sqrt(-np.log(np.minimum(p[tail], 1.0 - p[tail])))
        val = np.empty_like(r)
        near = r <= 5.0
        rn = r[near] - 1.6
        val[near] = _poly(_C, rn) / _poly(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly(_E, rf) / _poly(_F, rf)
        out[tail] = np.where(qt < 0.0, -val, val)

    return float(out) if scalar else out
