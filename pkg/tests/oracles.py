"""Independent reference computations used only by the tests.

None of these share code paths with the library: they use Fock-space matrix
exponentials, position-space sums, tensor Gauss rules and scipy quadrature.
"""

import math

import numpy as np
from scipy import integrate, linalg, special


def fock_coherent(alpha, dim):
    n = np.arange(dim)
    logfact = special.gammaln(n + 1)
    with np.errstate(divide="ignore"):
        logabs = np.where(n == 0, 0.0, n * np.log(abs(alpha) if alpha != 0 else 1e-300))
    amp = np.exp(-0.5 * abs(alpha) ** 2 + logabs - 0.5 * logfact)
    phase = np.exp(1j * n * np.angle(alpha)) if alpha != 0 else (n == 0).astype(complex)
    return amp * phase


def fock_char_fn(alpha, beta, eta, dim=160):
    """Tr(rho D(eta)) for the normalised cat state, via a truncated number basis."""
    psi = fock_coherent(alpha, dim) + fock_coherent(beta, dim)
    psi = psi / np.linalg.norm(psi)
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    disp = linalg.expm(eta * a.conj().T - np.conj(eta) * a)
    return complex(psi.conj() @ disp @ psi)


def fock_trace_with(alpha, beta, norm, dim=160):
    """Trace of norm * (|a> + |b>)(<a| + <b|) in the number basis."""
    psi = fock_coherent(alpha, dim) + fock_coherent(beta, dim)
    return float(norm * np.vdot(psi, psi).real)


def spread_position(s, sigma_x, length=1.0, terms=12):
    """Theta-normalised periodic Gaussian f(s) with f(0) = 1, summed in position space."""
    n = np.arange(-terms, terms + 1)
    s = np.asarray(s, dtype=float)[..., None]
    num = np.exp(-((s - n) ** 2) * length**2 / (2 * sigma_x**2)).sum(-1)
    den = np.exp(-(n**2) * length**2 / (2 * sigma_x**2)).sum()
    return num / den


def hankel_quadrature(sigma_g_sq, s):
    """int_0^R r g_r(r) J0(s r) dr with R = 12 sigma_g, by adaptive quadrature."""
    sig = math.sqrt(sigma_g_sq)
    val, _ = integrate.quad(
        lambda r: r * math.exp(-r * r / (2 * sigma_g_sq)) / sigma_g_sq * special.j0(s * r),
        0.0, 12 * sig, epsabs=1e-13, epsrel=1e-12, limit=400,
    )
    return val


def xi_plane_rate(model, noise, eta, t, x_nodes=160, xi_nodes=80):
    """gamma - gamma int dx/L int d^2xi g(xi) cos(2 Im(xi* C(x))), no Hankel transform.

    x by Gauss-Legendre, xi by a tensor Gauss-Hermite rule, C(x) by direct summation.
    """
    j = np.arange(-model.n_modes // 2, model.n_modes // 2)
    k = 2 * np.pi * j / model.length
    wk = np.sqrt(model.omega**2 + (model.speed * k) ** 2)
    r = np.sqrt(model.omega / wk)
    op, om = 0.5 * (r + 1 / r), 0.5 * (r - 1 / r)
    q = math.exp(-2 * math.pi**2 * (noise.sigma_x / model.length) ** 2)
    theta = 1 + 2 * sum(q ** (n * n) for n in range(1, 60))
    f = math.sqrt(model.length) * np.exp(-0.5 * (noise.sigma_x * k) ** 2) / theta

    xg, wg = np.polynomial.legendre.leggauss(x_nodes)
    xs = 0.5 * model.length * (xg + 1)
    wx = 0.5 * wg
    ph = np.exp(1j * np.outer(xs, k))
    c = ph @ (op * f * np.exp(1j * wk * t) * eta) + np.conj(ph) @ (om * f * np.exp(-1j * wk * t) * np.conj(eta))

    hx, hw = np.polynomial.hermite.hermgauss(xi_nodes)
    sig = math.sqrt(2 * noise.sigma_g_sq)
    re = sig * hx[:, None]
    im = sig * hx[None, :]
    w2 = (hw[:, None] * hw[None, :]) / math.pi
    avg = 0.0
    for cx, wxi in zip(c, wx):
        avg += wxi * np.sum(w2 * np.cos(2 * (re * cx.imag - im * cx.real)))
    return noise.gamma * (1 - avg)


def cartesian_purity(alpha, beta, gamma_t, sigma_g_sq_L, half_width=10.0):
    """Broad-spread purity by scipy dblquad in Cartesian coordinates (slow, small cases)."""
    from fielddeco.model import CatStateSpec, cat_char_fn

    st = CatStateSpec(alpha, beta)

    def f(y, x):
        eta = complex(x, y)
        g = 1 - math.exp(-2 * sigma_g_sq_L * abs(eta) ** 2)
        return abs(cat_char_fn(st, eta)) ** 2 * math.exp(-2 * gamma_t * g) / math.pi

    val, _ = integrate.dblquad(f, -half_width, half_width, -half_width, half_width,
                               epsabs=1e-9, epsrel=1e-9)
    return val
