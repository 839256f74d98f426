"""Counterterm integrals and kernel functions of the ultraviolet renormalization.

Every integrand is reduced by isotropy before it reaches the cubature:

* ``radial_integral``   d^3k -> 4 pi k^2 dk
* ``axial_integral``    d^3k -> 2 pi k^2 dk dcos, axis fixed by one vector
* ``pair_integral``     d^3k d^3l -> 8 pi^2 k^2 l^2 dk dl dcos(k, l)

Cutoffs: a kernel evaluated "with cutoff L" uses v_L with L capped by the
model's own cutoff, so L = inf with a finite ``params.cutoff`` is legal.
All integrands use omega_kappa; the counterterms are meant for kappa = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, form_factor_radial, omega_radial
from .quadrature import QuadResult, quad

LINEAR = "linear_in_L"
LOG = "log_in_L"

DEFAULT_MU = 1.0


class DivergenceFitError(ValueError):
    pass


def _cap(L: float, params: ModelParams) -> float:
    if not L > 0:
        raise ValueError(f"cutoff must be positive, got {L}")
    return min(float(L), params.cutoff)


def _root(k, params):
    return np.sqrt(params.c**2 + (params.xi * k) ** 2)


def _vsq(k, params, L):
    """v_L(k)^2 = g^2 k / sqrt(c^2 + xi^2 k^2)."""
    val = params.g**2 * k / _root(k, params)
    return np.where(k < L, val, 0.0)


def _om(k, params):
    return omega_radial(k, params.c, params.xi, params.kappa)


def _free(k, params):
    """k^2/2 + omega_kappa(k), the subtraction denominator."""
    return 0.5 * k * k + _om(k, params)


def radial_integral(f, L: float, tol: float = 1e-10, rtol: float = 0.0, **kw) -> QuadResult:
    """int_{|k|<L} f(|k|) d^3k for a radial f taking an array of magnitudes."""
    res = quad(lambda x: 4.0 * math.pi * x[:, 0] ** 2 * f(x[:, 0]), [0.0], [L], tol=tol, rtol=rtol, **kw)
    return res


def axial_integral(f, L: float, tol: float = 1e-10, rtol: float = 0.0, symmetric: bool = False, **kw) -> QuadResult:
    """int_{|k|<L} f(|k|, cos) d^3k with cos measured from a fixed axis.

    ``symmetric=True`` declares f even in cos and integrates cos over [0, 1]
    only, doubling the result.
    """
    lo_c = 0.0 if symmetric else -1.0
    fac = 4.0 * math.pi if symmetric else 2.0 * math.pi
    return quad(lambda x: fac * x[:, 0] ** 2 * f(x[:, 0], x[:, 1]), [0.0, lo_c], [L, 1.0], tol=tol, rtol=rtol, **kw)


def pair_integral(f, L: float, tol: float = 1e-10, rtol: float = 0.0, **kw) -> QuadResult:
    """int_{|k|,|l|<L} f(|k|, |l|, cos(k,l)) d^3k d^3l for a rotation-invariant f."""
    fac = 8.0 * math.pi**2
    return quad(
        lambda x: fac * x[:, 0] ** 2 * x[:, 1] ** 2 * f(x[:, 0], x[:, 1], x[:, 2]),
        [0.0, 0.0, -1.0],
        [L, L, 1.0],
        tol=tol,
        rtol=rtol,
        **kw,
    )


def sigma1(params: ModelParams, L: float, tol: float = 0.0, rtol: float = 1e-11) -> QuadResult:
    """Linearly divergent counterterm -int_{|k|<L} v(k)^2 / (k^2/2 + omega(k)) dk."""
    if not math.isfinite(L):
        raise ValueError("sigma1 needs a finite cutoff")
    Lc = _cap(L, params)
    if params.g == 0.0:
        return QuadResult(0.0, 0.0, 0)
    res = radial_integral(lambda k: -_vsq(k, params, Lc) / _free(k, params), Lc, tol=tol or 1e-300, rtol=rtol)
    return res


def _theta10_integrand(Q: float, eta: float, mu: float, params: ModelParams, Lc: float):
    """cos-symmetrized integrand of theta_{1,0} around the axis P - p of length Q.

    1/(A0 - Qkc) - 1/D, averaged over +-c, written without cancellation:
    (Q^2 k^2 c^2 - s A0) / ((A0^2 - Q^2 k^2 c^2) D), s = Q^2/2 + eta + mu.
    """
    s = 0.5 * Q * Q + eta + mu

    def f(k, c):
        D = _free(k, params)
        A0 = D + s
        qkc2 = (Q * k * c) ** 2
        return -_vsq(k, params, Lc) * (qkc2 - s * A0) / ((A0 * A0 - qkc2) * D)

    return f


def theta10_scalar(Q: float, eta: float, mu: float, L: float, params: ModelParams, tol: float = 1e-10, rtol: float = 1e-10) -> QuadResult:
    """theta_{L,1,0} as a function of |P - p|; L may be infinite."""
    if eta < 0 or mu < 0:
        raise ValueError("eta and mu must be non-negative")
    Lc = _cap(L, params)
    if params.g == 0.0 or (Q == 0.0 and eta + mu == 0.0):
        return QuadResult(0.0, 0.0, 0)
    f = _theta10_integrand(float(Q), float(eta), float(mu), params, Lc)
    return axial_integral(f, Lc, tol=tol, rtol=rtol, symmetric=True)


def theta10(p, eta: float, mu: float, L: float, params: ModelParams, tol: float = 1e-10, rtol: float = 1e-10) -> QuadResult:
    """theta_{L,1,0}(p, eta) = -int_{|k|<L} [v^2/(|P-p-k|^2/2 + eta + omega + mu) - v^2/(k^2/2 + omega)] dk."""
    Q = float(np.linalg.norm(params.P_vec - np.asarray(p, dtype=float)))
    return theta10_scalar(Q, eta, mu, L, params, tol=tol, rtol=rtol)


@dataclass
class Sigma2Result:
    value: float
    error: float
    term_a: QuadResult
    term_b: QuadResult

    @property
    def converged(self) -> bool:
        return self.term_a.converged and self.term_b.converged


class Sigma2Error(RuntimeError):
    def __init__(self, term: str, result: QuadResult):
        super().__init__(f"sigma2 term {term} did not converge (error estimate {result.error:.3g})")
        self.term = term
        self.result = result


def _pair_denominator(k, q, c, params):
    # |k + l|^2/2 + omega(k) + omega(l)
    return 0.5 * (k * k + q * q + 2.0 * k * q * c) + _om(k, params) + _om(q, params)


def sigma2(params: ModelParams, L: float, rtol: float = 1e-4, max_regions: int = 2_000_000, strict: bool = False) -> Sigma2Result:
    """Logarithmically divergent counterterm, term A minus term B.

    A = int dk v(k)^2 theta_{L,1,0}(k, omega(k)) / (k^2/2 + omega(k))^2 at P = mu = 0,
    with the inner theta written out so A and B share one 3-D box:
    theta_{L,1,0}(k, omega(k)) = int dl v(l)^2 (k^2/2 + k.l + omega(k)) / ((l^2/2 + omega(l)) Den(k, l)).
    """
    if not math.isfinite(L):
        raise ValueError("sigma2 needs a finite cutoff")
    Lc = _cap(L, params)
    if params.g == 0.0:
        zero = QuadResult(0.0, 0.0, 0)
        return Sigma2Result(0.0, 0.0, zero, zero)

    def term_a(k, q, c):
        Dk = _free(k, params)
        Dq = _free(q, params)
        den = _pair_denominator(k, q, c, params)
        return _vsq(k, params, Lc) * _vsq(q, params, Lc) * (0.5 * k * k + k * q * c + _om(k, params)) / (Dk * Dk * Dq * den)

    def term_b(k, q, c):
        return _vsq(k, params, Lc) * _vsq(q, params, Lc) / (_free(k, params) * _pair_denominator(k, q, c, params) * _free(q, params))

    a = pair_integral(term_a, Lc, tol=1e-300, rtol=rtol, max_regions=max_regions)
    if strict and not a.converged:
        raise Sigma2Error("A", a)
    b = pair_integral(term_b, Lc, tol=1e-300, rtol=rtol, max_regions=max_regions)
    if strict and not b.converged:
        raise Sigma2Error("B", b)
    return Sigma2Result(a.value - b.value, a.error + b.error, a, b)


def sigma2_term_a_nested(params: ModelParams, L: float, tol: float = 1e-7) -> QuadResult:
    """Term A by the literal route: radial k integral of theta10 at (p = k, eta = omega(k)).

    Slow; used to cross-check the merged 3-D form in ``sigma2``.
    """
    Lc = _cap(L, params)
    zero_P = params.replace(P=(0.0, 0.0, 0.0))

    def f(k):
        out = np.empty_like(k)
        for i, kk in enumerate(k):
            th = theta10_scalar(kk, float(_om(kk, params)), 0.0, Lc, zero_P, tol=tol * 1e-2, rtol=1e-9).value
            out[i] = _vsq(kk, params, Lc) * th / _free(kk, params) ** 2
        return out

    return radial_integral(f, Lc, tol=tol)


def theta20(p, eta: float, mu: float, L: float, params: ModelParams, tol: float = 1e-6) -> QuadResult:
    """theta_{L,2,0}(p, eta): the two second-order integrals at (p, eta, mu) minus sigma2.

    The subtraction is done under the integral sign (same integration
    variables), which makes the result finite for L = inf.  Both pieces are
    nested quadratures and correspondingly slow.
    """
    Lc = _cap(L, params)
    if params.g == 0.0:
        return QuadResult(0.0, 0.0, 0)
    Q = float(np.linalg.norm(params.P_vec - np.asarray(p, dtype=float)))
    inner_tol = tol * 1e-2

    def den(k, ck):
        # |Q - k|^2/2 + eta + omega(k) + mu with cos(k, Q) = ck
        return 0.5 * (Q * Q + k * k - 2.0 * Q * k * ck) + eta + _om(k, params) + mu

    def first(k, ck):
        out = np.empty_like(k)
        for i in range(len(k)):
            kk, cc = float(k[i]), float(ck[i])
            qk = math.sqrt(max(Q * Q + kk * kk - 2.0 * Q * kk * cc, 0.0))
            t_shift = theta10_scalar(qk, eta + float(_om(kk, params)), mu, Lc, params, tol=inner_tol).value
            t_zero = theta10_scalar(kk, float(_om(kk, params)), 0.0, Lc, params, tol=inner_tol).value
            out[i] = t_shift / den(kk, cc) ** 2 - t_zero / float(_free(kk, params)) ** 2
        return _vsq(k, params, Lc) * out

    one = axial_integral(first, Lc, tol=tol)

    def second(k, ck):
        out = np.empty_like(k)
        sk_all = np.sqrt(np.clip(1.0 - ck * ck, 0.0, None))
        for i in range(len(k)):
            kk, cc, sk = float(k[i]), float(ck[i]), float(sk_all[i])
            dk = den(kk, cc)
            fk = float(_free(kk, params))
            omk = float(_om(kk, params))

            def g(x, kk=kk, cc=cc, sk=sk, dk=dk, fk=fk, omk=omk):
                l, cl, phi = x[:, 0], x[:, 1], x[:, 2]
                sl = np.sqrt(np.clip(1.0 - cl * cl, 0.0, None))
                kl = kk * l * (cc * cl + sk * sl * np.cos(phi))
                oml = _om(l, params)
                dl = 0.5 * (Q * Q + l * l - 2.0 * Q * l * cl) + eta + oml + mu
                r2 = Q * Q + kk * kk + l * l - 2.0 * Q * kk * cc - 2.0 * Q * l * cl + 2.0 * kl
                d3 = 0.5 * r2 + eta + omk + oml + mu
                d0 = 0.5 * (kk * kk + l * l + 2.0 * kl) + omk + oml
                bracket = 1.0 / (fk * d0 * _free(l, params)) - 1.0 / (dk * d3 * dl)
                return 2.0 * l * l * _vsq(l, params, Lc) * bracket

            out[i] = quad(g, [0.0, -1.0, 0.0], [Lc, 1.0, math.pi], tol=inner_tol).value
        return _vsq(k, params, Lc) * out

    two = axial_integral(second, Lc, tol=tol)
    return QuadResult(one.value + two.value, one.error + two.error, one.subdivisions + two.subdivisions,
                      one.converged and two.converged)


def theta21_closed_term(p, eta: float, k, l, mu: float, L: float, params: ModelParams, tol: float = 1e-10) -> QuadResult:
    """v(k) v(l) theta_{1,0}(p + k + l, eta + omega(k) + omega(l)) over the two free denominators."""
    p, k, l = (np.asarray(x, dtype=float) for x in (p, k, l))
    Lc = _cap(L, params)
    Pv = params.P_vec
    kn, ln = np.linalg.norm(k), np.linalg.norm(l)
    vk = float(form_factor_radial(kn, params.c, params.xi, params.g, Lc))
    vl = float(form_factor_radial(ln, params.c, params.xi, params.g, Lc))
    if vk == 0.0 or vl == 0.0:
        return QuadResult(0.0, 0.0, 0)
    omk, oml = float(_om(kn, params)), float(_om(ln, params))
    dk = 0.5 * np.sum((Pv - p - k) ** 2) + eta + omk + mu
    dl = 0.5 * np.sum((Pv - p - l) ** 2) + eta + oml + mu
    th = theta10(p + k + l, eta + omk + oml, mu, Lc, params, tol=tol)
    fac = vk * vl / (dk * dl)
    return QuadResult(fac * th.value, abs(fac) * th.error, th.subdivisions, th.converged)


def theta21(p, eta: float, k, l, mu: float, L: float, params: ModelParams, tol: float = 1e-8) -> QuadResult:
    """theta_{L,2,1}(p, eta, k, l): closed-form term plus one 3-D integral over a fresh momentum z.

    Second term: int dz v(z)^2 theta_{1,1}(p + z, eta + omega(z), k, l) / (|P-p-z|^2/2 + eta + omega(z) + mu)^2.
    """
    p, k, l = (np.asarray(x, dtype=float) for x in (p, k, l))
    Lc = _cap(L, params)
    first = theta21_closed_term(p, eta, k, l, mu, L, params, tol=tol * 1e-1)
    kn, ln = np.linalg.norm(k), np.linalg.norm(l)
    vk = float(form_factor_radial(kn, params.c, params.xi, params.g, Lc))
    vl = float(form_factor_radial(ln, params.c, params.xi, params.g, Lc))
    if vk == 0.0 or vl == 0.0:
        return first

    Qv = params.P_vec - p
    Rv = Qv - k - l
    Q, R = np.linalg.norm(Qv), np.linalg.norm(Rv)
    # angle between the two axes Q and R
    cQR = float(Qv @ Rv / (Q * R)) if Q > 0 and R > 0 else 1.0
    sQR = math.sqrt(max(0.0, 1.0 - cQR * cQR))
    extra = eta + float(_om(kn, params)) + float(_om(ln, params)) + mu

    def f(x):
        z, cz, phi = x[:, 0], x[:, 1], x[:, 2]
        sz = np.sqrt(np.clip(1.0 - cz * cz, 0.0, None))
        omz = _om(z, params)
        dz = 0.5 * (Q * Q + z * z - 2.0 * Q * z * cz) + eta + omz + mu
        zr = z * (cz * cQR + sz * sQR * np.cos(phi))
        d3 = 0.5 * (R * R + z * z - 2.0 * R * zr) + omz + extra
        # 2 pi z^2 from the measure, phi folded onto [0, pi]
        return -2.0 * z * z * _vsq(z, params, Lc) * vk * vl / (dz * dz * d3)

    second = quad(f, [0.0, -1.0, 0.0], [Lc, 1.0, math.pi], tol=tol)
    return QuadResult(first.value + second.value, first.error + second.error,
                      first.subdivisions + second.subdivisions, first.converged and second.converged)


@dataclass
class DivergenceFit:
    form: str
    coefficient: float
    offset: float
    residual: float
    n: int

    def predict(self, L):
        L = np.asarray(L, dtype=float)
        x = L if self.form == LINEAR else np.log(L)
        return self.coefficient * x + self.offset


def fit_divergence(samples, form: str = LINEAR) -> DivergenceFit:
    """Least squares of value against {1, L} or {1, log L}.

    ``residual`` is the root-mean-square deviation of the samples from the fit.
    """
    if form not in (LINEAR, LOG):
        raise DivergenceFitError(f"unknown fit form {form!r}")
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 4:
        raise DivergenceFitError("need at least 4 (L, value) samples")
    L, y = arr[:, 0], arr[:, 1]
    if len(np.unique(L)) < len(L):
        raise DivergenceFitError("cutoff samples must be distinct")
    if form == LOG and np.any(L <= 0):
        raise DivergenceFitError("log fit needs positive cutoffs")
    x = L if form == LINEAR else np.log(L)
    X = np.column_stack([x, np.ones_like(x)])
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 2:
        raise DivergenceFitError("degenerate design matrix")
    resid = y - X @ coef
    return DivergenceFit(form, float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2))), len(L))
