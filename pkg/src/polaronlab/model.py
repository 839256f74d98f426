"""Physical ingredients of the Bogoliubov-Froehlich polaron.

Units: impurity mass = 1.  All functions accept either a single momentum
vector of shape (3,) or a stack of shape (..., 3) and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INFINITE_CUTOFF = math.inf


class ModelError(ValueError):
    """Invalid model parameters or an argument outside a kernel's domain."""


@dataclass(frozen=True)
class ModelParams:
    c: float = 1.0
    xi: float = 1.0
    g: float = 0.0
    kappa: float = 0.0
    cutoff: float = INFINITE_CUTOFF
    P: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        P = tuple(float(x) for x in np.broadcast_to(np.asarray(self.P, dtype=float), (3,)))
        object.__setattr__(self, "P", P)
        for name in ("c", "xi", "g", "kappa", "cutoff"):
            val = float(getattr(self, name))
            if math.isnan(val):
                raise ModelError(f"{name} is NaN")
            object.__setattr__(self, name, val)
        if not self.c > 0:
            raise ModelError(f"c must be > 0, got {self.c}")
        if not self.xi > 0:
            raise ModelError(f"xi must be > 0, got {self.xi}")
        if self.g < 0:
            raise ModelError(f"g must be >= 0, got {self.g}")
        if self.kappa < 0:
            raise ModelError(f"kappa must be >= 0, got {self.kappa}")
        if not self.cutoff > 0:
            raise ModelError(f"cutoff must be > 0, got {self.cutoff}")

    @property
    def P_vec(self) -> np.ndarray:
        return np.array(self.P)

    def replace(self, **changes) -> "ModelParams":
        kw = dict(c=self.c, xi=self.xi, g=self.g, kappa=self.kappa, cutoff=self.cutoff, P=self.P)
        kw.update(changes)
        return ModelParams(**kw)


def _norm(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    return np.sqrt(np.sum(k * k, axis=-1))


def omega_radial(kabs, c: float, xi: float, kappa: float = 0.0):
    """omega_kappa(|k|) = sqrt(c^2 k^2 + xi^2 k^4) + kappa on magnitudes."""
    kabs = np.asarray(kabs, dtype=float)
    return kabs * np.sqrt(c * c + (xi * kabs) ** 2) + kappa


def form_factor_radial(kabs, c: float, xi: float, g: float, cutoff: float = INFINITE_CUTOFF):
    """v(|k|) on magnitudes; always built from the kappa = 0 dispersion.

    |k|^2 / omega(k) = |k| / sqrt(c^2 + xi^2 k^2), which removes the 0/0 at
    the origin and gives v(0) = 0.
    """
    kabs = np.asarray(kabs, dtype=float)
    val = g * np.sqrt(kabs / np.sqrt(c * c + (xi * kabs) ** 2))
    return np.where(kabs < cutoff, val, 0.0)


def dispersion(k, params: ModelParams):
    """Phonon energy omega_kappa(k) = sqrt(c^2|k|^2 + xi^2|k|^4) + kappa."""
    return omega_radial(_norm(k), params.c, params.xi, params.kappa)


def form_factor(k, params: ModelParams):
    """Coupling amplitude v_Lambda(k) = g 1{|k|<Lambda} sqrt(|k|^2/omega(k))."""
    return form_factor_radial(_norm(k), params.c, params.xi, params.g, params.cutoff)


def _check_denominator(den):
    den = np.asarray(den)
    if np.any(den <= 0.0):
        raise ModelError("kernel denominator vanishes (mu = kappa = 0, k = l = 0, P = p)")


def theta11(p, eta, k, l, mu, params: ModelParams):
    """Two-point kernel -v(k)v(l) / (|P-p-k-l|^2/2 + eta + omega(k) + omega(l) + mu)."""
    p, k, l = (np.asarray(x, dtype=float) for x in (p, k, l))
    q = params.P_vec - p - k - l
    den = 0.5 * np.sum(q * q, axis=-1) + eta + dispersion(k, params) + dispersion(l, params) + mu
    _check_denominator(den)
    return -form_factor(k, params) * form_factor(l, params) / den


def _resolvent_den(p, eta, k, mu, params):
    q = params.P_vec - p - k
    return 0.5 * np.sum(q * q, axis=-1) + eta + dispersion(k, params) + mu


def theta22(p, eta, k1, k2, l1, l2, mu, params: ModelParams):
    """Four-point kernel built from theta11 and two free resolvent denominators."""
    p, k1, k2, l1, l2 = (np.asarray(x, dtype=float) for x in (p, k1, k2, l1, l2))
    d1 = _resolvent_den(p, eta, k1, mu, params)
    d2 = _resolvent_den(p, eta, l1, mu, params)
    _check_denominator(d1)
    _check_denominator(d2)
    inner = theta11(
        p + k1 + l1,
        eta + dispersion(k1, params) + dispersion(l1, params),
        k2,
        l2,
        mu,
        params,
    )
    return form_factor(k1, params) * form_factor(l1, params) * inner / (d1 * d2)
