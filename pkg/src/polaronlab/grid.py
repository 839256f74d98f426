"""Discretization of phonon momentum space into weighted modes."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, form_factor

CARTESIAN = "cartesian"
SPHERICAL_M0 = "spherical_m0"

DEFAULT_MAX_MODES = 50_000


class ResourceError(RuntimeError):
    """A requested discretization or basis exceeds the configured budget."""


@dataclass(frozen=True)
class GridSpec:
    kind: str = CARTESIAN
    kmax: float = 2.0
    n: int | tuple = 4
    exclude_origin: bool | None = None

    def __post_init__(self):
        if self.kind not in (CARTESIAN, SPHERICAL_M0):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if not self.kmax > 0:
            raise ValueError(f"kmax must be > 0, got {self.kmax}")
        if self.kind == CARTESIAN:
            if int(self.n) != self.n or int(self.n) < 1:
                raise ValueError(f"cartesian n must be a positive integer, got {self.n}")
            object.__setattr__(self, "n", int(self.n))
        else:
            n = tuple(int(x) for x in np.broadcast_to(np.asarray(self.n), (2,)))
            if min(n) < 1:
                raise ValueError(f"spherical counts must be >= 1, got {n}")
            object.__setattr__(self, "n", n)
        if self.exclude_origin is None:
            # only an odd cartesian partition puts a cell center at k = 0
            object.__setattr__(self, "exclude_origin", self.kind == CARTESIAN and self.n % 2 == 1)

    @property
    def num_cells(self) -> int:
        if self.kind == CARTESIAN:
            return self.n**3
        return self.n[0] * self.n[1]


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable set of modes k_j with cell weights w_j and couplings v(k_j) sqrt(w_j).

    For ``spherical_m0`` grids each mode stands for an azimuthal ring; k_j is
    stored in the xz-plane and ``azimuthal_average`` tells the Fock assembly to
    drop transverse cross terms between distinct phonons.
    """

    spec: GridSpec
    k: np.ndarray
    w: np.ndarray
    coupling: np.ndarray
    params: ModelParams
    volume: float
    azimuthal_average: bool = False
    _hash: str = field(default="", repr=False)

    def __post_init__(self):
        for arr in (self.k, self.w, self.coupling):
            arr.setflags(write=False)
        h = hashlib.sha256()
        h.update(repr(self.spec).encode())
        for arr in (self.k, self.w, self.coupling):
            h.update(np.ascontiguousarray(arr).tobytes())
        object.__setattr__(self, "_hash", h.hexdigest())

    @property
    def M(self) -> int:
        return len(self.w)

    @property
    def kabs(self) -> np.ndarray:
        return np.linalg.norm(self.k, axis=1)

    @property
    def digest(self) -> str:
        return self._hash

    def with_params(self, params: ModelParams) -> "Grid":
        """Same modes and weights, couplings recomputed for new model parameters."""
        return Grid(
            self.spec,
            self.k.copy(),
            self.w.copy(),
            form_factor(self.k, params) * np.sqrt(self.w),
            params,
            self.volume,
            self.azimuthal_average,
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["j", "kx", "ky", "kz", "w", "coupling"])
            for j in range(self.M):
                out.writerow([j, *(f"{x:.17g}" for x in self.k[j]), f"{self.w[j]:.17g}", f"{self.coupling[j]:.17g}"])


def _cartesian(spec: GridSpec):
    n, kmax = spec.n, spec.kmax
    h = 2.0 * kmax / n
    # exactly antisymmetric, so k -> -k maps modes onto modes bit for bit
    axis = h * (np.arange(n) - 0.5 * (n - 1))
    kx, ky, kz = np.meshgrid(axis, axis, axis, indexing="ij")
    k = np.stack([kx.ravel(), ky.ravel(), kz.ravel()], axis=1)
    w = np.full(len(k), h**3)
    volume = (2.0 * kmax) ** 3
    if spec.exclude_origin:
        keep = np.any(k != 0.0, axis=1)
        volume -= h**3 * int(np.count_nonzero(~keep))
        k, w = k[keep], w[keep]
    return k, w, volume


def _spherical(spec: GridSpec):
    nr, na = spec.n
    xr, wr = np.polynomial.legendre.leggauss(nr)
    xa, wa = np.polynomial.legendre.leggauss(na)
    r = 0.5 * spec.kmax * (xr + 1.0)
    wr = 0.5 * spec.kmax * wr
    R, C = np.meshgrid(r, xa, indexing="ij")
    WR, WA = np.meshgrid(wr, wa, indexing="ij")
    R, C, WR, WA = R.ravel(), C.ravel(), WR.ravel(), WA.ravel()
    S = np.sqrt(np.clip(1.0 - C * C, 0.0, None))
    k = np.stack([R * S, np.zeros_like(R), R * C], axis=1)
    w = 2.0 * np.pi * R**2 * WR * WA
    volume = 4.0 * np.pi * spec.kmax**3 / 3.0
    return k, w, volume


def build_grid(spec: GridSpec, params: ModelParams, max_modes: int = DEFAULT_MAX_MODES) -> Grid:
    if spec.num_cells > max_modes:
        raise ResourceError(f"grid with {spec.num_cells} modes exceeds budget of {max_modes}")
    if spec.kind == CARTESIAN:
        k, w, volume = _cartesian(spec)
    else:
        k, w, volume = _spherical(spec)
    coupling = form_factor(k, params) * np.sqrt(w)
    return Grid(spec, k, w, coupling, params, volume, azimuthal_average=spec.kind == SPHERICAL_M0)


def min_mode_norm(grid: Grid) -> float:
    """Smallest |k_j| among modes that actually couple to the impurity."""
    mask = grid.coupling != 0.0
    if not np.any(mask):
        mask = np.ones(grid.M, dtype=bool)
    return float(grid.kabs[mask].min())


def align_to_z(P) -> tuple:
    """Rotate a total momentum onto +z; lossless by isotropy of omega and v."""
    return (0.0, 0.0, float(np.linalg.norm(np.asarray(P, dtype=float))))
