"""Truncated bosonic Fock space over grid modes and the fixed-momentum Hamiltonian.

Basis states are multisets of mode indices with at most ``nmax`` phonons,
stored as rows of sorted indices padded with -1.  Ordering is by phonon
number, then lexicographic in the sorted index tuple (the order of
``itertools.combinations_with_replacement``).  That ordering has a closed-form
rank, so lookups never need a hash table.

In the occupation basis every state has sharp total phonon momentum, so
(P - dGamma(p))^2 / 2 and dGamma(omega) are diagonal and only the field
operator phi(v) is off-diagonal, linking states that differ by one phonon.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .grid import Grid, ResourceError
from .model import ModelParams, form_factor, omega_radial

DEFAULT_MAX_STATES = 2_000_000
MAX_OCCUPATION = 255


def basis_size(M: int, nmax: int) -> int:
    from math import comb

    return sum(comb(M + n - 1, n) for n in range(nmax + 1))


def _binomial_table(N: int, r: int) -> np.ndarray:
    from math import comb

    return np.array([[comb(x, s) for s in range(r + 1)] for x in range(N + 1)], dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FockBasis:
    M: int
    nmax: int
    modes: np.ndarray  # (dim, nmax) sorted mode indices, -1 padding
    number: np.ndarray  # (dim,) phonon number per state
    offsets: np.ndarray  # first ordinal of each number sector
    # lowering links: state `upper` --a_j--> sqrt(n_j) * state `lower`
    link_upper: np.ndarray
    link_lower: np.ndarray
    link_mode: np.ndarray
    link_amp: np.ndarray
    _binom: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.number)

    def occupation(self, s: int) -> dict:
        out: dict = {}
        for j in self.modes[s, : self.number[s]]:
            out[int(j)] = out.get(int(j), 0) + 1
        return out

    def rank(self, modes) -> np.ndarray:
        """Ordinal of sorted mode-index rows; rows may carry -1 padding."""
        modes = np.atleast_2d(np.asarray(modes, dtype=np.int64))
        n = np.count_nonzero(modes >= 0, axis=1)
        out = np.empty(len(modes), dtype=np.int64)
        for nn in np.unique(n):
            rows = n == nn
            out[rows] = self.offsets[nn] + self._rank_sector(modes[rows, :nn], int(nn))
        return out

    def _rank_sector(self, a: np.ndarray, n: int) -> np.ndarray:
        # multiset a_0 <= ... <= a_{n-1} -> strict combination b_i = a_i + i of range(N)
        if n == 0:
            return np.zeros(len(a), dtype=np.int64)
        N = self.M + n - 1
        b = a + np.arange(n)
        total = self._binom[N, n]
        acc = np.zeros(len(a), dtype=np.int64)
        for i in range(n):
            acc += self._binom[N - 1 - b[:, i], n - i]
        return total - 1 - acc

    def index(self, occupation: dict) -> int:
        """Ordinal of a state given as {mode: count}."""
        seq = sorted(j for j, c in occupation.items() for _ in range(c))
        if len(seq) > self.nmax:
            raise KeyError(f"state with {len(seq)} phonons exceeds nmax={self.nmax}")
        row = np.full((1, self.nmax), -1, dtype=np.int64)
        row[0, : len(seq)] = seq
        return int(self.rank(row)[0])


def enumerate_basis(M: int, nmax: int, max_states: int = DEFAULT_MAX_STATES) -> FockBasis:
    if M < 1:
        raise ValueError(f"need at least one mode, got M={M}")
    if nmax < 0 or nmax > MAX_OCCUPATION:
        raise ValueError(f"nmax must be in [0, {MAX_OCCUPATION}], got {nmax}")
    dim = basis_size(M, nmax)
    if dim > max_states:
        raise ResourceError(f"Fock basis of size {dim} (M={M}, nmax={nmax}) exceeds budget of {max_states}")

    width = max(nmax, 1)
    blocks, numbers, offsets = [], [], [0]
    for n in range(nmax + 1):
        count = basis_size(M, n) - basis_size(M, n - 1) if n else 1
        flat = np.fromiter(
            itertools.chain.from_iterable(itertools.combinations_with_replacement(range(M), n)),
            dtype=np.int64,
            count=count * n,
        )
        block = np.full((count, width), -1, dtype=np.int64)
        block[:, :n] = flat.reshape(count, n)
        blocks.append(block)
        numbers.append(np.full(count, n, dtype=np.int64))
        offsets.append(offsets[-1] + count)
    modes = np.concatenate(blocks)[:, :nmax]
    number = np.concatenate(numbers)
    binom = _binomial_table(M + nmax, nmax)

    basis = FockBasis(M, nmax, modes, number, np.array(offsets, dtype=np.int64),
                      *(np.empty(0, dtype=t) for t in (np.int64, np.int64, np.int64, float)),
                      _binom=binom)
    ups, lows, js, amps = [], [], [], []
    for n in range(1, nmax + 1):
        sl = slice(offsets[n], offsets[n + 1])
        a = modes[sl, :n]
        upper = np.arange(offsets[n], offsets[n + 1], dtype=np.int64)
        for i in range(n):
            # remove the last copy of each distinct mode only
            last = np.ones(len(a), dtype=bool) if i == n - 1 else a[:, i] != a[:, i + 1]
            if not np.any(last):
                continue
            sub = a[last]
            lower = np.delete(sub, i, axis=1)
            mult = np.count_nonzero(sub == sub[:, i : i + 1], axis=1)
            ups.append(upper[last])
            lows.append(basis._rank_sector(lower, n - 1) + offsets[n - 1])
            js.append(sub[:, i])
            amps.append(np.sqrt(mult.astype(float)))
    if ups:
        order = np.lexsort((np.concatenate(js), np.concatenate(ups)))
        links = [np.concatenate(x)[order] for x in (ups, lows, js, amps)]
    else:
        links = [np.empty(0, dtype=t) for t in (np.int64, np.int64, np.int64, float)]
    return FockBasis(M, nmax, modes, number, np.array(offsets, dtype=np.int64), *links, _binom=binom)


def total_momentum(grid: Grid, basis: FockBasis) -> np.ndarray:
    """Sharp phonon momentum sum_i k_{j_i} of every basis state, shape (dim, 3)."""
    kpad = np.vstack([grid.k, np.zeros((1, 3))])
    return kpad[basis.modes].sum(axis=1) if basis.nmax else np.zeros((basis.dim, 3))


@dataclass(frozen=True, eq=False)
class SparseHamiltonian:
    """Real symmetric operator: diagonal plus strictly upper off-diagonal triples."""

    dim: int
    diag: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        upper = sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.dim, self.dim))
        object.__setattr__(self, "_upper", upper)
        object.__setattr__(self, "_lower", upper.T.tocsr())

    @property
    def nnz(self) -> int:
        return self.dim + len(self.vals)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return matvec(self, x)

    def to_dense(self) -> np.ndarray:
        A = np.diag(self.diag.astype(float))
        A[self.rows, self.cols] += self.vals
        A[self.cols, self.rows] += self.vals
        return A

    def to_scipy(self) -> sp.csr_matrix:
        return (sp.diags(self.diag) + self._upper + self._lower).tocsr()

    def permuted(self, perm: np.ndarray) -> "SparseHamiltonian":
        """Same operator with basis state s relabelled to inv(perm)[s]."""
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        r, c = inv[self.rows], inv[self.cols]
        lo, hi = np.minimum(r, c), np.maximum(r, c)
        return SparseHamiltonian(self.dim, self.diag[perm], lo, hi, self.vals.copy(), dict(self.meta))

    def dump(self, path) -> None:
        """Little-endian: u64 dim, u64 nnz, then nnz records (i64 row, i64 col, f64 value).

        Records hold the diagonal followed by the strict upper triangle.
        """
        rec = np.empty(self.nnz, dtype=[("row", "<i8"), ("col", "<i8"), ("val", "<f8")])
        idx = np.arange(self.dim)
        rec["row"] = np.concatenate([idx, self.rows])
        rec["col"] = np.concatenate([idx, self.cols])
        rec["val"] = np.concatenate([self.diag, self.vals])
        with open(path, "wb") as fh:
            fh.write(struct.pack("<QQ", self.dim, self.nnz))
            fh.write(rec.tobytes())

    @classmethod
    def load(cls, path) -> "SparseHamiltonian":
        with open(path, "rb") as fh:
            dim, nnz = struct.unpack("<QQ", fh.read(16))
            rec = np.frombuffer(fh.read(), dtype=[("row", "<i8"), ("col", "<i8"), ("val", "<f8")], count=nnz)
        on = rec["row"] == rec["col"]
        diag = np.zeros(dim)
        diag[rec["row"][on]] = rec["val"][on]
        off = rec[~on]
        return cls(int(dim), diag, off["row"].astype(np.int64), off["col"].astype(np.int64), off["val"].astype(float))


def matvec(h: SparseHamiltonian, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != h.dim:
        raise ValueError(f"vector of length {x.shape[0]} does not match dimension {h.dim}")
    dx = h.diag * x if x.ndim == 1 else h.diag[:, None] * x
    return dx + h._upper @ x + h._lower @ x


def mode_couplings(grid: Grid, params: ModelParams) -> np.ndarray:
    """g_j = v(k_j) sqrt(w_j) evaluated with ``params`` (not the grid's own)."""
    return form_factor(grid.k, params) * np.sqrt(grid.w)


def diagonal(grid: Grid, basis: FockBasis, params: ModelParams) -> np.ndarray:
    P = params.P_vec
    K = total_momentum(grid, basis)
    if grid.azimuthal_average:
        if P[0] != 0.0 or P[1] != 0.0:
            raise ValueError("spherical_m0 grids require P along +z")
        # ring modes: cross terms k_i,perp . k_j,perp average to zero
        kperp2 = np.append(grid.k[:, 0] ** 2 + grid.k[:, 1] ** 2, 0.0)
        kin = 0.5 * ((P[2] - K[:, 2]) ** 2 + kperp2[basis.modes].sum(axis=1))
    else:
        Q = P - K
        kin = 0.5 * np.sum(Q * Q, axis=1)
    om = np.append(omega_radial(grid.kabs, params.c, params.xi), 0.0)
    bare = kin + (om[basis.modes].sum(axis=1) if basis.nmax else 0.0)
    return bare + params.kappa * basis.number


def assemble(grid: Grid, basis: FockBasis, params: ModelParams) -> SparseHamiltonian:
    """Fixed-momentum Hamiltonian on the truncated basis.

    The field term links s and s + 1_j with amplitude g_j sqrt(n_j + 1);
    couplings come from ``params`` so one grid serves scans over g, Lambda,
    kappa and P.  kappa enters as kappa * N on the diagonal.
    """
    if basis.M != grid.M:
        raise ValueError(f"basis has {basis.M} modes but grid has {grid.M}")
    gj = mode_couplings(grid, params)
    vals = gj[basis.link_mode] * basis.link_amp
    keep = vals != 0.0
    meta = {"params": params, "grid": grid.digest, "nmax": basis.nmax, "M": basis.M}
    return SparseHamiltonian(
        basis.dim,
        diagonal(grid, basis, params),
        basis.link_lower[keep],
        basis.link_upper[keep],
        vals[keep],
        meta,
    )


def annihilation_amplitudes(state: np.ndarray, basis: FockBasis, j: int) -> np.ndarray:
    """a_j psi in the same basis."""
    state = np.asarray(state)
    out = np.zeros(basis.dim, dtype=state.dtype)
    sel = basis.link_mode == j
    np.add.at(out, basis.link_lower[sel], basis.link_amp[sel] * state[basis.link_upper[sel]])
    return out


def annihilation_matrix(state: np.ndarray, basis: FockBasis) -> sp.csc_matrix:
    """Columns j hold a_j psi; shape (dim, M)."""
    data = basis.link_amp * np.asarray(state)[basis.link_upper]
    return sp.csc_matrix((data, (basis.link_lower, basis.link_mode)), shape=(basis.dim, basis.M))


def mode_occupations(state: np.ndarray, basis: FockBasis) -> np.ndarray:
    """<psi, n_j psi> = ||a_j psi||^2 for every mode."""
    prob = np.abs(np.asarray(state)) ** 2
    out = np.zeros(basis.M)
    np.add.at(out, basis.link_mode, basis.link_amp**2 * prob[basis.link_upper])
    return out
