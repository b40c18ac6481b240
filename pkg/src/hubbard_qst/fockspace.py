"""Occupation-number bases and second-quantized operator matrices.

Modes are ordered spin-major: all spin-up modes over the sites
``(s, 1, ..., L, d)`` come first, then all spin-down modes in the same site
order.  A basis state is an integer whose bit ``m`` is the occupation of mode
``m``; the associated Fock vector is ``c†_{m_1} c†_{m_2} ... |0>`` with
``m_1 < m_2 < ...``.  Every fermionic sign below is relative to that ordering.

A gate-only chain (no source or drain) uses the same convention over the
sites ``(1, ..., L)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, SizeLimitError

UP, DOWN = 0, 1

#: Largest number of sites for which the 4**n site tensor is materialized.
MAX_TENSOR_SITES = 5


@dataclass(frozen=True)
class ModeOrder:
    """Site labels and the spin-major mode numbering of a chain.

    With ``leads=True`` the chain is ``s, 1, ..., L, d``; otherwise it is the
    bare gate ``1, ..., L``.
    """

    L: int
    leads: bool = True

    def __post_init__(self):
        if self.L < 1:
            raise ParameterError(f"gate length L must be >= 1, got {self.L}")

    @property
    def labels(self) -> tuple:
        inner = tuple(range(1, self.L + 1))
        return ("s", *inner, "d") if self.leads else inner

    @property
    def n_sites(self) -> int:
        return self.L + 2 if self.leads else self.L

    @property
    def n_modes(self) -> int:
        return 2 * self.n_sites

    def site_index(self, site) -> int:
        try:
            return self.labels.index(site)
        except ValueError:
            raise ParameterError(
                f"unknown site label {site!r}; valid labels are {self.labels}"
            ) from None

    def mode_index(self, site, spin: int) -> int:
        if spin not in (UP, DOWN):
            raise ParameterError(f"spin must be 0 (up) or 1 (down), got {spin!r}")
        return spin * self.n_sites + self.site_index(site)

    def gate_sites(self) -> np.ndarray:
        """Positional indices of the gate sites ``1..L``."""
        start = 1 if self.leads else 0
        return np.arange(start, start + self.L)


def popcount(words) -> np.ndarray:
    return np.bitwise_count(np.asarray(words, dtype=np.int64)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Sorted occupation words of one particle-number sector.

    ``n_total=None`` denotes the full Fock space (all ``2**M`` words).
    """

    order: ModeOrder
    n_total: int | None
    sz: float | None
    states: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.states)

    def __len__(self):
        return self.dim

    def lookup(self, words) -> np.ndarray:
        """Positions of ``words`` in the basis, ``-1`` where absent."""
        words = np.asarray(words, dtype=np.int64)
        pos = np.searchsorted(self.states, words)
        pos = np.minimum(pos, self.dim - 1)
        found = self.states[pos] == words
        return np.where(found, pos, -1)

    @cached_property
    def index(self) -> dict:
        return {int(w): i for i, w in enumerate(self.states)}

    @cached_property
    def occupations(self) -> np.ndarray:
        """``(dim, M)`` array of mode occupations."""
        m = np.arange(self.order.n_modes, dtype=np.int64)
        return ((self.states[:, None] >> m[None, :]) & 1).astype(np.int8)

    @cached_property
    def site_occupations(self) -> np.ndarray:
        """``(dim, n_sites)`` array of ``n_k = n_k↑ + n_k↓``."""
        ns = self.order.n_sites
        occ = self.occupations
        return (occ[:, :ns] + occ[:, ns:]).astype(np.float64)

    @cached_property
    def sz_values(self) -> np.ndarray:
        ns = self.order.n_sites
        occ = self.occupations
        return 0.5 * (occ[:, :ns].sum(1) - occ[:, ns:].sum(1))


def build_basis(L: int, n_total: int | None, sz: float | None = None,
                leads: bool = True) -> FockBasis:
    """Enumerate the ``n_total``-electron sector, optionally at fixed ``S_z``."""
    order = ModeOrder(L, leads)
    M = order.n_modes
    ns = order.n_sites
    if n_total is None:
        if sz is not None:
            raise ParameterError("sz requires a fixed n_total")
        if M > 24:
            raise SizeLimitError(f"full Fock space of {M} modes is too large")
        return FockBasis(order, None, None, np.arange(2 ** M, dtype=np.int64))
    if not 0 <= n_total <= M:
        raise ParameterError(f"n_total must lie in [0, {M}] for L={L}, got {n_total}")
    if sz is None:
        words = [sum(1 << m for m in c) for c in itertools.combinations(range(M), n_total)]
    else:
        two_sz = 2 * sz
        if abs(two_sz - round(two_sz)) > 1e-12:
            raise ParameterError(f"sz must be a half-integer, got {sz}")
        two_sz = int(round(two_sz))
        if abs(two_sz) > n_total or (n_total - two_sz) % 2:
            raise ParameterError(
                f"sz={sz} incompatible with n_total={n_total} (need |2 sz| <= n_total, same parity)"
            )
        n_up = (n_total + two_sz) // 2
        n_dn = n_total - n_up
        if n_up > ns or n_dn > ns:
            raise ParameterError(f"sz={sz} needs more than {ns} electrons of one spin")
        ups = [sum(1 << m for m in c) for c in itertools.combinations(range(ns), n_up)]
        dns = [sum(1 << (ns + m) for m in c) for c in itertools.combinations(range(ns), n_dn)]
        words = [u | d for u in ups for d in dns]
    states = np.array(sorted(words), dtype=np.int64)
    return FockBasis(order, n_total, sz, states)


def _between_mask(i: int, j: int) -> int:
    lo, hi = min(i, j), max(i, j)
    return ((1 << hi) - 1) ^ ((1 << (lo + 1)) - 1)


def _check_mode(basis: FockBasis, m: int):
    if not 0 <= m < basis.order.n_modes:
        raise ParameterError(f"mode {m} out of range [0, {basis.order.n_modes})")


def hop_entries(basis: FockBasis, i: int, j: int):
    """Rows, columns and signs of ``c†_i c_j`` on ``basis``."""
    _check_mode(basis, i)
    _check_mode(basis, j)
    if i == j:
        raise ParameterError("hop_matrix needs i != j; use number_matrix for c†_i c_i")
    s = basis.states
    sel = (((s >> j) & 1) == 1) & (((s >> i) & 1) == 0)
    cols = np.nonzero(sel)[0]
    src = s[cols]
    new = src ^ (1 << j) ^ (1 << i)
    rows = basis.lookup(new)
    if np.any(rows < 0):
        raise ParameterError(
            f"c†_{i} c_{j} leaves the basis sector (fixed sz={basis.sz}); "
            "use an N-only sector for spin-flipping terms"
        )
    signs = 1 - 2 * (popcount(src & _between_mask(i, j)) & 1)
    return rows, cols, signs.astype(np.float64)


def hop_matrix(basis: FockBasis, i: int, j: int) -> sp.csr_matrix:
    """Matrix of ``c†_i c_j`` including the Jordan-Wigner sign."""
    rows, cols, signs = hop_entries(basis, i, j)
    return sp.csr_matrix((signs, (rows, cols)), shape=(basis.dim, basis.dim))


def number_diagonal(basis: FockBasis, site, spin: int | None = None) -> np.ndarray:
    order = basis.order
    k = order.site_index(site)
    occ = basis.occupations
    if spin is None:
        return (occ[:, k] + occ[:, order.n_sites + k]).astype(np.float64)
    return occ[:, order.mode_index(site, spin)].astype(np.float64)


def number_matrix(basis: FockBasis, site, spin: int | None = None) -> sp.csr_matrix:
    """Diagonal matrix of ``n_k`` (``spin=None``) or ``n_kσ``."""
    return sp.diags(number_diagonal(basis, site, spin), format="csr")


def ladder_matrix(basis: FockBasis, mode: int, dagger: bool,
                  target: FockBasis | None = None) -> sp.csr_matrix:
    """Matrix of ``c_mode`` (or ``c†_mode``) from ``basis`` into ``target``.

    ``target`` defaults to ``basis``, which only makes sense for the full
    Fock space.
    """
    _check_mode(basis, mode)
    target = basis if target is None else target
    s = basis.states
    bit = (s >> mode) & 1
    sel = bit == (0 if dagger else 1)
    cols = np.nonzero(sel)[0]
    src = s[cols]
    rows = target.lookup(src ^ (1 << mode))
    keep = rows >= 0
    below = (1 << mode) - 1
    signs = 1 - 2 * (popcount(src[keep] & below) & 1)
    return sp.csr_matrix((signs.astype(np.float64), (rows[keep], cols[keep])),
                         shape=(target.dim, basis.dim))


def create(words, mode: int):
    """Apply ``c†_mode`` to occupation words; returns ``(signs, new_words)``.

    ``signs`` is 0 where the mode is already occupied.
    """
    words = np.asarray(words, dtype=np.int64)
    occupied = ((words >> mode) & 1) == 1
    signs = 1 - 2 * (popcount(words & ((1 << mode) - 1)) & 1)
    signs = np.where(occupied, 0, signs)
    return signs, words | (1 << mode)


def is_hermitian(op, atol: float = 1e-12) -> bool:
    diff = op - op.conj().T
    if sp.issparse(diff):
        return diff.nnz == 0 or np.max(np.abs(diff.data)) <= atol
    return bool(np.max(np.abs(diff), initial=0.0) <= atol)


# ---------------------------------------------------------------------------
# site-tensor embedding (conventional, site-major tensor product)

def _site_major_signs(basis: FockBasis) -> np.ndarray:
    """Sign from reordering each state's creation string to site-major order.

    Site-major order is ``s↑ s↓ 1↑ 1↓ ...``; moving a down electron at site
    ``b`` past every up electron at a site ``a > b`` costs one transposition.
    """
    ns = basis.order.n_sites
    occ = basis.occupations.astype(np.int64)
    ups, dns = occ[:, :ns], occ[:, ns:]
    ups_above = np.cumsum(ups[:, ::-1], axis=1)[:, ::-1]
    ups_strictly_above = ups_above - ups
    crossings = (dns * ups_strictly_above).sum(1)
    return 1 - 2 * (crossings & 1)


@dataclass(frozen=True, eq=False)
class SiteTensorMap:
    """Placement of sector basis states inside the ``4**n_sites`` product space."""

    flat_index: np.ndarray
    signs: np.ndarray
    n_sites: int

    @property
    def shape(self):
        return (4,) * self.n_sites


def site_tensor_map(basis: FockBasis) -> SiteTensorMap:
    ns = basis.order.n_sites
    if ns > MAX_TENSOR_SITES:
        raise SizeLimitError(
            f"site-tensor embedding needs 4**{ns} entries; at most "
            f"{MAX_TENSOR_SITES} sites are supported (disable the negativity observable)"
        )
    occ = basis.occupations.astype(np.int64)
    local = occ[:, :ns] + 2 * occ[:, ns:]
    weights = 4 ** np.arange(ns - 1, -1, -1, dtype=np.int64)
    return SiteTensorMap(local @ weights, _site_major_signs(basis), ns)


def embed_site_tensor(basis: FockBasis, vector) -> np.ndarray:
    """Sector vector -> tensor with one local index ``(0, ↑, ↓, ↑↓)`` per site."""
    stm = site_tensor_map(basis)
    vector = np.asarray(vector)
    out = np.zeros(4 ** stm.n_sites, dtype=np.result_type(vector, np.float64))
    out[stm.flat_index] = stm.signs * vector
    return out.reshape(stm.shape)


def project_site_tensor(basis: FockBasis, tensor) -> np.ndarray:
    stm = site_tensor_map(basis)
    flat = np.asarray(tensor).reshape(-1)
    return stm.signs * flat[stm.flat_index]


def sector_dimension(L: int, n_total: int) -> int:
    return math.comb(2 * (L + 2), n_total)
