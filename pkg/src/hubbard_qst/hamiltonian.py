"""Extended Fermi-Hubbard transistor Hamiltonian, landscapes and disorder.

All couplings are in units of the uniform hopping ``t`` (``t = 1``).
Bond arrays run over ``(s,1), (1,2), ..., (L-1,L), (L,d)`` and site arrays
over ``(s, 1, ..., L, d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError
from .fockspace import DOWN, UP, FockBasis, hop_entries

DEFAULT_U = 50.0
DEFAULT_V = 1.0


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HubbardParams:
    L: int
    t_bonds: np.ndarray
    U_sites: np.ndarray
    V_bonds: np.ndarray
    eps: np.ndarray
    soc_alpha: float = 0.0
    soc_beta: float = 0.0

    def __post_init__(self):
        for name in ("t_bonds", "U_sites", "V_bonds", "eps"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        nb, ns = self.L + 1, self.L + 2
        for name, want in (("t_bonds", nb), ("V_bonds", nb), ("U_sites", ns), ("eps", ns)):
            got = getattr(self, name).shape
            if got != (want,):
                raise ParameterError(f"{name} must have length {want} for L={self.L}, got {got}")

    @classmethod
    def uniform(cls, L: int, eps, t: float = 1.0, U: float = DEFAULT_U,
                V: float = DEFAULT_V, soc_alpha: float = 0.0, soc_beta: float = 0.0):
        """Uniform ``t``, ``U``, ``V`` with the site potentials ``eps``."""
        return cls(L, np.full(L + 1, t), np.full(L + 2, U), np.full(L + 1, V),
                   eps, soc_alpha, soc_beta)

    @property
    def zeta(self) -> complex:
        return complex(self.soc_alpha, -self.soc_beta)

    @property
    def gate_eps(self) -> np.ndarray:
        return self.eps[1:-1]

    def with_eps(self, eps) -> "HubbardParams":
        return replace(self, eps=eps)


@dataclass(frozen=True)
class PotentialLandscape:
    mode: str
    L: int
    eps_mode: float
    eps_sd: float
    gate_eps: tuple
    mirrored: bool = True

    @property
    def site_eps(self) -> np.ndarray:
        return np.array([self.eps_sd, *self.gate_eps, self.eps_sd])


def gate_profile(mode: str, L: int, mirrored: bool = True) -> np.ndarray:
    """Unit-amplitude gate potential of the open or closed generator.

    open: ``|ceil(L/2) - k|``, closed: ``k - 1``.  With ``mirrored`` the
    generator is evaluated for ``k <= ceil(L/2)`` and reflected onto the right
    half; ``mirrored=False`` applies the formula literally on every site.
    """
    half = math.ceil(L / 2)
    if mode == "open":
        gen = lambda k: abs(half - k)
    elif mode == "closed":
        gen = lambda k: k - 1
    else:
        raise ParameterError(f"mode must be 'open' or 'closed', got {mode!r}")
    if not mirrored:
        return np.array([gen(k) for k in range(1, L + 1)], dtype=np.float64)
    prof = np.zeros(L)
    for k in range(1, half + 1):
        prof[k - 1] = prof[L - k] = gen(k)
    return prof


def landscape(mode: str, L: int, eps_mode: float, eps_sd: float,
              mirrored: bool = True) -> PotentialLandscape:
    if eps_mode < 0 or eps_sd < 0:
        raise ParameterError("eps_mode and eps_sd must be non-negative")
    gate = gate_profile(mode, L, mirrored) * eps_mode
    return PotentialLandscape(mode, L, float(eps_mode), float(eps_sd),
                              tuple(float(x) for x in gate), mirrored)


def transistor_params(land: PotentialLandscape, U: float = DEFAULT_U, V: float = DEFAULT_V,
                      soc_alpha: float = 0.0, soc_beta: float = 0.0) -> HubbardParams:
    return HubbardParams.uniform(land.L, land.site_eps, U=U, V=V,
                                 soc_alpha=soc_alpha, soc_beta=soc_beta)


# ---------------------------------------------------------------------------
# assembly

def _chain_operator(basis: FockBasis, t, U, V, eps, zeta: complex) -> sp.csr_matrix:
    order = basis.order
    ns = order.n_sites
    occ = basis.occupations
    nk = basis.site_occupations
    diag = (occ[:, :ns] * occ[:, ns:]) @ U - nk @ eps
    if ns > 1:
        diag = diag + (nk[:, :-1] * nk[:, 1:]) @ V

    rows, cols, vals = [np.arange(basis.dim)], [np.arange(basis.dim)], [diag.astype(complex)]

    def add(i, j, amp):
        if amp == 0:
            return
        r, c, s = hop_entries(basis, i, j)
        rows.append(r)
        cols.append(c)
        vals.append(amp * s)

    for k in range(ns - 1):
        for spin in (UP, DOWN):
            i, j = spin * ns + k, spin * ns + k + 1
            add(i, j, -t[k])
            add(j, i, -t[k])
        if zeta != 0:
            # -t ζ c†_{k↑} c_{k+1↓} + h.c.
            add(k, ns + k + 1, -t[k] * zeta)
            add(ns + k + 1, k, -t[k] * np.conj(zeta))

    data = np.concatenate(vals)
    if zeta == 0:
        data = data.real
    H = sp.csr_matrix((data, (np.concatenate(rows), np.concatenate(cols))),
                      shape=(basis.dim, basis.dim))
    H.sum_duplicates()
    H.eliminate_zeros()
    return H


def _require_order(params: HubbardParams, basis: FockBasis, leads: bool):
    if basis.order.L != params.L or basis.order.leads != leads:
        what = "transistor (with leads)" if leads else "gate-only"
        raise ParameterError(
            f"basis (L={basis.order.L}, leads={basis.order.leads}) does not match "
            f"{what} parameters with L={params.L}"
        )


def build_total(params: HubbardParams, basis: FockBasis) -> sp.csr_matrix:
    """``H_gate + H_s + H_d + H_I`` plus spin-orbit coupling when ``ζ != 0``."""
    _require_order(params, basis, leads=True)
    return _chain_operator(basis, params.t_bonds, params.U_sites, params.V_bonds,
                           params.eps, params.zeta)


def build_gate(params: HubbardParams, gate_basis: FockBasis) -> sp.csr_matrix:
    """Gate Hamiltonian over sites ``1..L`` (spin-orbit restricted to gate bonds)."""
    _require_order(params, gate_basis, leads=False)
    return _chain_operator(gate_basis, params.t_bonds[1:-1], params.U_sites[1:-1],
                           params.V_bonds[1:-1], params.gate_eps, params.zeta)


def total_spin_z(basis: FockBasis) -> sp.csr_matrix:
    return sp.diags(basis.sz_values, format="csr")


def total_number(basis: FockBasis) -> sp.csr_matrix:
    return sp.diags(basis.site_occupations.sum(1), format="csr")


# ---------------------------------------------------------------------------
# disorder

@dataclass(frozen=True, eq=False)
class DisorderDraw:
    """Multiplicative perturbations ``x -> x (1 + Λ)`` with ``Λ ~ U[-λ, λ]``.

    ``lambda_s`` scales ``ε_s`` and ``ε_d`` jointly.  With ``per_bond=False``
    a single multiplier is shared by every bond (``t``, ``V``) and every site
    (``U``); per-site gate multipliers ``lambda_k`` are mirrored when
    ``preserve_ms`` is set.
    """

    lam: float
    preserve_ms: bool
    seed: object
    lambda_t: np.ndarray
    lambda_U: np.ndarray
    lambda_V: np.ndarray
    lambda_s: float
    lambda_k: np.ndarray
    per_bond: bool = False


def draw_disorder(L: int, lam: float, preserve_ms: bool = True, seed=0,
                  per_bond: bool = False) -> DisorderDraw:
    if lam < 0:
        raise ParameterError(f"lambda must be non-negative, got {lam}")
    rng = np.random.default_rng(seed)
    u = lambda size=None: rng.uniform(-lam, lam, size)
    if per_bond:
        lt, lU, lV = u(L + 1), u(L + 2), u(L + 1)
    else:
        lt, lU, lV = np.full(L + 1, u()), np.full(L + 2, u()), np.full(L + 1, u())
    ls = float(u())
    if preserve_ms:
        half = math.ceil(L / 2)
        left = u(half)
        lk = np.array([left[min(k, L - 1 - k)] for k in range(L)])
    else:
        lk = u(L)
    return DisorderDraw(lam, preserve_ms, seed, _frozen(lt), _frozen(lU), _frozen(lV),
                        ls, _frozen(lk), per_bond)


def apply_disorder(params: HubbardParams, draw: DisorderDraw) -> HubbardParams:
    if draw.lam == 0:
        return params
    if len(draw.lambda_k) != params.L:
        raise ParameterError("disorder draw built for a different L")
    eps = params.eps.copy()
    eps[0] *= 1 + draw.lambda_s
    eps[-1] *= 1 + draw.lambda_s
    eps[1:-1] *= 1 + draw.lambda_k
    return replace(params,
                   t_bonds=params.t_bonds * (1 + draw.lambda_t),
                   U_sites=params.U_sites * (1 + draw.lambda_U),
                   V_bonds=params.V_bonds * (1 + draw.lambda_V),
                   eps=eps)
