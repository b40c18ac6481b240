"""Observables: Uhlmann fidelity, Bloch-sphere averages, occupancies, negativity."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ParameterError
from .evolve import Spectrum
from .fockspace import FockBasis, site_tensor_map
from .states import DensityMatrix, EnsembleState, QubitState, SpinorFamily


class FidelityConvention(str, Enum):
    """``root``: Tr√(√ρ σ √ρ); ``squared``: its square."""

    ROOT = "root"
    SQUARED = "squared"

    def apply(self, root_value):
        return root_value if self is FidelityConvention.ROOT else root_value ** 2


#: Chosen by reproducing the L=3, n=1 open-mode peak (see README).
DEFAULT_CONVENTION = FidelityConvention.SQUARED


def resolve_convention(conv) -> FidelityConvention:
    return FidelityConvention(conv if conv is not None else DEFAULT_CONVENTION)


def _same_basis(a: FockBasis, b: FockBasis):
    if a is b:
        return
    if (a.order != b.order or a.n_total != b.n_total or a.dim != b.dim
            or not np.array_equal(a.states, b.states)):
        raise ParameterError("states live in different bases")


def _psd_factor(m: np.ndarray, rtol: float = 1e-14) -> np.ndarray:
    """``X`` with ``m ≈ X X†``, dropping eigenvalues below ``rtol`` of the largest."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    keep = w > rtol * max(w[-1], 0.0)
    return v[:, keep] * np.sqrt(w[keep])[None, :]


def root_fidelity_lowrank(X: np.ndarray, Y: np.ndarray) -> float:
    """``Tr√(√ρ σ √ρ)`` for ``ρ = X X†`` and ``σ = Y Y†``.

    Equals the nuclear norm of the ``r x s`` core ``X† Y``.
    """
    return float(np.linalg.svd(X.conj().T @ Y, compute_uv=False).sum())


def fidelity(rho, sigma, conv=None) -> float:
    """Uhlmann fidelity of two ensembles and/or density matrices."""
    conv = resolve_convention(conv)
    _same_basis(rho.basis, sigma.basis)
    # Tr√(√ρ σ √ρ) = ||X† Y||_* for ρ = X X†, σ = Y Y†; dense inputs are factored
    # first, which avoids square roots of rounding noise in null directions
    factors = []
    for state in (rho, sigma):
        if isinstance(state, EnsembleState):
            factors.append(state.factor)
        elif isinstance(state, DensityMatrix):
            state.check()
            factors.append(_psd_factor(state.matrix))
        else:
            raise ParameterError("fidelity expects EnsembleState or DensityMatrix inputs")
    root = root_fidelity_lowrank(*factors)
    return float(conv.apply(min(max(root, 0.0), 1.0)))


# ---------------------------------------------------------------------------
# Bloch-sphere averaging

@dataclass(frozen=True)
class QuadratureSpec:
    """``single``: the input |↑> alone; ``grid``: Gauss in cos θ times uniform φ."""

    scheme: str = "single"
    n_theta: int = 12
    n_phi: int = 12

    def __post_init__(self):
        if self.scheme not in ("single", "grid"):
            raise ParameterError(f"unknown quadrature scheme {self.scheme!r}")
        if self.n_theta < 1 or self.n_phi < 1:
            raise ParameterError("quadrature node counts must be positive")

    def nodes(self):
        if self.scheme == "single":
            return [QubitState(1.0, 0.0)], np.ones(1)
        x, wx = np.polynomial.legendre.leggauss(self.n_theta)
        phis = 2 * np.pi * np.arange(self.n_phi) / self.n_phi
        psis, weights = [], []
        for xi, wi in zip(x, wx):
            theta = np.arccos(xi)
            for phi in phis:
                psis.append(QubitState.bloch(theta, phi))
                weights.append(wi / 2 / self.n_phi)
        return psis, np.array(weights)

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(self.scheme, 2 * self.n_theta, 2 * self.n_phi)


GRID_12 = QuadratureSpec("grid", 12, 12)


def _eig_parts(spec: Spectrum, fam: SpinorFamily):
    sw = np.sqrt(fam.weights)[None, :]
    return spec.to_eigenbasis(fam.up * sw), spec.to_eigenbasis(fam.down * sw)


def _dephased_support(spec: Spectrum, cX: np.ndarray, Z: np.ndarray, levels: bool) -> np.ndarray:
    """``Y† D(X X†) Y`` with ``D`` the full-dephasing projection, in eigen coordinates."""
    if not levels:
        a = np.sum(np.abs(cX) ** 2, axis=1)
        return (Z.conj().T * a[None, :]) @ Z
    lab = spec.levels()
    out = np.zeros((Z.shape[1], Z.shape[1]), dtype=complex)
    for level in np.unique(lab):
        idx = lab == level
        m = Z[idx].conj().T @ cX[idx]
        out += m @ m.conj().T
    return out


def fidelity_curves(spec: Spectrum, initial: SpinorFamily, target: SpinorFamily, taus,
                    quad: QuadratureSpec | None = None, conv=None, gamma: float = 0.0,
                    levels: bool = False, chunk: int = 256) -> np.ndarray:
    """Root or squared fidelity per quadrature node and time, shape ``(Q, T)``.

    The state evolves under ``spec`` (optionally with eigenbasis dephasing at
    rate ``gamma``) and is compared with the fixed ``target``.
    """
    conv = resolve_convention(conv)
    quad = quad or QuadratureSpec()
    if gamma < 0:
        raise ParameterError(f"gamma must be non-negative, got {gamma}")
    taus = np.atleast_1d(np.asarray(taus, dtype=np.float64))
    psis, _ = quad.nodes()
    xu, xd = _eig_parts(spec, initial)
    zu, zd = _eig_parts(spec, target)
    E = spec.eigenvalues
    out = np.empty((len(psis), len(taus)))
    for q, psi in enumerate(psis):
        a, b = psi.amp_up, psi.amp_down
        cX = a * xu + b * xd
        Z = a * zu + b * zd
        G = np.einsum("dr,ds->drs", cX.conj(), Z).reshape(len(E), -1)
        D = _dephased_support(spec, cX, Z, levels) if gamma else None
        for lo in range(0, len(taus), chunk):
            t = taus[lo:lo + chunk]
            core = (np.exp(1j * np.outer(t, E)) @ G).reshape(len(t), cX.shape[1], Z.shape[1])
            if not gamma:
                root = np.linalg.svd(core, compute_uv=False).sum(-1)
            else:
                decay = np.exp(-gamma * t)[:, None, None]
                M = decay * (core.conj().transpose(0, 2, 1) @ core) + (1 - decay) * D[None]
                M = 0.5 * (M + M.conj().transpose(0, 2, 1))
                root = np.sqrt(np.clip(np.linalg.eigvalsh(M), 0, None)).sum(-1)
            out[q, lo:lo + chunk] = conv.apply(np.clip(root, 0.0, 1.0))
    return out


def average_fidelity(spec: Spectrum, initial: SpinorFamily, target: SpinorFamily, taus,
                     quad: QuadratureSpec | None = None, conv=None, gamma: float = 0.0,
                     levels: bool = False) -> np.ndarray:
    """Bloch-sphere average of the transfer fidelity at each time in ``taus``."""
    quad = quad or QuadratureSpec()
    _, w = quad.nodes()
    curves = fidelity_curves(spec, initial, target, taus, quad, conv, gamma, levels)
    return w @ curves


# ---------------------------------------------------------------------------
# charge occupancy

def _site_column(basis: FockBasis, site) -> np.ndarray:
    return basis.site_occupations[:, basis.order.site_index(site)]


def charge_occupancy(rho, site) -> float:
    """``Tr(n_k ρ)`` for an ensemble or density matrix."""
    nk = _site_column(rho.basis, site)
    if isinstance(rho, EnsembleState):
        return float(np.sum(rho.weights * (nk @ np.abs(rho.vectors) ** 2)))
    return float(np.real(np.diag(rho.matrix)) @ nk)


def occupancy_series(spec: Spectrum, state: EnsembleState, taus, chunk: int = 64) -> np.ndarray:
    """``n̄_k(τ)`` for every site, shape ``(T, n_sites)``."""
    taus = np.atleast_1d(np.asarray(taus, dtype=np.float64))
    occ = state.basis.site_occupations
    c = spec.to_eigenbasis(state.vectors)
    E = spec.eigenvalues
    out = np.empty((len(taus), occ.shape[1]))
    for lo in range(0, len(taus), chunk):
        t = taus[lo:lo + chunk]
        ph = np.exp(-1j * np.outer(E, t))                       # (d, T)
        ct = c[:, None, :] * ph[:, :, None]                     # (d, T, r)
        v = spec.from_eigenbasis(ct.reshape(len(E), -1)).reshape(len(E), len(t), -1)
        prob = (np.abs(v) ** 2) @ state.weights                 # (d, T)
        out[lo:lo + chunk] = prob.T @ occ
    return out


def evolved_states(spec: Spectrum, state: EnsembleState, taus):
    """Yield the ensemble at every time in ``taus``."""
    c = spec.to_eigenbasis(state.vectors)
    for t in np.atleast_1d(taus):
        v = spec.from_eigenbasis(c * np.exp(-1j * spec.eigenvalues * t)[:, None])
        v /= np.linalg.norm(v, axis=0, keepdims=True)
        yield EnsembleState(state.basis, state.weights, v)


# ---------------------------------------------------------------------------
# logarithmic negativity

def _sector_matrix(rho) -> np.ndarray:
    if isinstance(rho, EnsembleState):
        X = rho.factor
        return X @ X.conj().T
    return np.asarray(rho.matrix)


def _group_code(digits: np.ndarray, sites) -> np.ndarray:
    if not len(sites):
        return np.zeros(len(digits), dtype=np.int64)
    return digits[:, list(sites)] @ (4 ** np.arange(len(sites) - 1, -1, -1))


def log_negativity(rho, subsystem=None, drop: float = 1e-14) -> float:
    """``log2 ||ρ^{T_A}||_1`` with ``A`` the gate sites by default.

    The partial transpose is the conventional one on the site-tensor
    embedding (local states ``0, ↑, ↓, ↑↓``).
    """
    basis = rho.basis
    stm = site_tensor_map(basis)
    ns = stm.n_sites
    order = basis.order
    if subsystem is None:
        subsystem = list(order.gate_sites())
    else:
        subsystem = [order.site_index(s) for s in subsystem]
    rest = [k for k in range(ns) if k not in subsystem]
    digits = (stm.flat_index[:, None] // 4 ** np.arange(ns - 1, -1, -1)[None, :]) % 4
    g, r = _group_code(digits, subsystem), _group_code(digits, rest)
    R = 4 ** len(rest)
    m = stm.signs[:, None] * _sector_matrix(rho) * stm.signs[None, :]
    scale = np.abs(m).max(initial=0.0)
    i, j = np.nonzero(np.abs(m) > drop * scale)
    vals = m[i, j]
    # <a_g a_r| ρ^{T_g} |b_g b_r> = <b_g a_r| ρ |a_g b_r>
    row_key = g[j] * R + r[i]
    col_key = g[i] * R + r[j]
    keys, inv = np.unique(np.concatenate([row_key, col_key]), return_inverse=True)
    ri, ci = inv[:len(vals)], inv[len(vals):]
    n = len(keys)
    pt = sp.coo_matrix((vals, (ri, ci)), shape=(n, n)).tocsr()
    pattern = sp.coo_matrix((np.ones(len(vals)), (ri, ci)), shape=(n, n))
    ncomp, comp = connected_components(pattern, directed=False)
    norm = 0.0
    for c in range(ncomp):
        idx = np.nonzero(comp == c)[0]
        block = pt[idx][:, idx].toarray()
        norm += np.abs(np.linalg.eigvalsh(0.5 * (block + block.conj().T))).sum()
    return float(max(np.log2(norm), 0.0)) if norm > 0 else 0.0


def reduced_site_density(rho, site) -> np.ndarray:
    """4x4 reduced density matrix of one site in the local basis ``0, ↑, ↓, ↑↓``."""
    basis = rho.basis
    stm = site_tensor_map(basis)
    k = basis.order.site_index(site)
    m = stm.signs[:, None] * _sector_matrix(rho) * stm.signs[None, :]
    full = np.zeros((4 ** stm.n_sites,) * 2, dtype=complex)
    full[np.ix_(stm.flat_index, stm.flat_index)] = m
    t = full.reshape(stm.shape * 2)
    ns = stm.n_sites
    # trace out every other site
    t = np.moveaxis(t, [k, ns + k], [0, 1])
    t = t.reshape(4, 4, 4 ** (ns - 1), 4 ** (ns - 1))
    return np.einsum("abii->ab", t)
