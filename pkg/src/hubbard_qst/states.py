"""Initial and target states of the transistor as low-rank ensembles.

Product states ``source ⊗ gate ⊗ drain`` are defined by acting with the
source creation operator, then the gate creation string, then the drain
creation operator on the vacuum::

    (a c†_{s↑} + b c†_{s↓}) G† (c c†_{d↑} + e c†_{d↓}) |0>

so each site group transforms as its own spinor under a global spin
rotation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SizeLimitError
from .evolve import spectral_decompose
from .fockspace import DOWN, UP, FockBasis, create

DENSE_CAP = 4096
MAX_DEGENERACY = 16


@dataclass(frozen=True)
class QubitState:
    amp_up: complex
    amp_down: complex

    def __post_init__(self):
        norm = abs(self.amp_up) ** 2 + abs(self.amp_down) ** 2
        if abs(norm - 1) > 1e-12:
            raise ParameterError(f"qubit amplitudes must be normalized, |α|²+|β|² = {norm}")

    @classmethod
    def bloch(cls, theta: float, phi: float) -> "QubitState":
        return cls(complex(np.cos(theta / 2)), complex(np.exp(1j * phi) * np.sin(theta / 2)))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_up, self.amp_down], dtype=complex)


SPIN_UP = QubitState(1.0, 0.0)


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """``ρ = Σ_r w_r |v_r><v_r|`` with the ``v_r`` as columns of ``vectors``."""

    basis: FockBasis
    weights: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2 or v.shape != (self.basis.dim, len(w)):
            raise ParameterError(
                f"vectors must have shape ({self.basis.dim}, {len(w)}), got {v.shape}"
            )
        if np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
            raise ParameterError("ensemble weights must be positive and sum to 1")
        norms = np.linalg.norm(v, axis=0)
        if np.any(np.abs(norms - 1) > 1e-12):
            raise ParameterError(f"ensemble members must be normalized (norms {norms})")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "vectors", v)

    @property
    def rank(self) -> int:
        return len(self.weights)

    @property
    def factor(self) -> np.ndarray:
        """``X`` with ``ρ = X X†``."""
        return self.vectors * np.sqrt(self.weights)[None, :]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    basis: FockBasis
    matrix: np.ndarray

    def check(self, atol: float = 1e-10):
        m = self.matrix
        if abs(np.trace(m).real - 1) > atol:
            raise ParameterError(f"density matrix trace {np.trace(m).real} != 1")
        if np.max(np.abs(m - m.conj().T)) > atol:
            raise ParameterError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(m).min() < -atol:
            raise ParameterError("density matrix is not positive semidefinite")
        return self


def densify(ens: EnsembleState, cap: int = DENSE_CAP) -> DensityMatrix:
    if ens.basis.dim > cap:
        raise SizeLimitError(
            f"dense density matrix of dimension {ens.basis.dim} exceeds cap {cap}; "
            "use the low-rank ensemble paths"
        )
    X = ens.factor
    return DensityMatrix(ens.basis, X @ X.conj().T)


# ---------------------------------------------------------------------------
# gate states

def gate_ground_ensemble(H_gate, gate_basis: FockBasis, deg_tol: float | None = None,
                         max_degeneracy: int = MAX_DEGENERACY) -> EnsembleState:
    """Equal mixture of all (numerically) degenerate gate ground states."""
    spec = _gate_spectrum(H_gate, gate_basis)
    E = spec.eigenvalues
    if deg_tol is None:
        deg_tol = 1e-8 * max(float(np.ptp(E)), 1.0)
    g = int(np.sum(E <= E[0] + deg_tol))
    if g > max_degeneracy:
        raise ParameterError(
            f"ground-state degeneracy {g} exceeds {max_degeneracy}; the potential "
            "landscape probably leaves several charge configurations degenerate"
        )
    vecs = spec.from_eigenbasis(np.eye(len(E))[:, :g])
    return EnsembleState(gate_basis, np.full(g, 1.0 / g), vecs)


def gate_thermal_ensemble(H_gate, gate_basis: FockBasis, kT: float,
                          weight_cutoff: float = 1e-12) -> EnsembleState:
    """Canonical ``exp(-H/kT)/Z`` at fixed gate electron number."""
    if kT < 0:
        raise ParameterError(f"kT must be non-negative, got {kT}")
    if kT == 0:
        return gate_ground_ensemble(H_gate, gate_basis)
    spec = _gate_spectrum(H_gate, gate_basis)
    E = spec.eigenvalues
    w = np.exp(-(E - E[0]) / kT)
    w /= w.sum()
    keep = np.nonzero(w >= weight_cutoff)[0]
    w = w[keep] / w[keep].sum()
    vecs = spec.from_eigenbasis(np.eye(len(E))[:, keep])
    return EnsembleState(gate_basis, w, vecs)


def _gate_spectrum(H_gate, gate_basis):
    import scipy.sparse as sp

    H = sp.csr_matrix(H_gate)
    spin_conserving = not np.iscomplexobj(H.data) or np.all(H.data.imag == 0)
    labels = gate_basis.sz_values if spin_conserving else None
    try:
        return spectral_decompose(H, labels)
    except ParameterError:
        return spectral_decompose(H)


# ---------------------------------------------------------------------------
# product composition

def _gate_to_total_modes(gate_basis: FockBasis, total_basis: FockBasis) -> np.ndarray:
    L = gate_basis.order.L
    ns = total_basis.order.n_sites
    local = np.arange(2 * L)
    return np.where(local < L, local + 1, ns + 1 + (local - L))


def product_vectors(total_basis: FockBasis, source, gate_vectors, gate_basis: FockBasis,
                    drain) -> np.ndarray:
    """Columns ``(source) G_r† (drain) |0>`` for every gate column ``G_r``.

    ``source`` and ``drain`` are 2-component spinors ``(up, down)``.
    """
    if total_basis.order.L != gate_basis.order.L or not total_basis.order.leads:
        raise ParameterError("total basis must be the transistor basis of the same L")
    if gate_basis.n_total is None or total_basis.n_total != gate_basis.n_total + 2:
        raise ParameterError(
            f"total basis holds {total_basis.n_total} electrons; expected gate n + 2"
        )
    gate_vectors = np.asarray(gate_vectors, dtype=complex)
    if gate_vectors.ndim == 1:
        gate_vectors = gate_vectors[:, None]
    ns = total_basis.order.n_sites
    gmodes = _gate_to_total_modes(gate_basis, total_basis)
    gocc = gate_basis.occupations.astype(bool)
    out = np.zeros((total_basis.dim, gate_vectors.shape[1]), dtype=complex)
    for db, damp in zip((UP, DOWN), drain):
        if damp == 0:
            continue
        dmode = db * ns + ns - 1
        words = np.full(gate_basis.dim, 0, dtype=np.int64)
        sign, words = create(words, dmode)
        # gate string c†_{m1} ... c†_{mk}: apply the highest mode first
        for lm in range(2 * gate_basis.order.L - 1, -1, -1):
            has = gocc[:, lm]
            s, w2 = create(words[has], gmodes[lm])
            sign[has] *= s
            words[has] = w2
        for sb, samp in zip((UP, DOWN), source):
            if samp == 0:
                continue
            s, w3 = create(words, sb * ns)
            tot = sign * s
            pos = total_basis.lookup(w3)
            ok = (tot != 0) & (pos >= 0)
            np.add.at(out, pos[ok], (samp * damp * tot[ok])[:, None] * gate_vectors[ok])
    return out


@dataclass(frozen=True, eq=False)
class SpinorFamily:
    """Ensembles depending linearly on one qubit ``ψ = (α, β)``.

    The state for ``ψ`` has members ``α up[:, r] + β down[:, r]`` with weights
    ``weights[r]``.
    """

    basis: FockBasis
    weights: np.ndarray
    up: np.ndarray
    down: np.ndarray

    def at(self, psi: QubitState) -> EnsembleState:
        return EnsembleState(self.basis, self.weights,
                             psi.amp_up * self.up + psi.amp_down * self.down)

    @property
    def parts(self) -> tuple:
        return (self.up, self.down)


_E_UP = (1.0, 0.0)
_E_DN = (0.0, 1.0)


def initial_family(gate_ens: EnsembleState, total_basis: FockBasis) -> SpinorFamily:
    """``|ψ><ψ|_s ⊗ ρ_gate ⊗ I_d/2`` as a family linear in ``ψ``."""
    gb = gate_ens.basis
    w, up, dn = [], [], []
    for drain in (_E_UP, _E_DN):
        up.append(product_vectors(total_basis, _E_UP, gate_ens.vectors, gb, drain))
        dn.append(product_vectors(total_basis, _E_DN, gate_ens.vectors, gb, drain))
        w.append(gate_ens.weights / 2)
    return SpinorFamily(total_basis, np.concatenate(w), np.hstack(up), np.hstack(dn))


def target_family(mode: str, gate_ens: EnsembleState, total_basis: FockBasis) -> SpinorFamily:
    """Ideal output: swapped source/drain for ``open``, unchanged for ``closed``."""
    if mode == "closed":
        return initial_family(gate_ens, total_basis)
    if mode != "open":
        raise ParameterError(f"mode must be 'open' or 'closed', got {mode!r}")
    gb = gate_ens.basis
    w, up, dn = [], [], []
    for source in (_E_UP, _E_DN):
        up.append(product_vectors(total_basis, source, gate_ens.vectors, gb, _E_UP))
        dn.append(product_vectors(total_basis, source, gate_ens.vectors, gb, _E_DN))
        w.append(gate_ens.weights / 2)
    return SpinorFamily(total_basis, np.concatenate(w), np.hstack(up), np.hstack(dn))


def reduced_gate_ensemble(vectors, weights, gate_basis: FockBasis, total_basis: FockBasis,
                          cutoff: float = 1e-12) -> EnsembleState:
    """Gate state left behind when source and drain hold one electron each.

    The ensemble is projected onto that sector (and renormalized) before the
    source and drain are traced out.
    """
    iso = [product_vectors(total_basis, s, np.eye(gate_basis.dim), gate_basis, d).real
           for s in (_E_UP, _E_DN) for d in (_E_UP, _E_DN)]
    vectors = np.asarray(vectors, dtype=complex)
    weights = np.asarray(weights, dtype=np.float64)
    rho = np.zeros((gate_basis.dim, gate_basis.dim), dtype=complex)
    for E in iso:
        c = E.T @ vectors * np.sqrt(weights)[None, :]
        rho += c @ c.conj().T
    tr = np.trace(rho).real
    if tr <= cutoff:
        raise ParameterError("no weight left in the one-electron source/drain sector")
    w, v = np.linalg.eigh(rho / tr)
    keep = w > cutoff
    w = w[keep] / w[keep].sum()
    return EnsembleState(gate_basis, w, v[:, keep])


def swapped_family(m: int, gate_ens: EnsembleState, total_basis: FockBasis) -> SpinorFamily:
    """Target after ``m`` ideal swaps: odd ``m`` has the qubit on the drain."""
    return target_family("open" if m % 2 else "closed", gate_ens, total_basis)


def compose_initial(psi: QubitState, gate_ens: EnsembleState, total_basis: FockBasis) -> EnsembleState:
    return initial_family(gate_ens, total_basis).at(psi)


def compose_target(mode: str, psi: QubitState, gate_ens: EnsembleState,
                   total_basis: FockBasis) -> EnsembleState:
    return target_family(mode, gate_ens, total_basis).at(psi)
