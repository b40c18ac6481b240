"""Spectral propagation, eigenbasis dephasing and time-ordered sweeps."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import IntegrationError, ParameterError, SizeLimitError
from .fockspace import FockBasis, is_hermitian
from .hamiltonian import HubbardParams, build_gate, build_total, gate_profile

#: Largest symmetry block diagonalized densely.
DENSE_BLOCK_CAP = 6000


@dataclass(frozen=True, eq=False)
class Block:
    rows: np.ndarray   # basis positions spanned by the block
    cols: np.ndarray   # global eigen-indices of its eigenvectors
    vecs: np.ndarray   # (len(rows), len(cols)) orthonormal columns


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigen-decomposition stored block by block.

    ``eigenvalues`` are globally ascending; block ``b`` holds the eigenvectors
    whose global indices are ``b.cols``, supported on basis rows ``b.rows``.
    """

    eigenvalues: np.ndarray
    blocks: tuple
    digest: str

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def to_eigenbasis(self, v) -> np.ndarray:
        v = np.asarray(v)
        out = np.zeros(v.shape, dtype=np.result_type(v, complex))
        for b in self.blocks:
            out[b.cols] = b.vecs.conj().T @ v[b.rows]
        return out

    def from_eigenbasis(self, c) -> np.ndarray:
        c = np.asarray(c)
        out = np.zeros(c.shape, dtype=complex)
        for b in self.blocks:
            out[b.rows] = b.vecs @ c[b.cols]
        return out

    @property
    def eigenvectors(self) -> np.ndarray:
        V = np.zeros((self.dim, self.dim), dtype=complex)
        for b in self.blocks:
            V[np.ix_(b.rows, b.cols)] = b.vecs
        return V

    def levels(self, rtol: float = 1e-9) -> np.ndarray:
        """Integer label per eigenvalue grouping numerically equal ones."""
        E = self.eigenvalues
        tol = rtol * max(1.0, float(np.ptp(E)) if len(E) else 1.0)
        jumps = np.diff(E) > tol
        return np.concatenate([[0], np.cumsum(jumps)]).astype(np.int64)


def _digest(H) -> str:
    H = sp.csr_matrix(H)
    h = hashlib.sha1()
    for a in (H.indptr, H.indices, np.ascontiguousarray(H.data)):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the first non-negligible component of every column real positive."""
    if vecs.size == 0:
        return vecs
    mag = np.abs(vecs)
    tol = 1e-10 * mag.max(axis=0, keepdims=True)
    first = np.argmax(mag > tol, axis=0)
    lead = vecs[first, np.arange(vecs.shape[1])]
    return vecs * (np.abs(lead) / lead)[None, :]


def spectral_decompose(H, labels=None, block_cap: int = DENSE_BLOCK_CAP) -> Spectrum:
    """Dense eigen-decomposition of a Hermitian operator.

    ``labels`` (one per basis state) declares a block structure, e.g. the
    ``S_z`` of each state when spin is conserved.  The operator must not couple
    different labels; this is checked.
    """
    Hs = sp.csr_matrix(H)
    d = Hs.shape[0]
    scale = max(1.0, float(np.abs(Hs.data).max(initial=0.0)))
    if not is_hermitian(Hs, atol=1e-12 * scale):
        raise ParameterError("spectral_decompose requires a Hermitian operator")
    if labels is None:
        groups = [np.arange(d)]
    else:
        labels = np.asarray(labels)
        if labels.shape != (d,):
            raise ParameterError(f"need one block label per basis state ({d}), got {labels.shape}")
        coo = Hs.tocoo()
        if np.any(labels[coo.row] != labels[coo.col]):
            raise ParameterError("operator couples states with different block labels")
        groups = [np.nonzero(labels == lab)[0] for lab in np.unique(labels)]
    is_real = not np.iscomplexobj(Hs.data) or np.all(Hs.data.imag == 0)
    evals, parts = [], []
    for rows in groups:
        if len(rows) > block_cap:
            raise SizeLimitError(
                f"block of dimension {len(rows)} exceeds the dense cap {block_cap}; "
                "reduce L or n"
            )
        sub = Hs[rows][:, rows].toarray()
        if is_real:
            sub = sub.real
        e, v = np.linalg.eigh(sub)
        evals.append(e)
        parts.append((rows, _fix_phases(v.astype(complex))))
    allE = np.concatenate(evals) if evals else np.zeros(0)
    # stable sort keeps degenerate eigenvectors in block order
    order = np.argsort(allE, kind="stable")
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order))
    blocks, offset = [], 0
    for rows, v in parts:
        cols = rank[offset:offset + v.shape[1]]
        offset += v.shape[1]
        blocks.append(Block(rows, cols, v))
    return Spectrum(allE[order], tuple(blocks), _digest(Hs))


def propagate(spec: Spectrum, state, tau: float) -> np.ndarray:
    """``exp(-i H tau) state`` for a vector or a ``(d, r)`` stack of vectors."""
    c = spec.to_eigenbasis(state)
    ph = np.exp(-1j * spec.eigenvalues * tau)
    c = c * (ph[:, None] if c.ndim == 2 else ph)
    return spec.from_eigenbasis(c)


def dephasing_kernel(spec: Spectrum, tau: float, gamma: float, levels: bool = False) -> np.ndarray:
    """Elementwise eigenbasis factor turning ``ρ̃(0)`` into ``ρ̃(τ)``."""
    if gamma < 0:
        raise ParameterError(f"gamma must be non-negative, got {gamma}")
    E = spec.eigenvalues
    K = np.exp(-1j * np.subtract.outer(E, E) * tau)
    if gamma:
        if levels:
            lab = spec.levels()
            coherent = lab[:, None] == lab[None, :]
        else:
            coherent = np.eye(len(E), dtype=bool)
        K = K * np.where(coherent, 1.0, np.exp(-gamma * tau))
    return K


def dephase_propagate(spec: Spectrum, rho, tau: float, gamma: float, levels: bool = False):
    """Exact solution of the projector-dephasing master equation.

    Jump operators are the eigenprojectors ``|E_i><E_i|`` of ``spec``; with
    ``levels=True`` they are the projectors onto whole eigenspaces instead.
    ``rho`` may be an array or a :class:`~hubbard_qst.states.DensityMatrix`.
    """
    from .states import DensityMatrix

    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    V = spec.eigenvectors
    r = V.conj().T @ mat @ V
    r = r * dephasing_kernel(spec, tau, gamma, levels)
    out = V @ r @ V.conj().T
    out = 0.5 * (out + out.conj().T)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(rho.basis, out)
    return out


# ---------------------------------------------------------------------------
# time-ordered sweeps

@dataclass(frozen=True)
class SweepSchedule:
    """Piecewise-linear bias sweep between the open and closed landscapes.

    The first half ramps the starting generator to zero, the second half
    ramps the other one up.  ``steps=None`` starts from the default step count
    and doubles until converged.
    """

    direction: str
    tau_sw: float
    eps_open: float
    eps_closed: float
    eps_sd: float = 0.0
    steps: int | None = None
    mirrored: bool = True

    def __post_init__(self):
        if self.direction not in ("open->closed", "closed->open"):
            raise ParameterError(f"unknown sweep direction {self.direction!r}")
        if self.tau_sw < 0:
            raise ParameterError("tau_sw must be non-negative")

    def gate_eps(self, L: int, tau: float) -> np.ndarray:
        p_open = gate_profile("open", L, self.mirrored) * self.eps_open
        p_closed = gate_profile("closed", L, self.mirrored) * self.eps_closed
        start, end = (p_open, p_closed) if self.direction == "open->closed" else (p_closed, p_open)
        if self.tau_sw == 0:
            return end
        x = tau / self.tau_sw
        return (1 - 2 * x) * start if x <= 0.5 else (2 * x - 1) * end


DEFAULT_SWEEP_STEPS = 200
MAX_REFINEMENTS = 4
#: default step size bound, ``h * max ||H(τ)|| <= STEP_NORM``
STEP_NORM = 0.1


@dataclass(frozen=True, eq=False)
class _SweepBlock:
    rows: np.ndarray
    H0: np.ndarray       # dense block of the static part
    n_gate: np.ndarray   # (len(rows), L) gate occupations


def _sweep_blocks(params: HubbardParams, basis: FockBasis):
    L = basis.order.L
    eps = np.r_[params.eps[0], np.zeros(L), params.eps[-1]]
    if basis.order.leads:
        H0 = build_total(params.with_eps(eps), basis)
        n_gate = basis.site_occupations[:, 1:-1]
    else:
        H0 = build_gate(params.with_eps(eps), basis)
        n_gate = basis.site_occupations
    H0 = sp.csr_matrix(H0)
    if params.zeta == 0:
        groups = [np.nonzero(basis.sz_values == v)[0] for v in np.unique(basis.sz_values)]
    else:
        groups = [np.arange(basis.dim)]
    real = params.zeta == 0
    blocks = []
    for rows in groups:
        Hb = H0[rows][:, rows].toarray()
        blocks.append(_SweepBlock(rows, Hb.real if real else Hb, n_gate[rows]))
    return blocks


def _max_norm(schedule: SweepSchedule, blocks, L: int) -> float:
    # H(τ) is affine in the ramp factor on each half, so its norm peaks at a breakpoint
    probes = [schedule.gate_eps(L, x * schedule.tau_sw) for x in (0.0, 0.5, 1.0)]
    norm = 0.0
    for eps in probes:
        for b in blocks:
            e = np.linalg.eigvalsh(b.H0 - np.diag(b.n_gate @ eps))
            norm = max(norm, float(np.abs(e).max(initial=0.0)))
    return norm


def default_sweep_steps(schedule: SweepSchedule, params: HubbardParams, basis: FockBasis) -> int:
    blocks = _sweep_blocks(params, basis)
    norm = _max_norm(schedule, blocks, basis.order.L)
    return max(DEFAULT_SWEEP_STEPS, int(np.ceil(schedule.tau_sw * norm / STEP_NORM)))


def _midpoint_steps(schedule: SweepSchedule, blocks, L: int, state, steps: int, snapshots=None):
    h = schedule.tau_sw / steps
    out = np.array(state, dtype=complex)
    flat = out.ndim == 1
    if flat:
        out = out[:, None]
    snaps = []
    for k in range(steps):
        if snapshots is not None and k in snapshots:
            snaps.append(out.copy())
        eps = schedule.gate_eps(L, (k + 0.5) * h)
        for b in blocks:
            e, v = np.linalg.eigh(b.H0 - np.diag(b.n_gate @ eps))
            ph = np.exp(-1j * h * e)[:, None]
            out[b.rows] = v @ (ph * (v.conj().T @ out[b.rows]))
    if snapshots is not None and steps in snapshots:
        snaps.append(out.copy())
    if flat:
        out = out[:, 0]
        snaps = [x[:, 0] for x in snaps]
    return (out, snaps) if snapshots is not None else out


def sweep_propagate(schedule: SweepSchedule, params: HubbardParams, basis: FockBasis,
                    state, tol: float = 1e-6, return_steps: bool = False):
    """Propagate ``state`` through ``schedule`` with midpoint exponentials.

    ``params`` supplies every coupling except the gate potentials, which
    follow the schedule.  Without an explicit step count the run starts at
    ``max(200, τ_sw max||H|| / 0.1)`` steps and compares against the doubled
    count; up to ``MAX_REFINEMENTS`` further doublings are tried until two
    successive results differ by less than ``tol`` in max-norm.
    """
    state = np.asarray(state)
    if schedule.tau_sw == 0:
        return (state.astype(complex), 0) if return_steps else state.astype(complex)
    blocks = _sweep_blocks(params, basis)
    L = basis.order.L
    if schedule.steps is not None:
        out = _midpoint_steps(schedule, blocks, L, state, schedule.steps)
        return (out, schedule.steps) if return_steps else out
    steps = max(DEFAULT_SWEEP_STEPS,
                int(np.ceil(schedule.tau_sw * _max_norm(schedule, blocks, L) / STEP_NORM)))
    prev = _midpoint_steps(schedule, blocks, L, state, steps)
    residual = np.inf
    for _ in range(MAX_REFINEMENTS + 1):
        steps *= 2
        cur = _midpoint_steps(schedule, blocks, L, state, steps)
        residual = float(np.max(np.abs(cur - prev)))
        if residual < tol:
            return (cur, steps) if return_steps else cur
        prev = cur
    raise IntegrationError(
        f"sweep did not converge to {tol:g} after {MAX_REFINEMENTS} refinements "
        f"({steps} steps); residual {residual:.3g}",
        residual=residual,
    )


def sweep_trajectory(schedule: SweepSchedule, params: HubbardParams, basis: FockBasis,
                     state, steps: int = DEFAULT_SWEEP_STEPS, n_snapshots: int = 51):
    """Snapshots of the state at evenly spaced times through a sweep.

    Uses a fixed step count; returns ``(times, states)`` with ``states`` of
    shape ``(n_snapshots, *state.shape)``.
    """
    if steps < 1 or n_snapshots < 2:
        raise ParameterError("need steps >= 1 and n_snapshots >= 2")
    marks = sorted(set(np.round(np.linspace(0, steps, n_snapshots)).astype(int).tolist()))
    blocks = _sweep_blocks(params, basis)
    _, snaps = _midpoint_steps(schedule, blocks, basis.order.L, state, steps, set(marks))
    h = schedule.tau_sw / steps
    return np.array(marks) * h, np.array(snaps)
