"""One test per acceptance criterion; the terminal summary prints a line for each.

Thresholds are the target values.  Criteria that the model cannot reach stay
red; the numbers they produce are printed in the summary.
"""

import time

import numpy as np
import pytest
from scipy.sparse.linalg import LinearOperator, expm_multiply

from hubbard_qst.cli import to_physical_units
from hubbard_qst.evolve import dephase_propagate, propagate
from hubbard_qst.fockspace import build_basis, ladder_matrix
from hubbard_qst.hamiltonian import HubbardParams, build_gate, build_total
from hubbard_qst.measure import fidelity, occupancy_series
from hubbard_qst.protocols import (CYCLE_PROTOCOLS, TABLE_I, TAU_GRID, build_mode,
                                   calibrate_convention, disorder_average, noise_sweep,
                                   optimize_open, repeated_cycles, run_transistor,
                                   switching_transition, table_row)
from hubbard_qst.states import EnsembleState, QubitState, densify

CFG = table_row(3, 1).config


def _fmt(x, digits=4):
    return f"{x:.{digits}f}"


@pytest.mark.criterion(1, "L=3,n=1 open peak at t*tau=64+-1, value 0.983+-0.005, < 5 s")
def test_criterion_1_anchor_row(record_property):
    start = time.perf_counter()
    rec = run_transistor(CFG, modes="open", occupancy=False)
    wall = time.perf_counter() - start
    cal = calibrate_convention()
    record_property("detail", f"peak {_fmt(rec.peak, 5)} at {rec.tau_opt:g} ({cal.chosen}; "
                              f"root {_fmt(cal.root_peak, 5)}), {wall:.2f} s")
    assert abs(rec.tau_opt - 64) <= 1
    assert abs(rec.peak - 0.983) <= 0.005
    assert wall < 5


@pytest.mark.criterion(2, "n=1 rows L=4..8 within +-0.01 and +-2/t, < 2 min")
def test_criterion_2_single_electron_family(record_property):
    start = time.perf_counter()
    parts, ok = [], True
    for row in (r for r in TABLE_I if r.n == 1 and r.L >= 4):
        rec = run_transistor(row.config, modes="open", occupancy=False)
        good = abs(rec.peak - row.f_open) <= 0.01 and abs(rec.tau_opt - row.tau_opt) <= 2
        ok &= good
        parts.append(f"L{row.L} {_fmt(rec.peak)}@{rec.tau_opt:g} vs {row.f_open}@{row.tau_opt:g}"
                     f"{'' if good else ' x'}")
    wall = time.perf_counter() - start
    record_property("detail", "; ".join(parts) + f"; {wall:.0f} s")
    assert ok and wall < 120


@pytest.mark.slow
@pytest.mark.criterion(2, "slow tier: listed eps_closed feasible (min F_closed >= 0.98) for n>1")
def test_criterion_2_slow_tier_closed_feasibility(record_property):
    parts, ok = [], True
    for row in (r for r in TABLE_I if r.slow):
        low = float(build_mode(row.config, "closed").fidelity(TAU_GRID).min())
        ok &= low >= 0.98
        parts.append(f"L{row.L}n{row.n} {_fmt(low)}")
    record_property("detail", "; ".join(parts))
    assert ok


@pytest.mark.criterion(3, "L=3,n=1 closed mode F >= 0.98 on all of [0,500]")
def test_criterion_3_closed_mode(record_property):
    f = build_mode(CFG, "closed").fidelity(TAU_GRID)
    record_property("detail", f"min {_fmt(f.min(), 5)} at {TAU_GRID[np.argmin(f)]:g}")
    assert f.min() >= 0.98


def _gate_block(eps, t=1.0):
    gb = build_basis(3, 1, leads=False)
    H = build_gate(HubbardParams.uniform(3, np.r_[0.0, eps, 0.0], t=t), gb)
    idx = np.nonzero(gb.sz_values == 0.5)[0]
    return H[idx][:, idx].toarray()


@pytest.mark.criterion(4, "3x3 gate blocks match closed form to 1e-10; ground overlaps > 0.99")
def test_criterion_4_appendix_oracle(record_property):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        e1, e2 = rng.uniform(0, 40, 2)
        root = np.sqrt((e1 - e2) ** 2 + 8)
        closed_form = np.sort([0.5 * (-(e1 + e2) - root), -e1, 0.5 * (-(e1 + e2) + root)])
        worst = max(worst, np.max(np.abs(np.linalg.eigvalsh(_gate_block([e1, e2, e1])) - closed_form)))
    O = np.array([1, 0, 1]) / np.sqrt(2)
    C = np.array([0, 1.0, 0])
    ov_open = abs(O @ np.linalg.eigh(_gate_block([10.0, 0.0, 10.0]))[1][:, 0]) ** 2
    ov_closed = abs(C @ np.linalg.eigh(_gate_block([0.0, 20.0, 0.0]))[1][:, 0]) ** 2
    record_property("detail", f"max eig error {worst:.1e}; |<O|g>|^2 {_fmt(ov_open)}, "
                              f"|<C|g>|^2 {_fmt(ov_closed)}")
    assert worst < 1e-10
    assert ov_open > 0.99 and ov_closed > 0.99


@pytest.mark.criterion(5, "switching: L=3 at 0.18 tau_opt and L=8 at 0.05 tau_opt > 0.98; "
                          "reverse within 0.01")
def test_criterion_5_switching(record_property):
    parts, ok = [], True
    for L, frac in ((3, 0.18), (8, 0.05)):
        cfg = table_row(L, 1).config
        tau_opt = run_transistor(cfg, modes="open", occupancy=False).tau_opt
        fwd = switching_transition(cfg, "open->closed", frac * tau_opt)
        rev = switching_transition(cfg, "closed->open", frac * tau_opt)
        ok &= fwd > 0.98 and abs(fwd - rev) <= 0.01
        parts.append(f"L{L} tau_sw={frac * tau_opt:.2f}: fwd {_fmt(fwd, 5)} rev {_fmt(rev, 5)}")
    record_property("detail", "; ".join(parts))
    assert ok


@pytest.mark.criterion(6, "L=3,n=1 after 10 cycles F > 2/3 (default protocol 'swaps')")
def test_criterion_6_repeated_cycles(record_property):
    runs = {p: repeated_cycles(CFG, 10, protocol=p).fidelity for p in CYCLE_PROTOCOLS}
    swaps = runs["swaps"]
    rise = np.max(np.diff(swaps))
    record_property("detail", "; ".join(f"{p}: " + " ".join(_fmt(x, 3) for x in v)
                                        for p, v in runs.items())
                    + f"; swaps max rise {rise:+.3f}")
    assert swaps[-1] > 2 / 3


@pytest.mark.criterion(7, "robustness: gamma=0.002, alpha=0.01 both >= 0.9; lambda=0.08 PMS "
                          "mean > 0.9 (500 seeds); kT=0.26 open > 0.9")
def test_criterion_7_robustness(record_property):
    tau_opt = 65.0
    g = noise_sweep(CFG, "gamma", [0.002], tau_opt)
    a = noise_sweep(CFG, "alpha", [0.01], tau_opt)
    k = noise_sweep(CFG, "kT", [0.26], tau_opt)
    d = disorder_average(CFG, 0.08, 500, preserve_ms=True, seed=0, tau_opt=tau_opt)
    checks = {
        "gamma": min(g.f_open[0], g.f_closed[0]) >= 0.9,
        "alpha": min(a.f_open[0], a.f_closed[0]) >= 0.9,
        "lambda": d.mean_open > 0.9,
        "kT": k.f_open[0] > 0.9,
    }
    record_property("detail", (
        f"gamma {_fmt(g.f_open[0])}/{_fmt(g.f_closed[0])}; alpha {_fmt(a.f_open[0])}/"
        f"{_fmt(a.f_closed[0])}; PMS {_fmt(d.mean_open)}+-{_fmt(d.stderr_open)} "
        f"(closed {_fmt(d.mean_closed)}); kT {_fmt(k.f_open[0], 5)}; "
        f"failed: {[n for n, v in checks.items() if not v]}"))
    assert all(checks.values())


def _liouvillian_oracle(H, V, gamma, rho, tau):
    d = H.shape[0]
    Hd = H.toarray()

    def dissipate(r):
        c = V.conj().T @ r @ V
        return V @ np.diag(np.diag(c)) @ V.conj().T - r

    def mv(x):
        r = x.reshape(d, d)
        return (-1j * (Hd @ r - r @ Hd) + gamma * dissipate(r)).ravel()

    def rmv(x):
        r = x.reshape(d, d)
        return (1j * (Hd @ r - r @ Hd) + gamma * dissipate(r)).ravel()

    op = LinearOperator((d * d, d * d), matvec=mv, rmatvec=rmv, dtype=complex)
    out = expm_multiply(op, rho.ravel().astype(complex), start=0, stop=tau, num=2,
                        endpoint=True, traceA=gamma * (d - d * d))[-1].reshape(d, d)
    return 0.5 * (out + out.conj().T)


@pytest.mark.criterion(8, "property suites: anticommutation, unitarity, charge, low-rank fidelity, "
                          "dephasing oracle, SU(2), thread invariance")
def test_criterion_8_property_suites(record_property):
    res = {}
    # anticommutation on the full 8-mode space
    full = build_basis(2, None)
    c = [ladder_matrix(full, m, False).toarray() for m in range(full.order.n_modes)]
    eye = np.eye(full.dim)
    err = 0.0
    for i in range(len(c)):
        for j in range(len(c)):
            err = max(err, np.abs(c[i] @ c[j] + c[j] @ c[i]).max(),
                      np.abs(c[i] @ c[j].T + c[j].T @ c[i] - eye * (i == j)).max())
    res["anticomm"] = err
    sysm = build_mode(CFG, "open")
    U = propagate(sysm.spectrum, np.eye(sysm.basis.dim, dtype=complex), 137.0)
    res["unitarity"] = np.abs(U.conj().T @ U - np.eye(sysm.basis.dim)).max()
    occ = occupancy_series(sysm.spectrum, sysm.initial.at(QubitState.bloch(1.1, 0.3)), TAU_GRID)
    res["charge"] = np.abs(occ.sum(1) - 3).max()
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(10):
        ens = []
        for _ in range(2):
            q, _ = np.linalg.qr(rng.normal(size=(120, 4)) + 1j * rng.normal(size=(120, 4)))
            w = rng.uniform(0.1, 1, 4)
            ens.append(EnsembleState(sysm.basis, w / w.sum(), q))
        worst = max(worst, abs(fidelity(*ens) - fidelity(densify(ens[0]), densify(ens[1]))))
    res["lowrank"] = worst
    rho0 = densify(sysm.initial.at(QubitState(1.0, 0.0))).matrix
    H = build_total(sysm.params, sysm.basis)
    ref = _liouvillian_oracle(H, sysm.spectrum.eigenvectors, 0.001, rho0, 64.0)
    got = dephase_propagate(sysm.spectrum, rho0, 64.0, 0.001)
    res["dephasing"] = 0.5 * np.abs(np.linalg.eigvalsh(got - ref)).sum()
    base = sysm.fidelity([65.0])[0]
    su2 = 0.0
    for _ in range(20):
        psi = QubitState.bloch(np.arccos(rng.uniform(-1, 1)), rng.uniform(0, 2 * np.pi))
        rho = EnsembleState(sysm.basis, sysm.initial.weights,
                            propagate(sysm.spectrum, sysm.initial.at(psi).vectors, 65.0))
        su2 = max(su2, abs(fidelity(rho, sysm.target.at(psi)) - base))
    res["su2"] = su2
    small = dict(eps_sd_grid=[38, 39], eps_open_grid=[9, 10], tau_grid=np.arange(0, 80.0))
    a = optimize_open(3, 1, **small, workers=1)
    b = optimize_open(3, 1, **small, workers=2)
    d1 = disorder_average(CFG, 0.05, 4, tau_opt=65.0, workers=1)
    d2 = disorder_average(CFG, 0.05, 4, tau_opt=65.0, workers=2)
    res["threads"] = float(not (np.array_equal(a.grid, b.grid)
                                and np.array_equal(d1.f_open, d2.f_open)))
    limits = {"anticomm": 0, "unitarity": 1e-12, "charge": 1e-10, "lowrank": 1e-10,
              "dephasing": 1e-8, "su2": 1e-10, "threads": 0}
    record_property("detail", ", ".join(f"{k} {v:.1e}" for k, v in res.items()))
    assert all(res[k] <= limits[k] for k in limits)


@pytest.mark.criterion(9, "units: t*tau=71 at t=0.02 meV (h) -> 14.68+-0.01 ns")
def test_criterion_9_units(record_property):
    ns = float(to_physical_units(71, 0.02, "h"))
    record_property("detail", f"{ns:.4f} ns (hbar: {float(to_physical_units(71, 0.02, 'hbar')):.4f})")
    assert abs(ns - 14.68) <= 0.01
