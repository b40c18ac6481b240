"""Command-line front end.

Config files are flat ``key = value`` lines grouped under ``[section]``
headers; ``#`` starts a comment.  Every key can also be given as a
``--key value`` flag, and flags win over the file.  Example::

    [run]
    scenario = run
    [system]
    L = 3
    n = 1
    mode = open
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import IntegrationError, ParameterError, SizeLimitError
from .measure import QuadratureSpec
from . import protocols as P

OUTPUT_ENV = "HUBBARD_QST_OUT"
PLANCK_MEV_NS = {"h": 4.135667696e-3, "hbar": 6.582119569e-4}
SCENARIOS = ("run", "optimize", "switch", "cycles", "disorder", "noise", "table1", "experimental")


def to_physical_units(tau, t_meV: float, convention: str = "h"):
    """Dimensionless ``tτ`` to nanoseconds, ``τ = (tτ) h / t``."""
    if t_meV <= 0:
        raise ParameterError(f"t_meV must be positive, got {t_meV}")
    if convention not in PLANCK_MEV_NS:
        raise ParameterError(f"convention must be 'h' or 'hbar', got {convention!r}")
    return np.asarray(tau, dtype=np.float64) * PLANCK_MEV_NS[convention] / t_meV


class ConfigError(ParameterError):
    def __init__(self, message, key=None, line=None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.key = key
        self.line = line


# ---------------------------------------------------------------------------
# schema

def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _float_list(text: str) -> list:
    """``a,b,c`` or an inclusive range ``start:stop:step``."""
    text = str(text).strip()
    if ":" in text:
        a, b, c = (float(x) for x in text.split(":"))
        if c <= 0:
            raise ValueError("range step must be positive")
        n = int(np.floor((b - a) / c + 1e-9)) + 1
        return [a + i * c for i in range(max(n, 0))]
    return [float(x) for x in text.split(",") if x.strip()]


@dataclass(frozen=True)
class Key:
    section: str
    kind: object
    default: object = None
    choices: tuple | None = None
    non_negative: bool = False
    help: str = ""


SCHEMA = {
    "scenario": Key("run", str, None, SCENARIOS),
    "seed": Key("run", int, 0, non_negative=True),
    "threads": Key("run", int, 1, non_negative=True),
    "fidelity": Key("run", str, "squared", ("root", "squared")),
    "quadrature": Key("run", str, "auto", ("auto", "single", "grid")),
    "n_theta": Key("run", int, 12, non_negative=True),
    "n_phi": Key("run", int, 12, non_negative=True),
    "L": Key("system", int, None, non_negative=True),
    "n": Key("system", int, None, non_negative=True),
    "mode": Key("system", str, "both", ("open", "closed", "both")),
    "eps_sd": Key("system", float, None, non_negative=True),
    "eps_open": Key("system", float, None, non_negative=True),
    "eps_closed": Key("system", float, None, non_negative=True),
    "U": Key("system", float, 50.0, non_negative=True),
    "V": Key("system", float, 1.0, non_negative=True),
    "mirrored": Key("system", _bool, True),
    "tau_max": Key("grid", float, 500.0, non_negative=True),
    "tau_step": Key("grid", float, 1.0, non_negative=True),
    "eps_sd_grid": Key("grid", _float_list, "0:100:1", non_negative=True),
    "eps_open_grid": Key("grid", _float_list, "0:100:1", non_negative=True),
    "eps_closed_grid": Key("grid", _float_list, "0:100:1", non_negative=True),
    "budget": Key("grid", int, None, non_negative=True),
    "threshold": Key("grid", float, 0.98, non_negative=True),
    "tau_sw_grid": Key("grid", _float_list, None, non_negative=True),
    "tau_opt": Key("grid", float, None, non_negative=True),
    "cycles": Key("grid", int, 10, non_negative=True),
    "tau_sw": Key("grid", float, None, non_negative=True),
    "dwell": Key("grid", float, None, non_negative=True),
    "protocol": Key("grid", str, "swaps", P.CYCLE_PROTOCOLS),
    "rows": Key("grid", str, "n1", ("n1", "all")),
    "kind": Key("noise", str, None, P.NOISE_KINDS),
    "values": Key("noise", _float_list, None, non_negative=True),
    "lambda": Key("noise", float, 0.0, non_negative=True),
    "n_real": Key("noise", int, 500, non_negative=True),
    "preserve_ms": Key("noise", _bool, True),
    "per_bond": Key("noise", _bool, False),
    "soc_alpha": Key("noise", float, 0.0, non_negative=True),
    "soc_beta": Key("noise", float, None, non_negative=True),
    "kT": Key("noise", float, 0.0, non_negative=True),
    "gamma": Key("noise", float, 0.0, non_negative=True),
    "chi": Key("output", _bool, False),
    "occupancy": Key("output", _bool, True),
    "out": Key("output", str, None),
    "t_meV": Key("units", float, 0.02, non_negative=True),
    "convention": Key("units", str, "h", ("h", "hbar")),
}

REQUIRED = {
    "run": ("L", "n"),
    "optimize": ("L", "n"),
    "switch": ("L", "n"),
    "cycles": ("L", "n"),
    "disorder": ("L", "n"),
    "noise": ("L", "n", "kind", "values"),
    "table1": (),
    "experimental": (),
}


def _convert(key: str, raw, line=None):
    spec = SCHEMA[key]
    if raw is None:
        return None
    try:
        if isinstance(raw, str) or spec.kind is str:
            val = spec.kind(raw)
        elif spec.kind is _float_list:
            val = [float(x) for x in np.atleast_1d(raw)]
        elif spec.kind is _bool:
            val = bool(raw)
        else:
            val = spec.kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed value for {key!r}: {raw!r} ({exc})", key, line) from None
    if spec.choices is not None and val not in spec.choices:
        raise ConfigError(f"{key!r} must be one of {spec.choices}, got {val!r}", key, line)
    if spec.non_negative:
        vals = val if isinstance(val, list) else [val]
        if any(v < 0 for v in vals):
            raise ConfigError(f"{key!r} must be non-negative, got {raw!r}", key, line)
    return val


def read_config_file(path) -> dict:
    """Parse a config file into ``{key: (raw value, line number)}``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    out, section = {}, None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if text.startswith("[") and text.endswith("]"):
            section = text[1:-1].strip()
            if section not in {k.section for k in SCHEMA.values()}:
                raise ConfigError(f"unknown section [{section}]", None, lineno)
            continue
        if "=" not in text:
            raise ConfigError(f"expected 'key = value', got {text!r}", None, lineno)
        key, value = (s.strip() for s in text.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", key, lineno)
        if section is not None and SCHEMA[key].section != section:
            raise ConfigError(
                f"key {key!r} belongs in section [{SCHEMA[key].section}], found in [{section}]",
                key, lineno)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", key, lineno)
        out[key] = (value, lineno)
    return out


@dataclass
class ExperimentConfig:
    values: dict
    from_file: dict = field(default_factory=dict)
    from_flags: dict = field(default_factory=dict)
    source: str | None = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def scenario(self) -> str:
        return self.values["scenario"]

    def transistor(self) -> P.TransistorConfig:
        v = self.values
        return P.TransistorConfig(
            L=v["L"], n=v["n"], eps_sd=v["eps_sd"], eps_open=v["eps_open"],
            eps_closed=v["eps_closed"], U=v["U"], V=v["V"], soc_alpha=v["soc_alpha"],
            soc_beta=v["soc_beta"], kT=v["kT"], mirrored=v["mirrored"])

    def taus(self) -> np.ndarray:
        step = self.values["tau_step"]
        if step <= 0:
            raise ConfigError("tau_step must be positive", "tau_step")
        return np.arange(0.0, self.values["tau_max"] + 0.5 * step, step)

    def quadrature(self, soc: bool) -> QuadratureSpec:
        q = self.values["quadrature"]
        if q == "auto":
            q = "grid" if soc else "single"
        return QuadratureSpec(q, self.values["n_theta"], self.values["n_phi"])

    def sidecar(self) -> dict:
        return {"version": __version__, "source": self.source, "resolved": _jsonable(self.values),
                "file": _jsonable(self.from_file), "flags": _jsonable(self.from_flags)}


def parse_config(path=None, flags: dict | None = None, scenario: str | None = None) -> ExperimentConfig:
    """Merge defaults, an optional config file and flag overrides, then validate."""
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    for key in flags:
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", key)
    file_vals = read_config_file(path) if path else {}
    values = {}
    for key, spec in SCHEMA.items():
        if key in flags:
            values[key] = _convert(key, flags[key])
        elif key in file_vals:
            raw, line = file_vals[key]
            values[key] = _convert(key, raw, line)
        else:
            values[key] = _convert(key, spec.default) if spec.default is not None else None
    if scenario is not None:
        values["scenario"] = _convert("scenario", scenario)
    if values["scenario"] is None:
        raise ConfigError("missing required field 'scenario'", "scenario")
    sc = values["scenario"]
    if sc == "experimental":
        pre = P.EXPERIMENTAL.config
        for k in ("L", "n", "eps_sd", "eps_open", "eps_closed", "U", "V"):
            if k not in flags and k not in file_vals:
                values[k] = getattr(pre, k)
        if "t_meV" not in flags and "t_meV" not in file_vals:
            values["t_meV"] = P.EXPERIMENTAL.t_meV
    for key in REQUIRED[sc]:
        if values.get(key) is None:
            line = file_vals.get(key, (None, None))[1]
            raise ConfigError(f"missing required field {key!r} for scenario {sc!r}", key, line)
    if values.get("L") is not None and values["L"] < 1:
        raise ConfigError("L must be >= 1", "L")
    if values.get("L") is not None and values.get("n") is not None:
        row = None
        try:
            row = P.table_row(values["L"], values["n"])
        except ParameterError:
            pass
        for k in ("eps_sd", "eps_open", "eps_closed"):
            if values[k] is None:
                if row is None:
                    raise ConfigError(f"missing required field {k!r}: no reference value for "
                                      f"L={values['L']}, n={values['n']}", k)
                values[k] = getattr(row, k)
    if values["out"] is None:
        values["out"] = os.environ.get(OUTPUT_ENV, "results")
    raw_file = {k: v for k, (v, _) in file_vals.items()}
    return ExperimentConfig(values, raw_file, dict(flags), str(path) if path else None)


# ---------------------------------------------------------------------------
# output helpers

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return "" if np.isnan(x) else f"{x:.12g}"
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def series_header(L: int) -> list:
    return ["tau", "f_open", "f_closed", "chi", "n_s", *[f"n_{k}" for k in range(1, L + 1)], "n_d"]


def write_series(path: Path, rec: P.RunRecord, L: int):
    T = len(rec.taus)
    cols = [rec.taus, rec.f_open, rec.f_closed, rec.chi]
    rows = []
    for i in range(T):
        row = [c[i] if c is not None else None for c in cols]
        row += list(rec.occupancy[i]) if rec.occupancy is not None else [None] * (L + 2)
        rows.append(row)
    write_csv(path, series_header(L), rows)


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# scenarios

def _modes(cfg: ExperimentConfig):
    m = cfg["mode"]
    return P.MODES if m == "both" else (m,)


def _run(cfg: ExperimentConfig, out: Path) -> dict:
    tc = cfg.transistor()
    rec = P.run_transistor(tc, _modes(cfg), cfg.taus(), chi=cfg["chi"], occupancy=cfg["occupancy"],
                           quad=cfg.quadrature(tc.has_soc), conv=cfg["fidelity"],
                           gamma=cfg["gamma"], seed=cfg["seed"], scenario=cfg.scenario)
    write_series(out / "series.csv", rec, tc.L)
    res = {"tau_opt": rec.tau_opt, "peak": rec.peak, "mode": _modes(cfg)[0],
           "wall_time": rec.wall_time}
    if rec.f_closed is not None:
        res["f_closed_min"] = float(np.min(rec.f_closed))
    if cfg["t_meV"]:
        res["tau_opt_ns"] = float(to_physical_units(rec.tau_opt, cfg["t_meV"], cfg["convention"]))
    return res


def _optimize(cfg: ExperimentConfig, out: Path) -> dict:
    tc = cfg.transistor()
    quad = cfg.quadrature(tc.has_soc)
    r = P.optimize_open(tc.L, tc.n, cfg["eps_sd_grid"], cfg["eps_open_grid"], cfg.taus(),
                        cfg["budget"], cfg["threads"], tc, quad, cfg["fidelity"])
    write_csv(out / "grid.csv", ["eps_sd", "eps_open", "tau", "f_open"], r.grid)
    res = {"open": {"eps_sd": r.eps_sd, "eps_open": r.eps_open, "tau_opt": r.tau_opt,
                    "f_open": r.fidelity, "complete": r.complete, "evaluated": r.evaluated}}
    if r.eps_sd is not None:
        c = P.optimize_closed(tc.L, tc.n, r.eps_sd, cfg["threshold"], cfg["eps_closed_grid"],
                              cfg.taus(), tc, quad, cfg["fidelity"], cfg["threads"])
        res["closed"] = {"eps_closed": c.eps_closed, "min_f_closed": c.fidelity,
                         "feasible": c.feasible, "threshold": cfg["threshold"]}
    return res


def _switch(cfg: ExperimentConfig, out: Path) -> dict:
    tc = cfg.transistor()
    grid = cfg["tau_sw_grid"]
    if grid is None:
        tau_opt = cfg["tau_opt"] or P.clean_optimum(tc, cfg["fidelity"])
        grid = list(np.linspace(0, 0.5 * tau_opt, 26))
    curve = P.switching_curve(tc, grid, cfg["fidelity"], cfg["threads"])
    write_csv(out / "grid.csv", ["tau_sw", "f_open_to_closed", "f_closed_to_open"],
              zip(curve.tau_sw, curve.open_to_closed, curve.closed_to_open))
    return {"max_f_open_to_closed": float(curve.open_to_closed.max()),
            "max_f_closed_to_open": float(curve.closed_to_open.max())}


def _cycles(cfg: ExperimentConfig, out: Path) -> dict:
    tc = cfg.transistor()
    r = P.repeated_cycles(tc, cfg["cycles"], cfg["tau_opt"], cfg["tau_sw"], cfg["dwell"],
                          cfg.quadrature(tc.has_soc), cfg["fidelity"], protocol=cfg["protocol"])
    write_csv(out / "grid.csv", ["m", "f"], zip(r.m, r.fidelity))
    return {"tau_opt": r.tau_opt, "tau_sw": r.tau_sw, "dwell": r.dwell,
            "protocol": cfg["protocol"], "final": float(r.fidelity[-1]),
            "above_classical": bool(r.fidelity[-1] > 2 / 3)}


def _disorder(cfg: ExperimentConfig, out: Path) -> dict:
    tc = cfg.transistor()
    r = P.disorder_average(tc, cfg["lambda"], cfg["n_real"], cfg["preserve_ms"], cfg["seed"],
                           cfg["tau_opt"], cfg["threads"], cfg["per_bond"], cfg["fidelity"])
    write_csv(out / "grid.csv", ["realization", "f_open", "f_closed"],
              zip(range(len(r.f_open)), r.f_open, r.f_closed))
    return {"lambda": r.lam, "preserve_ms": r.preserve_ms, "tau_opt": r.tau_opt,
            "mean_open": r.mean_open, "stderr_open": r.stderr_open,
            "mean_closed": r.mean_closed, "stderr_closed": r.stderr_closed}


def _noise(cfg: ExperimentConfig, out: Path) -> dict:
    tc = cfg.transistor()
    r = P.noise_sweep(tc, cfg["kind"], cfg["values"], cfg["tau_opt"], cfg["fidelity"],
                      cfg["threads"])
    write_csv(out / "grid.csv", [cfg["kind"], "f_open", "f_closed"],
              zip(r.grid, r.f_open, r.f_closed))
    return {"kind": r.kind, "tau_opt": r.tau_opt}


def _table1(cfg: ExperimentConfig, out: Path) -> dict:
    rows = [r for r in P.TABLE_I if cfg["rows"] == "all" or r.n == 1]
    if cfg.values.get("L") is not None:
        rows = [r for r in rows if r.L == cfg["L"]]
    conv = cfg["fidelity"]
    body = []
    for row in rows:
        rec = P.run_transistor(row.config, P.MODES, cfg.taus(), occupancy=False, conv=conv)
        body.append([row.L, row.n, rec.peak, rec.tau_opt, row.eps_sd, row.eps_open,
                     row.eps_closed, float(np.min(rec.f_closed)), row.f_open, row.tau_opt])
    header = ["L", "n", "f_open", "tau_opt", "eps_sd", "eps_open", "eps_closed",
              "f_closed_min", "f_open_ref", "tau_opt_ref"]
    write_csv(out / "table1.csv", header, body)
    return {"rows": len(body)}


def _experimental(cfg: ExperimentConfig, out: Path) -> dict:
    res = _run(cfg, out)
    res["t_meV"] = cfg["t_meV"]
    res["tau_opt_ref"] = P.EXPERIMENTAL.tau_opt_ref
    res["tau_opt_ref_ns"] = {c: float(to_physical_units(P.EXPERIMENTAL.tau_opt_ref, cfg["t_meV"], c))
                             for c in PLANCK_MEV_NS}
    return res


HANDLERS = {"run": _run, "optimize": _optimize, "switch": _switch, "cycles": _cycles,
            "disorder": _disorder, "noise": _noise, "table1": _table1,
            "experimental": _experimental}


def run_scenario(cfg: ExperimentConfig) -> int:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "config.json", cfg.sidecar())
    start = time.perf_counter()
    result = HANDLERS[cfg.scenario](cfg, out)
    cal = P.calibrate_convention()
    payload = {
        "scenario": cfg.scenario,
        "version": __version__,
        "seed": cfg["seed"],
        "parameters": cfg.values,
        "calibration": {"chosen": cal.chosen, "root_peak": cal.root_peak,
                        "squared_peak": cal.squared_peak, "reference": cal.reference},
        "result": result,
        "wall_time": time.perf_counter() - start,
    }
    write_json(out / "result.json", payload)
    return 0


# ---------------------------------------------------------------------------
# entry point

class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for numerical failures
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hubbard-qst",
                                 description="Simulate and optimize a Hubbard-chain spin transistor.")
    ap.add_argument("scenario", nargs="?", choices=SCENARIOS)
    ap.add_argument("--config", help="config file (key = value with [sections])")
    for key, spec in SCHEMA.items():
        if key == "scenario":
            continue
        opts = dict(dest=key, default=None, metavar=key.upper())
        if spec.choices:
            opts["choices"] = spec.choices
            opts.pop("metavar")
        ap.add_argument(f"--{key}", **opts)
    return ap


def _fail(code: int, exc: Exception, out_dir=None) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("key", "line", "residual"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    text = json.dumps(_jsonable(payload), sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    out_dir = None
    try:
        args = build_parser().parse_args(argv)
        flags = {k: v for k, v in vars(args).items() if k not in ("scenario", "config")}
        cfg = parse_config(args.config, flags, args.scenario)
        out_dir = cfg["out"]
        return run_scenario(cfg)
    except (IntegrationError, np.linalg.LinAlgError) as exc:
        return _fail(2, exc, out_dir)
    except (ParameterError, SizeLimitError) as exc:
        return _fail(1, exc, out_dir)


if __name__ == "__main__":
    sys.exit(main())
