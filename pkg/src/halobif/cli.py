"""Command-line front end.

Subcommands write CSV (default) or JSON to stdout or ``--output``.  Floats are
printed with 9 significant digits so identical runs give identical bytes.
Normal forms are cached as JSON under ``$HALOBIF_CACHE`` when it is set.

CSV columns
-----------
threshold       order, E_cal, E_local, E_phys, ly, iy, lz, iz
scan            mu, E_phys_order2, E_phys_series1, E_cal_ly, E_cal_iy, E_cal_lz, E_cal_iz, reason
init-conditions mu, X0, Ydot0, E_cal, E_phys
diagnose        degree, order, norm, root, ratio
verify          order, E_phys, E_numeric, delta
coefficients    j, k, m, value (plus omega_y, omega_z, delta, lambda_x rows)
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bifurcation import (DegenerateThresholdError, KINDS, halo_initial_conditions,
                          small_mu_threshold_series, threshold_record, threshold_series)
from .cr3bp_model import ConvergenceError, ProblemSpec, solve_gamma, to_physical_energy
from .diagnostics import convergence_report
from .linearization import DegenerateLinearizationError
from .normal_form import SCHEMA_VERSION as NF_SCHEMA
from .normal_form import (NonRealCoefficientError, ResonantNormalForm, SmallDivisorError,
                          center_manifold_reduce, compute_normal_form)
from .oracle import IntegratorConfig, NoCrossingError, numerical_threshold

log = logging.getLogger("halobif")

CLI_SCHEMA = "halobif.cli/1"
CACHE_ENV = "HALOBIF_CACHE"
DIGITS = 9

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_ORACLE = 4

L3_HINT = ("L3 at small mass ratio is a singular perturbation of the isotropic oscillator: "
           "the hyperbolic exponent and the detuning both vanish with mu")


@dataclass
class RunConfig:
    command: str
    point: str = "L1"
    mu: float | None = None
    mu_range: tuple[float, float] | None = None
    count: int = 20
    spacing: str = "log"
    order: int = 2
    degree: int | None = None
    fmt: str = "csv"
    output: str | None = None
    jobs: int = 1
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.point not in ("L1", "L2", "L3"):
            raise ValueError(f"unknown point {self.point!r}")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.degree is not None and self.degree < 2 * self.order + 2:
            raise ValueError(f"degree must be >= {2 * self.order + 2} for order {self.order}")
        if self.mu is not None:
            ProblemSpec(self.mu, self.point)
        if self.mu_range is not None:
            lo, hi = self.mu_range
            ProblemSpec(lo, self.point)
            ProblemSpec(hi, self.point)
            if lo > hi:
                raise ValueError("mu range must be increasing")
            if self.spacing not in ("log", "linear"):
                raise ValueError("spacing must be 'log' or 'linear'")

    def grid(self) -> np.ndarray:
        lo, hi = self.mu_range
        if self.spacing == "log":
            return np.geomspace(lo, hi, self.count)
        return np.linspace(lo, hi, self.count)


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.{DIGITS}g}"


def _round(obj):
    """Round floats to the output precision for JSON."""
    if isinstance(obj, float):
        return obj if math.isnan(obj) or math.isinf(obj) else float(f"{obj:.{DIGITS}g}")
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.floating):
        return _round(float(obj))
    return obj


def render(rows: list[dict], columns: list[str], fmt_name: str, meta: dict) -> str:
    if fmt_name == "json":
        doc = {"schema": CLI_SCHEMA, "version": __version__, **meta, "rows": _round(rows)}
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


# -- normal-form cache ----------------------------------------------------------------

def cache_key(spec: ProblemSpec, order: int, degree: int) -> str:
    payload = json.dumps({"point": spec.point, "mu": repr(float(spec.mu)), "order": order,
                          "degree": degree, "version": __version__, "schema": NF_SCHEMA},
                         sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def load_normal_form(spec: ProblemSpec, order: int, degree: int | None = None,
                     cache_dir: str | None = None) -> ResonantNormalForm:
    D = degree or 2 * order + 2
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    path = None
    if cache_dir:
        path = Path(cache_dir) / f"nf-{cache_key(spec, order, D)}.json"
        if path.exists():
            try:
                return ResonantNormalForm.from_json(path.read_text())
            except (ValueError, KeyError) as exc:
                log.warning("ignoring unreadable cache entry %s: %s", path, exc)
    nf = compute_normal_form(spec, order, max_degree=D)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(nf.to_json())
        tmp.replace(path)
    return nf


# -- commands -------------------------------------------------------------------------

THRESHOLD_COLUMNS = ["order", "E_cal", "E_local", "E_phys", "ly", "iy", "lz", "iz"]


def cmd_threshold(cfg: RunConfig) -> str:
    spec = ProblemSpec(cfg.mu, cfg.point)
    nf = load_normal_form(spec, cfg.order, cfg.degree)
    cm = center_manifold_reduce(nf)
    rows = []
    for n in range(1, cfg.order + 1):
        rec = threshold_record(nf, cm, n).to_dict()
        rows.append({"order": n, "E_cal": rec["E_cal"], "E_local": rec["E_local"],
                     "E_phys": rec["E_phys"], **rec["thresholds"]})
    meta = {"command": "threshold", "point": cfg.point, "mu": cfg.mu, "method": "DM"}
    return render(rows, THRESHOLD_COLUMNS, cfg.fmt, meta)


SCAN_COLUMNS = ["mu", "E_phys_order2", "E_phys_series1", "E_cal_ly", "E_cal_iy", "E_cal_lz",
                "E_cal_iz", "reason"]


def scan_point(point: str, mu: float, order: int = 2) -> dict:
    """One scan row; failures give NaN values and a reason."""
    row = {"mu": mu}
    try:
        spec = ProblemSpec(mu, point)
        geometry = solve_gamma(spec)
        row["E_phys_series1"] = to_physical_energy(small_mu_threshold_series(point, mu), spec, geometry)
        nf = load_normal_form(spec, order)
        cm = center_manifold_reduce(nf)
        rec = threshold_record(nf, cm, order).to_dict()
        row["E_phys_order2"] = rec["E_phys"]
        for k, v in rec["thresholds"].items():
            row[f"E_cal_{k}"] = v
        row["reason"] = ""
    except (ArithmeticError, ValueError, ConvergenceError) as exc:
        row["reason"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    for c in SCAN_COLUMNS[1:-1]:
        row.setdefault(c, math.nan)
    return row


def _scan_task(args):
    return scan_point(*args)


def cmd_scan(cfg: RunConfig) -> str:
    grid = cfg.grid()
    tasks = [(cfg.point, float(mu), cfg.order) for mu in grid]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_scan_task, tasks))
    else:
        rows = [_scan_task(t) for t in tasks]
    meta = {"command": "scan", "point": cfg.point, "order": cfg.order, "spacing": cfg.spacing}
    return render(rows, SCAN_COLUMNS, cfg.fmt, meta)


INIT_COLUMNS = ["mu", "X0", "Ydot0", "E_cal", "E_phys"]


def init_point(point: str, mu: float, order: int) -> dict:
    spec = ProblemSpec(mu, point)
    nf = load_normal_form(spec, order)
    cm = center_manifold_reduce(nf)
    seed = halo_initial_conditions(nf, order, cm)
    ts = threshold_series(cm, order, "halo_y", nf.spec, nf.geometry)
    return {"mu": mu, "X0": seed.X0, "Ydot0": seed.Ydot0, "E_cal": seed.E_cal, "E_phys": ts.E_phys}


def _init_task(args):
    return init_point(*args)


def cmd_init_conditions(cfg: RunConfig) -> str:
    mus = cfg.grid() if cfg.mu_range is not None else np.array([cfg.mu])
    tasks = [(cfg.point, float(mu), cfg.order) for mu in mus]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_init_task, tasks))
    else:
        rows = [_init_task(t) for t in tasks]
    meta = {"command": "init-conditions", "point": cfg.point, "order": cfg.order,
            "phase": "perpendicular y = 0 crossing with local x > 0"}
    return render(rows, INIT_COLUMNS, cfg.fmt, meta)


DIAG_COLUMNS = ["degree", "order", "norm", "root", "ratio"]


def cmd_diagnose(cfg: RunConfig) -> str:
    spec = ProblemSpec(cfg.mu, cfg.point)
    nf = load_normal_form(spec, cfg.order, cfg.degree)
    cm = center_manifold_reduce(nf)
    ref = threshold_series(cm, 1).E_cal
    rep = convergence_report(nf, reference_amplitude=ref)
    meta = {"command": "diagnose", **rep.metadata, "optimal_order": rep.optimal_order,
            "reference_amplitude": ref}
    return render(list(rep.rows()), DIAG_COLUMNS, cfg.fmt, meta)


VERIFY_COLUMNS = ["order", "E_phys", "E_numeric", "delta"]


def cmd_verify(cfg: RunConfig) -> str:
    spec = ProblemSpec(cfg.mu, cfg.point)
    icfg = IntegratorConfig(rtol=cfg.extra.get("rtol", 1e-12), atol=cfg.extra.get("atol", 1e-12))
    E_num = numerical_threshold(spec, icfg)
    nf = load_normal_form(spec, cfg.order, cfg.degree)
    cm = center_manifold_reduce(nf)
    rows = []
    for n in range(1, cfg.order + 1):
        E = threshold_series(cm, n, "halo_y", nf.spec, nf.geometry).E_phys
        rows.append({"order": n, "E_phys": E, "E_numeric": E_num, "delta": E - E_num})
    meta = {"command": "verify", "point": cfg.point, "mu": cfg.mu, "rtol": icfg.rtol}
    return render(rows, VERIFY_COLUMNS, cfg.fmt, meta)


COEFF_COLUMNS = ["j", "k", "m", "value"]


def cmd_coefficients(cfg: RunConfig) -> str:
    spec = ProblemSpec(cfg.mu, cfg.point)
    nf = load_normal_form(spec, cfg.order, cfg.degree)
    cm = center_manifold_reduce(nf)
    if cfg.fmt == "json":
        doc = {"schema": CLI_SCHEMA, "version": __version__, "command": "coefficients",
               "point": cfg.point, "mu": cfg.mu, "coefficients": _round(cm.to_dict())}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    rows = [{"j": name, "k": "", "m": "", "value": getattr(cm, name)}
            for name in ("omega_y", "omega_z", "delta", "lambda_x")]
    rows += [{"j": j, "k": k, "m": m, "value": c} for (j, k, m), c in sorted(cm.table.items())]
    return render(rows, COEFF_COLUMNS, "csv", {})


COMMANDS = {
    "threshold": cmd_threshold,
    "scan": cmd_scan,
    "init-conditions": cmd_init_conditions,
    "diagnose": cmd_diagnose,
    "verify": cmd_verify,
    "coefficients": cmd_coefficients,
}


# -- argument parsing -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="halobif", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, default_order=2, needs_mu=True):
        sp.add_argument("--point", choices=("L1", "L2", "L3"), default="L1")
        if needs_mu:
            sp.add_argument("--mu", type=float, required=True, help="mass ratio in (0, 1/2]")
        sp.add_argument("--order", type=int, default=default_order, help="normal-form order N")
        sp.add_argument("--degree", type=int, default=None,
                        help="expansion degree override (default 2N+2)")
        sp.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
        sp.add_argument("--output", "-o", default=None, help="output file (default stdout)")

    def grid(sp, required=True):
        sp.add_argument("--mu-min", type=float, required=required)
        sp.add_argument("--mu-max", type=float, required=required)
        sp.add_argument("--count", type=int, default=20)
        sp.add_argument("--spacing", choices=("log", "linear"), default="log")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")

    common(sub.add_parser("threshold", help="thresholds at orders 1..N"))
    sp = sub.add_parser("scan", help="second-order thresholds over a mass ratio grid")
    common(sp, needs_mu=False)
    grid(sp)
    sp = sub.add_parser("init-conditions", help="halo seeds (X0, Ydot0) at the threshold")
    common(sp, needs_mu=False)
    sp.add_argument("--mu", type=float, default=None)
    grid(sp, required=False)
    common(sub.add_parser("diagnose", help="root and ratio criteria"), default_order=6)
    sp = sub.add_parser("verify", help="compare with the numerical continuation oracle")
    common(sp, default_order=5)
    sp.add_argument("--rtol", type=float, default=1e-12)
    sp.add_argument("--atol", type=float, default=1e-12)
    common(sub.add_parser("coefficients", help="center-manifold coefficient table"))
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    mu_range = None
    if getattr(ns, "mu_min", None) is not None or getattr(ns, "mu_max", None) is not None:
        if ns.mu_min is None or ns.mu_max is None:
            raise ValueError("--mu-min and --mu-max go together")
        mu_range = (ns.mu_min, ns.mu_max)
    if ns.command == "init-conditions" and mu_range is None and ns.mu is None:
        raise ValueError("give --mu or a --mu-min/--mu-max range")
    extra = {k: getattr(ns, k) for k in ("rtol", "atol") if hasattr(ns, k)}
    return RunConfig(ns.command, ns.point, getattr(ns, "mu", None), mu_range,
                     getattr(ns, "count", 20), getattr(ns, "spacing", "log"), ns.order, ns.degree,
                     ns.fmt, ns.output, getattr(ns, "jobs", 1), extra)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(ns)
        text = COMMANDS[cfg.command](cfg)
    except (SmallDivisorError, DegenerateLinearizationError, DegenerateThresholdError,
            NonRealCoefficientError) as exc:
        hint = f" ({L3_HINT})" if ns.point == "L3" else ""
        print(f"halobif: error: {exc}{hint}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NoCrossingError, ConvergenceError) as exc:
        print(f"halobif: error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except ValueError as exc:
        print(f"halobif: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
