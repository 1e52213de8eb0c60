"""Configuration loading, command orchestration, and report output.

Configs are INI files with sections [operator], [cross_section], [weight],
[grid], [contour], [pde]; unknown sections or keys are hard errors, range
violations list every offending field.  Reports are JSON (schema_version 1)
plus one CSV per table, file names embedding the command and a stable
config hash.  All randomness flows from the --seed flag.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import calculus, discretize, geometry, pde, symbols
from .calculus import CalculusReport, _jsonable
from .errors import ConecalcError, ConfigError

__all__ = ["RunConfig", "Report", "load_config", "run", "write_report", "main"]

SCHEMA_VERSION = 1

_KNOWN_KEYS = {
    "operator": {"preset", "mu", "shift"}
    | {f"a_{j}" for j in range(9)}
    | {f"s_{j}" for j in range(9)},
    "cross_section": {"type", "n", "modes", "eigenvalues"},
    "weight": {"gamma", "p"},
    "grid": {"rmin", "rmax", "points", "kind"},
    "contour": {"delta", "theta", "smax", "nray", "narc"},
    "pde": {"t", "steps", "stepper", "c", "a", "f", "u0"},
}

_DEFAULT_CONFIG = {
    "operator": {"preset": "laplacian", "mu": 2, "shift": 0.0},
    "cross_section": {"type": "circle", "n": 1, "modes": 8},
    "weight": {"gamma": 0.0, "p": 2.0},
    "grid": {"rmin": -8.0, "rmax": 8.0, "points": 512, "kind": "model_cone"},
    "contour": {
        "delta": None,  # auto: half the smallest nonzero eigenvalue modulus
        "theta": math.pi / 2,
        "smax": None,  # auto from the spectral radius
        "nray": 400,
        "narc": 80,
    },
    "pde": {"t": 1.0, "steps": 400, "stepper": "bdf2", "c": 1.0,
            "a": "1", "f": "none", "u0": "bump"},
}


# ---------------------------------------------------------------------------
# polynomial parsing for coefficient tables and diffusivities
# ---------------------------------------------------------------------------

_TERM_RE = re.compile(r"^([+-]?[\d.eE+-]*?)\s*\*?\s*([a-zA-Z_]+)?(?:\^|\*\*)?(\d+)?$")


def parse_polynomial(text: str, var: str) -> np.ndarray:
    """Parse ``c0 + c1*x + c2*x^2`` into ascending coefficients."""
    text = text.strip()
    if not text:
        return np.zeros(1)
    chunks = re.split(r"(?=[+-])", text.replace(" ", ""))
    coeffs = {}
    for chunk in chunks:
        if not chunk or chunk in "+-":
            continue
        m = _TERM_RE.match(chunk)
        if not m:
            raise ConfigError(f"cannot parse polynomial term {chunk!r}")
        c_str, name, power = m.groups()
        if name is not None and name != var:
            raise ConfigError(
                f"unexpected variable {name!r} in polynomial (expected {var!r})"
            )
        if name is None:
            deg = 0
        else:
            deg = int(power) if power is not None else 1
        if c_str in ("", "+"):
            c = 1.0
        elif c_str == "-":
            c = -1.0
        else:
            try:
                c = float(c_str)
            except ValueError as exc:
                raise ConfigError(f"bad coefficient in term {chunk!r}") from exc
        coeffs[deg] = coeffs.get(deg, 0.0) + c
    out = np.zeros(max(coeffs) + 1)
    for deg, c in coeffs.items():
        out[deg] = c
    return out


def parse_coefficient_table(text: str) -> np.ndarray:
    """Parse ``P(t) ; Q(nu)`` as the sum ``alpha(t, nu) = P(t) + Q(nu)``."""
    parts = text.split(";")
    if len(parts) > 2:
        raise ConfigError(f"coefficient tables have at most two parts, got {text!r}")
    pt = parse_polynomial(parts[0], "t")
    qnu = parse_polynomial(parts[1], "nu") if len(parts) == 2 else np.zeros(1)
    coeff = np.zeros((max(pt.size, 1), max(qnu.size, 1)))
    coeff[: pt.size, 0] += pt
    coeff[0, : qnu.size] += qnu
    return coeff


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    operator: dict
    cross_section: dict
    weight: dict
    grid: dict
    contour: dict
    pde: dict
    seed: int = 0

    def as_dict(self) -> dict:
        return {
            "operator": dict(self.operator),
            "cross_section": dict(self.cross_section),
            "weight": dict(self.weight),
            "grid": dict(self.grid),
            "contour": dict(self.contour),
            "pde": dict(self.pde),
            "seed": self.seed,
        }

    def content_hash(self) -> str:
        blob = json.dumps(_jsonable(self.as_dict()), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:10]


def _coerce(section: str, key: str, raw: str):
    ints = {"mu", "n", "modes", "points", "nray", "narc", "steps"}
    floats = {"shift", "gamma", "p", "rmin", "rmax", "theta", "t", "c"}
    autos = {"delta", "smax"}
    if key in autos:
        if raw.strip().lower() == "auto":
            return None
        return float(raw)
    if key in ints:
        return int(raw)
    if key in floats:
        return float(raw)
    return raw.strip()


def load_config(path: str | None) -> RunConfig:
    """Parse and validate a config file; None loads the documented defaults.

    Unknown sections or keys are hard errors, and every out-of-range value
    is collected and reported at once.
    """
    cfg = {k: dict(v) for k, v in _DEFAULT_CONFIG.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file {path!r} not found or unreadable")
        unknown = []
        for section in parser.sections():
            if section not in _KNOWN_KEYS:
                unknown.append(section)
                continue
            for key, raw in parser.items(section):
                if key not in _KNOWN_KEYS[section]:
                    unknown.append(f"{section}.{key}")
                    continue
                cfg[section][key] = _coerce(section, key, raw)
        if unknown:
            raise ConfigError(
                f"unknown config entries: {', '.join(sorted(unknown))}",
                fields=sorted(unknown),
            )

    bad = []
    w = cfg["weight"]
    if not 1.0 < float(w["p"]) < math.inf:
        bad.append("weight.p")
    ct = cfg["contour"]
    if not 0.0 < float(ct["theta"]) < math.pi:
        bad.append("contour.theta")
    if ct["delta"] is not None and float(ct["delta"]) <= 0.0:
        bad.append("contour.delta")
    if ct["smax"] is not None and float(ct["smax"]) <= 0.0:
        bad.append("contour.smax")
    if int(ct["nray"]) < 2 or int(ct["narc"]) < 2:
        bad.append("contour.nray/narc")
    g = cfg["grid"]
    if int(g["points"]) < 8:
        bad.append("grid.points")
    if g["kind"] not in ("model_cone", "truncated_cone"):
        bad.append("grid.kind")
    cs = cfg["cross_section"]
    if cs["type"] not in ("circle", "table"):
        bad.append("cross_section.type")
    if int(cs["n"]) < 1:
        bad.append("cross_section.n")
    if cfg["operator"]["preset"] not in ("laplacian", "custom"):
        bad.append("operator.preset")
    p = cfg["pde"]
    if float(p["t"]) <= 0.0:
        bad.append("pde.t")
    if int(p["steps"]) < 2:
        bad.append("pde.steps")
    if p["stepper"] not in ("backward_euler", "bdf2"):
        bad.append("pde.stepper")
    if bad:
        raise ConfigError(
            f"config values out of range: {', '.join(bad)}", fields=bad
        )
    return RunConfig(**cfg)


def build_spectrum(config: RunConfig) -> symbols.CrossSectionSpectrum:
    cs = config.cross_section
    if cs["type"] == "circle":
        if int(cs["n"]) != 1:
            raise ConfigError("circle cross-sections have n = 1", ["cross_section.n"])
        return symbols.CrossSectionSpectrum.circle(int(cs["modes"]))
    pairs = []
    for item in str(cs["eigenvalues"]).split(","):
        nu, _, mult = item.partition(":")
        pairs.append((float(nu), int(mult) if mult else 1))
    return symbols.CrossSectionSpectrum.from_table(int(cs["n"]), pairs)


def build_operator(config: RunConfig) -> symbols.FuchsOperator:
    spec = build_spectrum(config)
    weight = symbols.WeightData(
        gamma=float(config.weight["gamma"]), p=float(config.weight["p"]), n=spec.n
    )
    op = config.operator
    if op["preset"] == "laplacian":
        return symbols.make_cone_laplacian(spec, c0=float(op["shift"]), weight=weight)
    mu = int(op["mu"])
    coeff = []
    for j in range(mu + 1):
        key = f"a_{j}"
        if key not in op:
            raise ConfigError(f"custom operator needs {key}", [f"operator.{key}"])
        coeff.append(parse_coefficient_table(str(op[key])))
    symbol = None
    if any(f"s_{j}" in op for j in range(mu + 1)):
        symbol = tuple(
            parse_polynomial(str(op.get(f"s_{j}", "0")), "nu_hat")
            for j in range(mu + 1)
        )
    return symbols.FuchsOperator(
        mu=mu, weight=weight, cross_section=spec, coeff=tuple(coeff), symbol=symbol
    )


def build_grid(config: RunConfig) -> discretize.LogGrid:
    g = config.grid
    return discretize.LogGrid(
        r_min=float(g["rmin"]), r_max=float(g["rmax"]),
        N=int(g["points"]), kind=str(g["kind"]),
    )


def build_contour(config: RunConfig, target, re_z: float):
    ct = config.contour
    delta = ct["delta"]
    if delta is None:
        delta = calculus.default_delta(target)
    s_max = ct["smax"]
    if s_max is None:
        eigs = calculus.spectrum(target)
        lam_max = float(np.max(np.abs(eigs))) if eigs.size else 1.0
        s_max = max(5.0, math.log(8.0 * max(lam_max, delta) / delta))
    return geometry.contour_nodes(
        geometry.KeyholeRegion(float(delta), float(ct["theta"])),
        float(s_max), int(ct["nray"]), int(ct["narc"]), re_z,
    )


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------


@dataclass
class Report:
    command: str
    config: RunConfig
    results: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    invariants: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    passed: bool = True
    timings: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def merge(self, sub: CalculusReport, prefix: str = "") -> None:
        key = prefix or sub.operation
        self.results[key] = _jsonable(sub.results)
        for tname, rows in sub.tables.items():
            self.tables[f"{key}_{tname}" if prefix else tname] = rows
        self.notes.extend(sub.notes)
        if sub.passed is not None:
            self.passed = self.passed and sub.passed
        self.timings[key] = sub.timing_s

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "command": self.command,
            "config": _jsonable(self.config.as_dict()),
            "config_hash": self.config.content_hash(),
            "results": _jsonable(self.results),
            "invariants": _jsonable(self.invariants),
            "notes": list(self.notes),
            "passed": bool(self.passed),
            "timings": _jsonable(self.timings),
        }


def write_report(report: Report, out_dir: str) -> list:
    """Write ``<command>_<hash>.json`` plus one CSV per table; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{report.command.replace('-', '_')}_{report.config.content_hash()}"
    paths = []
    jpath = out / f"{stem}.json"
    payload = report.to_dict()
    payload["tables"] = sorted(report.tables)
    with open(jpath, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(str(jpath))
    for tname, rows in report.tables.items():
        cpath = out / f"{stem}_{tname}.csv"
        with open(cpath, "w", newline="", encoding="utf-8") as fh:
            if rows:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
                writer.writeheader()
                for row in rows:
                    writer.writerow({k: _csv_cell(v) for k, v in row.items()})
            else:
                fh.write("\n")
        paths.append(str(cpath))
    return paths


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_indicial(report: Report, config: RunConfig, args) -> None:
    op = build_operator(config)
    roots = symbols.all_indicial_roots(op)
    rows = [
        {
            "mode": r.mode_index,
            "nu": r.nu,
            "re": r.z.real,
            "im": r.z.imag,
            "order": r.order,
            "mult": op.mode_multiplicity(r.mode_index),
        }
        for r in roots
    ]
    report.tables["roots"] = rows
    report.results["n_roots"] = len(rows)
    lo, hi = symbols.gap_strip(op, op.gamma)
    report.results["gap_strip"] = [lo, hi]


def _cmd_extensions(report: Report, config: RunConfig, args) -> None:
    op = build_operator(config)
    dim = symbols.domain_gap_dimension(op)
    funcs = symbols.singular_functions(op)
    report.results["domain_gap_dimension"] = dim
    lo, hi = symbols.gap_strip(op, op.gamma)
    report.results["strip"] = [lo, hi]
    if op.mu != 2:
        # order-independent variant with the fixed strip width 2
        fixed = [
            r
            for r in symbols.all_indicial_roots(op)
            if hi - 2.0 < r.z.real < hi
        ]
        report.results["domain_gap_dimension_width2"] = int(
            sum(r.order * op.mode_multiplicity(r.mode_index) for r in fixed)
        )
        report.notes.append(
            "operator order differs from 2: both the order-wide and the "
            "width-2 strip counts are recorded"
        )
    report.tables["singular_functions"] = [
        {
            "mode": f.mode_index,
            "exponent_re": f.exponent.real,
            "exponent_im": f.exponent.imag,
            "log_power": f.log_power,
            "form": f.render(),
        }
        for f in funcs
    ]


def _cmd_ellipticity(report: Report, config: RunConfig, args) -> None:
    op = build_operator(config)
    sector = geometry.Sector(float(config.contour["theta"]))
    ell = symbols.check_ellipticity(op, sector)
    report.results["ellipticity"] = ell.as_dict()
    report.passed = report.passed and ell.passed


def _cmd_spectrum(report: Report, config: RunConfig, args) -> None:
    op = build_operator(config)
    target = discretize.assemble(op, build_grid(config))
    rows = []
    for m in target.modes:
        eigs = calculus.spectrum(target, m.index)
        for lam in eigs:
            rows.append(
                {"mode": m.index, "nu": m.nu, "re": lam.real, "im": lam.imag}
            )
    report.tables["spectrum"] = rows
    report.results["min_real"] = min(r["re"] for r in rows)
    report.results["max_abs"] = max(math.hypot(r["re"], r["im"]) for r in rows)


def _cmd_resolvent_scan(report: Report, config: RunConfig, args) -> None:
    op = build_operator(config)
    target = discretize.assemble(op, build_grid(config))
    radii = (
        [float(x) for x in args.radii.split(",")]
        if getattr(args, "radii", None)
        else np.logspace(0, 4, 13).tolist()
    )
    sector = geometry.Sector(float(config.contour["theta"]))
    sub = calculus.resolvent_norm_scan(target, sector, radii, p=float(args.p))
    report.merge(sub)


def _cmd_power(report: Report, config: RunConfig, args) -> None:
    op = build_operator(config)
    target = discretize.assemble(op, build_grid(config))
    z = complex(args.z.replace("i", "j")) if isinstance(args.z, str) else complex(args.z)
    contour = build_contour(config, target, re_z=min(z.real, -0.1))
    powers, diag = calculus.dunford_powers(target, [z], contour=contour)
    mats = powers[z]
    rows = []
    oracle_gap = None
    try:
        oracle = calculus.power_oracle(target, z)
        oracle_gap = max(
            float(np.linalg.norm(P - O, 2) / max(np.linalg.norm(O, 2), 1e-300))
            for P, O in zip(mats, oracle)
        )
    except ConecalcError as exc:
        report.notes.append(f"oracle unavailable: {exc}")
    for m, P in zip(target.modes, mats):
        rows.append(
            {"mode": m.index, "nu": m.nu, "norm2": float(np.linalg.norm(P, 2))}
        )
    report.tables["power_norms"] = rows
    report.results["z"] = {"re": z.real, "im": z.imag}
    report.results["diagnostics"] = _jsonable(diag)
    if oracle_gap is not None:
        report.results["oracle_relative_gap"] = oracle_gap
        report.passed = report.passed and oracle_gap < 1e-6
    if getattr(args, "dump_matrix", False):
        for m, P in zip(target.modes, mats):
            rows = []
            for i in range(P.shape[0]):
                for j in range(P.shape[1]):
                    rows.append(
                        {"row": i, "col": j, "re": P[i, j].real, "im": P[i, j].imag}
                    )
            report.tables[f"power_matrix_mode{m.index}"] = rows


def _cmd_bip_scan(report: Report, config: RunConfig, args) -> None:
    op = build_operator(config)
    target = discretize.assemble(op, build_grid(config))
    sector = geometry.Sector(float(config.contour["theta"]))
    rng = np.random.default_rng(config.seed)
    sub = calculus.bip_scan(
        target,
        sector,
        y_max=float(args.ymax),
        steps=int(args.steps),
        p=float(args.p),
        rng=rng,
        n_ray=int(config.contour["nray"]),
        n_arc=int(config.contour["narc"]),
    )
    report.merge(sub)


def _cmd_hardy(report: Report, config: RunConfig, args) -> None:
    t = np.geomspace(1e-9, 1e6, 6000)
    families = [("indicator", np.where(t <= 1.0, 1.0, 0.0))]
    for a in (0.5, 1.0, 2.0):
        families.append((f"t^{a}", np.where(t <= 1.0, t**a, 0.0)))
    rows = []
    ok = True
    for name, g in families:
        for tail in ("lower_tail", "upper_tail"):
            sub = calculus.hardy_check(g, t, p=2.0, r=1.0, tail=tail)
            rows.append(
                {
                    "family": name,
                    "tail": tail,
                    "lhs": sub.results["lhs"],
                    "bound": sub.results["bound"],
                    "passed": sub.passed,
                }
            )
            ok = ok and bool(sub.passed)
    report.tables["hardy"] = rows
    report.passed = report.passed and ok


def _cmd_heat(report: Report, config: RunConfig, args) -> None:
    op = build_operator(config)
    grid = build_grid(config)
    target = discretize.assemble(op, grid)
    steps = int(args.steps or config.pde["steps"])
    T = float(args.T or config.pde["t"])
    stepper = args.stepper or str(config.pde["stepper"])
    rng = np.random.default_rng(config.seed)
    if args.forcing == "preset":
        profile = np.stack(
            [rng.standard_normal(m.matrix.shape[0]) for m in target.modes]
        )
        forcing = profile
    else:
        forcing = None
    problem = pde.CauchyProblem(
        target=target, T=T, steps=steps, forcing=forcing, stepper=stepper
    )
    sol = pde.solve_heat(problem)
    report.results["u_prime_norm"] = sol.u_prime_norm
    report.results["au_norm"] = sol.au_norm
    report.results["forcing_norm"] = sol.forcing_norm
    stride = max(1, steps // 20)
    rows = []
    for k in range(0, steps + 1, stride):
        nrm = math.sqrt(
            sum(
                m.mult * grid.h * float(np.sum(np.abs(sol.u[k, j]) ** 2))
                for j, m in enumerate(target.modes)
            )
        )
        rows.append({"tau": float(sol.times[k]), "norm": nrm})
    report.tables["heat_norms"] = rows


def _cmd_quasilinear(report: Report, config: RunConfig, args) -> None:
    radial = discretize.LogGrid(0.0, 6.0, int(args.nr), "truncated_cone")
    grid2d = pde.Grid2d(radial=radial, n_x=int(args.nx))
    a_coeff = parse_polynomial(args.a or str(config.pde["a"]), "s")
    da_coeff = np.polynomial.polynomial.polyder(a_coeff) if a_coeff.size > 1 else np.zeros(1)
    f_name = args.f or str(config.pde["f"])
    problem = pde.QuasilinearProblem(
        grid=grid2d,
        T=float(args.T or config.pde["t"]),
        steps=int(args.steps or config.pde["steps"]),
        a=lambda s: np.polynomial.polynomial.polyval(s, a_coeff),
        a_prime=lambda s: np.polynomial.polynomial.polyval(s, da_coeff),
        c=float(args.c if args.c is not None else config.pde["c"]),
        f=pde.ginzburg_landau if f_name == "gl" else None,
        u0=pde.bump_field(grid2d) if (args.u0 or config.pde["u0"]) == "bump" else None,
    )
    sol = pde.solve_quasilinear(problem)
    report.results["attained_T"] = sol.attained_T
    report.results["completed"] = sol.completed
    report.results["lipschitz_probe"] = sol.lipschitz_probe
    if sol.diagnosis:
        report.notes.append(sol.diagnosis)
    report.notes.extend(sol.notes)
    stride = max(1, len(sol.times) // 25)
    rows = []
    for k in range(0, len(sol.times), stride):
        rows.append(
            {
                "tau": float(sol.times[k]),
                "energy": float(sol.energies[k]),
                "residual": float(sol.residuals[k - 1]) if k >= 1 else float("nan"),
            }
        )
    report.tables["quasilinear_trace"] = rows
    report.passed = report.passed and sol.completed


def _cmd_report(report: Report, config: RunConfig, args) -> None:
    path = Path(args.input)
    if not path.exists():
        raise ConfigError(f"report file {path} does not exist")
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    lines = [f"command: {payload.get('command')}",
             f"passed:  {payload.get('passed')}"]
    for row in payload.get("invariants", []):
        lines.append(f"  [{'PASS' if row['passed'] else 'FAIL'}] {row['name']}: {row['detail']}")
    summary = "\n".join(lines)
    print(summary)
    report.results["summary"] = summary
    report.passed = bool(payload.get("passed", False))


# ---------------------------------------------------------------------------
# the verify suite
# ---------------------------------------------------------------------------


def _verify_rows(config: RunConfig, seed: int, threads: int) -> list:
    from concurrent.futures import ThreadPoolExecutor

    checks = _build_verify_checks(config, seed)
    rows = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda c: c(), checks))
    else:
        rows = [c() for c in checks]
    rows.sort(key=lambda r: r["name"])
    return rows


def _row(name, passed, detail):
    return {"name": name, "passed": bool(passed), "detail": detail}


def _build_verify_checks(config: RunConfig, seed: int) -> list:
    rng = np.random.default_rng(seed)

    def chk_indicial():
        op = symbols.make_cone_laplacian(symbols.CrossSectionSpectrum.circle(8))
        worst = 0.0
        for j, (nu, _m) in enumerate(op.cross_section.eigenvalues):
            roots = {round(r.z.real, 6): r for r in symbols._mode_roots(
                symbols.conormal_polynomial(op, j), j, nu)}
            for sgn in (1.0, -1.0):
                want = sgn * math.sqrt(-nu)
                got = min((abs(r.z - want) for r in roots.values()), default=1.0)
                worst = max(worst, got)
        return _row("indicial_closed_form", worst <= 1e-10, f"max dev {worst:.2e}")

    def chk_conjugate():
        op = symbols.make_cone_laplacian(symbols.CrossSectionSpectrum.circle(6))
        roots = [r.z for r in symbols.all_indicial_roots(op)]
        dev = max(
            min(abs(np.conj(z) - w) for w in roots) for z in roots
        )
        return _row("root_conjugate_symmetry", dev <= 1e-10, f"dev {dev:.2e}")

    def chk_gap1():
        op = symbols.make_cone_laplacian(symbols.CrossSectionSpectrum.circle(8))
        dim = symbols.domain_gap_dimension(op)
        return _row("domain_gap_circle", dim == 2, f"dim {dim}")

    def chk_gap4():
        spec = symbols.CrossSectionSpectrum.from_table(4, [(0.0, 1), (-4.0, 1)])
        op = symbols.make_cone_laplacian(spec)
        dim = symbols.domain_gap_dimension(op)
        return _row("domain_gap_dim4", dim == 0, f"dim {dim}")

    def chk_margin():
        spec = symbols.CrossSectionSpectrum.from_table(4, [(0.0, 1), (-4.0, 1)])
        op = symbols.make_cone_laplacian(spec)
        check = symbols.weight_line_invertible(op, 0.0)
        ok = check.invertible and abs(check.margin - 0.5) <= 1e-12
        return _row("weight_line_margin", ok, f"margin {check.margin}")

    def chk_arcsum():
        q = geometry.contour_nodes(geometry.KeyholeRegion(0.5, 2.0), 10.0, 40, 33, -0.5)
        s = float(np.sum(np.abs(q.segment_weights("C2"))))
        ok = abs(s - 2 * 0.5 * 2.0) <= 1e-12
        return _row("arc_weight_sum", ok, f"sum {s:.15f}")

    def chk_conj_nodes():
        q = geometry.contour_nodes(geometry.KeyholeRegion(0.5, 2.0), 10.0, 40, 33, -0.5)
        nodes = np.sort_complex(q.lambdas)
        dev = float(np.max(np.abs(np.sort_complex(np.conj(q.lambdas)) - nodes)))
        return _row("contour_conjugation", dev <= 1e-13, f"dev {dev:.2e}")

    def chk_refine():
        target = discretize.DiscreteOperator.from_matrices([np.array([[2.0]])])
        errs = []
        for n in (50, 100, 200):
            contour = calculus.auto_contour(target, -0.5, theta=3 * math.pi / 4,
                                            n_ray=n, n_arc=max(8, n // 5))
            powers, _ = calculus.dunford_powers(target, [-0.5], contour=contour)
            errs.append(abs(powers[-0.5][0][0, 0] - 2.0**-0.5))
        ok = all(errs[i + 1] <= errs[i] * (1 + 1e-6) + 1e-13 for i in range(len(errs) - 1))
        return _row("scalar_refinement", ok, f"errors {['%.1e' % e for e in errs]}")

    def chk_dunford_oracle():
        target = discretize.DiscreteOperator.from_matrices([np.diag([1.0, 4.0])])
        powers, _ = calculus.dunford_powers(target, [-0.5])
        gap = float(np.linalg.norm(powers[-0.5][0] - np.diag([1.0, 0.5]), 2))
        return _row("dunford_vs_closed_form", gap <= 1e-8, f"gap {gap:.2e}")

    def chk_semigroup():
        Q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
        A = Q @ np.diag(np.linspace(1.0, 5.0, 8)) @ Q.T
        target = discretize.DiscreteOperator.from_matrices([A])
        zs = [-0.3, -0.6]
        powers, _ = calculus.dunford_powers(target, zs)
        lhs = powers[-0.3][0] @ powers[-0.3][0]
        rhs = powers[-0.6][0]
        rel = float(np.linalg.norm(lhs - rhs, 2) / np.linalg.norm(rhs, 2))
        return _row("semigroup", rel <= 1e-6, f"rel {rel:.2e}")

    def chk_e0():
        target = discretize.DiscreteOperator.from_matrices([np.diag([0.0, 1.0])])
        proj = calculus.spectral_projection_e0(target, 0.5, 64)
        gap = float(np.linalg.norm(proj.matrices[0] - np.diag([1.0, 0.0]), 2))
        ok = gap <= 1e-8 and proj.defect <= 1e-8
        return _row("zero_projection", ok, f"gap {gap:.2e} defect {proj.defect:.2e}")

    def chk_unimodular():
        Q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
        A = Q @ np.diag(np.linspace(0.5, 9.0, 8)) @ Q.T
        target = discretize.DiscreteOperator.from_matrices([A])
        worst = 0.0
        for y in (-2.0, 1.0, 5.0):
            U = calculus.imaginary_power(target, y)[0]
            worst = max(worst, abs(np.linalg.norm(U, 2) - 1.0))
        return _row("imaginary_unimodular", worst <= 1e-6, f"dev {worst:.2e}")

    def chk_kappa():
        grid = discretize.LogGrid(-6.0, 6.0, 128, "model_cone")
        weight = symbols.WeightData(gamma=0.0, p=2.0, n=1)
        u = np.zeros(grid.N)
        u[40:80] = rng.standard_normal(40)
        spec = symbols.CrossSectionSpectrum.circle(0)
        ns = discretize.WeightedNormSpec(s=0, gamma=0.0, p=2.0)
        n0 = discretize.weighted_norm(u, ns, grid, spec)
        ku = discretize.kappa_apply(u, math.exp(4 * grid.h), grid, weight)
        n1 = discretize.weighted_norm(ku, ns, grid, spec)
        ok = abs(n0 - n1) <= 1e-12 * max(n0, 1.0)
        return _row("dilation_isometry", ok, f"|diff| {abs(n0 - n1):.2e}")

    def chk_twisted():
        op = symbols.make_cone_laplacian(symbols.CrossSectionSpectrum.circle(1))
        grid = discretize.LogGrid(-4.0, 4.0, 64, "model_cone")
        target = discretize.assemble(op, grid)
        A = target.modes[0].matrix
        lam = 2.0 + 0.7j
        worst = 0.0
        for m_sh in (1, 4):
            rho = math.exp(m_sh * grid.h)
            scale = rho**2
            lhs = scale * lam * np.eye(grid.N) - A
            shifted = np.full_like(A, np.nan, dtype=complex)
            shifted[m_sh:, m_sh:] = (lam * np.eye(grid.N) - A)[:-m_sh, :-m_sh]
            rhs = scale * shifted
            sl = slice(m_sh + 3, grid.N - m_sh - 3)
            dev = float(np.max(np.abs(lhs[sl, sl] - rhs[sl, sl])))
            worst = max(worst, dev / max(1.0, float(np.max(np.abs(lhs[sl, sl])))))
        return _row("twisted_homogeneity", worst <= 1e-10, f"rel dev {worst:.2e}")

    def chk_symmetry():
        op = symbols.make_cone_laplacian(symbols.CrossSectionSpectrum.circle(2))
        grid = discretize.LogGrid(-6.0, 6.0, 128, "model_cone")
        target = discretize.assemble(op, grid)
        worst = max(
            float(np.linalg.norm(m.matrix - m.matrix.T) / np.linalg.norm(m.matrix))
            for m in target.modes
        )
        return _row("assembled_symmetry", worst <= 1e-12, f"rel {worst:.2e}")

    def chk_heat():
        target = discretize.DiscreteOperator.from_matrices([np.array([[1.0]])])
        problem = pde.CauchyProblem(
            target=target, T=1.0, steps=1000,
            forcing=np.array([[1.0]]), stepper="bdf2",
        )
        sol = pde.solve_heat(problem)
        err = abs(sol.u[-1, 0, 0].real - (1.0 - math.exp(-1.0)))
        return _row("heat_benchmark", err <= 1e-4, f"err {err:.2e}")

    return [
        chk_indicial, chk_conjugate, chk_gap1, chk_gap4, chk_margin,
        chk_arcsum, chk_conj_nodes, chk_refine, chk_dunford_oracle,
        chk_semigroup, chk_e0, chk_unimodular, chk_kappa, chk_twisted,
        chk_symmetry, chk_heat,
    ]


def _cmd_verify(report: Report, config: RunConfig, args) -> None:
    threads = args.threads or int(os.environ.get("CONECALC_THREADS", "1"))
    rows = _verify_rows(config, config.seed, threads)
    report.invariants = rows
    report.results["n_invariants"] = len(rows)
    report.results["n_passed"] = sum(1 for r in rows if r["passed"])
    report.passed = report.passed and all(r["passed"] for r in rows)
    for r in rows:
        print(f"[{'PASS' if r['passed'] else 'FAIL'}] {r['name']}: {r['detail']}")


_COMMANDS = {
    "indicial": _cmd_indicial,
    "extensions": _cmd_extensions,
    "ellipticity": _cmd_ellipticity,
    "spectrum": _cmd_spectrum,
    "resolvent-scan": _cmd_resolvent_scan,
    "power": _cmd_power,
    "bip-scan": _cmd_bip_scan,
    "hardy-check": _cmd_hardy,
    "heat": _cmd_heat,
    "quasilinear": _cmd_quasilinear,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def run(command: str, config: RunConfig, args=None) -> Report:
    """Dispatch a command and aggregate its results into a Report."""
    if command not in _COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if args is None:
        args = argparse.Namespace(
            radii=None, p=2.0, z="-0.5", ymax=5.0, steps=9, T=None,
            stepper=None, forcing="none", a=None, c=None, f=None, u0=None,
            nr=64, nx=32, dump_matrix=False, input=None, threads=None,
        )
    t0 = time.perf_counter()
    report = Report(command=command, config=config)
    report.results["contour_defaults"] = _jsonable(dict(config.contour))
    _COMMANDS[command](report, config, args)
    report.timings["total_s"] = time.perf_counter() - t0
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="conecalc",
        description="Numerical functional calculus for cone differential operators",
    )
    parser.add_argument("--config", default=None, help="INI config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="reports", help="output directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (or CONECALC_THREADS)")
    parser.add_argument("--delta", default=None,
                        help="keyhole radius (number or 'auto')")
    parser.add_argument("--theta", type=float, default=None)
    parser.add_argument("--smax", default=None,
                        help="ray truncation log-radius (number or 'auto')")
    parser.add_argument("--nray", type=int, default=None)
    parser.add_argument("--narc", type=int, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in _COMMANDS:
        p = sub.add_parser(name)
        if name == "resolvent-scan":
            p.add_argument("--radii", default=None, help="comma separated radii")
            p.add_argument("--p", type=float, default=2.0)
        elif name == "power":
            p.add_argument("--z", default="-0.5", help="complex exponent, e.g. -0.5+1i")
            p.add_argument("--dump-matrix", action="store_true", dest="dump_matrix")
        elif name == "bip-scan":
            p.add_argument("--ymax", type=float, default=5.0)
            p.add_argument("--steps", type=int, default=9)
            p.add_argument("--p", type=float, default=2.0)
        elif name == "heat":
            p.add_argument("--T", type=float, default=None)
            p.add_argument("--steps", type=int, default=None)
            p.add_argument("--stepper", default=None,
                           choices=["backward_euler", "bdf2"])
            p.add_argument("--forcing", default="none", choices=["none", "preset"])
        elif name == "quasilinear":
            p.add_argument("--T", type=float, default=None)
            p.add_argument("--steps", type=int, default=None)
            p.add_argument("--a", default=None, help='diffusivity polynomial, e.g. "1+s^2"')
            p.add_argument("--c", type=float, default=None)
            p.add_argument("--f", default=None, choices=["gl", "none"])
            p.add_argument("--u0", default=None, choices=["bump", "zero"])
            p.add_argument("--nr", type=int, default=128)
            p.add_argument("--nx", type=int, default=64)
        elif name == "report":
            p.add_argument("--input", required=True)

    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        config.seed = args.seed
        # contour flags override the config section and are echoed in reports
        for key, val in (
            ("delta", args.delta), ("theta", args.theta),
            ("smax", args.smax), ("nray", args.nray), ("narc", args.narc),
        ):
            if val is not None:
                config.contour[key] = _coerce("contour", key, str(val))
        report = run(args.command, config, args)
        paths = write_report(report, args.out)
        for p in paths:
            print(f"wrote {p}")
    except ConecalcError as exc:
        record = {
            "schema_version": SCHEMA_VERSION,
            "error": type(exc).__name__,
            "message": str(exc),
            "fields": getattr(exc, "fields", []),
        }
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
