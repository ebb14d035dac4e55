"""Convergence studies on the corner domains.

A study refines the coarse mesh of one domain uniformly, regularises the
boundary datum on every level, solves, measures the L2(domain) error against
the exact solution and reports experimental orders next to the predicted
rate ``min(1/2, pi/omega - 1/2)``.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .boundary import BOUNDARY_RULES, BoundaryFunction, carstensen_interpolate, l2_project_boundary
from .domain_error import ConvergenceRecord, ExactSolution, compute_eoc, l2_domain_error
from .fem import NodalField, assemble_stiffness, export_vtk, solve_berggren, solve_regularized
from .mesh import DomainSpec, build_domain_mesh, mesh_size, prolongate_uniform, refine_uniform

log = logging.getLogger(__name__)

REGULARIZERS = {
    "l2_projection": l2_project_boundary,
    "carstensen": carstensen_interpolate,
}
_ALIASES = {"l2proj": "l2_projection", "l2": "l2_projection", "projection": "l2_projection",
            "l2_projection": "l2_projection", "carstensen": "carstensen", "c": "carstensen"}
# short labels used in file names and table headers
LABELS = {"l2_projection": "l2proj", "carstensen": "carstensen"}

DEFAULT_LEVELS = 8


class ConfigError(ValueError):
    pass


class StudyError(RuntimeError):
    """A module error raised while computing one level of a study."""


def parse_omega(text) -> float:
    """Angle in radians from a float or an expression like ``3pi/4``."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower().replace(" ", "").replace("π", "pi")
    m = re.fullmatch(r"([0-9.]*)\*?pi(?:/([0-9.]+))?", s)
    try:
        if m:
            num = float(m.group(1)) if m.group(1) else 1.0
            den = float(m.group(2)) if m.group(2) else 1.0
            return num * math.pi / den
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse angle {text!r}") from None


def canonical_regularizer(name: str) -> str:
    try:
        return _ALIASES[str(name).strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown regularizer {name!r}") from None


@dataclass(frozen=True)
class ExpectedRate:
    """Predicted L2(domain) order, reported as the supremum ``lambda - 1/2``
    on non-convex domains."""

    s: float


def expected_rate(omega: float) -> ExpectedRate:
    DomainSpec(omega)
    return ExpectedRate(min(0.5, math.pi / omega - 0.5))


@dataclass(frozen=True)
class StudyConfig:
    omega: float
    regularizer: str = "l2_projection"
    levels: int = DEFAULT_LEVELS
    datum: BoundaryFunction | None = None
    exact: Callable | None = None
    source: Callable | None = None
    boundary_rule: str = "midpoint"
    out: Path | None = None
    vtk: bool = False
    berggren_check: bool = False
    berggren_budget: int = 2000

    def __post_init__(self):
        object.__setattr__(self, "omega", parse_omega(self.omega))
        DomainSpec(self.omega)
        object.__setattr__(self, "regularizer", canonical_regularizer(self.regularizer))
        if int(self.levels) < 2:
            raise ConfigError("levels must be at least 2")
        object.__setattr__(self, "levels", int(self.levels))
        if self.boundary_rule not in BOUNDARY_RULES:
            raise ConfigError(f"boundary_rule must be one of {BOUNDARY_RULES}")
        if (self.datum is None) != (self.exact is None):
            raise ConfigError("datum and exact solution must be given together")
        if self.out is not None:
            object.__setattr__(self, "out", Path(self.out))

    def exact_solution(self) -> Callable:
        return self.exact if self.exact is not None else ExactSolution(self.omega)

    def boundary_datum(self) -> BoundaryFunction:
        if self.datum is not None:
            return self.datum
        return ExactSolution(self.omega).boundary_datum()


def affine_problem(a: float, b: float, c: float):
    """Datum and exact solution for ``g(x) = a + b x_1 + c x_2``."""

    def g(points):
        points = np.asarray(points, dtype=float)
        return a + b * points[..., 0] + c * points[..., 1]

    return BoundaryFunction(g, smoothness=1.0), g


@dataclass
class ConvergenceTable:
    omega: float
    regularizer: str
    records: list[ConvergenceRecord]
    expected: ExpectedRate
    boundary_rule: str = "midpoint"
    berggren_deviation: dict[int, float] = field(default_factory=dict)
    fields: list[NodalField] = field(default_factory=list, repr=False)


def run_study(config: StudyConfig, keep_fields: bool = False) -> ConvergenceTable:
    """Run all levels of one study; see the module docstring."""
    spec = DomainSpec(config.omega)
    u = config.boundary_datum()
    exact = config.exact_solution()
    regularize = REGULARIZERS[config.regularizer]
    mesh = build_domain_mesh(spec)
    records, fields, deviation = [], [], {}
    guess = None
    for level in range(config.levels):
        t0 = time.perf_counter()
        try:
            A = assemble_stiffness(mesh)
            uh = regularize(u, mesh, rule=config.boundary_rule)
            yh = solve_regularized(mesh, uh, config.source, x0=guess, stiffness=A)
            err = l2_domain_error(yh, exact)
            if config.berggren_check and mesh.n_vertices <= config.berggren_budget:
                deviation[level] = berggren_deviation(mesh, u, config.source, config.boundary_rule,
                                                      yh if config.regularizer == "l2_projection" else None,
                                                      A)
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            raise StudyError(f"level {level} (N={mesh.n_vertices}): "
                             f"{type(exc).__name__}: {exc}") from exc
        records.append(ConvergenceRecord(mesh_size(mesh), mesh.n_vertices, err))
        log.info("omega=%.6f %s level=%d N=%d error=%.6g (%.1fs)", config.omega,
                 config.regularizer, level, mesh.n_vertices, err, time.perf_counter() - t0)
        if keep_fields or config.vtk:
            fields.append(yh)
        if level + 1 < config.levels:
            guess = prolongate_uniform(mesh, yh.values)
            mesh = refine_uniform(mesh)
    table = ConvergenceTable(config.omega, config.regularizer, compute_eoc(records),
                             expected_rate(config.omega), config.boundary_rule, deviation, fields)
    return table


def berggren_deviation(mesh, u, f, rule, projected: NodalField | None = None, stiffness=None) -> float:
    """Max nodal difference between the three-equation solution and the
    regularised solution with the L2-projected datum."""
    if projected is None:
        projected = solve_regularized(mesh, l2_project_boundary(u, mesh, rule), f, stiffness=stiffness)
    yb = solve_berggren(mesh, u, f, rule=rule)
    return float(np.max(np.abs(yb.values - projected.values)))


# ---------------------------------------------------------------------------
# output


def _g5(x: float | None) -> str:
    return "" if x is None else format(x, "#.5g")


def table_csv(table: ConvergenceTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h", "unknowns", "error", "eoc"])
    for r in table.records:
        w.writerow([_g5(r.h), r.unknowns, _g5(r.error), _g5(r.eoc)])
    return buf.getvalue()


def table_markdown(tables: list[ConvergenceTable]) -> str:
    """Markdown table with one error/eoc column pair per regularizer."""
    if not tables:
        raise ValueError("no tables")
    head = ["mesh size h", "# unknowns"]
    for t in tables:
        head += [f"error ({LABELS[t.regularizer]})", "eoc"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for i, r in enumerate(tables[0].records):
        row = [_g5(r.h), str(r.unknowns)]
        for t in tables:
            row += [_g5(t.records[i].error), _g5(t.records[i].eoc)]
        lines.append("| " + " | ".join(row) + " |")
    exp = ["expected", ""]
    for t in tables:
        exp += ["", _g5(t.expected.s)]
    lines.append("| " + " | ".join(exp) + " |")
    return "\n".join(lines) + "\n"


def emit_outputs(table: ConvergenceTable, config: StudyConfig) -> list[Path]:
    """Write CSV, markdown and (optionally) per-level VTK files to ``config.out``."""
    if not table.records:
        raise ValueError("empty table")
    if config.out is None:
        raise ConfigError("no output directory configured")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    label = LABELS[table.regularizer]
    written = []
    path = out / f"study_{label}.csv"
    path.write_text(table_csv(table))
    written.append(path)
    path = out / f"study_{label}.md"
    path.write_text(table_markdown([table]))
    written.append(path)
    if config.vtk:
        for level, yh in enumerate(table.fields):
            path = out / f"solution_{label}_level{level}.vtk"
            export_vtk(yh, path)
            written.append(path)
    if table.berggren_deviation:
        path = out / f"berggren_{label}.csv"
        path.write_text("level,max_deviation\n" + "".join(
            f"{k},{v:.3e}\n" for k, v in sorted(table.berggren_deviation.items())))
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# config files


_KEYS = {"omega", "regularizer", "levels", "out", "vtk", "berggren_check",
         "berggren_budget", "boundary_rule", "datum"}


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in {"1", "true", "yes", "on"}:
        return True
    if v in {"0", "false", "no", "off"}:
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        values[key] = value
    return values


def config_from_mapping(values: dict) -> StudyConfig:
    kw = dict(values)
    for key in ("vtk", "berggren_check"):
        if isinstance(kw.get(key), str):
            kw[key] = _parse_bool(kw[key])
    for key in ("levels", "berggren_budget"):
        if key in kw:
            kw[key] = int(kw[key])
    datum = kw.pop("datum", None)
    if datum not in (None, "", "corner"):
        m = re.fullmatch(r"affine:([^,]+),([^,]+),([^,]+)", str(datum).replace(" ", ""))
        if not m:
            raise ConfigError(f"unknown datum {datum!r}; use 'corner' or 'affine:a,b,c'")
        kw["datum"], kw["exact"] = affine_problem(*(float(g) for g in m.groups()))
    if "omega" not in kw:
        raise ConfigError("omega is required")
    return StudyConfig(**kw)


def with_regularizer(config: StudyConfig, regularizer: str) -> StudyConfig:
    return replace(config, regularizer=regularizer)
