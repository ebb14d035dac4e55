"""``study`` command line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .study import (LABELS, ConfigError, config_from_mapping, emit_outputs, read_config, run_study,
                    table_markdown, with_regularizer)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="study",
        description="Convergence study for P1 elements with regularised rough Dirichlet data "
                    "on a corner domain.")
    p.add_argument("--omega", help="interior angle in radians or an expression like 3pi/4")
    p.add_argument("--regularizer", choices=["l2proj", "carstensen", "both"],
                   help="boundary regularisation (default l2proj)")
    p.add_argument("--levels", type=int, help="number of meshes, coarsest h = 1/2 (default 8)")
    p.add_argument("--out", help="output directory for CSV/markdown/VTK")
    p.add_argument("--vtk", action="store_true", default=None, help="write a VTK file per level")
    p.add_argument("--berggren-check", action="store_true", default=None,
                   help="compare with the three-equation discretisation on small meshes")
    p.add_argument("--berggren-budget", type=int, help="vertex budget for the check (default 2000)")
    p.add_argument("--boundary-rule", choices=["midpoint", "gauss"],
                   help="quadrature for (u, lambda_x) on the boundary (default midpoint)")
    p.add_argument("--config", help="key = value file; command line flags take precedence")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-level progress")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        values = read_config(args.config) if args.config else {}
        for key in ("omega", "regularizer", "levels", "out", "vtk", "berggren_check",
                    "berggren_budget", "boundary_rule"):
            v = getattr(args, key)
            if v is not None:
                values[key] = v
        regs = values.pop("regularizer", "l2proj")
        regs = ["l2proj", "carstensen"] if regs == "both" else [regs]
        base = config_from_mapping(values)
        tables = []
        for reg in regs:
            config = with_regularizer(base, reg)
            table = run_study(config)
            if config.out is not None:
                emit_outputs(table, config)
            tables.append(table)
        md = table_markdown(tables)
        if base.out is not None and len(tables) > 1:
            (base.out / "table.md").write_text(md)
        sys.stdout.write(md)
        for t in tables:
            for level, dev in sorted(t.berggren_deviation.items()):
                sys.stdout.write(f"berggren {LABELS[t.regularizer]} level={level} "
                                 f"max_deviation={dev:.3e}\n")
    except (ConfigError, ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(json.dumps({"status": "error", "type": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
