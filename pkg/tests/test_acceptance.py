"""End-to-end acceptance checks.

Every check prints one ``PASS`` or ``FAIL`` line (also without ``-s``) and
then asserts. The three convergence studies run once per module and take
about two minutes in total.
"""
import math
from functools import lru_cache

import numpy as np
import pytest

from cornerfem.boundary import (BoundaryField, BoundaryFunction, boundary_l2_error,
                                boundary_l2_norm, carstensen_interpolate, constant, field_l2_norm,
                                l2_project_boundary)
from cornerfem.domain_error import ExactSolution, integrate_function, l2_domain_error
from cornerfem.fem import assemble_stiffness, solve_berggren, solve_regularized
from cornerfem.mesh import (DomainSpec, build_domain_mesh, mesh_from_arrays, mesh_hierarchy,
                            mesh_size, prolongate_uniform, refine_uniform, square_mesh)
from cornerfem.study import StudyConfig, run_study

from oracles import (SMOOTH, monomial_on_triangle, quad_load_vector, quad_mass_matrix,
                     random_datum, step_datum)

CONVEX, LSHAPE, SLIT = 3 * math.pi / 4, 3 * math.pi / 2, 355 * math.pi / 180
DOMAINS = {"3pi/4": CONVEX, "3pi/2": LSHAPE, "355pi/180": SLIT}

# published reference tables: (unknowns, error with L2 projection, error with Carstensen)
REFERENCE = {
    CONVEX: [(19, 0.26142, 0.26794), (61, 0.18577, 0.18973), (217, 0.13172, 0.13426),
             (817, 0.09331, 0.09497), (3169, 0.06605, 0.06717), (12481, 0.04674, 0.04750),
             (49537, 0.03306, 0.03359), (197377, 0.02338, 0.02375)],
    LSHAPE: [(33, 0.73622, 0.77007), (113, 0.64484, 0.67086), (417, 0.56841, 0.58915),
             (1601, 0.50328, 0.52022), (6273, 0.44674, 0.46091), (24833, 0.39711, 0.40920),
             (98817, 0.35330, 0.36376), (394241, 0.31448, 0.32362)],
    SLIT: [(46, 1.1049, 1.1141), (159, 1.0693, 1.0732), (589, 1.0491, 1.0513),
           (2265, 1.0367, 1.0384), (8881, 1.0281, 1.0296), (35169, 1.0213, 1.0228),
           (139969, 1.0154, 1.0169), (558465, 1.0100, 1.0114)],
}
REGULARIZERS = ("l2_projection", "carstensen")


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail}")
        assert ok, detail

    return emit


@lru_cache(maxsize=None)
def study(omega, regularizer):
    return run_study(StudyConfig(omega, regularizer=regularizer, levels=8))


def _table_check(omega, band):
    ref = REFERENCE[omega]
    worst, eocs, lines = 0.0, {}, []
    for col, reg in enumerate(REGULARIZERS, start=1):
        records = study(omega, reg).records
        for level, r in enumerate(records):
            dev = abs(r.error / ref[level][col] - 1)
            worst = max(worst, dev)
        eocs[reg] = [r.eoc for r in records[1:]]
        lines.append(f"{reg}: final error {records[-1].error:.5f}, final eoc {eocs[reg][-1]:.5f}")
    return worst <= band, worst, eocs, "; ".join(lines)


# ---------------------------------------------------------------------------
# 1-3: convergence tables


@pytest.mark.slow
def test_convex_rate(report):
    within, worst, eocs, detail = _table_check(CONVEX, 0.10)
    rate_ok = all(abs(e[-1] - 0.5) <= 0.02 for e in eocs.values())
    report(1, "convex sector 3pi/4", within and rate_ok,
           f"{detail}; max deviation from table {worst:.2%} (limit 10%)")


@pytest.mark.slow
def test_reentrant_rate(report):
    within, worst, eocs, detail = _table_check(LSHAPE, 0.10)
    rate_ok = all(abs(e[-1] - 0.168) <= 0.02 for e in eocs.values())
    report(2, "L-shape 3pi/2", within and rate_ok,
           f"{detail}; max deviation from table {worst:.2%} (limit 10%)")


@pytest.mark.slow
def test_near_slit_degeneration(report):
    # the coarse mesh has 45 vertices against 46 in the reference, so the
    # wider band for differing initial meshes applies
    within, worst, eocs, detail = _table_check(SLIT, 0.15)
    # eoc[k] belongs to level k + 1; "from level 3 onward" compares levels 3..7
    decreasing = all(all(b < a for a, b in zip(e[2:], e[3:])) for e in eocs.values())
    final_ok = all(0.005 < e[-1] < 0.02 for e in eocs.values())
    report(3, "near slit 355pi/180", within and decreasing and final_ok,
           f"{detail}; eoc strictly decreasing from level 3: {decreasing}; "
           f"max deviation from table {worst:.2%} (limit 15%)")


# ---------------------------------------------------------------------------
# 4: three-equation discretisation


def test_berggren_equivalence(report):
    worst = 0.0
    for omega in DOMAINS.values():
        u = ExactSolution(omega).boundary_datum()
        for mesh in mesh_hierarchy(DomainSpec(omega), 3):  # h = 1/2, 1/4, 1/8
            for rule in ("gauss", "midpoint"):
                yb = solve_berggren(mesh, u, rule=rule)
                yr = solve_regularized(mesh, l2_project_boundary(u, mesh, rule))
                worst = max(worst, float(np.max(np.abs(yb.values - yr.values))))
    report(4, "three-equation solution equals projected-datum solution", worst <= 1e-8,
           f"max nodal difference {worst:.2e} (limit 1e-8)")


# ---------------------------------------------------------------------------
# 5: affine exactness


@pytest.mark.slow
def test_affine_exactness(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for omega in DOMAINS.values():
        coeffs = rng.uniform(-3, 3, size=(10, 3))
        exact = [lambda p, c=c: c[0] + c[1] * p[..., 0] + c[2] * p[..., 1] for c in coeffs]
        guesses = [None] * 10
        mesh = build_domain_mesh(DomainSpec(omega))
        for level in range(8):
            A = assemble_stiffness(mesh)
            for k, g in enumerate(exact):
                uh = l2_project_boundary(BoundaryFunction(g), mesh)
                yh = solve_regularized(mesh, uh, x0=guesses[k], stiffness=A)
                worst = max(worst, l2_domain_error(yh, g))
                if level < 7:
                    guesses[k] = prolongate_uniform(mesh, yh.values)
            if level < 7:
                mesh = refine_uniform(mesh)
    report(5, "affine solutions, 10 per domain, 8 levels", worst <= 1e-10,
           f"max L2 error {worst:.2e} (limit 1e-10)")


# ---------------------------------------------------------------------------
# 6: Carstensen interpolant


def test_carstensen_properties(report):
    rng = np.random.default_rng(6)
    meshes = {omega: mesh_hierarchy(DomainSpec(omega), 6) for omega in DOMAINS.values()}

    const_err = max(np.max(np.abs(carstensen_interpolate(constant(c), m, rule=rule).values - c))
                    for ms in meshes.values() for m in ms[:3]
                    for c in (-2.0, 0.5, 3.0) for rule in ("gauss", "midpoint"))

    range_ok = True
    small = [m for ms in meshes.values() for m in ms[:3]]
    for trial in range(100):
        lo, hi = np.sort(rng.uniform(-5, 5, 2))
        vals = carstensen_interpolate(random_datum(rng, lo, hi), small[trial % len(small)]).values
        range_ok &= bool(vals.min() >= lo - 1e-12 and vals.max() <= hi + 1e-12)

    ms = meshes[LSHAPE]
    data = [ExactSolution(LSHAPE).boundary_datum(), SMOOTH]
    data += [random_datum(rng, -1, 1) for _ in range(3)] + [step_datum(rng) for _ in range(3)]
    ratios = np.array([[field_l2_norm(carstensen_interpolate(u, m)) / boundary_l2_norm(u, m)
                        for u in data] for m in ms])
    calibrated = 1.5 * ratios[0].max()
    stable = bool(np.all(ratios <= calibrated))

    ms = meshes[CONVEX]
    h = np.array([mesh_size(m) for m in ms])
    err = np.array([boundary_l2_error(SMOOTH, carstensen_interpolate(SMOOTH, m)) for m in ms])
    rates = np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])

    # exact up to the roundoff of one division per node
    ok = const_err <= 1e-14 and range_ok and stable and rates[-1] >= 0.95
    report(6, "Carstensen interpolant", ok,
           f"constants max error {const_err:.1e} (limit 1e-14); range preserved on 100 data: {range_ok}; "
           f"stability ratio max {ratios.max():.4f} <= calibrated {calibrated:.4f} over "
           f"{len(ratios)} levels; smooth-datum eoc {rates[-1]:.3f} (limit 0.95)")


# ---------------------------------------------------------------------------
# 7: L2 projection


def test_projection_properties(report):
    rng = np.random.default_rng(7)
    idem = 0.0
    for omega in DOMAINS.values():
        for m in mesh_hierarchy(DomainSpec(omega), 4):
            uh = BoundaryField(m, rng.standard_normal(len(m.boundary_edges)))
            idem = max(idem, float(np.max(np.abs(l2_project_boundary(uh.as_function(), m).values
                                                 - uh.values))))
            yh = solve_regularized(m, l2_project_boundary(uh.as_function(), m))
            idem = max(idem, float(np.max(np.abs(yh.boundary_field().values - uh.values))))

    oracle = 0.0
    for m in [square_mesh(2), square_mesh(4)] + [build_domain_mesh(DomainSpec(w))
                                                 for w in DOMAINS.values()]:
        c = np.linalg.solve(quad_mass_matrix(m), quad_load_vector(SMOOTH, m))
        oracle = max(oracle, float(np.max(np.abs(l2_project_boundary(SMOOTH, m).values - c))))
    report(7, "boundary L2 projection", idem <= 1e-10 and oracle <= 1e-10,
           f"idempotence and trace identity {idem:.1e}; dense normal equations {oracle:.1e} "
           f"(limit 1e-10)")


# ---------------------------------------------------------------------------
# 8: quadrature


def test_quadrature_oracles(report):
    worst = 0.0
    for P in ([(0.25, 0.125), (0.75, 0.25), (0.5, 0.875)],
              [(0.0, 0.0), (1.0, 0.0), (0.25, 0.5)],
              [(-0.5, -1.0), (1.0, -0.25), (-1.0, 1.0)]):
        mesh = mesh_from_arrays(np.array(P), [[0, 1, 2]])
        for i in range(7):
            for j in range(7 - i):
                got = integrate_function(mesh, lambda p: p[..., 0] ** i * p[..., 1] ** j)
                exact = monomial_on_triangle(P, i, j)
                worst = max(worst, abs(got - exact) / max(1.0, abs(exact)))

    stability = 0.0
    for omega in DOMAINS.values():
        y = ExactSolution(omega)
        for m in mesh_hierarchy(DomainSpec(omega), 3):
            yh = solve_regularized(m, l2_project_boundary(y.boundary_datum(), m))
            full = l2_domain_error(yh, y)
            half = l2_domain_error(yh, y, grading_depth=20)
            stability = max(stability, abs(full - half) / full)
    report(8, "domain quadrature", worst <= 1e-12 and stability <= 1e-6,
           f"degree <= 6 monomials {worst:.1e} (limit 1e-12); "
           f"halved grading depth changes error by {stability:.1e} relative (limit 1e-6)")
