"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line."""

import time

import numpy as np

from affleg.cone import (
    angle_relation_residual,
    calibration_check,
    psi_modulus_residual,
    special_defect,
)
from affleg.errors import NotAffineLegendrian
from affleg.immersion import (
    deformed_clifford_torus,
    great_circle,
    heisenberg_line,
    hopf_fiber,
    perturbed_curve,
    rho_by_gram,
    torus_curve,
)
from affleg.models import eta_einstein_fit, make_model, structure_residuals
from affleg.moduli import ModuliOperators, hausdorff_distance, moduli_walk, newton_project
from affleg.stability import (
    assemble_Q,
    convexity_check,
    legendrian_second_variation_check,
    stability_check,
)
from affleg.variation import (
    density_second_derivative_fd,
    first_variation_analytic,
    first_variation_fd,
    geodesic_family_for_fd,
    legendrian_mean_curvature,
    nabla_Z_Z_geodesic,
    phi_mean_curvature,
    project_onto_modes,
    random_smooth_field,
    second_variation_analytic,
    second_variation_density,
    second_variation_fd,
    variation_field,
    volume_phi,
    weak_mean_curvature,
)

TIME_BUDGET = 60.0


class Criterion:
    """Collects (name, measured, tolerance, ok) rows and prints one summary line."""

    def __init__(self, number, title, capsys):
        self.number, self.title, self.capsys = number, title, capsys
        self.rows = []
        self.start = time.perf_counter()

    def le(self, name, measured, tol):
        self.rows.append((name, float(measured), f"<= {tol:g}", bool(measured <= tol)))

    def ge(self, name, measured, tol):
        self.rows.append((name, float(measured), f">= {tol:g}", bool(measured >= tol)))

    def true(self, name, flag):
        self.rows.append((name, float(bool(flag)), "== 1", bool(flag)))

    def finish(self):
        elapsed = time.perf_counter() - self.start
        self.rows.append(("wall time [s]", elapsed, f"<= {TIME_BUDGET:g}", elapsed <= TIME_BUDGET))
        ok = all(r[3] for r in self.rows)
        failed = [r for r in self.rows if not r[3]]
        detail = "; ".join(f"{r[0]} = {r[1]:.3e} ({r[2]})" for r in (failed or self.rows[:3]))
        with self.capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {self.number}: {self.title} | {detail}")
        assert ok, failed


def _fields(imm, rng, with_f=True):
    Y = random_smooth_field(imm.grid, rng, imm.grid.n, scale=0.5)
    f = random_smooth_field(imm.grid, rng, scale=0.5) if with_f else None
    return Y, f


def test_criterion_01_structure(capsys):
    c = Criterion(1, "Sasakian structure identities on S3, S5, H3", capsys)
    for name, n in (("sphere", 1), ("sphere", 2), ("heisenberg", 1)):
        model = make_model(name, n)
        rng = np.random.default_rng(100 + n)
        res = structure_residuals(model, model.random_points(rng, 64), rng)
        c.le(f"{name}{2 * n + 1} max residual", max(res.values()), 1e-9 if model.closed_form else 1e-7)
    c.finish()


def test_criterion_02_eta_einstein(capsys):
    c = Criterion(2, "eta-Einstein constant A", capsys)
    for name, n, A, tol in (("sphere", 1, 2, 1e-8), ("sphere", 2, 4, 1e-8), ("heisenberg", 1, -2, 1e-6)):
        model = make_model(name, n)
        rng = np.random.default_rng(200 + n)
        fitted, _, _ = eta_einstein_fit(model, model.random_points(rng, 64), rng)
        c.le(f"|A - {A}| on {name}{2 * n + 1}", np.inf if fitted is None else abs(fitted - A), tol)
    c.finish()


def test_criterion_03_rho_trichotomy(capsys):
    c = Criterion(3, "rho_phi trichotomy", capsys)
    circle = great_circle(256)
    c.le("great circle |rho - 1|", np.max(np.abs(circle.frame.rho - 1)), 1e-10)
    try:
        hopf_fiber(256).frame
        raised = False
    except NotAffineLegendrian:
        raised = True
    c.true("Hopf fiber raises NotAffineLegendrian", raised)
    curve = torus_curve(np.pi / 4, 2, 256)
    rho = curve.frame.rho
    c.true("T(pi/4,2) rho in (0,1)", 0 < rho.min() and rho.max() < 1)
    c.le("T(pi/4,2) rho vs Gram oracle", np.max(np.abs(rho - rho_by_gram(curve))), 1e-12)
    torus = deformed_clifford_torus(64)
    c.le("S5 64x64 torus rho vs Gram oracle", np.max(np.abs(torus.frame.rho - rho_by_gram(torus))), 1e-12)
    c.finish()


def test_criterion_04_first_variation(capsys):
    c = Criterion(4, "first variation of the phi-volume", capsys)
    rng = np.random.default_rng(400)
    minimal = torus_curve(np.pi / 4, 2, 256)
    # T(pi/4,2) is phi-minimal: both sides vanish, so the error is scaled by Vol_phi max|Z|
    worst = 0.0
    for _ in range(10):
        Y, f = _fields(minimal, rng)
        Z = variation_field(minimal, Y, f)
        scale = volume_phi(minimal) * np.max(minimal.model.norm(minimal.values, Z))
        exact, fd = first_variation_analytic(minimal, Y, f), first_variation_fd(minimal, Y, f)
        worst = max(worst, abs(exact - fd) / max(abs(exact), scale))
    c.le("T(pi/4,2) scaled error, 10 samples", worst, 1e-6)
    for imm in (torus_curve(0.6, 2, 256), perturbed_curve(256)):
        worst = 0.0
        for _ in range(10):
            Y, f = _fields(imm, rng)
            exact, fd = first_variation_analytic(imm, Y, f), first_variation_fd(imm, Y, f)
            worst = max(worst, abs(exact - fd) / abs(exact))
        c.le(f"{imm.label} relative error, 10 samples", worst, 1e-6)
    imm = perturbed_curve(256)
    Y, f1 = _fields(imm, rng)
    f2 = random_smooth_field(imm.grid, rng, scale=2.0)
    c.le("f-dependence", abs(first_variation_fd(imm, Y, f1) - first_variation_fd(imm, Y, f2)), 1e-8)
    for imm in (minimal, imm):
        rep = imm.reparametrize(lambda u: u + 0.3 * np.sin(u))
        c.le(f"reparametrization {imm.label}", abs(volume_phi(rep) - volume_phi(imm)), 1e-9)
    c.finish()


def test_criterion_05_mean_curvature(capsys):
    c = Criterion(5, "H_phi consistency", capsys)
    for imm in (perturbed_curve(128), torus_curve(np.pi / 4, 2, 128)):
        kmax = 6
        weak = weak_mean_curvature(imm, kmax=kmax)[..., 0]
        direct = project_onto_modes(imm, phi_mean_curvature(imm).coefficients[..., 0], kmax)
        c.le(f"weak vs direct on {imm.label}", np.max(np.abs(weak - direct)), 1e-5)
    leg = torus_curve(np.arctan(1 / np.sqrt(2)), -2, 256)
    H = legendrian_mean_curvature(leg)
    diff = phi_mean_curvature(leg).vector + leg.model.phi_of(leg.values, H)
    c.le("Legendrian H_phi + phi H", np.max(np.linalg.norm(diff, axis=-1)), 1e-7)
    c.ge("Legendrian |H| (non-trivial)", np.min(np.linalg.norm(H, axis=-1)), 0.1)
    c.finish()


def test_criterion_06_second_variation(capsys):
    c = Criterion(6, "second variation along geodesic families", capsys)
    rng = np.random.default_rng(600)
    h = 1e-2
    for imm in (torus_curve(np.pi / 4, 2, 256), perturbed_curve(256)):
        worst = 0.0
        for k in range(10):
            Y, f = _fields(imm, rng, with_f=k % 2 == 1)
            exact = second_variation_analytic(imm, Y, f)
            fd = second_variation_fd(geodesic_family_for_fd(imm, Y, f, h=h), h)
            worst = max(worst, abs(exact - fd) / abs(exact))
        c.le(f"{imm.label} relative error, 10 samples", worst, 1e-4)
    imm = perturbed_curve(256)
    Y, f = _fields(imm, rng)
    fam = geodesic_family_for_fd(imm, Y, f, h=h)
    dens = second_variation_density(imm, variation_field(imm, Y, f), nabla_Z_Z_geodesic(imm, Y, f))
    c.le("pointwise density", np.max(np.abs(dens - density_second_derivative_fd(fam, h))), 1e-4)
    circle = great_circle(256)
    Y = np.ones((256, 1))
    fd = second_variation_fd(geodesic_family_for_fd(circle, Y, None, h=h), h)
    c.le("great circle FD vs -8 pi (relative)", abs(fd + 8 * np.pi) / (8 * np.pi), 1e-3)
    c.finish()


def test_criterion_07_stability(capsys):
    c = Criterion(7, "stability, obstruction and convexity", capsys)
    circle = great_circle(129)
    verdict = stability_check(circle.model, circle)
    c.le("S3 lambda_min (< 0)", verdict.lambda_min, -1e-6)
    c.le("S3 coclosed witness Q (< 0)", verdict.coclosed_witness_Q, -1e-6)
    line = heisenberg_line(1, 64)
    verdict = stability_check(line.model, line)
    c.ge("H3 lambda_min", verdict.lambda_min, -1e-6)
    K = assemble_Q(line).curvature_blocks
    c.ge("H3 node-wise integrand", np.min(np.linalg.eigvalsh(K)), -1e-6)
    rng = np.random.default_rng(700)
    worst = np.inf
    for _ in range(5):
        Y, f = _fields(line, rng)
        worst = min(worst, convexity_check(line.model, line, Y, f, T=0.5).min_second_difference)
    c.ge("H3 min second difference, 5 geodesics", worst, -1e-6)
    c.finish()


def test_criterion_08_legendrian_reduction(capsys):
    c = Criterion(8, "Legendrian reduction on the great circle", capsys)
    circle = great_circle(128)
    u = circle.grid.axis_nodes
    fs = [np.cos(u), np.sin(2 * u), np.ones_like(u), np.cos(3 * u) + 0.2 * np.sin(u), np.exp(np.sin(u))]
    worst = max(legendrian_second_variation_check(circle, f)[2] for f in fs)
    c.le("max |general - reduced| over 5 f", worst, 1e-6)
    c.finish()


def test_criterion_09_cone_and_angle(capsys):
    c = Criterion(9, "cone, angle and calibration", capsys)
    curves = [torus_curve(np.pi / 4, 2, 256), torus_curve(0.6, 3, 256), perturbed_curve(256),
              deformed_clifford_torus(64)]
    c.le("| |psi| - rho |", max(psi_modulus_residual(imm) for imm in curves), 1e-8)
    c.le("angle relation", max(angle_relation_residual(imm) for imm in curves), 1e-5)
    consistent = True
    violation = 0.0
    for imm in curves + [great_circle(256), great_circle(256, phase=0.4)]:
        theta, defect = special_defect(imm)
        rep = calibration_check(imm, theta=theta)
        violation = max(violation, rep.max_violation)
        consistent &= rep.special == (defect < 1e-10)
        consistent &= rep.legendrian == (imm.legendrian_defect() < 1e-8)
    c.le("calibration inequality violation", violation, 1e-10)
    c.true("equality cases match special / Legendrian", consistent)
    c.le("real great circle special defect", special_defect(great_circle(256))[1], 1e-10)
    c.finish()


def test_criterion_10_moduli(capsys):
    c = Criterion(10, "moduli: spectrum, kernel, Newton, walk", capsys)
    ops65 = ModuliOperators(great_circle(65))
    expected = np.sort(np.concatenate([[4.0], 4.0 + np.repeat(np.arange(1, 33) ** 2, 2)]))
    c.le("D1 D1* spectrum vs (n+1)^2 + k^2", np.max(np.abs(ops65.laplacian_identity_spectrum() - expected)), 1e-9)

    base17 = great_circle(17)
    ops17 = ModuliOperators(base17)
    D = ops17.d1_matrix()
    kernel = D.shape[1] - np.linalg.matrix_rank(D)
    c.true("kernel dim = dim of one-forms", kernel == base17.grid.size and len(ops17.tangent_basis()) == kernel)
    codiff = np.stack([ops17.cx.codiff(col[:, None]) for col in np.eye(17)], axis=1)
    coclosed = 17 - np.linalg.matrix_rank(codiff)
    c.true("kernel = coclosed forms + mean-zero functions", coclosed + 16 == kernel)

    base = great_circle(64)
    ops = ModuliOperators(base)
    u = base.grid.axis_nodes
    g, a = ops.kernel_direction((np.cos(u) + 0.5 * np.sin(2 * u) + 0.3 * np.cos(3 * u) + 1.0)[:, None])
    state = newton_project(base, 0.2 * g, 0.2 * a, ops=ops)
    c.ge("Newton convergence order", max(state.orders) if state.orders else 0.0, 1.8)
    c.le("Newton final defect", state.history[-1], 1e-10)

    states = moduli_walk(base, (g, a), steps=5, step_size=0.02)
    clouds, ok3, ok9 = [], True, True
    for st in states:
        imm = st.immersion()
        rho = imm.frame.rho
        ok3 &= bool(0 < rho.min() <= rho.max() <= 1 and np.max(np.abs(rho - rho_by_gram(imm))) < 1e-12)
        theta, defect = special_defect(imm)
        rep = calibration_check(imm, theta=theta)
        ok9 &= bool(psi_modulus_residual(imm) < 1e-8 and angle_relation_residual(imm) < 1e-5
                    and rep.max_violation < 1e-10 and rep.special and defect < 1e-10)
        clouds.append(imm.values)
    gaps = [hausdorff_distance(x, y) for i, x in enumerate(clouds) for y in clouds[i + 1:]]
    c.true("5 walk steps", len(states) == 5)
    c.ge("min pairwise Hausdorff gap", min(gaps), 1e-6)
    c.true("walk re-passes rho suite", ok3)
    c.true("walk re-passes cone suite", ok9)
    c.finish()
