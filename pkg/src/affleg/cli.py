"""Command-line experiment runner.

Every subcommand builds a model and an immersion from an
:class:`~affleg.config.ExperimentConfig`, runs one verification suite and
emits a versioned JSON report (plus CSV dumps and optional SVG plots).

Exit status: 0 when every check passes, 1 when a check fails or a module
raises, 2 for usage and configuration errors.
"""

import argparse
import csv
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import cone, immersion, models, moduli, stability, variation
from .config import OPERATIONS, ConfigError, from_mapping, load_config, merge
from .errors import AffLegError

SCHEMA_VERSION = "1.0"

log = logging.getLogger("affleg")

FAMILIES = {
    "torus_curve": (lambda N, p: immersion.torus_curve(p.get("a", np.pi / 4), p.get("k", 2), N), 256),
    "great_circle": (lambda N, p: immersion.great_circle(N, p.get("phase", 0.0)), 128),
    "hopf_fiber": (lambda N, p: immersion.hopf_fiber(N), 128),
    "perturbed_curve": (lambda N, p: immersion.perturbed_curve(N, p.get("eps", 0.15)), 256),
    "clifford_torus": (lambda N, p: immersion.clifford_torus(N, p.get("phase", 0.0)), 16),
    "deformed_clifford_torus": (lambda N, p: immersion.deformed_clifford_torus(N, p.get("eps", 0.1)), 24),
    "heisenberg_line": (lambda N, p: immersion.heisenberg_line(1, N), 64),
    "heisenberg_wavy_curve": (lambda N, p: immersion.heisenberg_wavy_curve(N, p.get("eps", 0.2)), 64),
}

DEFAULT_FAMILY = {
    "rho-phi": "torus_curve",
    "first-variation": "torus_curve",
    "second-variation": "torus_curve",
    "stability-spectrum": "great_circle",
    "convexity": "heisenberg_line",
    "angle": "torus_curve",
    "calibration": "great_circle",
    "moduli-walk": "great_circle",
    "flow": "torus_curve",
}


class Report:
    """Accumulates checks and series; pass is measured <= tolerance."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.checks = []
        self.series = {}
        self.info = {}
        self.error = None

    def check(self, name, anchor, measured, tolerance):
        measured = float(measured)
        self.checks.append({
            "name": name,
            "anchor": anchor,
            "measured": measured,
            "tolerance": float(tolerance),
            "pass": bool(np.isfinite(measured) and measured <= tolerance),
        })

    def add_series(self, name, x, y, xlabel="", ylabel=""):
        self.series[name] = {
            "x": [float(v) for v in np.ravel(x)],
            "y": [float(v) for v in np.ravel(y)],
            "xlabel": xlabel,
            "ylabel": ylabel,
        }

    @property
    def passed(self):
        return self.error is None and all(c["pass"] for c in self.checks)

    def as_dict(self, wall_time=None):
        out = {
            "schema_version": SCHEMA_VERSION,
            "operation": self.cfg.operation,
            "config": self.cfg.as_dict(),
            "checks": self.checks,
            "series": self.series,
            "info": self.info,
            "error": self.error,
            "pass": self.passed,
            "environment": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
        }
        if wall_time is not None:
            out["wall_time"] = wall_time
        return out


# -- builders -----------------------------------------------------------------

def build_immersion(cfg):
    name = cfg.family or DEFAULT_FAMILY[cfg.operation]
    if name not in FAMILIES:
        raise ConfigError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}")
    make, default_N = FAMILIES[name]
    return make(cfg.N or default_N, cfg.params)


def _rng(cfg):
    return np.random.default_rng(cfg.seed)


def _curve_axis(imm):
    nodes = imm.grid.axis_nodes
    return nodes


def _first_row(field):
    field = np.asarray(field)
    return field if field.ndim == 1 else field[:, 0]


def first_variation_scale(imm, Y, f):
    """Natural size of a first variation, Vol_phi * max|Z|.

    Used as a floor for the relative error so that phi-minimal immersions,
    where both sides vanish, are not judged by the ratio of two roundoffs.
    """
    Z = variation.variation_field(imm, Y, f)
    return variation.volume_phi(imm) * float(np.max(imm.model.norm(imm.values, Z)))


def relative_error(exact, approx, scale=0.0):
    return abs(exact - approx) / max(abs(exact), scale, 1e-300)


# -- suites -------------------------------------------------------------------

def run_verify_structure(cfg, rep):
    model = models.make_model(cfg.model, cfg.n, **cfg.params)
    rng = _rng(cfg)
    points = model.random_points(rng, cfg.samples or 64)
    tol = cfg.tol("structure_closed_form") if model.closed_form else cfg.tol("structure")
    for name, value in sorted(models.structure_residuals(model, points, rng).items()):
        rep.check(name, "Sasakian structure identity", value, tol)
    A, B, resid = models.eta_einstein_fit(model, points, rng)
    expected = model.expected_A
    rep.info["eta_einstein"] = {"A": A, "B": B, "residual": resid}
    if expected is not None:
        key = "eta_einstein_sphere" if cfg.model == "sphere" else "eta_einstein_heisenberg"
        measured = np.inf if A is None else abs(A - expected)
        rep.check("eta-Einstein constant A", "eta-Einstein fit", measured, cfg.tol(key))


def run_rho_phi(cfg, rep):
    imm = build_immersion(cfg)
    rho = imm.frame.rho
    rep.info["label"] = imm.label
    rep.check("rho_phi vs Gram determinant", "rho_phi equality",
              np.max(np.abs(rho - immersion.rho_by_gram(imm))), cfg.tol("rho_oracle"))
    rep.check("rho_phi <= 1", "rho_phi range", max(float(np.max(rho)) - 1.0, 0.0),
              cfg.tol("rho_legendrian"))
    if imm.legendrian_defect() < 1e-10:
        rep.check("rho_phi = 1 on Legendrian", "rho_phi range", np.max(np.abs(rho - 1)),
                  cfg.tol("rho_legendrian"))
    rep.info["rho_min"] = float(np.min(rho))
    rep.info["rho_max"] = float(np.max(rho))
    rep.add_series("rho_phi", _curve_axis(imm), _first_row(rho), "u", "rho_phi")


def run_first_variation(cfg, rep):
    imm = build_immersion(cfg)
    rng = _rng(cfg)
    n = imm.grid.n
    worst = 0.0
    for _ in range(cfg.samples or 10):
        Y = variation.random_smooth_field(imm.grid, rng, n, scale=0.5)
        f = variation.random_smooth_field(imm.grid, rng, scale=0.5)
        exact = variation.first_variation_analytic(imm, Y, f)
        fd = variation.first_variation_fd(imm, Y, f)
        worst = max(worst, relative_error(exact, fd, first_variation_scale(imm, Y, f)))
    rep.check("analytic vs Richardson FD (relative)", "first variation of phi-volume",
              worst, cfg.tol("first_variation"))
    Y = variation.random_smooth_field(imm.grid, rng, n, scale=0.5)
    f1 = variation.random_smooth_field(imm.grid, rng)
    f2 = variation.random_smooth_field(imm.grid, rng)
    delta = abs(variation.first_variation_fd(imm, Y, f1) - variation.first_variation_fd(imm, Y, f2))
    rep.check("independence of f", "first variation of phi-volume", delta, 1e-8)
    reparam = imm.reparametrize(lambda u: u + 0.3 * np.sin(u[..., ::-1] if n == 2 else u))
    rep.check("reparametrization invariance of Vol_phi", "diffeomorphism invariance",
              abs(variation.volume_phi(imm) - variation.volume_phi(reparam)), 1e-9)
    H = variation.phi_mean_curvature(imm)
    rep.info["max_H_phi"] = H.max_norm()
    rep.add_series("H_phi", _curve_axis(imm), _first_row(np.linalg.norm(H.coefficients, axis=-1)),
                   "u", "|H_phi|")


def run_second_variation(cfg, rep):
    imm = build_immersion(cfg)
    rng = _rng(cfg)
    n = imm.grid.n
    h = 1e-2
    worst = 0.0
    for k in range(cfg.samples or 4):
        Y = variation.random_smooth_field(imm.grid, rng, n, scale=0.5)
        f = None if k % 2 == 0 else variation.random_smooth_field(imm.grid, rng, scale=0.5)
        exact = variation.second_variation_analytic(imm, Y, f)
        fam = variation.geodesic_family_for_fd(imm, Y, f, h=h)
        fd = variation.second_variation_fd(fam, h)
        worst = max(worst, abs(exact - fd) / max(abs(exact), 1e-12))
    rep.check("analytic vs FD along geodesics (relative)", "second variation of phi-volume",
              worst, cfg.tol("second_variation"))
    Y = variation.random_smooth_field(imm.grid, rng, n, scale=0.5)
    f = variation.random_smooth_field(imm.grid, rng, scale=0.5)
    fam = variation.geodesic_family_for_fd(imm, Y, f, h=h)
    Z = variation.variation_field(imm, Y, f)
    dens = variation.second_variation_density(imm, Z, variation.nabla_Z_Z_geodesic(imm, Y, f))
    fd = variation.density_second_derivative_fd(fam, h)
    rep.check("pointwise density vs FD", "second variation of the phi-volume form",
              np.max(np.abs(dens - fd)) / max(np.max(np.abs(fd)), 1.0), cfg.tol("density"))
    if imm.legendrian_defect() < 1e-10 and cfg.family == "great_circle":
        Y = np.ones(imm.grid.shape + (1,))
        fam = variation.geodesic_family_for_fd(imm, Y, None, h=h)
        fd = variation.second_variation_fd(fam, h)
        rep.check("great circle unit tangent = -8 pi (relative)", "closed value",
                  abs(fd + 8 * np.pi) / (8 * np.pi), 1e-3)


def run_stability_spectrum(cfg, rep):
    imm = build_immersion(cfg)
    tol = cfg.tol("stability")
    verdict = stability.stability_check(imm.model, imm, _rng(cfg))
    rep.info["verdict"] = verdict.as_dict()
    rep.check("generalized eigen-residual", "Galerkin eigenproblem", verdict.eigen_residual, 1e-8)
    if verdict.A <= -2 + 1e-8:
        rep.check("lambda_min >= 0 (A <= -2)", "stability threshold", -verdict.lambda_min, tol)
        K = stability.assemble_Q(imm).curvature_blocks
        rep.check("node-wise integrand nonnegative", "stability threshold",
                  max(-float(np.min(np.linalg.eigvalsh(K))), 0.0), tol)
    else:
        rep.check("lambda_min < 0 (A > -2)", "instability obstruction", verdict.lambda_min, -tol)
        rep.check("coclosed witness Q < 0", "instability obstruction",
                  verdict.coclosed_witness_Q, -tol)
    vals = stability.spectrum(imm, k=min(12, imm.grid.size * imm.grid.n))
    rep.add_series("spectrum", np.arange(len(vals)), vals, "index", "eigenvalue")


def run_convexity(cfg, rep):
    imm = build_immersion(cfg)
    rng = _rng(cfg)
    n = imm.grid.n
    worst = np.inf
    for k in range(cfg.samples or 5):
        Y = variation.random_smooth_field(imm.grid, rng, n, scale=0.4)
        f = variation.random_smooth_field(imm.grid, rng, scale=0.4)
        r = stability.convexity_check(imm.model, imm, Y, f, T=cfg.T, tol=cfg.tol("convexity"))
        worst = min(worst, r.min_second_difference)
        if k == 0:
            rep.add_series("volume_along_geodesic", r.times, r.volumes, "t", "Vol_phi")
    rep.check("min second difference of Vol_phi (negated)", "convexity along geodesics",
              -worst, cfg.tol("convexity"))


def run_angle(cfg, rep):
    imm = build_immersion(cfg)
    rep.check("|psi| = rho_phi", "modulus of psi", cone.psi_modulus_residual(imm), cfg.tol("psi_modulus"))
    rep.check("d theta vs -(n+1) xi^T + H_phi", "angle and mean curvature",
              cone.angle_relation_residual(imm), cfg.tol("angle_relation"))
    angle = cone.affine_angle(imm)
    rep.add_series("angle", _curve_axis(imm), _first_row(angle.theta), "u", "theta")


def run_calibration(cfg, rep):
    imm = build_immersion(cfg)
    theta, defect = cone.special_defect(imm)
    tol = cfg.tol("calibration")
    report = cone.calibration_check(imm, theta=theta, tol=tol)
    rep.info.update(theta=theta, special_defect=defect, calibration=report.as_dict())
    rep.check("calibration inequalities", "phi-calibration", report.max_violation, tol)
    rep.check("special flag consistent", "phi-calibration equality",
              float(report.special != (defect < tol)), 0.5)
    legendrian = imm.legendrian_defect() < 1e-8
    rep.check("Legendrian flag consistent", "phi-calibration equality",
              float(report.legendrian != legendrian), 0.5)
    if cfg.family in (None, "great_circle") and cfg.params.get("phase", 0.0) == 0.0:
        rep.check("real great circle is special", "special condition", defect, cfg.tol("special"))


def default_kernel_direction(ops):
    """Kernel direction from a fixed low-mode one-form."""
    u = ops.base.grid.nodes[..., 0]
    alpha = (np.cos(u) + 0.5 * np.sin(2 * u) + 0.3 * np.cos(3 * u) + 1.0)[..., None]
    return ops.kernel_direction(alpha)


def run_moduli_walk(cfg, rep):
    base = build_immersion(cfg)
    ops = moduli.ModuliOperators(base)
    direction = default_kernel_direction(ops)
    states = moduli.moduli_walk(base, direction, steps=cfg.steps, step_size=cfg.step_size)
    tol = cfg.tol("moduli_defect")
    clouds = []
    history, hx = [], []
    for k, st in enumerate(states):
        imm = st.immersion()
        theta, defect = cone.special_defect(imm)
        rep.check(f"step {k + 1} special defect", "special affine Legendrian", defect, tol)
        rep.check(f"step {k + 1} phase", "special affine Legendrian", abs(theta), tol)
        clouds.append(imm.values)
        history.extend(st.history)
        hx.extend(range(len(st.history)))
    gaps = [moduli.hausdorff_distance(a, b) for i, a in enumerate(clouds) for b in clouds[i + 1:]]
    if gaps:
        rep.check("distinct embeddings (negated min Hausdorff gap)", "moduli walk", -min(gaps), -1e-6)
    rep.add_series("newton_residual", np.arange(len(history)), history, "iteration", "|F|")


def run_flow(cfg, rep):
    imm = build_immersion(cfg)
    rng = _rng(cfg)
    Y = variation.random_smooth_field(imm.grid, rng, imm.grid.n, scale=0.5)
    f = variation.random_smooth_field(imm.grid, rng, scale=0.5)
    fam = variation.geodesic_evolve(imm, Y, f, T=cfg.T)
    rep.check("commutator [iota_* Y, Z]", "geodesic family",
              float(np.max(fam.commutator)) if fam.commutator.size else 0.0, cfg.tol("commutator"))
    stride = max(1, len(fam.times) // 50)
    idx = np.arange(0, len(fam.times), stride)
    vols = [variation.volume_phi(fam.immersion(k)) for k in idx]
    rep.add_series("volume_along_geodesic", fam.times[idx], vols, "t", "Vol_phi")


SUITES = {
    "verify-structure": run_verify_structure,
    "rho-phi": run_rho_phi,
    "first-variation": run_first_variation,
    "second-variation": run_second_variation,
    "stability-spectrum": run_stability_spectrum,
    "convexity": run_convexity,
    "angle": run_angle,
    "calibration": run_calibration,
    "moduli-walk": run_moduli_walk,
    "flow": run_flow,
}


def run(cfg):
    """Run one suite; module errors are recorded in the report."""
    rep = Report(cfg)
    try:
        SUITES[cfg.operation](cfg, rep)
    except AffLegError as exc:
        rep.error = f"{type(exc).__name__}: {exc}"
    return rep


# -- output -------------------------------------------------------------------

def write_outputs(report, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    with open(directory / "checks.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "anchor", "measured", "tolerance", "pass"])
        for c in report["checks"]:
            writer.writerow([c["name"], c["anchor"], repr(c["measured"]), repr(c["tolerance"]), c["pass"]])
    for name, s in report["series"].items():
        with open(directory / f"series_{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([s["xlabel"] or "x", s["ylabel"] or "y"])
            writer.writerows(zip(map(repr, s["x"]), map(repr, s["y"])))


def build_parser():
    parser = argparse.ArgumentParser(prog="affleg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="operation", required=True)
    for op in OPERATIONS:
        p = sub.add_parser(op)
        p.add_argument("--config", help="YAML or JSON experiment file")
        p.add_argument("--model", choices=("sphere", "heisenberg"))
        p.add_argument("--n", type=int)
        p.add_argument("--family", choices=sorted(FAMILIES))
        p.add_argument("--N", type=int, help="grid nodes per axis")
        p.add_argument("--a", type=float, help="torus_curve angle")
        p.add_argument("--k", type=float, help="torus_curve winding")
        p.add_argument("--phase", type=float)
        p.add_argument("--eps", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--steps", type=int)
        p.add_argument("--step-size", type=float)
        p.add_argument("--T", type=float, help="geodesic time span")
        p.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE")
        p.add_argument("--output", help="directory for report.json and CSV dumps")
        p.add_argument("--plots", help="directory for SVG plots")
        p.add_argument("--wall-time", action="store_true", default=None,
                       help="include wall time (breaks byte-identical reports)")
    return parser


def config_from_args(args):
    data = load_config(args.config) if args.config else {}
    if args.config and data.get("operation", args.operation) != args.operation:
        raise ConfigError("configuration operation differs from the subcommand")
    params = {k: getattr(args, k) for k in ("a", "k", "phase", "eps") if getattr(args, k) is not None}
    tolerances = {}
    for item in args.tol:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tol expects KEY=VALUE, got {item!r}")
        try:
            tolerances[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"tolerance {key} is not a number") from exc
    overrides = {
        "operation": args.operation, "model": args.model, "n": args.n, "family": args.family,
        "N": args.N, "seed": args.seed, "samples": args.samples, "steps": args.steps,
        "step_size": args.step_size, "T": args.T, "output": args.output, "plots": args.plots,
        "wall_time": args.wall_time, "params": params or None, "tolerances": tolerances or None,
    }
    return from_mapping(merge(data, overrides))


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    start = time.perf_counter()
    rep = run(cfg)
    elapsed = time.perf_counter() - start
    report = rep.as_dict(wall_time=elapsed if cfg.wall_time else None)
    if cfg.output:
        try:
            write_outputs(report, cfg.output)
        except OSError as exc:
            print(f"cannot write report: {exc}", file=sys.stderr)
            return 2
    else:
        print(json.dumps(report, indent=2, sort_keys=True))
    if cfg.plots:
        from .plots import emit_plots

        try:
            emit_plots(report, cfg.plots)
        except OSError as exc:
            log.warning("plot emission failed: %s", exc)
    for c in report["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {c['name']}: {c['measured']:.3e} (tol {c['tolerance']:.1e})", file=sys.stderr)
    if rep.error:
        print(f"ERROR {rep.error}", file=sys.stderr)
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
