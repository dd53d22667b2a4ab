"""
ERKC Delay-Parabolic Solver - Command Line Entry Point

Subcommands:
1. disc      → primary discontinuity points of a benchmark delay (CSV)
2. run       → one integration, final-time solution as CSV
3. converge  → step-size sweep, errors, pairwise orders and fitted slope (CSV)
4. selftest  → phi / order-condition / oracle property suites

Configuration: config.yaml defaults, then --config <key=value file>, then
--set section.key=value, then explicit flags.
Exit codes: 0 success, 1 usage error, 2 solver error.
"""

import argparse
import io
import logging
import math
import sys
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from dotenv import load_dotenv

# Load environment variables FIRST (ERKC_MAX_WORKERS)
load_dotenv()

from integrators.erkc_integrator import MethodConfig, integrate, normalize_method
from services.config_service import (
    apply_overrides,
    get_config,
    max_workers,
    read_plain_config,
    setup_logging,
)
from services.history_store import check_node_consistency, dump_dense_csv
from tools.convergence_tool import ConvergenceStudy, parse_step_sizes, run_study, write_study_csv
from tools.delay_mesh import DelaySpec, build_mesh, compute_discontinuities, disc_table
from tools.errors import ERKCError
from tools.phi_functions import (
    check_order_conditions,
    make_scheme,
    phi,
    radau_scheme,
    scheme_from_name,
    weight_b,
)
from tools.problem_defs import ProblemSpec, get_problem
from tools.spectral_operator import explicit_diagonal, grid_points

logger = logging.getLogger(__name__)

MESH_POLICIES = {
    "constrained": "constrained_uniform",
    "per-segment": "per_segment_uniform",
    "constrained_uniform": "constrained_uniform",
    "per_segment_uniform": "per_segment_uniform",
}


class UsageError(Exception):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ==================== Orchestrator ====================

class ERKCOrchestrator:
    """
    Runs one CLI command against the merged configuration.

    Each command writes CSV to the given stream and returns an exit code.
    """

    def __init__(self, config: Dict, out):
        self.config = config
        self.out = out

    # ---------- helpers ----------

    def _problem(self, label: str, n: Optional[int], source: Optional[str]):
        n = n or self.config["operator"]["n"]
        kwargs = {}
        if label in ("ex1", "ex4"):
            kwargs["source"] = source or self.config["operator"]["source"]
        return get_problem(label, n, **kwargs)

    def _method_config(self, args) -> MethodConfig:
        section = self.config["integrator"]
        scheme = scheme_from_name(args.scheme or section["scheme"], args.s or section["s"])
        return MethodConfig(
            method=normalize_method(args.method or section["method"]),
            scheme=scheme,
            fp_tol=args.fp_tol or section["fp_tol"],
            fp_max_iter=args.fp_max_iter or section["fp_max_iter"],
            track_global_error=getattr(args, "global_error", False),
            measure_residual=section.get("measure_residual", False),
            prune_history=self.config["history"]["prune"],
        )

    def _policy(self, name: Optional[str]) -> str:
        name = name or self.config["mesh"]["policy"]
        if name not in MESH_POLICIES:
            raise UsageError(f"unknown mesh policy '{name}'")
        return MESH_POLICIES[name]

    def _write(self, frame: pd.DataFrame, out_path: Optional[str], header: str) -> None:
        buffer = io.StringIO()
        buffer.write(f"#schema={self.config['output']['schema']} {header}\n")
        frame.to_csv(buffer, index=False, float_format=self.config["output"]["float_format"], lineterminator="\n")
        if out_path:
            with open(out_path, "w", encoding="utf-8") as handle:
                handle.write(buffer.getvalue())
            logger.info("wrote %s", out_path)
        else:
            self.out.write(buffer.getvalue())

    # ---------- commands ----------

    def disc(self, args) -> int:
        problem = self._problem(args.problem, 4, None)
        disc = compute_discontinuities(problem.delay, problem.T, tol=self.config["mesh"]["root_tol"])
        self._write(disc_table(disc), args.out, f"problem={problem.label}")
        return 0

    def run(self, args) -> int:
        problem = self._problem(args.problem, args.n, args.source)
        config = self._method_config(args)
        h = parse_step_sizes(args.h)[0] if args.h else float(self.config["mesh"]["base_h"])
        disc = compute_discontinuities(problem.delay, problem.T, tol=self.config["mesh"]["root_tol"])
        mesh = build_mesh(disc, h, policy=self._policy(args.mesh), merge_rtol=self.config["mesh"]["merge_rtol"])
        trajectory = integrate(problem, mesh, config)

        coords = grid_points(problem.operator)
        if isinstance(coords, tuple):
            frame = pd.DataFrame({"x": coords[0], "y": coords[1]})
        else:
            frame = pd.DataFrame({"x": coords})
        frame["u"] = trajectory.final
        if problem.has_exact:
            frame["exact"] = problem.exact(mesh.T)
        self._write(
            frame, args.out,
            f"problem={problem.label} method={config.method} scheme={config.scheme.name} "
            f"s={config.scheme.s} h={h:g} T={mesh.T:g}",
        )
        report = trajectory.report
        logger.info("run report: %s", report)
        if args.dense_out:
            times = np.linspace(mesh.disc.history_start, mesh.T, args.dense_samples)
            dump_dense_csv(trajectory.store, times, args.dense_out)
        if args.timing:
            self.out.write(
                f"#wall_time={report['wall_time']:.6f}s steps={report['steps']} "
                f"mean_sweeps={report['fp_iterations']['mean']:.3f}\n"
            )
        return 0

    def converge(self, args) -> int:
        harness = self.config["harness"]
        study = ConvergenceStudy(
            problem=args.problem,
            method=args.method or self.config["integrator"]["method"],
            scheme=args.scheme or self.config["integrator"]["scheme"],
            s=args.s or self.config["integrator"]["s"],
            hs=tuple(parse_step_sizes(args.hs or harness["hs"])),
            n=args.n or self.config["operator"]["n"],
            norm=(args.norm or harness["norm"]).lower(),
            alpha=args.alpha if args.alpha is not None else harness["alpha"],
            reference=args.reference or harness["reference"],
            reference_scheme=harness["reference_scheme"],
            reference_s=harness["reference_s"],
            reference_h=args.h_ref or harness["reference_h"],
            source=args.source or self.config["operator"]["source"],
            mesh_policy=self._policy(args.mesh),
            fp_tol=args.fp_tol or self.config["integrator"]["fp_tol"],
            fp_max_iter=args.fp_max_iter or self.config["integrator"]["fp_max_iter"],
            global_error=args.global_error,
            floor_factor=harness["floor_factor"],
        )
        workers = args.workers or max_workers(self.config)
        fit, frame = run_study(study, max_workers=workers)
        write_study_csv(
            study, fit, frame,
            out=args.out or self.out,
            float_format=self.config["output"]["float_format"],
        )
        return 0

    def selftest(self, args) -> int:
        checks = run_selftest(self.config, fast=args.fast)
        frame = pd.DataFrame(checks, columns=["check", "status", "message"])
        self._write(frame, args.out, f"fast={int(args.fast)}")
        failed = [c for c in checks if c["status"] != "success"]
        if failed:
            logger.error("%d of %d self-test checks failed", len(failed), len(checks))
            return 2
        return 0


# ==================== Self-test ====================

def _check_order_suite(config: Dict) -> Dict:
    rng = np.random.default_rng(20240611)
    tol = config["phi"]["order_tol"]
    schemes = [radau_scheme(2), scheme_from_name("gauss", 2), scheme_from_name("gauss", 3), make_scheme([1.0])]
    worst = 0.0
    for _ in range(config["phi"]["order_samples"]):
        scheme = schemes[rng.integers(len(schemes))]
        theta = float(rng.uniform(0.05, 1.0))
        z = complex(rng.uniform(-50.0, 5.0), rng.uniform(-10.0, 10.0))
        report = check_order_conditions(scheme, theta, z, tol=tol)
        worst = max(worst, report["max_residual"])
    b = [weight_b(radau_scheme(2), i, 1.0, 0.0) for i in (1, 2)]
    weights_ok = abs(b[0] - 0.75) <= 1e-14 and abs(b[1] - 0.25) <= 1e-14
    passed = worst <= tol and weights_ok
    return {
        "check": "phi_order_conditions",
        "status": "success" if passed else "error",
        "message": f"max relative residual {worst:.2e}; radau s=2 weights {b[0]:.15g}, {b[1]:.15g}",
    }


def _check_phi_recurrence() -> Dict:
    rng = np.random.default_rng(7)
    worst = 0.0
    non_finite = 0
    for _ in range(200):
        # |z| <= 10^2.8 keeps e^z below the float overflow at Re z ~ 709
        z = 10.0 ** rng.uniform(-8, 2.8) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        for j in range(0, 7):
            lhs = z * phi(j + 1, z)
            rhs = phi(j, z) - 1.0 / math.factorial(j)
            defect = abs(lhs - rhs) / max(1.0, abs(lhs))
            if not np.isfinite(defect):
                non_finite += 1
                continue
            worst = max(worst, defect)
    passed = worst <= 1e-10 and non_finite == 0
    return {
        "check": "phi_recurrence",
        "status": "success" if passed else "error",
        "message": f"max relative recurrence defect {worst:.2e}, {non_finite} non-finite samples",
    }


def _check_discontinuities() -> Dict:
    messages = []
    passed = True
    for label in ("ex1", "ex4"):
        problem = get_problem(label, 4)
        disc = compute_discontinuities(problem.delay, problem.T)
        ok = len(disc.xi) == 1 and abs(problem.delay.deviated(disc.xi[0])) <= 1e-12
        passed &= ok
        messages.append(f"{label}: xi={list(disc.xi)}")
    constant = DelaySpec(tau=lambda t: 0.3, tau0=0.3, history_start=-0.3)
    xi = compute_discontinuities(constant, 1.0).xi
    ok = len(xi) == 3 and np.allclose(xi, [0.3, 0.6, 0.9], atol=1e-12)
    passed &= ok
    messages.append(f"constant delay 0.3: xi={[round(x, 12) for x in xi]}")
    return {
        "check": "discontinuities",
        "status": "success" if passed else "error",
        "message": "; ".join(messages),
    }


def _check_dense_consistency() -> Dict:
    problem = get_problem("ex1", 32)
    disc = compute_discontinuities(problem.delay, problem.T)
    mesh = build_mesh(disc, 2.0 ** -4)
    worst = []
    passed = True
    for method in ("erkc_c", "erkc_i"):
        config = MethodConfig(method=method, scheme=radau_scheme(2))
        report = check_node_consistency(integrate(problem, mesh, config).store)
        passed &= report["passed"]
        worst.append(report["message"])
    return {
        "check": "node_consistency",
        "status": "success" if passed else "error",
        "message": "; ".join(worst),
    }


def _check_collocation_limit() -> Dict:
    # A = 0, g = v: one Radau IIA step must equal the (2,1) Pade value of e^h
    problem_op = explicit_diagonal([0.0])
    h = 0.1
    scheme = radau_scheme(2)
    # classical Radau IIA s=2 stage matrix
    a = np.array([[5.0 / 12.0, -1.0 / 12.0], [3.0 / 4.0, 1.0 / 4.0]])
    stages = np.linalg.solve(np.eye(2) - h * a, np.ones(2))
    expected = 1.0 + h * np.dot([0.75, 0.25], stages)
    delay = DelaySpec(tau=lambda t: 1.0, tau0=1.0, history_start=-1.0)
    problem = ProblemSpec(
        label="collocation_limit",
        operator=problem_op,
        delay=delay,
        T=h,
        history=lambda t: np.ones(1),
        nonlinearity=lambda t, v, w: v,
    )
    disc = compute_discontinuities(delay, h)
    mesh = build_mesh(disc, h)
    config = MethodConfig(method="erkc_c", scheme=scheme, fp_tol=1e-15, fp_max_iter=200)
    value = float(integrate(problem, mesh, config).final[0])
    gap = abs(value - expected)
    passed = gap <= 1e-12
    return {
        "check": "collocation_limit",
        "status": "success" if passed else "error",
        "message": f"ERKC-C {value:.16f} vs Radau IIA {expected:.16f} (gap {gap:.1e})",
    }


def _check_order(label: str, scheme: str, s: int, hs: List[float], n: int,
                 target: float, width: float, reference: str = "exact", h_ref: float = 2.0 ** -11) -> Dict:
    study = ConvergenceStudy(
        problem=label, method="erkc_c", scheme=scheme, s=s, hs=tuple(hs), n=n,
        reference=reference, reference_h=h_ref,
    )
    fit, _ = run_study(study)
    passed = abs(fit.slope - target) <= width
    return {
        "check": f"order_{label}_{scheme}{s}",
        "status": "success" if passed else "error",
        "message": f"fitted order {fit.slope:.3f}, expected {target} +- {width}",
    }


def run_selftest(config: Dict, fast: bool = False) -> List[Dict]:
    """Run the property suites; fast skips the two-dimensional self-convergence run."""
    suites: List[Tuple[str, Callable[[], Dict]]] = [
        ("phi_order_conditions", lambda: _check_order_suite(config)),
        ("phi_recurrence", _check_phi_recurrence),
        ("discontinuities", _check_discontinuities),
        ("collocation_limit", _check_collocation_limit),
        ("node_consistency", _check_dense_consistency),
        ("order_ex1_radau2", lambda: _check_order("ex1", "radau", 2, [2.0 ** -k for k in range(3, 7)], 64, 3.0, 0.3)),
    ]
    if not fast:
        suites.append(("order_ex2_radau2", lambda: _check_order(
            "ex2", "radau", 2, [2.0 ** -k for k in range(3, 8)], 64, 3.0, 0.35,
            reference="computed", h_ref=2.0 ** -11,
        )))
    results = []
    for name, suite in suites:
        try:
            results.append(suite())
        except ERKCError as exc:
            results.append({"check": name, "status": "error", "message": str(exc)})
        logger.info("selftest %s: %s", results[-1]["check"], results[-1]["status"])
    return results


# ==================== CLI ====================

def _add_method_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--problem", required=True, choices=["ex1", "ex2", "ex3", "ex4"])
    parser.add_argument("--method", help="erkc-i | erkc-c | merkc-i")
    parser.add_argument("--scheme", help="gauss | radau | custom:c1,c2,...")
    parser.add_argument("--s", type=int, help="stage count")
    parser.add_argument("--n", type=int, help="grid points per dimension")
    parser.add_argument("--source", choices=["discrete", "continuous"], help="manufactured source mode")
    parser.add_argument("--mesh", help="constrained | per-segment")
    parser.add_argument("--fp-tol", type=float, help="fixed-point tolerance")
    parser.add_argument("--fp-max-iter", type=int, help="fixed-point sweep limit")
    parser.add_argument("--out", help="output CSV (stdout if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="erkc", description="Exponential collocation integrators for delay-parabolic problems")
    parser.add_argument("--config", help="plain-text key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    parser.add_argument("--log-level", help="DEBUG | INFO | WARNING | ERROR")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    disc = sub.add_parser("disc", help="primary discontinuity points")
    disc.add_argument("--problem", required=True, choices=["ex1", "ex2", "ex3", "ex4"])
    disc.add_argument("--out")

    run = sub.add_parser("run", help="single integration")
    _add_method_flags(run)
    run.add_argument("--h", help="base step, e.g. 2^-6 or 0.0625")
    run.add_argument("--timing", action="store_true", help="print wall time")
    run.add_argument("--dense-out", help="CSV of continuous-extension samples")
    run.add_argument("--dense-samples", type=int, default=201)

    converge = sub.add_parser("converge", help="convergence study")
    _add_method_flags(converge)
    converge.add_argument("--norm", help="linf | l2 | v_alpha")
    converge.add_argument("--alpha", type=float)
    converge.add_argument("--hs", help="2^-3..2^-8 or comma list")
    converge.add_argument("--reference", choices=["auto", "exact", "computed"])
    converge.add_argument("--h-ref", type=float)
    converge.add_argument("--global", dest="global_error", action="store_true", help="add max node error column")
    converge.add_argument("--workers", type=int)

    selftest = sub.add_parser("selftest", help="property suites")
    selftest.add_argument("--fast", action="store_true", help="skip the two-dimensional criterion")
    selftest.add_argument("--out")
    return parser


def cli_main(argv: Optional[List[str]] = None, out=None) -> int:
    """
    Run the CLI.

    Returns:
        0 on success, 1 on usage errors, 2 on solver errors
    """
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        config = get_config()
        if args.config:
            config = apply_overrides(config, read_plain_config(args.config))
        config = apply_overrides(config, args.set)
        if args.log_level:
            config["logging"]["level"] = args.log_level
        setup_logging(config)
        orchestrator = ERKCOrchestrator(config, out)
        return getattr(orchestrator, args.command)(args)
    except UsageError as exc:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"erkc: error: {exc}\n")
        return 1
    except ERKCError as exc:
        sys.stderr.write(f"erkc: {type(exc).__name__}: {exc}\n")
        return 2
    except ValueError as exc:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"erkc: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(cli_main())
