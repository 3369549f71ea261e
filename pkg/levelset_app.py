#!/usr/bin/env python3
"""Level-Set Solver Application.

Command-line driver that coordinates data ingestion, the problem
solvers and trace/solution export. One solve runs per invocation.

Usage:
    levelset rootfind-demo --f f1 --alpha 1.3 --eps 1e-2 --oracle symmetric
    levelset bpdn --A A.csv --b b.csv --sigma 0.5
    levelset robust --preset paper-example --seed 7
    levelset trace-report --trace output/trace.jsonl
"""

import os

# Thread caps must be in place before numpy loads its BLAS.
_THREADS = os.environ.get("LEVELSET_THREADS", "1")
for _variable in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_variable, _THREADS)

import argparse  # noqa: E402
import dataclasses  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import math  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402
from typing import Any, Callable, Dict, List, Optional, Tuple  # noqa: E402

import numpy as np  # noqa: E402

from errors import LevelSetError  # noqa: E402
from geometry import L1Ball  # noqa: E402
from misfits import FamilyKind, GLMFamily  # noqa: E402
from models import (  # noqa: E402
    InnerMethod,
    OracleMode,
    RootConfig,
    RootMethod,
    RootResult,
    RunConfig,
    Solution,
    SolveStatus,
)
from oracle import SyntheticOracle  # noqa: E402
from problems import (  # noqa: E402
    PRESETS,
    compare_robust_fits,
    generate_instance,
    robust_level,
    solve_bpdn,
    solve_elastic_net,
    solve_glm,
    solve_lp,
    solve_robust_sparse,
    top_positive_residuals,
)
from rootfind import (  # noqa: E402
    iteration_bound,
    newton_solve,
    secant_solve,
    theorem_constant,
)
from services import (  # noqa: E402
    DenseMatrixRepository,
    OutputFormatter,
    SolutionExportService,
    TraceExportService,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _f1(tau: float) -> Tuple[float, float]:
    return (tau - 1.0) ** 2 - 10.0, 2.0 * (tau - 1.0)


def _f2(tau: float) -> Tuple[float, float]:
    if tau >= 0:
        return 0.0, 0.0
    return tau * tau, 2.0 * tau


def _neg_linear(tau: float) -> Tuple[float, float]:
    return -tau, -1.0


@dataclasses.dataclass(frozen=True)
class DemoFunction:
    """A convex decreasing test function with its starts and root."""

    f: Callable[[float], Tuple[float, float]]
    tau0: float
    tau1: float
    tau_star: float


DEMO_FUNCTIONS: Dict[str, DemoFunction] = {
    "f1": DemoFunction(_f1, -9.0, -8.0, 1.0 - math.sqrt(10.0)),
    "f2": DemoFunction(_f2, -9.0, -8.0, 0.0),
    "neg-linear": DemoFunction(_neg_linear, -2.0, -1.0, 0.0),
}


class LevelSetApp:
    """Main application class coordinating ingestion, solves and export."""

    def __init__(self, config: RunConfig):
        """Initialize the application.

        Args:
            config: Options of the current invocation
        """
        self.config = config
        self.output_dir = Path(config.output_path)
        self.repository = DenseMatrixRepository()
        self.trace_service = TraceExportService()
        self.solution_service = SolutionExportService()
        self.formatter = OutputFormatter()

    @property
    def params(self) -> Dict[str, Any]:
        """Get the subcommand parameters."""
        return self.config.params

    def load(self, name: str) -> np.ndarray:
        """Load the dense file given by a path parameter."""
        path = self.params.get(name)
        if path is None:
            raise LevelSetError(f"--{name} is required")
        return self.repository.load_dense(path)

    def trace_path(self) -> Path:
        """Get the path the trace is written to."""
        return self.output_dir / f"trace.{self.config.trace_format.value}"

    def export_solution(self, solution: Solution) -> Dict[str, str]:
        """Write the trace and the solution file.

        Returns:
            Dictionary with paths to created files
        """
        trace_file = self.trace_service.emit_trace(
            solution.trace, self.config.trace_format, self.trace_path()
        )
        solution_file = self.solution_service.export_solution(
            solution, self.output_dir / "solution.json"
        )
        return {"trace_file": str(trace_file), "solution_file": str(solution_file)}

    def finish(self, solution: Solution, title: str) -> int:
        """Print and export a solution, returning the exit code."""
        print(self.formatter.format_solution(solution, title))
        exported = self.export_solution(solution)
        print(f"Trace: {exported['trace_file']}")
        print(f"Solution: {exported['solution_file']}")
        if solution.status is SolveStatus.CONVERGED:
            return EXIT_OK
        return EXIT_NOT_CONVERGED

    def run_rootfind_demo(self) -> int:
        """Run a root finder on a test function with a synthetic oracle."""
        params = self.params
        demo = DEMO_FUNCTIONS[params["f"]]
        mode = OracleMode(params["oracle"])
        method = params.get("method")
        if method is None:
            method = "secant" if mode is OracleMode.SYMMETRIC else "newton"
        method = RootMethod(method)
        if method is RootMethod.NEWTON and mode is OracleMode.SYMMETRIC:
            raise LevelSetError("Newton's method needs an oracle that reports slopes")

        oracle = SyntheticOracle(demo.f, params["alpha"], mode)
        cfg = RootConfig(
            epsilon=params["eps"],
            alpha=params["alpha"],
            max_outer=params["max_outer"],
            tau0=demo.tau0,
            tau1=demo.tau1 if method is RootMethod.SECANT else None,
        )
        solver = secant_solve if method is RootMethod.SECANT else newton_solve
        result = solver(oracle, cfg, self.config.record_timing)
        bound = self._demo_bound(result, demo, method, cfg)

        print(self.formatter.format_root_result(result, f"{method.value} demo", bound))
        trace_file = self.trace_service.emit_trace(
            result.trace, self.config.trace_format, self.trace_path()
        )
        self.solution_service.export_summary(
            {
                "function": params["f"],
                "method": method.value,
                "oracle": mode.value,
                "status": result.status.value,
                "iterations": result.iterations,
                "iteration_bound": bound,
                "tau": result.tau,
            },
            self.output_dir / "summary.json",
        )
        print(f"Trace: {trace_file}")
        return EXIT_OK if result.converged else EXIT_NOT_CONVERGED

    @staticmethod
    def _demo_bound(
        result: RootResult, demo: DemoFunction, method: RootMethod, cfg: RootConfig
    ) -> Optional[int]:
        # The constant is taken at tau1 (secant) or tau0 (Newton).
        index = 1 if method is RootMethod.SECANT else 0
        records = list(result.trace)
        if len(records) <= index:
            return None
        record = records[index]
        slope = record.slope if record.slope is not None else demo.f(record.tau)[1]
        C = theorem_constant(slope, record.tau, demo.tau_star, record.lower)
        if not C > 0:
            return None
        return iteration_bound(C, cfg.epsilon, cfg.alpha, method)

    def run_bpdn(self) -> int:
        """Solve a basis pursuit denoising problem from CSV data."""
        params = self.params
        solution = solve_bpdn(
            self.load("A"),
            self.load("b"),
            params["sigma"],
            params["eps"],
            params["alpha"],
            inner=InnerMethod(params["inner"]),
            method=RootMethod(params["method"]),
            max_outer=params["max_outer"],
            record_timing=self.config.record_timing,
        )
        return self.finish(solution, "basis pursuit denoising")

    def run_lp(self) -> int:
        """Solve a standard-form linear program from CSV data."""
        params = self.params
        y_hat = self.load("y_hat") if params.get("y_hat") else None
        solution = solve_lp(
            np.atleast_2d(self.load("A")),
            np.atleast_1d(self.load("b")),
            self.load("c"),
            y_hat=None if y_hat is None else np.atleast_1d(y_hat),
            epsilon=params["eps"],
            alpha=params["alpha"],
            max_outer=params["max_outer"],
            record_timing=self.config.record_timing,
        )
        return self.finish(solution, "linear program")

    def run_glm(self) -> int:
        """Solve a sparse GLM problem from CSV data."""
        params = self.params
        family = GLMFamily(
            FamilyKind(params["family"]),
            dispersion=params["dispersion"],
            kappa=params["kappa"],
        )
        offset = self.load("offset") if params.get("offset") else None
        inner = InnerMethod(params["inner"]) if params.get("inner") else None
        if params.get("sigma") is None and params.get("eta") is None:
            raise LevelSetError("either --sigma or --eta is required")
        solution = solve_glm(
            family,
            self.load("A"),
            self.load("b"),
            sigma=params.get("sigma"),
            eta=params.get("eta"),
            gauge=L1Ball(),
            epsilon=params["eps"],
            alpha=params["alpha"],
            inner=inner,
            offset=offset,
            max_outer=params["max_outer"],
            record_timing=self.config.record_timing,
        )
        return self.finish(solution, f"{family.kind.value} glm")

    def run_robust(self) -> int:
        """Solve a robust sparse recovery problem from CSV data or a preset.

        A preset run also fits symmetric Huber and least squares to the
        same instance and reports each model's signal error and outlier
        hits in the solution metadata.
        """
        params = self.params
        inner = InnerMethod(params["inner"]) if params.get("inner") else None
        options = {
            "max_outer": params["max_outer"],
            "record_timing": self.config.record_timing,
        }
        if params.get("preset"):
            preset = PRESETS[params["preset"]]
            spec = dataclasses.replace(preset["instance"], seed=self.config.seed)
            A, b, x_true, outliers = generate_instance(spec)
            fits, metrics = compare_robust_fits(
                A,
                b,
                x_true,
                outliers,
                params.get("kappa") or preset["kappa"],
                params.get("q") or preset["q"],
                params.get("sigma_fraction") or preset["sigma_fraction"],
                params["eps"],
                params["alpha"],
                inner=inner,
                **options,
            )
            solution = fits["qh"]
            solution.extras.update(metrics)
            found = top_positive_residuals(b - A @ solution.x, len(outliers))
            identified = bool(np.array_equal(found, outliers))
            solution.extras["outliers_identified"] = float(identified)
            logger.info(
                "outliers %s, largest residuals at %s",
                outliers.tolist(),
                found.tolist(),
            )
            return self.finish(solution, "robust sparse recovery")

        A, b = self.load("A"), self.load("b")
        kappa = params.get("kappa") or 0.1
        q = params.get("q") or 0.5
        sigma = params.get("sigma")
        if sigma is None:
            if params.get("sigma_fraction") is None:
                raise LevelSetError("either --sigma or --sigma-fraction is required")
            sigma = robust_level(b, kappa, q, params["sigma_fraction"])
        solution = solve_robust_sparse(
            A,
            b,
            sigma,
            kappa,
            q,
            params["eps"],
            params["alpha"],
            inner=inner,
            **options,
        )
        return self.finish(solution, "robust sparse recovery")

    def run_elastic_net(self) -> int:
        """Solve an elastic-net regression with a Huber misfit from CSV data."""
        params = self.params
        solution = solve_elastic_net(
            self.load("A"),
            self.load("b"),
            params["sigma"],
            params["alpha_en"],
            params["kappa"],
            params["eps"],
            params["alpha"],
            max_outer=params["max_outer"],
            record_timing=self.config.record_timing,
        )
        return self.finish(solution, "elastic net")

    def run_trace_report(self) -> int:
        """Print the per-step inner iterations of a stored trace."""
        records = self.trace_service.read_trace(self.params["trace"])
        print(self.formatter.format_trace_report(records))
        return EXIT_OK

    def run(self) -> int:
        """Dispatch the configured subcommand."""
        handlers = {
            "rootfind-demo": self.run_rootfind_demo,
            "bpdn": self.run_bpdn,
            "lp": self.run_lp,
            "glm": self.run_glm,
            "robust": self.run_robust,
            "elastic-net": self.run_elastic_net,
            "trace-report": self.run_trace_report,
        }
        return handlers[self.config.subcommand]()


def _add_common(parser: argparse.ArgumentParser, eps: float = 1e-4) -> None:
    parser.add_argument("--eps", type=float, default=eps, help="target accuracy")
    parser.add_argument("--alpha", type=float, default=1.5, help="oracle accuracy")
    parser.add_argument("--max-outer", type=int, default=200)
    # Also accepted after the subcommand; the global value stands otherwise.
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS)


def build_parser() -> Tuple[
    argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]
]:
    """Build the argument parser and return it with its subparsers."""
    parser = argparse.ArgumentParser(
        prog="levelset", description="Level-set root-finding solvers"
    )
    parser.add_argument("--config", help="JSON file of subcommand defaults")
    parser.add_argument("--log-level", help="logging level (default WARNING)")
    parser.add_argument("--record-timing", action="store_true")
    parser.add_argument("--format", choices=["jsonl", "csv"], default="jsonl")
    parser.add_argument("--output", default="output", help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    commands = parser.add_subparsers(dest="subcommand", required=True)
    subparsers: Dict[str, argparse.ArgumentParser] = {}

    demo = commands.add_parser("rootfind-demo", help="root finding on test functions")
    demo.add_argument("--f", choices=sorted(DEMO_FUNCTIONS), default="f1")
    demo.add_argument(
        "--oracle", choices=[mode.value for mode in OracleMode], default="symmetric"
    )
    demo.add_argument("--method", choices=[m.value for m in RootMethod])
    _add_common(demo, eps=1e-2)
    subparsers["rootfind-demo"] = demo

    bpdn = commands.add_parser("bpdn", help="basis pursuit denoising")
    bpdn.add_argument("--A", dest="A", required=True)
    bpdn.add_argument("--b", required=True)
    bpdn.add_argument("--sigma", type=float, required=True)
    bpdn.add_argument("--inner", choices=["apg", "fw"], default="apg")
    bpdn.add_argument("--method", choices=["newton", "secant"], default="newton")
    _add_common(bpdn)
    subparsers["bpdn"] = bpdn

    lp = commands.add_parser("lp", help="standard-form linear program")
    lp.add_argument("--A", dest="A", required=True)
    lp.add_argument("--b", required=True)
    lp.add_argument("--c", required=True)
    lp.add_argument("--y-hat", dest="y_hat")
    _add_common(lp)
    subparsers["lp"] = lp

    glm = commands.add_parser("glm", help="sparse generalized linear model")
    glm.add_argument("--family", choices=[k.value for k in FamilyKind], required=True)
    glm.add_argument("--A", dest="A", required=True)
    glm.add_argument("--b", required=True)
    glm.add_argument("--sigma", type=float)
    glm.add_argument("--eta", type=float)
    glm.add_argument("--dispersion", type=float, default=1.0)
    glm.add_argument("--kappa", type=float, default=1.0)
    glm.add_argument("--offset")
    glm.add_argument("--inner", choices=["apg", "fw"])
    _add_common(glm, eps=1e-3)
    subparsers["glm"] = glm

    robust = commands.add_parser("robust", help="robust sparse recovery")
    robust.add_argument("--preset", choices=sorted(PRESETS))
    robust.add_argument("--A", dest="A")
    robust.add_argument("--b")
    robust.add_argument("--sigma", type=float)
    robust.add_argument("--sigma-fraction", dest="sigma_fraction", type=float)
    robust.add_argument("--kappa", type=float)
    robust.add_argument("--q", type=float)
    robust.add_argument("--inner", choices=["apg", "fw"])
    _add_common(robust, eps=1e-3)
    subparsers["robust"] = robust

    elastic = commands.add_parser("elastic-net", help="elastic-net regression")
    elastic.add_argument("--A", dest="A", required=True)
    elastic.add_argument("--b", required=True)
    elastic.add_argument("--sigma", type=float, required=True)
    elastic.add_argument("--alpha-en", dest="alpha_en", type=float, default=0.5)
    elastic.add_argument("--kappa", type=float, default=1.0)
    _add_common(elastic, eps=1e-3)
    subparsers["elastic-net"] = elastic

    report = commands.add_parser("trace-report", help="summarize a stored trace")
    report.add_argument("--trace", required=True)
    subparsers["trace-report"] = report
    return parser, subparsers


def parse_args(argv: List[str]) -> argparse.Namespace:
    """Parse arguments, applying ``--config`` defaults to the chosen subcommand."""
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, "r", encoding="utf-8") as f:
            defaults = json.load(f)
        if not isinstance(defaults, dict):
            raise LevelSetError(f"{args.config} must hold a JSON object")
        subparsers[args.subcommand].set_defaults(
            **{key.replace("-", "_"): value for key, value in defaults.items()}
        )
        args = parser.parse_args(argv)
    return args


def configure_logging(level: Optional[str]) -> None:
    """Configure the root logger once for a CLI run."""
    name = (level or os.environ.get("LEVELSET_LOG_LEVEL") or "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.WARNING), format=LOG_FORMAT
    )


def run(argv: Optional[List[str]] = None) -> int:
    """Run the command line and return the exit code.

    Returns:
        0 on convergence, 2 when the solve did not converge,
        1 on usage or IO errors
    """
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as exit_:
        return EXIT_OK if exit_.code in (0, None) else EXIT_USAGE
    except (OSError, ValueError, LevelSetError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(args.log_level)
    common = {"config", "log_level", "record_timing", "format", "output", "seed"}
    params = {key: value for key, value in vars(args).items() if key not in common}
    try:
        config = RunConfig(
            subcommand=args.subcommand,
            seed=args.seed,
            output_path=args.output,
            trace_format=args.format,
            record_timing=args.record_timing,
            params=params,
        )
        return LevelSetApp(config).run()
    except (OSError, LevelSetError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE


def main():
    """Console entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
