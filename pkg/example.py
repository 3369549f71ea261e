#!/usr/bin/env python3
"""Level-Set Solver Example Usage.

This example walks through the root finders on a test function and then
solves a small basis pursuit denoising problem. It closes by fitting
least squares, Huber and quantile Huber models to a seeded instance with
positive outliers.
"""

import math
from dataclasses import replace

import numpy as np

from models import OracleMode, RootConfig, RootMethod
from oracle import SyntheticOracle
from problems import (
    PRESETS,
    compare_robust_fits,
    generate_instance,
    solve_bpdn,
    top_positive_residuals,
)
from rootfind import iteration_bound, newton_solve, secant_solve, theorem_constant
from services import OutputFormatter

MODEL_LABELS = {
    "ls": "Least squares",
    "huber": "Huber",
    "qh": "Quantile Huber",
}


def quadratic(tau: float):
    """Return f(tau) = (tau - 1)^2 - 10 and its derivative."""
    return (tau - 1.0) ** 2 - 10.0, 2.0 * (tau - 1.0)


def demo_root_finding(alpha: float = 1.3, epsilon: float = 1e-2) -> dict:
    """Compare the inexact secant and Newton methods on the quadratic."""
    tau_star = 1.0 - math.sqrt(10.0)
    counts = {}

    secant = secant_solve(
        SyntheticOracle(quadratic, alpha, OracleMode.SYMMETRIC),
        RootConfig(epsilon, alpha, max_outer=500, tau0=-9.0, tau1=-8.0),
    )
    newton = newton_solve(
        SyntheticOracle(quadratic, alpha, OracleMode.STEEPEST),
        RootConfig(epsilon, alpha, max_outer=500, tau0=-9.0),
    )
    for method, result in ((RootMethod.SECANT, secant), (RootMethod.NEWTON, newton)):
        first = list(result.trace)[1 if method is RootMethod.SECANT else 0]
        C = theorem_constant(first.slope, first.tau, tau_star, first.lower)
        bound = iteration_bound(C, epsilon, alpha, method)
        print(OutputFormatter.format_root_result(result, f"{method.value}", bound))
        print()
        counts[method.value] = result.iterations
    return counts


def demo_bpdn() -> None:
    """Solve min ||x||_1 s.t. ||x - b|| <= 1 with the identity operator."""
    b = np.array([3.0, 2.0, 1.0, 0.0, 0.0])
    solution = solve_bpdn(np.eye(5), b, sigma=1.0, epsilon=1e-5, alpha=1.5)
    print(OutputFormatter.format_solution(solution, "basis pursuit denoising"))
    print(f"x = {np.round(solution.x, 6)}")
    print()


def demo_robust(seed: int = 7) -> dict:
    """Compare least squares, Huber and quantile Huber under positive outliers."""
    preset = PRESETS["paper-example"]
    spec = replace(preset["instance"], seed=seed)
    A, b, x_true, outliers = generate_instance(spec)
    fits, metrics = compare_robust_fits(
        A,
        b,
        x_true,
        outliers,
        preset["kappa"],
        preset["q"],
        preset["sigma_fraction"],
        epsilon=1e-2,
        alpha=1.5,
    )
    print(OutputFormatter.format_solution(fits["qh"], "robust sparse recovery"))
    found = top_positive_residuals(b - A @ fits["qh"].x, len(outliers))
    print(f"Planted outliers:  {outliers.tolist()}")
    print(f"Largest residuals: {found.tolist()}")
    for name, label in MODEL_LABELS.items():
        print(
            f"{label:<15} signal error {metrics[f'{name}_signal_error']:.4f}, "
            f"outlier hits {metrics[f'{name}_outlier_hits']:.0f}/{len(outliers)}"
        )
    return metrics


def main():
    """Run the level-set examples."""
    print("Level-Set Solver Example")
    print("=" * 50)
    print()
    counts = demo_root_finding()
    print(f"Iterations: {counts}")
    print()
    demo_bpdn()
    demo_robust()


if __name__ == "__main__":
    main()
