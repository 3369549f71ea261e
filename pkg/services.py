#!/usr/bin/env python3
"""Level-Set Solver Services.

Service classes for the command-line driver: dense matrix ingestion,
trace and solution export, and console formatting.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np

from errors import ParseError
from models import TRACE_KEYS, RootResult, Solution, SolveTrace, TraceFormat

PathLike = Union[str, Path]


class DenseMatrixRepository:
    """Loads and writes dense matrices and vectors as headerless CSV."""

    @staticmethod
    def load_dense(path: PathLike) -> np.ndarray:
        """Load a row-major CSV file of decimal floats.

        Args:
            path: File to read

        Returns:
            A vector for single-column files, otherwise a matrix

        Raises:
            FileNotFoundError: If the file doesn't exist
            ParseError: If the file is empty, has ragged rows or a bad entry
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Matrix file not found: {path}")

        rows: List[List[float]] = []
        width: Optional[int] = None
        with open(path, "r", encoding="utf-8") as file:
            for line_num, line in enumerate(file, 1):
                text = line.strip()
                if not text:
                    continue
                try:
                    row = [float(entry) for entry in text.split(",")]
                except ValueError as e:
                    raise ParseError(f"{path}, line {line_num}: {e}") from e
                if width is None:
                    width = len(row)
                elif len(row) != width:
                    raise ParseError(
                        f"{path}, line {line_num}: expected {width} columns, "
                        f"got {len(row)}"
                    )
                rows.append(row)

        if not rows:
            raise ParseError(f"No data found in {path}")
        data = np.array(rows, dtype=float)
        if width == 1:
            return data[:, 0]
        return data

    @staticmethod
    def write_dense(data: np.ndarray, path: PathLike) -> Path:
        """Write a matrix (or a vector as one column) so it reloads bit-exactly."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        with open(path, "w", encoding="utf-8") as file:
            for row in data:
                file.write(",".join(format(value, ".17g") for value in row) + "\n")
        return path


class TraceExportService:
    """Writes and reads outer-iteration traces."""

    def emit_trace(
        self, trace: SolveTrace, trace_format: TraceFormat, path: PathLike
    ) -> Path:
        """Write a trace as JSON lines or as CSV with a header.

        Args:
            trace: Trace to write
            trace_format: Output format
            path: Destination file

        Returns:
            Path to the created file
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        records = trace.to_dicts()
        with open(path, "w", encoding="utf-8", newline="") as file:
            if trace_format is TraceFormat.JSONL:
                for record in records:
                    file.write(json.dumps(record) + "\n")
            else:
                writer = csv.DictWriter(file, fieldnames=TRACE_KEYS)
                writer.writeheader()
                for record in records:
                    writer.writerow(
                        {
                            key: "" if value is None else repr(value)
                            for key, value in record.items()
                        }
                    )
        return path

    def read_trace(self, path: PathLike) -> List[Dict[str, Any]]:
        """Read a trace written by ``emit_trace``; the format follows the suffix.

        Raises:
            FileNotFoundError: If the trace file doesn't exist
            ParseError: If a record misses a trace column
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Trace file not found: {path}")

        records = []
        with open(path, "r", encoding="utf-8", newline="") as file:
            if path.suffix == ".csv":
                for row in csv.DictReader(file):
                    records.append(self._parse_csv_row(row))
            else:
                for line_num, line in enumerate(file, 1):
                    if not line.strip():
                        continue
                    try:
                        records.append(json.loads(line))
                    except json.JSONDecodeError as e:
                        raise ParseError(f"{path}, line {line_num}: {e}") from e

        for line_num, record in enumerate(records, 1):
            missing = [key for key in TRACE_KEYS if key not in record]
            if missing:
                raise ParseError(f"{path}, record {line_num}: missing {missing}")
        return records

    @staticmethod
    def _parse_csv_row(row: Dict[str, str]) -> Dict[str, Any]:
        record: Dict[str, Any] = {}
        for key in TRACE_KEYS:
            text = row.get(key)
            if text is None:
                continue
            if text == "":
                record[key] = None
            elif key in ("k", "inner_iters"):
                record[key] = int(text)
            else:
                record[key] = float(text)
        return record


class SolutionExportService:
    """Handles JSON export of solutions."""

    def export_solution(self, solution: Solution, path: PathLike) -> Path:
        """Export a solution to a JSON file.

        Args:
            solution: Solution to export
            path: Destination file

        Returns:
            Path to the created JSON file
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(solution.to_dict(), f, indent=2)
        return path

    def export_summary(self, data: Dict[str, Any], path: PathLike) -> Path:
        """Export a plain dictionary (root-finding demos) to a JSON file."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2)
        return path


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.6g}"


class OutputFormatter:
    """Handles text output formatting for console display."""

    @staticmethod
    def format_root_result(
        result: RootResult, title: str, bound: Optional[int] = None
    ) -> str:
        """Format an outer root-finding run for console output."""
        lines = []
        lines.append("=" * 60)
        lines.append(title.upper())
        lines.append("=" * 60)
        lines.append(f"Status: {result.status.value}")
        lines.append(f"Iterations: {result.iterations}")
        if bound is not None:
            lines.append(f"Iteration Bound: {bound}")
        lines.append(f"Final tau: {result.tau:.12g}")
        lines.append("")
        lines.append(f"{'k':>4}  {'tau':>14}  {'lower':>12}  {'upper':>12}")
        lines.append("-" * 48)
        for record in result.trace:
            lines.append(
                f"{record.k:>4}  {record.tau:>14.8g}  "
                f"{_fmt(record.lower):>12}  {_fmt(record.upper):>12}"
            )
        return "\n".join(lines)

    @staticmethod
    def format_solution(solution: Solution, title: str) -> str:
        """Format a problem solution for console output."""
        lines = []
        lines.append("=" * 60)
        lines.append(title.upper())
        lines.append("=" * 60)
        lines.append(f"Status: {solution.status.value}")
        lines.append(f"Outer Iterations: {solution.outer_iterations}")
        lines.append(f"Inner Iterations: {solution.trace.total_inner_iterations}")
        lines.append(f"tau*: {solution.tau_star_estimate:.9g}")
        lines.append(f"Objective: {solution.objective:.9g}")
        lines.append(f"Misfit: {solution.misfit_at_x:.9g} (sigma {solution.sigma:.6g})")
        for key, value in solution.extras.items():
            lines.append(f"{key.replace('_', ' ').title()}: {_fmt(value)}")
        if solution.message:
            lines.append(f"Message: {solution.message}")
        return "\n".join(lines)

    @staticmethod
    def format_trace_report(records: List[Dict[str, Any]]) -> str:
        """Format the inner iterations spent per outer step of a stored trace."""
        lines = []
        lines.append("=" * 60)
        lines.append("TRACE REPORT")
        lines.append("=" * 60)
        lines.append(f"{'k':>4}  {'tau':>14}  {'inner iters':>12}")
        lines.append("-" * 34)
        for record in records:
            lines.append(
                f"{record['k']:>4}  {record['tau']:>14.8g}  {record['inner_iters']:>12}"
            )
        lines.append("")
        lines.append(f"Outer Steps: {len(records)}")
        lines.append(
            f"Total Inner Iterations: {sum(r['inner_iters'] for r in records)}"
        )
        if records:
            last = records[-1]
            lines.append(
                f"Final Bounds: [{_fmt(last['lower'])}, {_fmt(last['upper'])}]"
            )
        return "\n".join(lines)
