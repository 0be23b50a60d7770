from __future__ import annotations

import hashlib
import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import typer

from sscf.exceptions import NonConvergenceError, SscfError, SscfValidationError
from sscf.models import Report
from sscf.settings import DEFAULT_TOLERANCES, Tolerances
from sscf.utils import file_digest

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FAILED = 3
EXIT_NONCONVERGENCE = 4


@dataclass
class CliState:
    """Global options shared by every command."""
    tolerances: Tolerances = DEFAULT_TOLERANCES
    seed: int = 0
    json_out: Optional[str] = None
    timings: Dict[str, float] = field(default_factory=dict)


def get_state(ctx: typer.Context) -> CliState:
    root = ctx.find_root()
    if not isinstance(root.obj, CliState):
        root.obj = CliState()
    return root.obj


def resolve_tolerances(state: CliState, tol: Optional[float] = None, grid: Optional[int] = None) -> Tolerances:
    """Command-level --tol / --grid override the global ones."""
    return state.tolerances.replace(verify_tol=tol, grid=grid)


def print_json(data: Any) -> None:
    typer.echo(json.dumps(data, ensure_ascii=False, default=str))


def exit_code(e: Exception) -> int:
    if isinstance(e, SscfValidationError):
        return EXIT_INPUT
    if isinstance(e, NonConvergenceError):
        return EXIT_NONCONVERGENCE
    if isinstance(e, SscfError):
        return EXIT_FAILED
    return 1


def error_payload(e: Exception) -> Dict[str, Any]:
    details = getattr(e, "details", {}) or {}
    return {
        "type": type(e).__name__,
        "message": str(e),
        "details": {k: v for k, v in details.items() if k != "trace"},
    }


@contextmanager
def timed(timings: Dict[str, float], key: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[key] = time.perf_counter() - start


def make_report(state: CliState, command: str, results: Dict[str, Any], *, passed: bool = True,
                arguments: Optional[Dict[str, Any]] = None, inputs=None,
                tolerances: Optional[Tolerances] = None) -> Report:
    inputs = [Path(p) for p in (inputs or []) if p is not None]
    digest = None
    if len(inputs) == 1:
        digest = file_digest(inputs[0])
    elif inputs:
        digest = file_digest_many(inputs)
    return Report(
        command=command,
        input_digest=digest,
        tolerances=(tolerances or state.tolerances).to_dict(),
        results=results,
        timings=dict(state.timings),
        passed=passed,
        arguments={k: (str(v) if isinstance(v, Path) else v) for k, v in (arguments or {}).items()},
    )


def file_digest_many(paths) -> str:
    digest = hashlib.sha256()
    for path in paths:
        digest.update(file_digest(path).encode())
    return digest.hexdigest()


def _flatten(prefix: str, value: Any, lines: list[str]) -> None:
    if isinstance(value, dict):
        for key, item in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), item, lines)
    elif isinstance(value, list) and value and all(isinstance(v, (dict, list)) for v in value):
        for i, item in enumerate(value):
            _flatten(f"{prefix}[{i}]", item, lines)
    else:
        lines.append(f"{prefix}: {json.dumps(value, default=str)}")


def render_text(data: Dict[str, Any]) -> str:
    """Human-readable rendering; numbers are printed exactly as in the JSON report."""
    lines: list[str] = []
    _flatten("", {"command": data["command"], "pass": data["pass"]}, lines)
    _flatten("results", data["results"], lines)
    if data.get("error"):
        _flatten("error", data["error"], lines)
    _flatten("timings", data["timings"], lines)
    return "\n".join(lines)


def emit(state: CliState, report: Report) -> None:
    """
    Write the report: JSON on stdout for `--json -`, otherwise text on stdout plus the JSON
    file given by `--json`. A failed report exits with code 3.
    """
    data = report.to_dict()
    if state.json_out == "-":
        print_json(data)
    else:
        typer.echo(render_text(data))
        if state.json_out:
            Path(state.json_out).write_text(json.dumps(data, ensure_ascii=False, default=str, indent=2) + "\n")
    if not report.passed:
        raise SystemExit(EXIT_FAILED)


def handle_error(e: Exception, state: Optional[CliState] = None, command: Optional[str] = None,
                 arguments: Optional[Dict[str, Any]] = None) -> None:
    typer.echo(f"Error: {e}", err=True)
    if state is not None and command is not None and state.json_out:
        report = make_report(state, command, {}, passed=False, arguments=arguments)
        report.error = error_payload(e)
        data = report.to_dict()
        if state.json_out == "-":
            print_json(data)
        else:
            Path(state.json_out).write_text(json.dumps(data, ensure_ascii=False, default=str, indent=2) + "\n")
    raise SystemExit(exit_code(e))
