from pathlib import Path
from typing import Optional

import matplotlib
import numpy as np
import typer
from matplotlib.figure import Figure

from sscf import chebmat, corpus_io
from sscf.chebmat import MatrixFunction
from sscf.cli.utils import emit, get_state, handle_error, make_report, timed
from sscf.exceptions import SscfValidationError

matplotlib.use("Agg")


def power_patterns(N: MatrixFunction, powers: int, threshold: float, grid: int) -> list[np.ndarray]:
    """Nonzero patterns of N, N^2, ..., N^powers; an entry counts if it exceeds `threshold` anywhere on the grid."""
    if N.rows != N.cols:
        raise SscfValidationError(f"spy needs a square matrix, got {N.shape}")
    if N.is_constant:
        samples = N.constant_value()[None]
    else:
        samples = N.values(chebmat.verification_grid(N.interval, grid))
    patterns = []
    power = np.broadcast_to(np.eye(N.rows), samples.shape).copy()
    for _ in range(powers):
        power = power @ samples
        patterns.append(np.abs(power).max(axis=0) > threshold)
    return patterns


def ascii_panel(pattern: np.ndarray) -> list[str]:
    return ["".join("#" if cell else "." for cell in row) for row in pattern]


def write_svg(patterns: list[np.ndarray], path: Path) -> None:
    """One spy panel per power; byte-identical output for identical input."""
    count = len(patterns)
    size = patterns[0].shape[0]
    fig = Figure(figsize=(2.2 * count, 2.5))
    axes = fig.subplots(1, count, squeeze=False)[0]
    for k, (ax, pattern) in enumerate(zip(axes, patterns), start=1):
        ax.spy(pattern.astype(float), markersize=max(1.0, 60.0 / size), color="black")
        ax.set_title(f"N^{k} ({int(pattern.sum())})", fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    with matplotlib.rc_context({"svg.hashsalt": "sscf", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def spy(
    ctx: typer.Context,
    path: Path = typer.Argument(..., help="Matrix, SCF pair or instance file"),
    powers: int = typer.Option(1, "--powers", min=1, help="Number of powers N, N^2, ..."),
    fmt: str = typer.Option("ascii", "--format", help="ascii or svg"),
    out: Optional[Path] = typer.Option(None, "--out", help="SVG output file (default spy.svg)"),
):
    """Spy panels of the powers of N with nonzero counts."""
    state = get_state(ctx)
    arguments = {"path": path, "powers": powers, "format": fmt, "out": out}
    try:
        if fmt not in ("ascii", "svg"):
            raise SscfValidationError(f"Invalid format {fmt!r}. Valid values: ascii, svg")
        N = corpus_io.load_scf_pair(path).N
        tols = state.tolerances
        with timed(state.timings, "spy"):
            patterns = power_patterns(N, powers, tols.check_tol, tols.grid)
        results = {
            "shape": [N.rows, N.cols],
            "powers": powers,
            "nonzeros": [int(p.sum()) for p in patterns],
            "format": fmt,
        }
        if fmt == "svg":
            target = out or Path("spy.svg")
            with timed(state.timings, "render"):
                write_svg(patterns, target)
            results["svg"] = str(target)
        else:
            results["panels"] = [ascii_panel(p) for p in patterns]
            if state.json_out != "-":
                for k, pattern in enumerate(patterns, start=1):
                    typer.echo(f"N^{k} ({int(pattern.sum())} nonzeros)")
                    typer.echo("\n".join(ascii_panel(pattern)))
                    typer.echo("")
        emit(state, make_report(state, "spy", results, arguments=arguments, inputs=[path]))
    except SystemExit:
        raise
    except Exception as e:
        handle_error(e, state, "spy", arguments)
