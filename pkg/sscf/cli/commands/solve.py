from pathlib import Path
from typing import Optional

import typer

from sscf import chebmat, corpus_io, dae
from sscf.cli.utils import emit, get_state, handle_error, make_report, resolve_tolerances, timed
from sscf.models import Variant


def solve(
    ctx: typer.Context,
    path: Path = typer.Argument(..., help="Problem file"),
    variant: Optional[str] = typer.Option(None, "--variant", help="col or row for time-varying N"),
    tol: Optional[float] = typer.Option(None, "--tol", envvar="SSCF_TOL", help="Solver tolerance"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the solution x"),
):
    """Solve E x' + F x = q for an SCF problem; time-varying N is canonicalized first."""
    state = get_state(ctx)
    arguments = {"path": path, "variant": variant, "tol": tol, "out": out}
    try:
        tols = resolve_tolerances(state, tol)
        problem = corpus_io.load_problem(path)
        chosen = None if variant is None else Variant.parse(variant)
        with timed(state.timings, "solve"):
            result = dae.solve_problem(problem, chosen, tols.verify_tol, tolerances=tols)
        state.timings.update({f"solve.{k}": v for k, v in result.timings.items()})
        results = {
            "residual": result.residual_norm,
            "free_initial_dimension": result.free_initial_dimension,
            "bound": 100 * tols.verify_tol,
        }
        if problem.x_exact is not None:
            results["max_error"] = chebmat.sup_norm(chebmat.sub(result.x, problem.x_exact), tols.grid)[0]
        if out is not None:
            corpus_io.write_json(out, result.x.to_dict())
        passed = result.residual_norm <= 100 * tols.verify_tol
        emit(state, make_report(state, "solve", results, passed=passed, arguments=arguments, inputs=[path],
                                tolerances=tols))
    except SystemExit:
        raise
    except Exception as e:
        handle_error(e, state, "solve", arguments)
