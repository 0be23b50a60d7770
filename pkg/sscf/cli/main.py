import logging
from typing import Optional

import typer

from sscf.cli.commands.canonicalize import canonicalize
from sscf.cli.commands.characteristics import characteristics
from sscf.cli.commands.generate import generate
from sscf.cli.commands.jordan import jordan
from sscf.cli.commands.solve import solve
from sscf.cli.commands.spy import spy
from sscf.cli.commands.verify import verify
from sscf.cli.utils import CliState
from sscf.settings import DEFAULT_TOLERANCES

app = typer.Typer(help="sscf: strong standard canonical forms for linear time-varying DAEs")

app.command("generate")(generate)
app.command("canonicalize")(canonicalize)
app.command("characteristics")(characteristics)
app.command("jordan")(jordan)
app.command("solve")(solve)
app.command("verify")(verify)
app.command("spy")(spy)


@app.callback()
def main(
    ctx: typer.Context,
    tol: Optional[float] = typer.Option(None, "--tol", envvar="SSCF_TOL", help="Verification tolerance"),
    grid: Optional[int] = typer.Option(None, "--grid", envvar="SSCF_GRID", help="Verification grid size"),
    seed: int = typer.Option(0, "--seed", envvar="SSCF_SEED", help="Corpus seed"),
    json_out: Optional[str] = typer.Option(None, "--json", envvar="SSCF_JSON_OUT",
                                           help="Write the JSON report to this file ('-' for stdout)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging on stderr"),
):
    if verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = CliState(
        tolerances=DEFAULT_TOLERANCES.replace(verify_tol=tol, grid=grid),
        seed=seed,
        json_out=json_out,
    )
