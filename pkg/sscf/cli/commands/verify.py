from pathlib import Path
from typing import Optional

import typer

from sscf import corpus_io, equivalence
from sscf.cli.utils import emit, get_state, handle_error, make_report, resolve_tolerances, timed
from sscf.dae import to_dae_pair
from sscf.exceptions import SscfValidationError


def verify(
    ctx: typer.Context,
    pair: Path = typer.Argument(..., help="Pair file {E, F}, SCF pair, or an instance with a transform"),
    transform: Optional[Path] = typer.Argument(None, help="Transform file {L, K}"),
    pair_tilde: Optional[Path] = typer.Argument(None, help="Transformed pair file"),
    tol: Optional[float] = typer.Option(None, "--tol", envvar="SSCF_TOL", help="Verification tolerance"),
):
    """Check E~ = L E K and F~ = L F K + L E K' on the verification grid."""
    state = get_state(ctx)
    arguments = {"pair": pair, "transform": transform, "pair_tilde": pair_tilde, "tol": tol}
    try:
        tols = resolve_tolerances(state, tol)
        if transform is None and pair_tilde is None:
            instance = corpus_io.load_instance(pair)
            if instance.transform is None or instance.scrambled is None:
                raise SscfValidationError(f"{pair} holds no transform; give TRANSFORM and PAIR_TILDE")
            p, T, p_tilde = to_dae_pair(instance.pair), instance.transform, instance.scrambled
        elif transform is not None and pair_tilde is not None:
            p, T, p_tilde = (corpus_io.load_pair(pair), corpus_io.load_transform(transform),
                             corpus_io.load_pair(pair_tilde))
        else:
            raise SscfValidationError("Give PAIR alone (an instance) or PAIR TRANSFORM PAIR_TILDE")
        with timed(state.timings, "verify"):
            report = equivalence.verify(T, p, p_tilde, tolerances=tols)
        emit(state, make_report(state, "verify", report.to_dict(), passed=report.passed, arguments=arguments,
                                inputs=[pair, transform, pair_tilde], tolerances=tols))
    except SystemExit:
        raise
    except Exception as e:
        handle_error(e, state, "verify", arguments)
