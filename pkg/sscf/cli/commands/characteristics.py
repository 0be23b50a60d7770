from pathlib import Path

import typer

from sscf import corpus_io, dae
from sscf.cli.utils import emit, get_state, handle_error, make_report, timed
from sscf.structure import jordan_blocks, ranks_of_powers


def characteristics(
    ctx: typer.Context,
    path: Path = typer.Argument(..., help="Matrix, SCF pair or instance file"),
):
    """Canonical characteristics (r, theta, mu, d), ranks of powers and Jordan block counts."""
    state = get_state(ctx)
    arguments = {"path": path}
    try:
        pair = corpus_io.load_scf_pair(path)
        with timed(state.timings, "characteristics"):
            c = dae.characteristics(pair, tolerances=state.tolerances)
            ranks = ranks_of_powers(pair.N, tolerances=state.tolerances) if pair.N.is_constant else None
            blocks = jordan_blocks(c)
        results = {
            "characteristics": c.to_dict(),
            "index": c.mu,
            "index_one": c.mu == 1,
            "ranks_of_powers": ranks,
            "jordan_blocks": {str(order): count for order, count in sorted(blocks.items())},
            "jordan_block_total": sum(blocks.values()),
        }
        emit(state, make_report(state, "characteristics", results, arguments=arguments, inputs=[path]))
    except SystemExit:
        raise
    except Exception as e:
        handle_error(e, state, "characteristics", arguments)
