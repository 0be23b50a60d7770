from typing import Optional

import typer

from sscf import chebmat, dae
from sscf.cli.utils import emit, get_state, handle_error, make_report, timed
from sscf.exceptions import SscfValidationError
from sscf.models import Variant
from sscf.structure import (
    block_counts,
    characteristics_from_signature,
    elementary,
    jordan_blocks,
    jordan_permutation,
    signature_from_characteristics,
)
from sscf.utils import parse_characteristics, parse_ells


def jordan(
    ctx: typer.Context,
    ells: Optional[str] = typer.Option(None, "--ells", help="Block sizes of the elementary matrix"),
    from_characteristics: Optional[str] = typer.Option(
        None, "--characteristics", help="e.g. m=26,r=18,thetas=7,5,4,2"),
    variant: str = typer.Option("col", "--variant", help="col or row"),
    matrix: bool = typer.Option(True, "--matrix/--no-matrix", help="Include the Jordan-form matrix"),
):
    """Jordan block multiset, permutation and Jordan form of an elementary matrix."""
    state = get_state(ctx)
    arguments = {"ells": ells, "characteristics": from_characteristics, "variant": variant}
    try:
        chosen = Variant.parse(variant)
        with timed(state.timings, "jordan"):
            if from_characteristics:
                c = parse_characteristics(from_characteristics)
                if c.mu < 2:
                    results = {"characteristics": c.to_dict(), "jordan_blocks": {"1": c.m - c.d},
                               "orders": [1] * (c.m - c.d), "permutation": list(range(c.m - c.d))}
                    emit(state, make_report(state, "jordan", results, arguments=arguments))
                    return
                sig = signature_from_characteristics(c, variant=chosen)
            elif ells:
                sig = parse_ells(ells)
                sig.require(chosen)
                c = characteristics_from_signature(sig, chosen)
            else:
                raise SscfValidationError("Give --ells or --characteristics")
            pair = dae.ScfPair(0, None, chebmat.constant(elementary(sig, chosen)), sig, chosen)
            jordan_pair = dae.to_jordan(pair)
            orders = list(jordan_pair.jordan_orders)
            counts = block_counts(orders)
            if counts != jordan_blocks(c):
                raise SscfValidationError(f"Jordan chains {counts} disagree with the characteristics")
            results = {
                "signature": sig.to_dict(),
                "variant": chosen.value,
                "characteristics": c.to_dict(),
                "jordan_blocks": {str(order): count for order, count in counts.items()},
                "orders": orders,
                "permutation": [int(i) for i in jordan_permutation(sig, chosen)],
            }
            if matrix:
                results["jordan_form"] = jordan_pair.N.constant_value().astype(int).tolist()
        emit(state, make_report(state, "jordan", results, arguments=arguments))
    except SystemExit:
        raise
    except Exception as e:
        handle_error(e, state, "jordan", arguments)
