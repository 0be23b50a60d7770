from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import typer

from sscf import corpus_io, equivalence
from sscf.cli.utils import emit, error_payload, get_state, handle_error, make_report, resolve_tolerances, timed
from sscf.dae import ScfPair, canonicalize_pair_traced, to_dae_pair
from sscf.equivalence import EquivalenceTransform
from sscf.exceptions import SscfError
from sscf.models import Variant
from sscf.settings import Tolerances


def canonicalize_one(pair: ScfPair, variant: Optional[Variant], tolerances: Tolerances,
                     early_exit: bool = False) -> Tuple[Dict[str, Any], EquivalenceTransform]:
    """Canonicalize one SCF pair; returns its result record and the transform."""
    T, sscf, trace = canonicalize_pair_traced(pair, variant, early_exit=early_exit, tolerances=tolerances)
    report = equivalence.verify(T, to_dae_pair(pair), to_dae_pair(sscf), tolerances=tolerances)
    # Step 0 plus one change per iteration that built a K
    changes = 0 if trace is None else 1 + sum(1 for step in trace.steps if step.K is not None)
    summary = "identity, 0 effective changes" if trace is None else f"{changes} effective changes"
    result = {
        "summary": summary,
        "identity": trace is None,
        "effective_changes": changes,
        "variant": sscf.variant.value,
        "signature": None if sscf.sig is None else sscf.sig.to_dict(),
        "final_n": sscf.N.constant_value().tolist() if sscf.N.is_constant else None,
        "steps": [] if trace is None else [step.to_dict() for step in trace.steps],
        "verification": report.to_dict(),
        "pass": report.passed,
    }
    return result, T


def canonicalize(
    ctx: typer.Context,
    path: Path = typer.Argument(..., help="Instance or SCF pair file, or a corpus directory"),
    variant: Optional[str] = typer.Option(None, "--variant", help="col or row (default: the instance's own)"),
    tol: Optional[float] = typer.Option(None, "--tol", envvar="SSCF_TOL", help="Verification tolerance"),
    early_exit: bool = typer.Option(False, "--early-exit", help="Stop as soon as N equals the target"),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the transform (a directory for corpora)"),
    workers: int = typer.Option(1, "--workers", min=1, help="Concurrent instances for corpora"),
):
    """Reduce the nilpotent part of an instance (or every corpus instance) to its elementary form."""
    state = get_state(ctx)
    arguments = {"path": path, "variant": variant, "tol": tol, "early_exit": early_exit, "out": out}
    try:
        tols = resolve_tolerances(state, tol)
        chosen = None if variant is None else Variant.parse(variant)
        if corpus_io.is_corpus(path):
            instances = corpus_io.import_corpus(path)

            def run(instance):
                try:
                    result, T = canonicalize_one(instance.pair, chosen, tols, early_exit)
                except SscfError as e:
                    return {"name": instance.name, "pass": False, "error": error_payload(e)}, None
                return {"name": instance.name, **result}, T

            with timed(state.timings, "canonicalize"):
                if workers > 1:
                    with ThreadPoolExecutor(max_workers=workers) as pool:
                        outcomes = list(pool.map(run, instances))
                else:
                    outcomes = [run(instance) for instance in instances]
            if out is not None:
                out.mkdir(parents=True, exist_ok=True)
                for (record, T) in outcomes:
                    if T is not None:
                        corpus_io.write_json(out / f"{record['name']}.transform.json", T.to_dict())
            records = [record for record, _ in outcomes]
            results = {"count": len(records), "failed": sum(1 for r in records if not r["pass"]),
                       "instances": records}
            passed = all(r["pass"] for r in records)
        else:
            pair = corpus_io.load_scf_pair(path)
            with timed(state.timings, "canonicalize"):
                results, T = canonicalize_one(pair, chosen, tols, early_exit)
            if out is not None:
                corpus_io.write_json(out, T.to_dict())
            passed = results["pass"]
        emit(state, make_report(state, "canonicalize", results, passed=passed, arguments=arguments,
                                inputs=[path], tolerances=tols))
    except SystemExit:
        raise
    except Exception as e:
        handle_error(e, state, "canonicalize", arguments)
