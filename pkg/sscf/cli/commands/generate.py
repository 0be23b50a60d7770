from pathlib import Path
from typing import List, Optional

import typer

from sscf import corpus_io, genbench
from sscf.cli.utils import emit, get_state, handle_error, make_report, timed
from sscf.chebmat import Interval
from sscf.exceptions import SscfValidationError
from sscf.models import BlockSignature, GenSpec, Variant
from sscf.structure import signature_from_characteristics
from sscf.utils import parse_characteristics, parse_ells


def _specs_from_flags(mu: Optional[int], ells: Optional[str], from_characteristics: Optional[str], variant: str,
                      degree: int, d: int, count: int, conditioning: float, interval: str, seed: int) -> List[GenSpec]:
    variant = Variant.parse(variant)
    if from_characteristics:
        c = parse_characteristics(from_characteristics)
        sig = signature_from_characteristics(c, variant=variant)
        d = c.d
    elif ells:
        sig = parse_ells(ells, mu)
    elif mu:
        sig = BlockSignature((1,) * mu)
    else:
        raise SscfValidationError("Give --ells, --mu, --from-characteristics or --spec-file")
    try:
        a, b = (float(v) for v in interval.split(","))
    except ValueError:
        raise SscfValidationError(f"Invalid interval {interval!r}, expected 'a,b'")
    spec = GenSpec(sig=sig, variant=variant, interval=Interval(a, b), entry_degree=degree, seed=seed,
                   conditioning=conditioning, d=d)
    return [spec] * count


def generate(
    ctx: typer.Context,
    mu: Optional[int] = typer.Option(None, "--mu", help="Index (number of blocks)"),
    ells: Optional[str] = typer.Option(None, "--ells", help="Block sizes, e.g. 8,7,5,4,2"),
    from_characteristics: Optional[str] = typer.Option(
        None, "--from-characteristics", help="e.g. m=26,r=18,thetas=7,5,4,2"),
    variant: str = typer.Option("col", "--variant", help="col or row"),
    degree: int = typer.Option(1, "--degree", help="Polynomial degree of the time variation"),
    d: int = typer.Option(0, "--d", help="Dimension of the dynamic part"),
    count: int = typer.Option(1, "--count", min=0, help="Number of instances"),
    conditioning: float = typer.Option(4.0, "--conditioning", help="Condition bound of secondary blocks"),
    interval: str = typer.Option("-1,1", "--interval", help="Time interval a,b"),
    scramble_degree: Optional[int] = typer.Option(None, "--scramble", help="Also scramble with a transform of this degree"),
    problem: bool = typer.Option(False, "--problem", help="Write manufactured problem files instead of a corpus"),
    spec_file: Optional[Path] = typer.Option(None, "--spec-file", help="YAML generation spec"),
    out: Path = typer.Option(Path("corpus"), "--out", help="Output directory"),
    workers: int = typer.Option(1, "--workers", min=1, help="Concurrent instance builds"),
    seed: Optional[int] = typer.Option(None, "--seed", envvar="SSCF_SEED", help="Corpus seed"),
):
    """Generate a seeded corpus of SUT instances (or manufactured problems)."""
    state = get_state(ctx)
    arguments = {"mu": mu, "ells": ells, "from_characteristics": from_characteristics, "variant": variant,
                 "degree": degree, "d": d, "count": count, "spec_file": spec_file, "out": out,
                 "problem": problem, "scramble": scramble_degree}
    try:
        seed = state.seed if seed is None else seed
        if spec_file is not None:
            specs = corpus_io.specs_from_yaml(corpus_io.load_yaml(spec_file))
        else:
            specs = _specs_from_flags(mu, ells, from_characteristics, variant, degree, d, count, conditioning,
                                      interval, seed)
        out.mkdir(parents=True, exist_ok=True)
        entries = []
        with timed(state.timings, "generate"):
            if problem:
                for index, spec in enumerate(specs):
                    name = f"problem-{index:05d}"
                    item = genbench.manufactured_problem(spec, index, tolerances=state.tolerances)
                    corpus_io.write_json(out / f"{name}.json", item.to_dict())
                    entries.append({"name": name, "signature": list(spec.sig.ells), "variant": spec.variant.value,
                                    "d": spec.d})
            else:
                instances = genbench.generate_corpus(specs, scramble_degree=scramble_degree, workers=workers,
                                                     tolerances=state.tolerances)
                corpus_io.export_corpus(out, instances)
                entries = [{"name": i.name, "signature": list(i.spec.sig.ells), "variant": i.spec.variant.value,
                            "characteristics": i.characteristics.to_dict()} for i in instances]
        report = make_report(state, "generate", {"out": str(out), "count": len(entries), "instances": entries},
                             arguments=arguments, inputs=[spec_file])
        emit(state, report)
    except SystemExit:
        raise
    except Exception as e:
        handle_error(e, state, "generate", arguments)
