"""
Files on disk: corpus directories, generation specs in YAML, matrices, pairs, transforms and
problems in JSON.

A corpus is a directory holding `manifest.json` and one JSON file per instance; the manifest
records every instance's spec, seed and sha256 checksum.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Iterable, List, Union

import numpy as np
import yaml

from . import chebmat
from .chebmat import MatrixFunction
from .dae import Problem, ScfPair
from .equivalence import DaePair, EquivalenceTransform
from .exceptions import CorpusIntegrityError, ParseError, SscfValidationError
from .genbench import Instance
from .models import BlockSignature, Characteristics, GenSpec, Variant, VerificationReport
from .utils import sha256_bytes

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1

PathLike = Union[str, Path]

_GENSPEC_KEYS = {"signature", "variant", "interval", "entry_degree", "conditioning", "d", "count", "seed"}


def dumps(data: Any) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def read_json(path: PathLike) -> Any:
    """
    Raises:
        ParseError: the file is missing or not valid JSON; details carry file, line and column
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ParseError(f"Cannot read {path}: {e.strerror}", details={"file": str(path)})
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}:{e.lineno}:{e.colno}: {e.msg}",
                         details={"file": str(path), "line": e.lineno, "column": e.colno})


def write_json(path: PathLike, data: Any) -> str:
    """Write canonical JSON; returns the sha256 of the written bytes."""
    payload = dumps(data).encode()
    Path(path).write_bytes(payload)
    return sha256_bytes(payload)


def _decode(path: Path, data: Any, decoder, what: str):
    try:
        return decoder(data)
    except SscfValidationError as e:
        raise ParseError(f"{path}: invalid {what}: {e}", details={"file": str(path), **e.details})
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ParseError(f"{path}: invalid {what}: {e!r}", details={"file": str(path)})


# generation specs (YAML)

def load_yaml(path: PathLike) -> dict:
    path = Path(path)
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ParseError(f"Cannot read {path}: {e.strerror}", details={"file": str(path)})
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        details = {"file": str(path)}
        if mark is not None:
            details.update(line=mark.line + 1, column=mark.column + 1)
        raise ParseError(f"{path}: malformed YAML: {getattr(e, 'problem', e)}", details=details)
    validate_yaml(data)
    return data


def validate_yaml(data: Any) -> None:
    """
    Raises:
        SscfValidationError: required fields missing or unknown keys present
    """
    if not isinstance(data, dict):
        raise SscfValidationError("Generation spec must be a mapping")
    instances = data.get("instances")
    if not instances or not isinstance(instances, list):
        raise SscfValidationError("YAML missing required field: instances")
    for position, entry in enumerate(instances):
        if not isinstance(entry, dict) or "signature" not in entry:
            raise SscfValidationError(f"instances[{position}] missing required field: signature")
        unknown = set(entry) - _GENSPEC_KEYS
        if unknown:
            raise SscfValidationError(f"instances[{position}] has unknown keys {sorted(unknown)}. "
                                      f"Valid keys: {sorted(_GENSPEC_KEYS)}")
        variant = entry.get("variant", data.get("defaults", {}).get("variant", "columns"))
        Variant.parse(variant)


def _signature_field(value: Any) -> dict:
    if isinstance(value, dict):
        return value
    return {"ells": list(value)}


def specs_from_yaml(data: dict) -> List[GenSpec]:
    """
    Expand the `instances` list: each entry, merged over `defaults`, yields `count` specs
    sharing the corpus seed (instances are told apart by their index).
    """
    validate_yaml(data)
    defaults = dict(data.get("defaults") or {})
    seed = int(data.get("seed", 0))
    specs = []
    for entry in data["instances"]:
        merged = {**defaults, **entry}
        merged["signature"] = _signature_field(merged["signature"])
        merged.setdefault("seed", seed)
        count = int(merged.pop("count", 1))
        spec = GenSpec.from_dict(merged)
        specs.extend([spec] * count)
    return specs


# corpus directories

def instance_to_dict(instance: Instance) -> dict:
    out = {
        "format": FORMAT_VERSION,
        "name": instance.name,
        "index": instance.index,
        "spec": instance.spec.to_dict(),
        "pair": instance.pair.to_dict(),
        "characteristics": instance.characteristics.to_dict(),
    }
    if instance.scrambled is not None:
        out["scrambled"] = instance.scrambled.to_dict()
    if instance.transform is not None:
        out["transform"] = instance.transform.to_dict()
    if instance.verification is not None:
        out["verification"] = instance.verification.to_dict()
    return out


def instance_from_dict(data: dict) -> Instance:
    return Instance(
        name=str(data["name"]),
        spec=GenSpec.from_dict(data["spec"]),
        index=int(data["index"]),
        pair=ScfPair.from_dict(data["pair"]),
        characteristics=Characteristics.from_dict(data["characteristics"]),
        scrambled=DaePair.from_dict(data["scrambled"]) if "scrambled" in data else None,
        transform=EquivalenceTransform.from_dict(data["transform"]) if "transform" in data else None,
        verification=VerificationReport.from_dict(data["verification"]) if "verification" in data else None,
    )


def export_corpus(path: PathLike, instances: Iterable[Instance]) -> Path:
    """
    Write one file per instance plus the manifest; returns the manifest path.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for instance in instances:
        file_name = f"{instance.name}.json"
        checksum = write_json(root / file_name, instance_to_dict(instance))
        entries.append({
            "name": instance.name,
            "file": file_name,
            "index": instance.index,
            "seed": instance.spec.seed,
            "spec": instance.spec.to_dict(),
            "sha256": checksum,
        })
    manifest = root / MANIFEST_NAME
    write_json(manifest, {"format": FORMAT_VERSION, "instances": entries})
    logger.info(f"exported {len(entries)} instances to {root}")
    return manifest


def import_corpus(path: PathLike) -> List[Instance]:
    """
    Read a corpus directory in manifest order.

    Raises:
        ParseError: the manifest or an instance file is malformed
        CorpusIntegrityError: an instance file does not match its manifest checksum
    """
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    manifest = read_json(manifest_path)
    if not isinstance(manifest, dict) or not isinstance(manifest.get("instances"), list):
        raise ParseError(f"{manifest_path}: missing instances list", details={"file": str(manifest_path)})
    instances = []
    for position, entry in enumerate(manifest["instances"]):
        try:
            file_path = root / entry["file"]
            expected = entry["sha256"]
        except (KeyError, TypeError) as e:
            raise ParseError(f"{manifest_path}: instances[{position}] missing {e}",
                             details={"file": str(manifest_path), "entry": position})
        try:
            payload = file_path.read_bytes()
        except OSError as e:
            raise ParseError(f"Cannot read {file_path}: {e.strerror}", details={"file": str(file_path)})
        actual = sha256_bytes(payload)
        if actual != expected:
            raise CorpusIntegrityError(f"Checksum mismatch for {file_path.name}",
                                       details={"file": str(file_path), "expected": expected, "actual": actual})
        instances.append(_decode(file_path, read_json(file_path), instance_from_dict, "instance"))
    logger.info(f"imported {len(instances)} instances from {root}")
    return instances


def is_corpus(path: PathLike) -> bool:
    return (Path(path) / MANIFEST_NAME).is_file()


# single objects

def load_matrix(path: PathLike) -> MatrixFunction:
    """
    A matrix file holds a serialized matrix function, a nested list (constant matrix) or
    {"matrix": nested list}; Jordan matrices may be given as {"jordan": [orders...]}.
    """
    from .structure import jordan_matrix

    path = Path(path)
    data = read_json(path)

    def decode(data):
        if isinstance(data, list):
            return chebmat.constant(np.asarray(data, dtype=float))
        if "jordan" in data:
            return chebmat.constant(jordan_matrix([int(k) for k in data["jordan"]]))
        if "matrix" in data:
            return chebmat.constant(np.asarray(data["matrix"], dtype=float))
        if "n_part" in data:
            return MatrixFunction.from_dict(data["n_part"])
        return MatrixFunction.from_dict(data)

    return _decode(path, data, decode, "matrix")


def load_signature(path: PathLike) -> BlockSignature:
    path = Path(path)
    return _decode(path, read_json(path), lambda d: BlockSignature.from_dict(d["signature"]), "signature")


def load_pair(path: PathLike) -> DaePair:
    """A pair file is {E, F}, an SCF pair, or a corpus instance (its SCF pair)."""
    from .dae import to_dae_pair

    path = Path(path)
    data = read_json(path)

    def decode(data):
        if "E" in data:
            return DaePair.from_dict(data)
        if "n_part" in data:
            return to_dae_pair(ScfPair.from_dict(data))
        if "pair" in data:
            return to_dae_pair(ScfPair.from_dict(data["pair"]))
        raise KeyError("E")

    return _decode(path, data, decode, "pair")


def load_transform(path: PathLike) -> EquivalenceTransform:
    path = Path(path)
    data = read_json(path)
    return _decode(path, data.get("transform", data) if isinstance(data, dict) else data,
                   EquivalenceTransform.from_dict, "transform")


def load_problem(path: PathLike) -> Problem:
    path = Path(path)
    return _decode(path, read_json(path), Problem.from_dict, "problem")


def load_instance(path: PathLike) -> Instance:
    path = Path(path)
    return _decode(path, read_json(path), instance_from_dict, "instance")


def load_scf_pair(path: PathLike) -> ScfPair:
    """
    An SCF pair file, a corpus instance (its SCF pair) or a matrix file (taken as the nilpotent
    part of a pair with d = 0).
    """
    path = Path(path)
    data = read_json(path)
    if isinstance(data, dict) and "pair" in data:
        return _decode(path, data["pair"], ScfPair.from_dict, "SCF pair")
    if isinstance(data, dict) and "n_part" in data:
        return _decode(path, data, ScfPair.from_dict, "SCF pair")
    return ScfPair(0, None, load_matrix(path))
