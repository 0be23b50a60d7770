"""
Utility functions for the sscf package.
"""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Union

from .exceptions import SscfValidationError
from .models import BlockSignature, Characteristics


def parse_int_list(text: str) -> tuple[int, ...]:
    """
    Parse a comma separated list of integers.

    Example:
        >>> parse_int_list("8,7,5, 4,2")
        (8, 7, 5, 4, 2)
        >>> parse_int_list("8;7")
        Traceback (most recent call last):
            ...
        sscf.exceptions.SscfValidationError: Invalid integer list: '8;7'
    """
    try:
        return tuple(int(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise SscfValidationError(f"Invalid integer list: {text!r}")


def parse_ells(text: str, mu: int | None = None) -> BlockSignature:
    """Block signature from "l_1,...,l_mu"; `mu`, when given, must match the count."""
    ells = parse_int_list(text)
    sig = BlockSignature(ells)
    if mu is not None and sig.mu != mu:
        raise SscfValidationError(f"--mu {mu} does not match {sig.mu} block sizes {list(ells)}")
    return sig


def parse_characteristics(text: str) -> Characteristics:
    """
    Parse "m=26,r=18,thetas=7,5,4,2" (optionally with d=...).

    The thetas list runs to the end of the string or to the next key=value item.

    Example:
        >>> parse_characteristics("m=26,r=18,thetas=7,5,4,2").thetas
        (7, 5, 4, 2)
    """
    fields: dict[str, list[str]] = {}
    current = None
    for item in (part.strip() for part in text.split(",")):
        if not item:
            continue
        if "=" in item:
            current, value = (s.strip() for s in item.split("=", 1))
            fields[current] = [value] if value else []
        elif current == "thetas":
            fields[current].append(item)
        else:
            raise SscfValidationError(f"Invalid characteristics item {item!r} in {text!r}")
    unknown = set(fields) - {"m", "r", "thetas", "d", "mu"}
    if unknown or not {"m", "r"} <= set(fields):
        raise SscfValidationError(f"Characteristics need m=, r= and thetas=, got {text!r}")
    try:
        data = {"m": int(fields["m"][0]), "r": int(fields["r"][0]),
                "thetas": [int(v) for v in fields.get("thetas", [])]}
        for key in ("d", "mu"):
            if key in fields:
                data[key] = int(fields[key][0])
    except (ValueError, IndexError):
        raise SscfValidationError(f"Invalid characteristics: {text!r}")
    return Characteristics.from_dict(data)


def sha256_bytes(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def file_digest(path: Union[str, Path]) -> str:
    """sha256 of a file, or of all files of a directory in sorted order."""
    path = Path(path)
    digest = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for item in files:
        if path.is_dir():
            digest.update(item.relative_to(path).as_posix().encode())
        digest.update(item.read_bytes())
    return digest.hexdigest()
