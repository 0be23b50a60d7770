"""
Data records for the sscf package.

This module contains the plain records exchanged between the numerical modules, the corpus
files and the CLI. Each record validates its invariants on construction and converts to and
from the JSON layouts used on disk.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from .chebmat import Interval, MatrixFunction
from .exceptions import SignatureError, SscfValidationError
from .settings import DEFAULT_TOLERANCES


class Variant(str, Enum):
    """SUT sub-class a nilpotent part belongs to."""
    PLAIN = "plain"
    COLUMNS = "columns"
    ROWS = "rows"

    @classmethod
    def parse(cls, value: "str | Variant") -> Variant:
        if isinstance(value, Variant):
            return value
        aliases = {"col": cls.COLUMNS, "cols": cls.COLUMNS, "column": cls.COLUMNS,
                   "row": cls.ROWS}
        try:
            return aliases.get(value, None) or cls(value)
        except ValueError:
            raise SignatureError(f"Unknown variant {value!r}. Valid values: col, row, plain")


@dataclass(frozen=True)
class BlockSignature:
    """
    Block layout (mu, l_1..l_mu) of a strictly upper block-triangular matrix function.

    Attributes:
        ells (tuple[int, ...]): block sizes l_1..l_mu, all positive

    Example:
        >>> BlockSignature((8, 7, 5, 4, 2)).m
        26
    """
    ells: tuple[int, ...]

    def __post_init__(self):
        ells = tuple(int(x) for x in self.ells)
        object.__setattr__(self, "ells", ells)
        if len(ells) < 2:
            raise SignatureError(f"A block signature needs mu >= 2 blocks, got {list(ells)}")
        if any(x <= 0 for x in ells):
            raise SignatureError(f"Block sizes must be positive, got {list(ells)}")

    @property
    def mu(self) -> int:
        return len(self.ells)

    @property
    def m(self) -> int:
        return sum(self.ells)

    @property
    def offsets(self) -> list[int]:
        out = [0]
        for size in self.ells:
            out.append(out[-1] + size)
        return out

    def block_slice(self, i: int) -> slice:
        """Index range of block i (0-based)."""
        offsets = self.offsets
        return slice(offsets[i], offsets[i + 1])

    def is_column_ordered(self) -> bool:
        return all(a >= b for a, b in zip(self.ells, self.ells[1:]))

    def is_row_ordered(self) -> bool:
        return all(a <= b for a, b in zip(self.ells, self.ells[1:]))

    def require(self, variant: Variant) -> None:
        """
        Raises:
            SignatureError: the ordering of the block sizes does not fit `variant`
        """
        if variant is Variant.COLUMNS and not self.is_column_ordered():
            raise SignatureError(f"Column variant needs l_1 >= ... >= l_mu, got {list(self.ells)}")
        if variant is Variant.ROWS and not self.is_row_ordered():
            raise SignatureError(f"Row variant needs l_1 <= ... <= l_mu, got {list(self.ells)}")

    def reversed(self) -> BlockSignature:
        return BlockSignature(tuple(reversed(self.ells)))

    def to_dict(self) -> Dict[str, Any]:
        return {"mu": self.mu, "ells": list(self.ells)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> BlockSignature:
        try:
            sig = cls(tuple(data["ells"]))
        except (KeyError, TypeError) as e:
            raise SignatureError(f"Malformed block signature: {e}")
        if "mu" in data and int(data["mu"]) != sig.mu:
            raise SignatureError(f"mu={data['mu']} does not match {sig.mu} block sizes")
        if "m" in data and int(data["m"]) != sig.m:
            raise SignatureError(f"m={data['m']} does not match sum of block sizes {sig.m}")
        return sig


@dataclass(frozen=True)
class Characteristics:
    """
    Canonical characteristic values of a regular pair.

    Attributes:
        m (int): dimension of the pair
        r (int): rank of E
        mu (int): index (nilpotency index of N)
        thetas (tuple[int, ...]): theta_0..theta_{mu-2}; theta_{mu-1} = 0 is implicit
        d (int): dimension of the dynamic part
    """
    m: int
    r: int
    mu: int
    thetas: tuple[int, ...]
    d: int

    def __post_init__(self):
        thetas = tuple(int(x) for x in self.thetas)
        object.__setattr__(self, "thetas", thetas)
        if self.mu < 1 or len(thetas) != self.mu - 1:
            raise SscfValidationError(f"Index mu={self.mu} needs {self.mu - 1} theta values, got {list(thetas)}")
        if any(a < b for a, b in zip(thetas, thetas[1:])) or any(x <= 0 for x in thetas):
            raise SscfValidationError(f"Need theta_0 >= ... >= theta_(mu-2) > 0, got {list(thetas)}")
        if not 0 <= self.r <= self.m or (self.mu >= 2 and self.r >= self.m):
            raise SscfValidationError(f"Rank r={self.r} inconsistent with m={self.m}")
        if self.d != self.r - sum(thetas) or self.d < 0:
            raise SscfValidationError(f"d={self.d} must equal r - sum(thetas) = {self.r - sum(thetas)} >= 0")

    @property
    def m_nilpotent(self) -> int:
        return self.m - self.d

    def to_dict(self) -> Dict[str, Any]:
        return {"m": self.m, "r": self.r, "mu": self.mu, "thetas": list(self.thetas), "d": self.d}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> Characteristics:
        try:
            thetas = tuple(int(x) for x in data["thetas"])
            r = int(data["r"])
            d = int(data.get("d", r - sum(thetas)))
            return cls(m=int(data["m"]), r=r, mu=int(data.get("mu", len(thetas) + 1)), thetas=thetas, d=d)
        except (KeyError, TypeError, ValueError) as e:
            raise SscfValidationError(f"Malformed characteristics: {e}")


@dataclass
class VerificationReport:
    """
    Result of checking an equivalence transformation on a grid.

    Attributes:
        residual_E (float): max over the grid of ||L E K - E~||
        residual_F (float): max over the grid of ||L F K + L E K' - F~||
        worst_t (float): node of the largest residual
        passed (bool): both residuals within `tol`
    """
    residual_E: float
    residual_F: float
    worst_t: float
    passed: bool
    tol: float
    grid: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "residual_E": self.residual_E,
            "residual_F": self.residual_F,
            "worst_t": self.worst_t,
            "pass": self.passed,
            "tol": self.tol,
            "grid": self.grid,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> VerificationReport:
        return cls(
            residual_E=float(data["residual_E"]),
            residual_F=float(data["residual_F"]),
            worst_t=float(data["worst_t"]),
            passed=bool(data["pass"]),
            tol=float(data.get("tol", 0.0)),
            grid=int(data.get("grid", 0)),
        )


@dataclass
class SolveResult:
    """
    Solution of E x' + F x = q for a pair in strong standard canonical form.

    Attributes:
        x (MatrixFunction): solution, m x 1
        residual_norm (float): max over the grid of ||E x' + F x - q||
        free_initial_dimension (int): number of free initial values (= d)
    """
    x: MatrixFunction
    residual_norm: float
    free_initial_dimension: int
    timings: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "residual": self.residual_norm,
            "free_initial_dimension": self.free_initial_dimension,
            "x": self.x.to_dict(),
            "timings": dict(self.timings),
        }


@dataclass(frozen=True)
class GenSpec:
    """
    Recipe for a seeded random SUT instance.

    Attributes:
        sig (BlockSignature): block layout
        variant (Variant): columns or rows
        interval (Interval): time interval
        entry_degree (int): polynomial degree of the time variation
        seed (int): 64-bit seed
        conditioning (float): bound on the condition number of the secondary blocks (>= 1)
        d (int): dimension of the dynamic part of generated SCF pairs
    """
    sig: BlockSignature
    variant: Variant = Variant.COLUMNS
    interval: Interval = Interval(-1.0, 1.0)
    entry_degree: int = 1
    seed: int = 0
    conditioning: float = 4.0
    d: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.variant is Variant.PLAIN:
            raise SignatureError("Generation needs the columns or rows variant")
        self.sig.require(self.variant)
        if not 0 <= self.entry_degree <= DEFAULT_TOLERANCES.degree_cap:
            raise SscfValidationError(
                f"entry_degree must lie in [0, {DEFAULT_TOLERANCES.degree_cap}], got {self.entry_degree}")
        if self.conditioning < 1.0:
            raise SscfValidationError(f"conditioning must be >= 1, got {self.conditioning}")
        if self.d < 0:
            raise SscfValidationError(f"d must be >= 0, got {self.d}")
        if not 0 <= self.seed < 2 ** 64:
            raise SscfValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "signature": self.sig.to_dict(),
            "variant": self.variant.value,
            "interval": self.interval.to_list(),
            "entry_degree": self.entry_degree,
            "seed": self.seed,
            "conditioning": self.conditioning,
            "d": self.d,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> GenSpec:
        try:
            return cls(
                sig=BlockSignature.from_dict(data["signature"]),
                variant=Variant.parse(data.get("variant", "columns")),
                interval=Interval.from_list(data.get("interval", [-1.0, 1.0])),
                entry_degree=int(data.get("entry_degree", 1)),
                seed=int(data.get("seed", 0)),
                conditioning=float(data.get("conditioning", 4.0)),
                d=int(data.get("d", 0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SscfValidationError(f"Malformed generation spec: {e}")


@dataclass
class Report:
    """
    CLI report envelope. The JSON rendering follows `sscf/data/report.schema.json`.
    """
    command: str
    input_digest: Optional[str]
    tolerances: Dict[str, Any]
    results: Dict[str, Any]
    timings: Dict[str, float]
    passed: bool
    arguments: Dict[str, Any] = field(default_factory=dict)
    error: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "command": self.command,
            "arguments": self.arguments,
            "input_digest": self.input_digest,
            "tolerances": self.tolerances,
            "results": self.results,
            "timings": self.timings,
            "pass": self.passed,
        }
        if self.error is not None:
            out["error"] = self.error
        return out


__all__: List[str] = [
    "Variant",
    "BlockSignature",
    "Characteristics",
    "VerificationReport",
    "SolveResult",
    "GenSpec",
    "Report",
]
