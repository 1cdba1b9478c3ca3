from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from fractions import Fraction
from itertools import product
from pathlib import Path
from typing import Any

from sympy import factorint

from .census_errors import MalformedInputError
from .census_models import RationalDict

ENGINE_VERSION = "1.0.0"
NUM_VARIABLES = 4
MAX_FIELD_SIZE = 2**16
INDEX_LIMIT = 2**63

BUILTIN_MODULI: dict[tuple[int, int], tuple[int, ...]] = {
    # coefficients listed from the constant term up
    (2, 2): (1, 1, 1),
    (2, 3): (1, 1, 0, 1),
    (2, 4): (1, 1, 0, 0, 1),
    (2, 8): (1, 1, 0, 1, 1, 0, 0, 0, 1),
    (3, 2): (1, 0, 1),
    (3, 4): (2, 1, 0, 0, 1),
    (5, 2): (1, 1, 1),
    (7, 2): (1, 0, 1),
}

ADMISSIBLE_TRACES = (-3, -2, -1, 0, 1, 2, 3, 4, 6)
T6_FORBIDDEN_Q = frozenset({2, 3, 5})
MAX_LINES_ON_SMOOTH_CUBIC = 27

DEFAULT_SEARCH_DEPTH = 4
DEFAULT_CHUNK_SIZE = 16_384
DEFAULT_CHECKPOINT_INTERVAL = 262_144
BATCH_ELEMENT_BUDGET = 2_000_000
FINDINGS_CAP = 1_000

CONFIDENCE_LEVEL = "0.99"
Z_99 = "2.5758293035489004"
HALF_WIDTH_PLACES = 6

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_INVALID_INPUT = 2
EXIT_UNSUPPORTED_FIELD = 3

PROJECT_DIR = Path(__file__).resolve().parent.parent
DATA_DIR = PROJECT_DIR / "data"
LOG_DIR = PROJECT_DIR / "logs"


def monomials(degree: int, num_variables: int = NUM_VARIABLES) -> tuple[tuple[int, ...], ...]:
    """Exponent vectors of the given degree, lexicographically descending."""
    exponents = [
        exponent
        for exponent in product(range(degree + 1), repeat=num_variables)
        if sum(exponent) == degree
    ]
    return tuple(sorted(exponents, reverse=True))


MONOMIALS_2 = monomials(2)
MONOMIALS_3 = monomials(3)
MONOMIALS_4 = monomials(4)
MONOMIALS_5 = monomials(5)
MONOMIALS_6 = monomials(6)


def monomial_index(monomial_list: tuple[tuple[int, ...], ...]) -> dict[tuple[int, ...], int]:
    return {exponent: position for position, exponent in enumerate(monomial_list)}


def parse_prime_power(q: int) -> tuple[int, int]:
    if q < 2:
        raise MalformedInputError(f"q must be a prime power, got {q}")
    factors = factorint(q)
    if len(factors) != 1:
        raise MalformedInputError(f"q must be a prime power, got {q}")
    ((p, k),) = factors.items()
    return int(p), int(k)


def class_count(q: int) -> int:
    return (q**20 - 1) // (q - 1)


def projective_point_count(q: int, dimension: int = 3) -> int:
    return sum(q**i for i in range(dimension + 1))


def point_count_for_trace(q: int, trace: int) -> int:
    return q * q + (trace + 1) * q + 1


def rational_dict(value: Fraction) -> RationalDict:
    return {"num": value.numerator, "den": value.denominator}


def rational_from_dict(payload: Mapping[str, Any]) -> Fraction:
    return Fraction(int(payload["num"]), int(payload["den"]))


def format_rational(value: Fraction | None) -> str:
    if value is None:
        return "n/a"
    return f"{value.numerator}/{value.denominator}"


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def sha256_hex(payload: Any) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def parse_window(text: str) -> tuple[int, int]:
    start_text, separator, stop_text = text.partition(":")
    if not separator:
        raise MalformedInputError(f"window must look like START:STOP, got {text!r}")
    try:
        start, stop = int(start_text), int(stop_text)
    except ValueError as exc:
        raise MalformedInputError(f"window bounds must be integers, got {text!r}") from exc
    if start < 0 or stop <= start:
        raise MalformedInputError(f"window must satisfy 0 <= START < STOP, got {text!r}")
    return start, stop


def parse_modulus(text: str) -> tuple[int, ...]:
    """Parse 'c_k,...,c_1,c_0' (leading coefficient first) into constant-first order."""
    try:
        leading_first = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise MalformedInputError(f"modulus must be comma-separated integers, got {text!r}") from exc
    if len(leading_first) < 2:
        raise MalformedInputError(f"modulus needs at least two coefficients, got {text!r}")
    return tuple(reversed(leading_first))
