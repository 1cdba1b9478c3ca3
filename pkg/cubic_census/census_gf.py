from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from sympy import Poly, factorint, isprime, symbols

from .census_errors import (
    FieldDivisionByZeroError,
    IncompatibleFieldsError,
    MalformedInputError,
    ReducibleModulusError,
    UnsupportedFieldError,
)
from .census_utils import BATCH_ELEMENT_BUDGET, BUILTIN_MODULI, MAX_FIELD_SIZE

LOGGER = logging.getLogger(__name__)

ARITH_OPS = ("add", "mul", "inv", "frobenius")
ADD_TABLE_LIMIT = 1024

_X = symbols("x")


@dataclass(frozen=True)
class FieldCtx:
    """GF(p^k) with elements encoded as integers sum(c_i * p^i) over the power basis."""

    p: int
    k: int
    modulus: tuple[int, ...]
    digits: np.ndarray = field(repr=False, compare=False)
    powers: np.ndarray = field(repr=False, compare=False)
    exp_table: np.ndarray = field(repr=False, compare=False)
    log_table: np.ndarray = field(repr=False, compare=False)
    neg_table: np.ndarray = field(repr=False, compare=False)
    inv_table: np.ndarray = field(repr=False, compare=False)
    frobenius_table: np.ndarray = field(repr=False, compare=False)
    add_table: np.ndarray | None = field(repr=False, compare=False)
    modulus_source: str = field(default="table", compare=False)

    def __reduce__(self):
        return (field_create, (self.p, self.k, self.modulus))

    @property
    def q(self) -> int:
        return self.p**self.k

    @property
    def is_prime_field(self) -> bool:
        return self.k == 1

    def describe(self) -> str:
        return f"GF({self.q}) = F_{self.p}[x]/({format_modulus(self.modulus)})"

    def elements(self) -> np.ndarray:
        return np.arange(self.q, dtype=np.int64)

    def check_element(self, a: int) -> int:
        value = int(a)
        if not 0 <= value < self.q:
            raise MalformedInputError(f"{a} is not an element of GF({self.q})")
        return value

    def coordinates(self, a: int) -> tuple[int, ...]:
        return tuple(int(value) for value in self.digits[self.check_element(a)])

    def from_coordinates(self, coords: Sequence[int]) -> int:
        if len(coords) != self.k:
            raise MalformedInputError(f"expected {self.k} coordinates, got {len(coords)}")
        return int(sum((int(c) % self.p) * self.p**i for i, c in enumerate(coords)))

    def add(self, a: int, b: int) -> int:
        return int(self.add_array(np.int64(a), np.int64(b)))

    def neg(self, a: int) -> int:
        return int(self.neg_table[a])

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return int(self.exp_table[self.log_table[a] + self.log_table[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise FieldDivisionByZeroError(f"0 has no inverse in GF({self.q})")
        return int(self.inv_table[a])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, exponent: int) -> int:
        if a == 0:
            if exponent < 0:
                raise FieldDivisionByZeroError("negative power of 0")
            return 1 if exponent == 0 else 0
        return int(self.exp_table[(int(self.log_table[a]) * exponent) % (self.q - 1)])

    def frobenius(self, a: int) -> int:
        return int(self.frobenius_table[a])

    def scale(self, a: int, n: int) -> int:
        return self.mul(a, n % self.p)

    def add_array(self, a, b) -> np.ndarray:
        if self.p == 2:
            return np.bitwise_xor(a, b)
        if self.k == 1:
            return (a + b) % self.p
        if self.add_table is not None:
            return self.add_table[a, b]
        return np.tensordot((self.digits[a] + self.digits[b]) % self.p, self.powers, axes=([-1], [0]))

    def neg_array(self, a) -> np.ndarray:
        return self.neg_table[a]

    def sub_array(self, a, b) -> np.ndarray:
        return self.add_array(a, self.neg_table[b])

    def mul_array(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.k == 1:
            return (a * b) % self.p
        product_values = self.exp_table[self.log_table[a] + self.log_table[b]]
        return np.where((a == 0) | (b == 0), 0, product_values)

    def inv_array(self, a) -> np.ndarray:
        """Inverses elementwise; zero maps to zero and callers mask it."""
        return self.inv_table[a]

    def scale_array(self, a, n: int) -> np.ndarray:
        return self.mul_array(a, n % self.p)


def format_modulus(modulus: Sequence[int]) -> str:
    terms = []
    for degree in range(len(modulus) - 1, -1, -1):
        coefficient = modulus[degree]
        if coefficient == 0:
            continue
        if degree == 0:
            terms.append(str(coefficient))
            continue
        power = "x" if degree == 1 else f"x^{degree}"
        terms.append(power if coefficient == 1 else f"{coefficient}*{power}")
    return " + ".join(terms) if terms else "0"


def _to_digits(value: int, p: int, k: int) -> list[int]:
    return [(value // p**i) % p for i in range(k)]


def _poly_mulmod(a: list[int], b: list[int], modulus: tuple[int, ...], p: int) -> list[int]:
    k = len(modulus) - 1
    product_coeffs = [0] * (2 * k - 1)
    for i, a_i in enumerate(a):
        if a_i:
            for j, b_j in enumerate(b):
                product_coeffs[i + j] = (product_coeffs[i + j] + a_i * b_j) % p
    for degree in range(len(product_coeffs) - 1, k - 1, -1):
        lead = product_coeffs[degree]
        if lead:
            for i in range(k + 1):
                product_coeffs[degree - k + i] = (product_coeffs[degree - k + i] - lead * modulus[i]) % p
    return product_coeffs[:k]


def _poly_powmod(a: list[int], exponent: int, modulus: tuple[int, ...], p: int) -> list[int]:
    k = len(modulus) - 1
    result = [1] + [0] * (k - 1)
    base = list(a)
    while exponent:
        if exponent & 1:
            result = _poly_mulmod(result, base, modulus, p)
        base = _poly_mulmod(base, base, modulus, p)
        exponent >>= 1
    return result


def is_irreducible_modulus(p: int, modulus: Sequence[int]) -> bool:
    if len(modulus) == 2:
        return True
    return bool(Poly(list(reversed(modulus)), _X, modulus=p).is_irreducible)


def smallest_irreducible_modulus(p: int, k: int) -> tuple[int, ...]:
    for tail in range(p**k):
        candidate = tuple(_to_digits(tail, p, k)) + (1,)
        if is_irreducible_modulus(p, candidate):
            return candidate
    raise UnsupportedFieldError(f"no irreducible polynomial of degree {k} over F_{p}")


def _primitive_element(p: int, k: int, modulus: tuple[int, ...]) -> int:
    q = p**k
    if q == 2:
        return 1
    prime_factors = list(factorint(q - 1))
    one = [1] + [0] * (k - 1)
    for candidate in range(2, q):
        digits = _to_digits(candidate, p, k)
        if all(_poly_powmod(digits, (q - 1) // r, modulus, p) != one for r in prime_factors):
            return candidate
    raise UnsupportedFieldError(f"modulus {format_modulus(modulus)} has no primitive element")


@lru_cache(maxsize=None)
def _build_field(p: int, k: int, modulus: tuple[int, ...], source: str) -> FieldCtx:
    q = p**k
    powers = p ** np.arange(k, dtype=np.int64)
    digits = (np.arange(q, dtype=np.int64)[:, None] // powers[None, :]) % p

    generator = _primitive_element(p, k, modulus)
    generator_digits = _to_digits(generator, p, k)
    multiply_by_generator = np.array(
        [_poly_mulmod(generator_digits, _to_digits(p**s, p, k), modulus, p) for s in range(k)],
        dtype=np.int64,
    ).T
    exp_values = np.zeros(q - 1, dtype=np.int64)
    vector = np.zeros(k, dtype=np.int64)
    vector[0] = 1
    for i in range(q - 1):
        exp_values[i] = int(vector @ powers)
        vector = (multiply_by_generator @ vector) % p

    log_table = np.zeros(q, dtype=np.int64)
    log_table[exp_values] = np.arange(q - 1, dtype=np.int64)
    exp_table = np.concatenate([exp_values, exp_values])

    nonzero = np.arange(1, q, dtype=np.int64)
    inv_table = np.zeros(q, dtype=np.int64)
    inv_table[nonzero] = exp_values[(q - 1 - log_table[nonzero]) % (q - 1)]
    frobenius_table = np.zeros(q, dtype=np.int64)
    frobenius_table[nonzero] = exp_values[(log_table[nonzero] * p) % (q - 1)]
    neg_table = ((-digits) % p) @ powers

    add_table = None
    if p != 2 and k > 1 and q <= ADD_TABLE_LIMIT:
        add_table = ((digits[:, None, :] + digits[None, :, :]) % p) @ powers

    LOGGER.debug("Built GF(%s) tables with generator %s", q, generator)
    return FieldCtx(
        p=p,
        k=k,
        modulus=modulus,
        digits=digits,
        powers=powers,
        exp_table=exp_table,
        log_table=log_table,
        neg_table=neg_table,
        inv_table=inv_table,
        frobenius_table=frobenius_table,
        add_table=add_table,
        modulus_source=source,
    )


@lru_cache(maxsize=None)
def field_create(p: int, k: int = 1, modulus: tuple[int, ...] | None = None) -> FieldCtx:
    if k < 1 or not isprime(p):
        raise UnsupportedFieldError(f"GF({p}^{k}) is not a finite field of prime characteristic")
    if p**k > MAX_FIELD_SIZE:
        raise UnsupportedFieldError(f"GF({p}^{k}) exceeds the supported size {MAX_FIELD_SIZE}")

    if modulus is not None:
        reduced = tuple(int(c) % p for c in modulus)
        if len(reduced) != k + 1 or reduced[-1] != 1:
            raise MalformedInputError(f"modulus must be monic of degree {k}, got {list(modulus)}")
        if not is_irreducible_modulus(p, reduced):
            raise ReducibleModulusError(f"{format_modulus(reduced)} is reducible over F_{p}")
        return _build_field(p, k, reduced, "supplied")

    if k == 1:
        return _build_field(p, 1, (0, 1), "prime")

    table_modulus = BUILTIN_MODULI.get((p, k))
    if table_modulus is not None:
        if is_irreducible_modulus(p, table_modulus):
            return _build_field(p, k, table_modulus, "table")
        LOGGER.warning(
            "Built-in modulus %s for GF(%s) is reducible; falling back to a searched modulus",
            format_modulus(table_modulus),
            p**k,
        )
    return _build_field(p, k, smallest_irreducible_modulus(p, k), "search")


def extension_field(ctx: FieldCtx, degree: int) -> FieldCtx:
    if degree == 1:
        return ctx
    return field_create(ctx.p, ctx.k * degree)


def arith(ctx: FieldCtx, op: str, a: int, b: int | None = None) -> int:
    a = ctx.check_element(a)
    if op in ("add", "mul"):
        if b is None:
            raise ValueError(f"{op} needs two operands")
        b = ctx.check_element(b)
        return ctx.add(a, b) if op == "add" else ctx.mul(a, b)
    if op == "inv":
        return ctx.inv(a)
    if op == "frobenius":
        return ctx.frobenius(a)
    raise ValueError(f"op must be one of: {', '.join(ARITH_OPS)}")


def format_element(ctx: FieldCtx, a: int) -> str:
    coords = ctx.coordinates(a)
    if ctx.k == 1:
        return str(coords[0])
    if ctx.p < 10:
        return "".join(str(c) for c in reversed(coords))
    return ":".join(str(c) for c in reversed(coords))


def parse_element(ctx: FieldCtx, text: str) -> int:
    text = text.strip()
    try:
        if ctx.k == 1:
            digits_msf = [int(text)]
        elif ctx.p < 10:
            digits_msf = [int(char) for char in text]
        else:
            digits_msf = [int(part) for part in text.split(":")]
    except ValueError as exc:
        raise MalformedInputError(f"{text!r} is not an element of GF({ctx.q})") from exc
    if len(digits_msf) != ctx.k or any(not 0 <= d < ctx.p for d in digits_msf):
        raise MalformedInputError(f"{text!r} is not an element of GF({ctx.q})")
    return ctx.from_coordinates(list(reversed(digits_msf)))


def _check_compatible(source: FieldCtx, target: FieldCtx) -> None:
    if source.p != target.p or target.k % source.k != 0:
        raise IncompatibleFieldsError(f"GF({source.q}) does not embed in GF({target.q})")


@lru_cache(maxsize=None)
def embed_table(source: FieldCtx, target: FieldCtx) -> np.ndarray:
    """Images of every source element under the pinned embedding into target."""
    _check_compatible(source, target)
    if source.k == 1:
        return np.arange(source.p, dtype=np.int64)
    if source == target:
        return source.elements()

    candidates = target.elements()
    values = np.zeros(target.q, dtype=np.int64)
    for coefficient in reversed(source.modulus):
        values = target.add_array(target.mul_array(values, candidates), coefficient)
    roots = np.flatnonzero(values == 0)
    if roots.size == 0:
        raise IncompatibleFieldsError(f"{format_modulus(source.modulus)} has no root in GF({target.q})")
    root = int(roots[0])

    images = np.zeros(source.q, dtype=np.int64)
    root_power = 1
    for i in range(source.k):
        images = target.add_array(images, target.mul_array(source.digits[:, i], root_power))
        root_power = target.mul(root_power, root)
    LOGGER.debug("Embedding GF(%s) into GF(%s) via root %s", source.q, target.q, root)
    return images


def embed(a: int, source: FieldCtx, target: FieldCtx) -> int:
    return int(embed_table(source, target)[source.check_element(a)])


@lru_cache(maxsize=None)
def embed_mul_matrices(source: FieldCtx, target: FieldCtx) -> np.ndarray:
    """For each source element a, the F_p matrix of multiplication by embed(a) on target."""
    images = embed_table(source, target)
    basis = target.powers
    products = target.mul_array(images[:, None], basis[None, :])
    return target.digits[products].transpose(0, 2, 1).copy()


def lane_width(ctx: FieldCtx, terms: int) -> int | None:
    """Bits per digit lane so that `terms` packed elements add without carries, None past 63 bits."""
    width = max(1, terms * (ctx.p - 1)).bit_length()
    return width if width * ctx.k <= 63 else None


@lru_cache(maxsize=None)
def lane_codes(ctx: FieldCtx, width: int) -> np.ndarray:
    """Each element with its base-p digits spread over lanes of `width` bits."""
    shifts = width * np.arange(ctx.k, dtype=np.int64)
    return (ctx.digits << shifts[None, :]).sum(axis=1)


def decode_lanes(ctx: FieldCtx, packed: np.ndarray, width: int) -> np.ndarray:
    mask = (1 << width) - 1
    out = np.zeros(np.shape(packed), dtype=np.int64)
    for i in range(ctx.k):
        out += (((packed >> (width * i)) & mask) % ctx.p) * int(ctx.powers[i])
    return out


def sum_elements(ctx: FieldCtx, values: np.ndarray, axis: int = -1) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    if ctx.p == 2:
        return np.bitwise_xor.reduce(values, axis=axis)
    if ctx.k == 1:
        return values.sum(axis=axis) % ctx.p
    width = lane_width(ctx, values.shape[axis])
    if width is None:
        return (ctx.digits[values].sum(axis=axis) % ctx.p) @ ctx.powers
    return decode_lanes(ctx, lane_codes(ctx, width)[values].sum(axis=axis), width)


def linear_combination(
    target: FieldCtx,
    values: np.ndarray,
    coeffs: np.ndarray,
    source: FieldCtx | None = None,
) -> np.ndarray:
    """out[n, m] = sum_j coeffs[m, j] * values[n, j], coefficients taken from a subfield."""
    source = source or target
    values = np.asarray(values, dtype=np.int64)
    coeffs = embed_table(source, target)[np.asarray(coeffs, dtype=np.int64)]
    out = np.zeros((values.shape[0], coeffs.shape[0]), dtype=np.int64)
    if values.shape[0] == 0 or coeffs.shape[0] == 0:
        return out
    chunk = max(1, BATCH_ELEMENT_BUDGET // max(1, values.shape[0] * values.shape[1]))
    for start in range(0, coeffs.shape[0], chunk):
        block = coeffs[start : start + chunk]
        products = target.mul_array(values[:, None, :], block[None, :, :])
        out[:, start : start + chunk] = sum_elements(target, products, axis=-1)
    return out


@lru_cache(maxsize=None)
def sqrt_table(ctx: FieldCtx) -> np.ndarray:
    """Smallest square root of each element, -1 for non-squares."""
    elements = ctx.elements()
    table = np.full(ctx.q, ctx.q, dtype=np.int64)
    np.minimum.at(table, ctx.mul_array(elements, elements), elements)
    table[table == ctx.q] = -1
    return table


@lru_cache(maxsize=None)
def pth_root_table(ctx: FieldCtx) -> np.ndarray:
    table = np.zeros(ctx.q, dtype=np.int64)
    table[ctx.frobenius_table] = ctx.elements()
    return table


@lru_cache(maxsize=None)
def artin_schreier_table(ctx: FieldCtx) -> np.ndarray:
    """Smallest u with u^2 + u = a in characteristic 2, -1 when none exists."""
    if ctx.p != 2:
        raise IncompatibleFieldsError("u^2 + u = a tables exist only in characteristic 2")
    elements = ctx.elements()
    table = np.full(ctx.q, ctx.q, dtype=np.int64)
    np.minimum.at(table, ctx.add_array(ctx.mul_array(elements, elements), elements), elements)
    table[table == ctx.q] = -1
    return table
