from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .census_errors import ContextMismatchError, MalformedInputError, ZeroFormError
from .census_gf import FieldCtx, embed_table, format_element, linear_combination, parse_element
from .census_utils import MONOMIALS_2, MONOMIALS_3, NUM_VARIABLES, monomial_index

LINE_PIVOT_PATTERNS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@dataclass(frozen=True)
class CubicForm:
    ctx: FieldCtx
    coeffs: tuple[int, ...]

    def __post_init__(self) -> None:
        _check_coefficients(self.ctx, self.coeffs, len(MONOMIALS_3))

    @property
    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coeffs, dtype=np.int64)


@dataclass(frozen=True)
class QuadraticForm:
    ctx: FieldCtx
    coeffs: tuple[int, ...]

    def __post_init__(self) -> None:
        _check_coefficients(self.ctx, self.coeffs, len(MONOMIALS_2))

    @property
    def is_zero(self) -> bool:
        return not any(self.coeffs)


@dataclass(frozen=True)
class ProjPoint:
    ctx: FieldCtx
    coords: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.coords) != NUM_VARIABLES or not any(self.coords):
            raise MalformedInputError(f"{self.coords} is not a point of P^3")
        lead = next(value for value in self.coords if value)
        if lead != 1:
            raise MalformedInputError(f"{self.coords} is not normalized; use make_point")

    def format(self) -> str:
        return "[" + ":".join(format_element(self.ctx, value) for value in self.coords) + "]"


@dataclass(frozen=True)
class LineRep:
    """A line of P^3 given by the reduced row echelon basis of its 2-dimensional span."""

    ctx: FieldCtx
    basis: tuple[tuple[int, ...], tuple[int, ...]]

    def __post_init__(self) -> None:
        if len(self.basis) != 2 or any(len(row) != NUM_VARIABLES for row in self.basis):
            raise MalformedInputError(f"{self.basis} is not a 2x{NUM_VARIABLES} line basis")
        for row in self.basis:
            for value in row:
                self.ctx.check_element(value)
        if not all(any(row) for row in self.basis):
            raise MalformedInputError(f"{self.basis} has a zero row")
        pivots = [next(col for col, value in enumerate(row) if value) for row in self.basis]
        if pivots[0] >= pivots[1]:
            raise MalformedInputError(f"{self.basis} is not in row echelon form")
        for row, pivot in zip(self.basis, pivots):
            if row[pivot] != 1:
                raise MalformedInputError(f"{self.basis} has a pivot different from 1")
        if self.basis[0][pivots[1]] != 0:
            raise MalformedInputError(f"{self.basis} is not reduced above the second pivot")


def _check_coefficients(ctx: FieldCtx, coeffs: Sequence[int], expected: int) -> None:
    if len(coeffs) != expected:
        raise MalformedInputError(f"expected {expected} coefficients, got {len(coeffs)}")
    for value in coeffs:
        ctx.check_element(value)


def make_point(ctx: FieldCtx, coords: Sequence[int]) -> ProjPoint:
    values = [ctx.check_element(value) for value in coords]
    if len(values) != NUM_VARIABLES or not any(values):
        raise MalformedInputError(f"{list(coords)} is not a point of P^3")
    scale = ctx.inv(next(value for value in values if value))
    return ProjPoint(ctx, tuple(ctx.mul(value, scale) for value in values))


def make_form(ctx: FieldCtx, coeffs: Sequence[int]) -> CubicForm:
    return CubicForm(ctx, tuple(int(value) for value in coeffs))


def form_from_dict(ctx: FieldCtx, terms: dict[tuple[int, ...], int]) -> CubicForm:
    """Build a cubic from {exponent vector: coefficient}."""
    positions = monomial_index(MONOMIALS_3)
    coeffs = [0] * len(MONOMIALS_3)
    for exponent, value in terms.items():
        if exponent not in positions:
            raise MalformedInputError(f"{exponent} is not a cubic monomial in 4 variables")
        coeffs[positions[exponent]] = ctx.add(coeffs[positions[exponent]], ctx.check_element(value))
    return CubicForm(ctx, tuple(coeffs))


def parse_coefficients(ctx: FieldCtx, text: str) -> CubicForm:
    parts = text.split(",")
    if len(parts) != len(MONOMIALS_3):
        raise MalformedInputError(f"expected {len(MONOMIALS_3)} comma-separated coefficients, got {len(parts)}")
    return CubicForm(ctx, tuple(parse_element(ctx, part) for part in parts))


def format_coefficients(form: CubicForm | QuadraticForm) -> str:
    return ",".join(format_element(form.ctx, value) for value in form.coeffs)


def embed_form(form: CubicForm, target: FieldCtx) -> CubicForm:
    images = embed_table(form.ctx, target)
    return CubicForm(target, tuple(int(images[value]) for value in form.coeffs))


def _monomial_value(ctx: FieldCtx, exponent: Sequence[int], coords: Sequence[int]) -> int:
    value = 1
    for coordinate, power in zip(coords, exponent):
        if power:
            value = ctx.mul(value, ctx.pow(coordinate, power))
    return value


def _evaluate_coefficients(
    ctx: FieldCtx,
    coeffs: Sequence[int],
    monomial_list: tuple[tuple[int, ...], ...],
    coords: Sequence[int],
) -> int:
    total = 0
    for coefficient, exponent in zip(coeffs, monomial_list):
        if coefficient:
            total = ctx.add(total, ctx.mul(coefficient, _monomial_value(ctx, exponent, coords)))
    return total


def evaluate(form: CubicForm | QuadraticForm, point: ProjPoint) -> int:
    if form.ctx != point.ctx:
        raise ContextMismatchError(f"form over GF({form.ctx.q}) evaluated at a point over GF({point.ctx.q})")
    monomial_list = MONOMIALS_3 if isinstance(form, CubicForm) else MONOMIALS_2
    return _evaluate_coefficients(form.ctx, form.coeffs, monomial_list, point.coords)


@lru_cache(maxsize=None)
def _partial_structure() -> tuple[np.ndarray, np.ndarray]:
    """For each variable i and quadratic monomial m: the cubic index of m*x_i and its exponent of x_i."""
    cubic_positions = monomial_index(MONOMIALS_3)
    sources = np.zeros((NUM_VARIABLES, len(MONOMIALS_2)), dtype=np.int64)
    factors = np.zeros((NUM_VARIABLES, len(MONOMIALS_2)), dtype=np.int64)
    for i in range(NUM_VARIABLES):
        for position, exponent in enumerate(MONOMIALS_2):
            raised = list(exponent)
            raised[i] += 1
            sources[i, position] = cubic_positions[tuple(raised)]
            factors[i, position] = raised[i]
    return sources, factors


def partial_coefficients(ctx: FieldCtx, coeffs: np.ndarray) -> np.ndarray:
    """Partial derivatives of a batch of cubics, shape (batch, 4, 10)."""
    sources, factors = _partial_structure()
    gathered = np.asarray(coeffs, dtype=np.int64)[:, sources]
    return ctx.mul_array(gathered, factors % ctx.p)


def partials(form: CubicForm) -> tuple[QuadraticForm, ...]:
    derived = partial_coefficients(form.ctx, form.as_array()[None, :])[0]
    return tuple(QuadraticForm(form.ctx, tuple(int(v) for v in row)) for row in derived)


def _tail_vectors(q: int, length: int) -> np.ndarray:
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    index = np.arange(q**length, dtype=np.int64)
    place_values = q ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (index[:, None] // place_values[None, :]) % q


@lru_cache(maxsize=None)
def projective_points(ctx: FieldCtx, dimension: int = 3) -> np.ndarray:
    """Normalized points of P^dimension(F_q) by leading-position blocks."""
    blocks = []
    size = dimension + 1
    for lead in range(size):
        tail = _tail_vectors(ctx.q, size - 1 - lead)
        block = np.zeros((tail.shape[0], size), dtype=np.int64)
        block[:, lead] = 1
        block[:, lead + 1 :] = tail
        blocks.append(block)
    points = np.concatenate(blocks)
    points.setflags(write=False)
    return points


def point_array(ctx: FieldCtx) -> np.ndarray:
    return projective_points(ctx, 3)


def enum_points(ctx: FieldCtx) -> Iterator[ProjPoint]:
    for row in point_array(ctx):
        yield ProjPoint(ctx, tuple(int(v) for v in row))


@lru_cache(maxsize=None)
def line_array(ctx: FieldCtx) -> np.ndarray:
    """RREF bases of every line of P^3(F_q), shape (lines, 2, 4), ordered by pivot pattern."""
    blocks = []
    for first, second in LINE_PIVOT_PATTERNS:
        free = [(0, col) for col in range(first + 1, NUM_VARIABLES) if col != second]
        free += [(1, col) for col in range(second + 1, NUM_VARIABLES)]
        tail = _tail_vectors(ctx.q, len(free))
        block = np.zeros((tail.shape[0], 2, NUM_VARIABLES), dtype=np.int64)
        block[:, 0, first] = 1
        block[:, 1, second] = 1
        for position, (row, col) in enumerate(free):
            block[:, row, col] = tail[:, position]
        blocks.append(block)
    lines = np.concatenate(blocks)
    lines.setflags(write=False)
    return lines


def enum_lines(ctx: FieldCtx) -> Iterator[LineRep]:
    for basis in line_array(ctx):
        yield LineRep(ctx, (tuple(int(v) for v in basis[0]), tuple(int(v) for v in basis[1])))


def monomial_values(ctx: FieldCtx, points: np.ndarray, monomial_list: Sequence[Sequence[int]]) -> np.ndarray:
    """Values of each monomial at each point, shape (points, monomials)."""
    points = np.asarray(points, dtype=np.int64)
    columns = []
    for exponent in monomial_list:
        value = np.ones(points.shape[0], dtype=np.int64)
        for variable, power in enumerate(exponent):
            for _ in range(power):
                value = ctx.mul_array(value, points[:, variable])
        columns.append(value)
    if not columns:
        return np.zeros((points.shape[0], 0), dtype=np.int64)
    return np.stack(columns, axis=1)


@lru_cache(maxsize=None)
def cubic_values_at_points(ctx: FieldCtx) -> np.ndarray:
    return monomial_values(ctx, point_array(ctx), MONOMIALS_3)


def evaluate_batch(ctx: FieldCtx, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Values of a batch of cubics at points, shape (points, batch)."""
    return linear_combination(ctx, monomial_values(ctx, points, MONOMIALS_3), coeffs)


def count_points_batch(ctx: FieldCtx, coeffs: np.ndarray) -> np.ndarray:
    values = linear_combination(ctx, cubic_values_at_points(ctx), np.asarray(coeffs, dtype=np.int64))
    return (values == 0).sum(axis=0).astype(np.int64)


def count_points(form: CubicForm) -> int:
    if form.is_zero:
        raise ZeroFormError("the zero form does not define a surface")
    return int(count_points_batch(form.ctx, form.as_array()[None, :])[0])


def _variable_multiset(exponent: Sequence[int]) -> list[int]:
    return [variable for variable, power in enumerate(exponent) for _ in range(power)]


def restriction_matrix(ctx: FieldCtx, lines: np.ndarray) -> np.ndarray:
    """Binary-cubic coefficients (s^3, s^2u, su^2, u^3) of each monomial on each line.

    Shape (lines, 4, 20); the line is parametrized as s*v1 + u*v2.
    """
    lines = np.asarray(lines, dtype=np.int64)
    count = lines.shape[0]
    result = np.zeros((count, 4, len(MONOMIALS_3)), dtype=np.int64)
    for position, exponent in enumerate(MONOMIALS_3):
        factors = [(lines[:, 0, v], lines[:, 1, v]) for v in _variable_multiset(exponent)]
        # expand (a1 s + b1 u)(a2 s + b2 u)(a3 s + b3 u) one factor at a time
        poly = [factors[0][0], factors[0][1]]
        for a, b in factors[1:]:
            expanded = [np.zeros(count, dtype=np.int64) for _ in range(len(poly) + 1)]
            for degree, coefficient in enumerate(poly):
                expanded[degree] = ctx.add_array(expanded[degree], ctx.mul_array(coefficient, a))
                expanded[degree + 1] = ctx.add_array(expanded[degree + 1], ctx.mul_array(coefficient, b))
            poly = expanded
        for degree in range(4):
            result[:, degree, position] = poly[degree]
    return result


@lru_cache(maxsize=None)
def line_restrictions(ctx: FieldCtx) -> np.ndarray:
    return restriction_matrix(ctx, line_array(ctx))


def restrict_to_line(form: CubicForm, line: LineRep) -> tuple[int, int, int, int]:
    if form.ctx != line.ctx:
        raise ContextMismatchError(f"form over GF({form.ctx.q}) restricted to a line over GF({line.ctx.q})")
    matrix = restriction_matrix(form.ctx, np.asarray([line.basis], dtype=np.int64))[0]
    values = linear_combination(form.ctx, matrix, form.as_array()[None, :])[:, 0]
    return (int(values[0]), int(values[1]), int(values[2]), int(values[3]))


def count_lines_batch(ctx: FieldCtx, coeffs: np.ndarray) -> np.ndarray:
    restrictions = line_restrictions(ctx)
    line_count = restrictions.shape[0]
    values = linear_combination(ctx, restrictions.reshape(line_count * 4, -1), np.asarray(coeffs, dtype=np.int64))
    contained = (values.reshape(line_count, 4, -1) == 0).all(axis=1)
    return contained.sum(axis=0).astype(np.int64)


def count_lines(form: CubicForm) -> int:
    if form.is_zero:
        raise ZeroFormError("the zero form does not define a surface")
    return int(count_lines_batch(form.ctx, form.as_array()[None, :])[0])
