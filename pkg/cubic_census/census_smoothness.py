from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .census_errors import OracleDisagreementError, ZeroFormError
from .census_forms import (
    CubicForm,
    ProjPoint,
    embed_form,
    evaluate,
    partial_coefficients,
    partials,
    monomial_values,
    projective_points,
)
from .census_gf import (
    FieldCtx,
    artin_schreier_table,
    decode_lanes,
    embed_table,
    extension_field,
    lane_codes,
    lane_width,
    pth_root_table,
    sqrt_table,
)
from .census_linalg import field_rank_batch
from .census_utils import (
    BATCH_ELEMENT_BUDGET,
    DEFAULT_SEARCH_DEPTH,
    MONOMIALS_2,
    MONOMIALS_3,
    MONOMIALS_4,
    MONOMIALS_5,
    MONOMIALS_6,
    NUM_VARIABLES,
    monomial_index,
    monomials,
)

LOGGER = logging.getLogger(__name__)

STRATEGIES = ("search", "macaulay", "cross_check")
APEX = (0, 0, 0, 1)


@dataclass(frozen=True)
class SingularWitness:
    point: ProjPoint
    degree: int
    partial_values: tuple[int, ...]


@dataclass(frozen=True)
class SmoothnessVerdict:
    smooth: bool
    method: str
    witness: SingularWitness | None = None
    rank: int | None = None
    target_dim: int | None = None


@dataclass(frozen=True)
class SearchResult:
    """degree[b] is the extension degree of the first witness for form b, 0 when none was found."""

    degree: np.ndarray
    coords: np.ndarray


@dataclass(frozen=True)
class ClassifiedBatch:
    smooth: np.ndarray
    disagreement: np.ndarray


def _require_nonzero(form: CubicForm) -> None:
    if form.is_zero:
        raise ZeroFormError("the zero form does not define a surface")


@lru_cache(maxsize=None)
def _macaulay_structure(characteristic_three: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray, int, int]:
    """Row, column and generator index of every nonzero Macaulay entry.

    Generators are the 40 partial coefficients (variable-major) followed by the 20 cubic coefficients.
    """
    rows: list[int] = []
    cols: list[int] = []
    sources: list[int] = []
    multipliers = MONOMIALS_4 if characteristic_three else MONOMIALS_3
    target = MONOMIALS_6 if characteristic_three else MONOMIALS_5
    target_index = monomial_index(target)
    for i in range(NUM_VARIABLES):
        for g_position, g in enumerate(multipliers):
            row = i * len(multipliers) + g_position
            for m_position, m in enumerate(MONOMIALS_2):
                rows.append(row)
                cols.append(target_index[tuple(a + b for a, b in zip(g, m))])
                sources.append(i * len(MONOMIALS_2) + m_position)
    row_count = NUM_VARIABLES * len(multipliers)
    if characteristic_three:
        offset = NUM_VARIABLES * len(MONOMIALS_2)
        for g_position, g in enumerate(MONOMIALS_3):
            for m_position, m in enumerate(MONOMIALS_3):
                rows.append(row_count + g_position)
                cols.append(target_index[tuple(a + b for a, b in zip(g, m))])
                sources.append(offset + m_position)
        row_count += len(MONOMIALS_3)
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(sources, dtype=np.int64),
        row_count,
        len(target),
    )


def macaulay_target_dim(ctx: FieldCtx) -> int:
    return _macaulay_structure(ctx.p == 3)[4]


def macaulay_matrices(ctx: FieldCtx, coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.int64)
    rows, cols, sources, row_count, col_count = _macaulay_structure(ctx.p == 3)
    derived = partial_coefficients(ctx, coeffs).reshape(coeffs.shape[0], -1)
    generators = np.concatenate([derived, coeffs], axis=1)
    matrices = np.zeros((coeffs.shape[0], row_count, col_count), dtype=np.int64)
    matrices[:, rows, cols] = generators[:, sources]
    return matrices


def macaulay_rank_batch(ctx: FieldCtx, coeffs: np.ndarray) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.int64)
    _, _, _, row_count, col_count = _macaulay_structure(ctx.p == 3)
    chunk = max(1, BATCH_ELEMENT_BUDGET // (row_count * col_count * ctx.k * ctx.k))
    ranks = np.zeros(coeffs.shape[0], dtype=np.int64)
    for start in range(0, coeffs.shape[0], chunk):
        block = coeffs[start : start + chunk]
        ranks[start : start + chunk] = field_rank_batch(ctx, macaulay_matrices(ctx, block))
    return ranks


def macaulay_test(form: CubicForm) -> SmoothnessVerdict:
    _require_nonzero(form)
    rank = int(macaulay_rank_batch(form.ctx, form.as_array()[None, :])[0])
    target_dim = macaulay_target_dim(form.ctx)
    return SmoothnessVerdict(rank == target_dim, "macaulay", rank=rank, target_dim=target_dim)


@lru_cache(maxsize=None)
def _line_split() -> dict[str, np.ndarray]:
    """Index maps writing a form in x0..x3 as a polynomial in t = x3 over forms in x0..x2.

    Base monomial columns: 10 cubics, 6 quadrics, 3 linears in x0..x2.
    """
    offsets = {3: 0, 2: 10, 1: 16}
    base_index = {degree: monomial_index(monomials(degree, 3)) for degree in offsets}
    quadric_index = monomial_index(MONOMIALS_2)
    cubic_index = monomial_index(MONOMIALS_3)

    def split(source_index: dict[tuple[int, ...], int], power: int, degree: int) -> np.ndarray:
        pairs = [
            (source_index[base + (power,)], offsets[degree] + column)
            for base, column in base_index[degree].items()
        ]
        return np.asarray(pairs, dtype=np.int64)

    return {
        "partial_t1": split(quadric_index, 1, 1),
        "partial_t0": split(quadric_index, 0, 2),
        "cubic_lin": split(cubic_index, 2, 1),
        "cubic_quad": split(cubic_index, 1, 2),
        "cubic_const": split(cubic_index, 0, 3),
        "partial_t2": np.asarray([quadric_index[(0, 0, 0, 2)]], dtype=np.int64),
        "cubic_t3": np.asarray([cubic_index[(0, 0, 0, 3)]], dtype=np.int64),
    }


def _plane_index(points: np.ndarray, size: int) -> np.ndarray:
    """Position of normalized points of P^2(F_size) in projective_points order."""
    x0, x1, x2 = points[:, 0], points[:, 1], points[:, 2]
    return np.where(x0 == 1, x1 * size + x2, np.where(x1 == 1, size * size + x2, size * size + size))


@lru_cache(maxsize=None)
def _line_bases(ctx: FieldCtx, degree: int) -> tuple[FieldCtx, np.ndarray]:
    """Base points of the lines through the apex that the scan at this degree visits.

    One point per orbit of x -> x^q, the smallest in enumeration order. Points fixed by
    the e-th power with 3e <= degree are dropped: a singular point on such a line forces
    the whole line to be singular, so a smaller degree has already found one.
    """
    extension = extension_field(ctx, degree)
    base = projective_points(extension, 2)
    if degree == 1:
        return extension, base
    frobenius_q = extension.elements()
    for _ in range(ctx.k):
        frobenius_q = extension.frobenius_table[frobenius_q]
    index = _plane_index(base, extension.q)
    orbit_min = index.copy()
    orbit_size = np.zeros(index.shape[0], dtype=np.int64)
    image = base
    for step in range(1, degree):
        image = frobenius_q[image]
        image_index = _plane_index(image, extension.q)
        np.minimum(orbit_min, image_index, out=orbit_min)
        orbit_size[(orbit_size == 0) & (image_index == index)] = step
    orbit_size[orbit_size == 0] = degree
    keep = (orbit_min == index) & (3 * orbit_size > degree)
    LOGGER.debug("Scanning %s of %s lines over GF(%s)", int(keep.sum()), base.shape[0], extension.q)
    return extension, base[keep]


def _scaled_columns(
    ctx: FieldCtx, extension: FieldCtx, base: np.ndarray, column_start: int, width: int | None
) -> np.ndarray:
    """scaled[c, s, n]: embedded scalar s times base monomial c at base point n, as lane codes."""
    columns = (monomials(3, 3) + monomials(2, 3) + monomials(1, 3))[column_start:]
    values = monomial_values(extension, base, columns)
    images = embed_table(ctx, extension)
    scaled = extension.mul_array(images[None, :, None], values.T[:, None, :])
    if extension.p != 2 and width is not None:
        scaled = lane_codes(extension, width)[scaled]
    return scaled


def _sum_codes(extension: FieldCtx, width: int | None, parts: list[np.ndarray]) -> np.ndarray:
    total = parts[0].copy()
    for part in parts[1:]:
        if extension.p == 2:
            np.bitwise_xor(total, part, out=total)
        elif width is None:
            total = extension.add_array(total, part)
        else:
            total += part
    if extension.p == 2 or width is None:
        return total
    return decode_lanes(extension, total, width)


def _quadratic_roots(field: FieldCtx, a: np.ndarray, b: np.ndarray, c: np.ndarray):
    """Roots of a*t^2 + b*t + c in the field; entries with a = b = 0 get no roots."""
    shape = np.broadcast(a, b, c).shape
    a = np.broadcast_to(a, shape)
    b = np.broadcast_to(b, shape)
    c = np.broadcast_to(c, shape)
    t1 = np.zeros(shape, dtype=np.int64)
    t2 = np.zeros(shape, dtype=np.int64)
    ok1 = np.zeros(shape, dtype=bool)
    ok2 = np.zeros(shape, dtype=bool)

    linear = (a == 0) & (b != 0)
    safe_b = np.where(b != 0, b, 1)
    if linear.any():
        t1 = np.where(linear, field.mul_array(field.neg_array(c), field.inv_array(safe_b)), t1)
        ok1 |= linear

    quadratic = a != 0
    inv_a = field.inv_array(np.where(quadratic, a, 1))
    if field.p == 2:
        pure_square = quadratic & (b == 0)
        t1 = np.where(pure_square, pth_root_table(field)[field.mul_array(c, inv_a)], t1)
        ok1 |= pure_square
        mixed = quadratic & (b != 0)
        inv_b = field.inv_array(safe_b)
        shifted = field.mul_array(field.mul_array(a, c), field.mul_array(inv_b, inv_b))
        u = artin_schreier_table(field)[shifted]
        solvable = mixed & (u >= 0)
        u = np.where(u >= 0, u, 0)
        ratio = field.mul_array(b, inv_a)
        t1 = np.where(solvable, field.mul_array(ratio, u), t1)
        t2 = np.where(solvable, field.add_array(t1, ratio), t2)
    else:
        discriminant = field.sub_array(field.mul_array(b, b), field.scale_array(field.mul_array(a, c), 4))
        root = sqrt_table(field)[discriminant]
        solvable = quadratic & (root >= 0)
        root = np.where(root >= 0, root, 0)
        inv_2a = field.inv_array(field.scale_array(np.where(quadratic, a, 1), 2))
        minus_b = field.neg_array(b)
        t1 = np.where(solvable, field.mul_array(field.add_array(minus_b, root), inv_2a), t1)
        t2 = np.where(solvable, field.mul_array(field.sub_array(minus_b, root), inv_2a), t2)
    ok1 |= solvable
    ok2 |= solvable
    return t1, ok1, t2, ok2


def _horner(field: FieldCtx, coefficients: list[np.ndarray], t: np.ndarray) -> np.ndarray:
    """Evaluate sum coefficients[i] * t^(len-1-i)."""
    value = np.zeros(np.broadcast(*coefficients, t).shape, dtype=np.int64)
    for coefficient in coefficients:
        value = field.add_array(field.mul_array(value, t), coefficient)
    return value


def _search_extension(
    ctx: FieldCtx,
    extension: FieldCtx,
    coeffs: np.ndarray,
    base: np.ndarray,
    scaled: np.ndarray,
    width: int | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Singular points on the lines from [0:0:0:1] through `base`; returns (found, coords) per form."""
    characteristic_three = ctx.p == 3
    split = _line_split()
    column_start = 0 if characteristic_three else 10
    images = embed_table(ctx, extension)
    count, points = coeffs.shape[0], base.shape[0]
    derived = partial_coefficients(ctx, coeffs)

    def combine(source: np.ndarray, name: str) -> np.ndarray:
        parts = [scaled[column - column_start][source[:, index]] for index, column in split[name]]
        return _sum_codes(extension, width, parts)

    constant = np.stack([combine(derived[:, i], "partial_t0") for i in range(NUM_VARIABLES)], axis=1)
    linear = np.stack([combine(derived[:, i], "partial_t1") for i in range(NUM_VARIABLES)], axis=1)
    leading = images[derived[:, :, split["partial_t2"][0]]]

    # a partial with nonzero t^2 term is a genuine quadratic on every line
    lead_nonzero = leading != 0
    pivot = np.repeat(lead_nonzero.argmax(axis=1)[:, None], points, axis=1)
    has_pivot = np.ones((count, points), dtype=bool)
    flat = ~lead_nonzero.any(axis=1)
    if flat.any():
        nonzero = (linear[flat] != 0) | (constant[flat] != 0)
        pivot[flat] = nonzero.argmax(axis=1)
        has_pivot[flat] = nonzero.any(axis=1)
    pa = np.take_along_axis(leading, pivot, axis=1)
    pb = np.take_along_axis(linear, pivot[:, None, :], axis=1)[:, 0, :]
    pc = np.take_along_axis(constant, pivot[:, None, :], axis=1)[:, 0, :]
    t1, ok1, t2, ok2 = _quadratic_roots(extension, pa, pb, pc)

    t1 = np.where(has_pivot, t1, 0)
    ok1 = np.where(has_pivot, ok1, True)
    if characteristic_three:
        cubic = np.stack(
            [combine(coeffs, name) for name in ("cubic_const", "cubic_quad", "cubic_lin")], axis=1
        )
        f3 = images[coeffs[:, split["cubic_t3"][0]]]
        ratio = extension.mul_array(
            extension.neg_array(cubic[:, 0, :]), extension.inv_array(np.where(f3 != 0, f3, 1))[:, None]
        )
        free_line = ~has_pivot & (f3 != 0)[:, None]
        t2 = np.where(free_line, pth_root_table(extension)[ratio], t2)
        ok2 = np.where(free_line, True, np.where(has_pivot, ok2, False))
    else:
        ok2 = np.where(has_pivot, ok2, False)

    def confirm(t: np.ndarray, ok: np.ndarray) -> np.ndarray:
        form_at, point_at = np.nonzero(ok)
        t = t[form_at, point_at]
        for i in range(NUM_VARIABLES):
            value = _horner(
                extension,
                [leading[form_at, i], linear[form_at, i, point_at], constant[form_at, i, point_at]],
                t,
            )
            keep = value == 0
            form_at, point_at, t = form_at[keep], point_at[keep], t[keep]
        if characteristic_three:
            value = _horner(
                extension,
                [f3[form_at], cubic[form_at, 2, point_at], cubic[form_at, 1, point_at], cubic[form_at, 0, point_at]],
                t,
            )
            keep = value == 0
            form_at, point_at = form_at[keep], point_at[keep]
        singular = np.zeros((count, points), dtype=bool)
        singular[form_at, point_at] = True
        return singular

    singular1 = confirm(t1, ok1)
    singular2 = confirm(t2, ok2)
    either = singular1 | singular2
    found = either.any(axis=1)
    first = either.argmax(axis=1)
    batch_index = np.arange(count)
    s1 = singular1[batch_index, first]
    s2 = singular2[batch_index, first]
    r1 = t1[batch_index, first]
    r2 = t2[batch_index, first]
    t_choice = np.where(s1 & s2, np.minimum(r1, r2), np.where(s1, r1, r2))
    coords = np.zeros((count, NUM_VARIABLES), dtype=np.int64)
    coords[:, :3] = base[first]
    coords[:, 3] = t_choice
    return found, coords


def _apex_singular(ctx: FieldCtx, coeffs: np.ndarray) -> np.ndarray:
    split = _line_split()
    derived = partial_coefficients(ctx, coeffs)
    singular = (derived[:, :, split["partial_t2"][0]] == 0).all(axis=1)
    if ctx.p == 3:
        singular &= coeffs[:, split["cubic_t3"][0]] == 0
    return singular


def singular_search_batch(ctx: FieldCtx, coeffs: np.ndarray, depth: int = DEFAULT_SEARCH_DEPTH) -> SearchResult:
    """Scan P^3(GF(q^d)) for d = 1..depth; the apex [0:0:0:1] first, then lines through it."""
    coeffs = np.asarray(coeffs, dtype=np.int64)
    count = coeffs.shape[0]
    degree = np.zeros(count, dtype=np.int64)
    coords = np.zeros((count, NUM_VARIABLES), dtype=np.int64)

    apex = _apex_singular(ctx, coeffs)
    degree[apex] = 1
    coords[apex] = APEX

    column_start = 0 if ctx.p == 3 else 10
    outputs = 11 if ctx.p == 3 else 8
    for d in range(1, depth + 1):
        pending = np.flatnonzero(degree == 0)
        if pending.size == 0:
            break
        extension, base = _line_bases(ctx, d)
        width = lane_width(extension, 10)
        block = max(1, BATCH_ELEMENT_BUDGET // ((19 - column_start) * ctx.q))
        for block_start in range(0, base.shape[0], block):
            pending = pending[degree[pending] == 0]
            if pending.size == 0:
                break
            block_base = base[block_start : block_start + block]
            scaled = _scaled_columns(ctx, extension, block_base, column_start, width)
            chunk = max(1, BATCH_ELEMENT_BUDGET // (block_base.shape[0] * outputs))
            for start in range(0, pending.size, chunk):
                selected = pending[start : start + chunk]
                found, found_coords = _search_extension(
                    ctx, extension, coeffs[selected], block_base, scaled, width
                )
                degree[selected[found]] = d
                coords[selected[found]] = found_coords[found]
    return SearchResult(degree=degree, coords=coords)


def singular_search(form: CubicForm, depth: int = DEFAULT_SEARCH_DEPTH) -> SmoothnessVerdict:
    _require_nonzero(form)
    result = singular_search_batch(form.ctx, form.as_array()[None, :], depth)
    d = int(result.degree[0])
    if d == 0:
        return SmoothnessVerdict(True, "search")
    extension = extension_field(form.ctx, d)
    point = ProjPoint(extension, tuple(int(v) for v in result.coords[0]))
    lifted = embed_form(form, extension)
    values = tuple(evaluate(derivative, point) for derivative in partials(lifted))
    return SmoothnessVerdict(False, "search", witness=SingularWitness(point, d, values))


def is_smooth(form: CubicForm, strategy: str = "cross_check", depth: int = DEFAULT_SEARCH_DEPTH) -> SmoothnessVerdict:
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of: {', '.join(STRATEGIES)}")
    if strategy == "search":
        return singular_search(form, depth)
    if strategy == "macaulay":
        return macaulay_test(form)
    search = singular_search(form, depth)
    macaulay = macaulay_test(form)
    if search.smooth != macaulay.smooth:
        LOGGER.warning(
            "Oracle disagreement over GF(%s): search=%s macaulay=%s coeffs=%s",
            form.ctx.q,
            search.smooth,
            macaulay.smooth,
            list(form.coeffs),
        )
        raise OracleDisagreementError(form.coeffs, search.smooth, macaulay.smooth)
    return SmoothnessVerdict(
        search.smooth,
        "cross_check",
        witness=search.witness,
        rank=macaulay.rank,
        target_dim=macaulay.target_dim,
    )


def classify_batch(
    ctx: FieldCtx,
    coeffs: np.ndarray,
    strategy: str,
    depth: int = DEFAULT_SEARCH_DEPTH,
) -> ClassifiedBatch:
    """Smoothness of a batch; under cross_check the Macaulay verdict is counted and mismatches flagged."""
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of: {', '.join(STRATEGIES)}")
    count = np.asarray(coeffs).shape[0]
    disagreement = np.zeros(count, dtype=bool)
    if strategy == "search":
        return ClassifiedBatch(singular_search_batch(ctx, coeffs, depth).degree == 0, disagreement)
    smooth = macaulay_rank_batch(ctx, coeffs) == macaulay_target_dim(ctx)
    if strategy == "cross_check":
        disagreement = (singular_search_batch(ctx, coeffs, depth).degree == 0) != smooth
    return ClassifiedBatch(smooth, disagreement)
