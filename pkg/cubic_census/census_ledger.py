from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import lru_cache, reduce
from itertools import combinations
from typing import Any

from sympy import Poly, Symbol, diff, linear_eq_to_matrix, symbols

from .census_errors import LedgerInconsistencyError, NonPolynomialResultError, UnsupportedCharacteristicError
from .census_models import Predictions
from .census_utils import (
    ADMISSIBLE_TRACES,
    MONOMIALS_3,
    T6_FORBIDDEN_Q,
    class_count,
    parse_prime_power,
    projective_point_count,
)

LOGGER = logging.getLogger(__name__)

SUBTYPE_BASE_DIM = 16
FORMS_THROUGH_POINT_DIM = 19
ALEXANDER_DEGREE = 2 * FORMS_THROUGH_POINT_DIM - 1
DIM_M = 19
DIM_U = 21
DIM_PGL4 = 15
DIM_P2 = 2
MAX_STEIN_DEGREE = FORMS_THROUGH_POINT_DIM


@dataclass(frozen=True)
class IntPoly:
    """Integer polynomial in one variable; coeffs[i] multiplies var**i."""

    coeffs: tuple[int, ...] = ()
    var: str = "t"

    def __post_init__(self) -> None:
        trimmed = list(int(c) for c in self.coeffs)
        while trimmed and trimmed[-1] == 0:
            trimmed.pop()
        object.__setattr__(self, "coeffs", tuple(trimmed))

    @classmethod
    def from_terms(cls, terms: dict[int, int], var: str = "t") -> IntPoly:
        if any(exponent < 0 for exponent, value in terms.items() if value):
            raise NonPolynomialResultError(f"negative exponent in {terms}")
        size = max((e for e, v in terms.items() if v), default=-1) + 1
        return cls(tuple(terms.get(exponent, 0) for exponent in range(size)), var)

    @classmethod
    def from_sympy(cls, poly: Poly, var: str = "t") -> IntPoly:
        return cls(tuple(int(c) for c in reversed(poly.all_coeffs())), var)

    @classmethod
    def one_plus_power(cls, exponent: int, var: str = "t") -> IntPoly:
        return cls.from_terms({0: 1, exponent: 1}, var)

    def to_sympy(self, var: str | None = None) -> Poly:
        coefficients = list(reversed(self.coeffs)) or [0]
        return Poly(coefficients, Symbol(var or self.var), domain="ZZ")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def coefficient(self, exponent: int) -> int:
        return self.coeffs[exponent] if 0 <= exponent < len(self.coeffs) else 0

    def _check_var(self, other: IntPoly) -> None:
        if not (self.is_zero or other.is_zero) and self.var != other.var:
            raise ValueError(f"cannot combine polynomials in {self.var} and {other.var}")

    def __add__(self, other: IntPoly) -> IntPoly:
        self._check_var(other)
        return IntPoly.from_sympy(self.to_sympy() + other.to_sympy(self.var), self.var)

    def __sub__(self, other: IntPoly) -> IntPoly:
        self._check_var(other)
        return IntPoly.from_sympy(self.to_sympy() - other.to_sympy(self.var), self.var)

    def __mul__(self, other: IntPoly) -> IntPoly:
        self._check_var(other)
        return IntPoly.from_sympy(self.to_sympy() * other.to_sympy(self.var), self.var)

    def divmod(self, other: IntPoly) -> tuple[IntPoly, IntPoly]:
        self._check_var(other)
        quotient, remainder = self.to_sympy().div(other.to_sympy(self.var))
        if any(not c.is_integer for c in quotient.all_coeffs() + remainder.all_coeffs()):
            return IntPoly((), self.var), self
        return (
            IntPoly(tuple(int(c) for c in reversed(quotient.all_coeffs())), self.var),
            IntPoly(tuple(int(c) for c in reversed(remainder.all_coeffs())), self.var),
        )

    def is_divisible_by(self, other: IntPoly) -> bool:
        quotient, remainder = self.divmod(other)
        return remainder.is_zero and (quotient * other) == self

    def exact_div(self, other: IntPoly) -> IntPoly:
        quotient, remainder = self.divmod(other)
        if not remainder.is_zero or quotient * other != self:
            raise LedgerInconsistencyError(f"{self.expanded()} is not divisible by {other.expanded()}")
        return quotient

    def __call__(self, value: int) -> int:
        result = 0
        for coefficient in reversed(self.coeffs):
            result = result * value + coefficient
        return result

    def terms(self) -> list[tuple[int, int]]:
        return [(exponent, value) for exponent, value in enumerate(self.coeffs) if value]

    def expanded(self) -> str:
        if self.is_zero:
            return "0"
        pieces = []
        for exponent, value in self.terms():
            magnitude = abs(value)
            if exponent == 0:
                body = str(magnitude)
            else:
                power = self.var if exponent == 1 else f"{self.var}^{exponent}"
                body = power if magnitude == 1 else f"{magnitude}{power}"
            sign = "-" if value < 0 else "+"
            pieces.append((sign, body))
        first_sign, first_body = pieces[0]
        text = ("-" if first_sign == "-" else "") + first_body
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text


def poly_product(factors: Iterable[IntPoly], var: str = "t") -> IntPoly:
    return reduce(lambda left, right: left * right, factors, IntPoly((1,), var))


def format_factored(factors: Sequence[IntPoly]) -> str:
    counts: dict[IntPoly, int] = {}
    for factor in factors:
        counts[factor] = counts.get(factor, 0) + 1
    parts = []
    for factor, count in counts.items():
        body = f"({factor.expanded()})"
        parts.append(body if count == 1 else f"{body}^{count}")
    return "".join(parts)


def _one_plus(*exponents: int, var: str = "t") -> IntPoly:
    return IntPoly.from_terms({0: 1, **{e: 1 for e in exponents}}, var)


XP_FACTORS = (_one_plus(1), _one_plus(3), _one_plus(5), _one_plus(5))
UP_FACTORS = (_one_plus(3), _one_plus(5), _one_plus(5))
M_FACTORS = (_one_plus(3), _one_plus(5), _one_plus(7))
P2_POINCARE = _one_plus(2, 4)
U_CANDIDATE_FACTORS = {
    "exterior_with_t7": (_one_plus(3), _one_plus(5), _one_plus(7), _one_plus(2, 4)),
    "doubled_t5": (_one_plus(3), _one_plus(5), _one_plus(5), _one_plus(2, 4, 6)),
}
DIVISIBILITY_WITNESS = _one_plus(7)


@dataclass(frozen=True)
class SubtypeRecord:
    id: str
    kind: str
    n_points: int | None
    dim_A: int | None
    dim_L: int | None
    cohomology: tuple[tuple[int, int], ...] = ()

    @property
    def deg(self) -> int | None:
        if self.dim_L is None:
            return None
        return SUBTYPE_BASE_DIM - self.dim_L

    @property
    def contributes(self) -> bool:
        return self.kind == "points" and bool(self.cohomology)

    def as_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind,
            "n_points": self.n_points,
            "dim_A": self.dim_A,
            "dim_L": self.dim_L,
            "deg": self.deg,
            "cohomology": [{"degree": m, "rank": r} for m, r in self.cohomology],
        }


_SUBTYPES = (
    SubtypeRecord("Ia", "points", 1, 0, 16, ((0, 1),)),
    SubtypeRecord("Ib", "points", 1, 3, 15, ((0, 1), (2, 1), (4, 1))),
    SubtypeRecord("IIa", "points", 2, 3, 12, ((0, 1), (2, 1), (4, 1))),
    SubtypeRecord("IIb", "points", 2, 4, 12),
    SubtypeRecord("IIc", "points", 2, 6, 11, ((2, 1), (4, 1), (6, 1))),
    SubtypeRecord("III", "curve", None, None, None),
    SubtypeRecord("IVa", "points", 3, 6, 8, ((2, 1), (4, 1), (6, 1))),
    SubtypeRecord("IVb", "points", 3, 7, 8),
    SubtypeRecord("IVc", "points", 3, 8, 7),
    SubtypeRecord("IVd", "points", 3, 9, 7, ((6, 1),)),
    SubtypeRecord("V", "curve", None, None, None),
    SubtypeRecord("VI", "curve", None, None, None),
    SubtypeRecord("VIIa", "points", 4, 9, 4, ((6, 1),)),
    SubtypeRecord("VIIb", "points", 4, 10, 4),
    SubtypeRecord("VIIc", "points", 4, 11, 3),
    SubtypeRecord("VIId", "points", 4, 12, 3),
    SubtypeRecord("VIII", "curve", None, None, None),
    SubtypeRecord("IX", "curve", None, None, None),
    SubtypeRecord("X", "curve", None, None, None),
    SubtypeRecord("XI", "terminal", None, 0, 0),
)

MARKED_POINT = (1, 0, 0, 0)

# representative singular sets K; the marked point is [1:0:0:0]
CONFIGURATIONS: dict[str, tuple[tuple[int, int, int, int], ...]] = {
    "Ia": ((1, 0, 0, 0),),
    "Ib": ((0, 1, 0, 0),),
    "IIa": ((1, 0, 0, 0), (0, 1, 0, 0)),
    "IIb": ((1, 1, 0, 0), (0, 1, 0, 0)),
    "IIc": ((0, 1, 0, 0), (0, 0, 1, 0)),
    "IVa": ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0)),
    "IVb": ((1, 1, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0)),
    "IVc": ((0, 1, 0, 0), (0, 0, 1, 0), (1, 1, 1, 0)),
    "IVd": ((0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)),
    "VIIa": ((1, 0, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)),
    "VIIb": ((1, 1, 0, 0), (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)),
    "VIIc": ((0, 1, 0, 0), (0, 0, 1, 0), (1, 1, 1, 0), (0, 0, 0, 1)),
    "VIId": ((0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1), (1, 1, 1, 1)),
}

EXPECTED_E1_POSITIONS = frozenset(
    {
        (0, 32),
        (1, 31), (1, 33), (1, 35),
        (4, 23), (4, 25), (4, 27),
        (5, 24), (5, 26), (5, 28),
        (8, 16), (8, 18), (8, 20),
        (9, 19),
        (12, 11),
    }
)


def subtype_table() -> list[SubtypeRecord]:
    return list(_SUBTYPES)


def subtype(subtype_id: str) -> SubtypeRecord:
    for record in _SUBTYPES:
        if record.id == subtype_id:
            return record
    raise KeyError(subtype_id)


@lru_cache(maxsize=None)
def derive_dim_L(subtype_id: str) -> int:
    """dim of the space of cubics vanishing at the marked point and singular along K, over Q."""
    if subtype_id not in CONFIGURATIONS:
        raise ValueError(f"no point configuration is recorded for subtype {subtype_id}")
    variables = symbols("x0:4")
    unknowns = symbols(f"c0:{len(MONOMIALS_3)}")
    cubic = sum(
        unknown * variables[0] ** e[0] * variables[1] ** e[1] * variables[2] ** e[2] * variables[3] ** e[3]
        for unknown, e in zip(unknowns, MONOMIALS_3)
    )
    equations = [cubic.subs(dict(zip(variables, MARKED_POINT)))]
    for point in CONFIGURATIONS[subtype_id]:
        substitution = dict(zip(variables, point))
        equations.extend(diff(cubic, variable).subs(substitution) for variable in variables)
    matrix, _ = linear_eq_to_matrix(equations, unknowns)
    return len(MONOMIALS_3) - matrix.rank()


def check_subtype_dimensions() -> dict[str, int]:
    derived = {}
    for record in _SUBTYPES:
        if record.id not in CONFIGURATIONS:
            continue
        value = derive_dim_L(record.id)
        if value != record.dim_L:
            raise LedgerInconsistencyError(f"subtype {record.id}: stored dim L {record.dim_L}, derived {value}")
        derived[record.id] = value
    return derived


@dataclass(frozen=True)
class SpectralPage:
    name: str
    entries: tuple[tuple[int, int, int], ...]

    @classmethod
    def from_ranks(cls, name: str, ranks: dict[tuple[int, int], int]) -> SpectralPage:
        return cls(name, tuple(sorted((p, q, r) for (p, q), r in ranks.items() if r)))

    def rank(self, p: int, q: int) -> int:
        return sum(r for ep, eq, r in self.entries if (ep, eq) == (p, q))

    def positions(self) -> frozenset[tuple[int, int]]:
        return frozenset((p, q) for p, q, _ in self.entries)

    def column(self, p: int) -> list[tuple[int, int]]:
        return [(q, r) for ep, q, r in self.entries if ep == p]

    @property
    def total_rank(self) -> int:
        return sum(r for _, _, r in self.entries)

    def ranks_by_total_degree(self) -> dict[int, int]:
        totals: dict[int, int] = defaultdict(int)
        for p, q, r in self.entries:
            totals[p + q] += r
        return dict(totals)

    def as_dict(self) -> dict[str, Any]:
        return {"name": self.name, "entries": [{"p": p, "q": q, "rank": r} for p, q, r in self.entries]}


def assemble_E1(records: Sequence[SubtypeRecord] | None = None) -> SpectralPage:
    """Thom shift 2 dim L, configuration shift n - 1, and duality on A turning H^m into degree 2 dim A - m."""
    ranks: dict[tuple[int, int], int] = defaultdict(int)
    for record in records if records is not None else _SUBTYPES:
        if not record.contributes:
            continue
        assert record.n_points is not None and record.dim_A is not None and record.dim_L is not None
        column = SUBTYPE_BASE_DIM - record.dim_L
        for m, rank in record.cohomology:
            total = 2 * record.dim_L + (record.n_points - 1) + (2 * record.dim_A - m)
            ranks[(column, total - column)] += rank
    return SpectralPage.from_ranks("E1", ranks)


def derive_e1_page(page: SpectralPage | None = None) -> SpectralPage:
    page = page or assemble_E1()
    return SpectralPage.from_ranks(
        "e1",
        {(p, q - 2 * (SUBTYPE_BASE_DIM - p)): r for p, q, r in page.entries},
    )


def check_page_shape(page: SpectralPage) -> None:
    if page.column(SUBTYPE_BASE_DIM):
        raise LedgerInconsistencyError(f"column {SUBTYPE_BASE_DIM} of {page.name} is not zero")
    if page.positions() != EXPECTED_E1_POSITIONS or page.total_rank != len(EXPECTED_E1_POSITIONS):
        missing = sorted(EXPECTED_E1_POSITIONS - page.positions())
        extra = sorted(page.positions() - EXPECTED_E1_POSITIONS)
        raise LedgerInconsistencyError(f"{page.name} placements differ: missing {missing}, unexpected {extra}")


def betti_from_page(page: SpectralPage) -> dict[int, int]:
    """Reduced Betti numbers of the complement via H~^i = BM homology in degree 37 - i."""
    betti: dict[int, int] = defaultdict(int)
    for total, rank in page.ranks_by_total_degree().items():
        betti[ALEXANDER_DEGREE - total] += rank
    return dict(betti)


def poincare_Xp(page: SpectralPage | None = None) -> IntPoly:
    page = page or assemble_E1()
    check_page_shape(page)
    terms = defaultdict(int, {0: 1})
    for degree, rank in betti_from_page(page).items():
        terms[degree] += rank
    derived = IntPoly.from_terms(dict(terms))
    target = poly_product(XP_FACTORS)
    if derived != target:
        raise LedgerInconsistencyError(f"page gives {derived.expanded()}, expected {target.expanded()}")
    return derived


def poincare_Up(xp: IntPoly | None = None) -> IntPoly:
    xp = xp or poincare_Xp()
    quotient = xp.exact_div(_one_plus(1))
    target = poly_product(UP_FACTORS)
    if quotient != target:
        raise LedgerInconsistencyError(f"P(X_p)/(1+t) = {quotient.expanded()}, expected {target.expanded()}")
    return quotient


def serre_candidates() -> list[dict[str, Any]]:
    candidates = []
    for label, factors in U_CANDIDATE_FACTORS.items():
        poly = poly_product(factors)
        candidates.append(
            {
                "label": label,
                "factors": factors,
                "poly": poly,
                "divisible": poly.is_divisible_by(DIVISIBILITY_WITNESS),
            }
        )
    return candidates


def poincare_U() -> IntPoly:
    selected = [candidate for candidate in serre_candidates() if candidate["divisible"]]
    if len(selected) != 1:
        raise LedgerInconsistencyError(f"{len(selected)} candidates for P(U;t) are divisible by 1+t^7")
    return selected[0]["poly"]


def poincare_M() -> IntPoly:
    return poly_product(M_FACTORS)


def poincare_pgl4() -> IntPoly:
    return tate_classes_pgl4().poincare()


def moduli_quotient(p_u: IntPoly | None = None) -> IntPoly:
    return (p_u or poincare_U()).exact_div(poincare_M())


def vfund_vanishing_check(p_u: IntPoly | None = None) -> bool:
    return (p_u or poincare_U()) == poincare_M() * P2_POINCARE


def potential_differentials(page: SpectralPage | None = None) -> list[dict[str, Any]]:
    """Pairs of nonzero entries a differential d^r: E_{p,q} -> E_{p-r,q+r-1} could join."""
    page = page or assemble_E1()
    pairs = []
    for p, q, _ in page.entries:
        for tp, tq, _ in page.entries:
            r = p - tp
            if r >= 1 and tq == q + r - 1:
                pairs.append({"r": r, "source": (p, q), "target": (tp, tq)})
    return pairs


def degeneration_check(page: SpectralPage | None = None) -> list[dict[str, Any]]:
    """Every potential differential is forced to vanish when page ranks already match the target Betti numbers."""
    page = page or assemble_E1()
    target = poly_product(XP_FACTORS)
    totals = page.ranks_by_total_degree()
    differentials = potential_differentials(page)
    for differential in differentials:
        for p, q in (differential["source"], differential["target"]):
            total = p + q
            expected = target.coefficient(ALEXANDER_DEGREE - total)
            if totals.get(total, 0) != expected:
                raise LedgerInconsistencyError(
                    f"d^{differential['r']} from {differential['source']} could be nonzero: "
                    f"rank {totals.get(total, 0)} in total degree {total}, Betti number {expected}"
                )
    return differentials


def stein_bound_check(page: SpectralPage | None = None) -> dict[str, int]:
    page = page or assemble_E1()
    betti = betti_from_page(page)
    max_degree = max(betti)
    min_bm_degree = min(page.ranks_by_total_degree())
    if max_degree > MAX_STEIN_DEGREE or min_bm_degree < ALEXANDER_DEGREE - MAX_STEIN_DEGREE:
        raise LedgerInconsistencyError(
            f"cohomology of the complement reaches degree {max_degree} beyond {MAX_STEIN_DEGREE}"
        )
    return {"max_betti_degree": max_degree, "min_bm_degree": min_bm_degree, "bound": MAX_STEIN_DEGREE}


@dataclass(frozen=True)
class TateClassList:
    """(cohomological degree, weight, multiplicity) triples of a pure Tate cohomology ring."""

    classes: tuple[tuple[int, int, int], ...]

    def __post_init__(self) -> None:
        merged: dict[tuple[int, int], int] = defaultdict(int)
        for degree, weight, multiplicity in self.classes:
            if multiplicity <= 0:
                raise ValueError(f"class multiplicities must be positive, got {multiplicity}")
            merged[(degree, weight)] += multiplicity
        object.__setattr__(self, "classes", tuple(sorted((d, w, m) for (d, w), m in merged.items())))

    @classmethod
    def exterior(cls, generators: Sequence[tuple[int, int]]) -> TateClassList:
        classes = []
        for size in range(len(generators) + 1):
            for subset in combinations(generators, size):
                classes.append((sum(d for d, _ in subset), sum(w for _, w in subset), 1))
        return cls(tuple(classes))

    def tensor(self, other: TateClassList) -> TateClassList:
        return TateClassList(
            tuple(
                (d1 + d2, w1 + w2, m1 * m2)
                for d1, w1, m1 in self.classes
                for d2, w2, m2 in other.classes
            )
        )

    def poincare(self) -> IntPoly:
        terms: dict[int, int] = defaultdict(int)
        for degree, _, multiplicity in self.classes:
            terms[degree] += multiplicity
        return IntPoly.from_terms(dict(terms))

    def as_list(self) -> list[dict[str, int]]:
        return [{"degree": d, "weight": w, "multiplicity": m} for d, w, m in self.classes]


EXTERIOR_GENERATORS = ((3, 2), (5, 3), (7, 4))


def tate_classes_M() -> TateClassList:
    return TateClassList.exterior(EXTERIOR_GENERATORS)


def tate_classes_pgl4() -> TateClassList:
    return TateClassList.exterior(EXTERIOR_GENERATORS)


def tate_classes_P2() -> TateClassList:
    return TateClassList(((0, 0, 1), (2, 1, 1), (4, 2, 1)))


def tate_classes_U() -> TateClassList:
    return tate_classes_M().tensor(tate_classes_P2())


def point_count_poly(classes: TateClassList, dim: int) -> IntPoly:
    """q^dim * sum (-1)^i * multiplicity * q^(-weight)."""
    terms: dict[int, int] = defaultdict(int)
    for degree, weight, multiplicity in classes.classes:
        terms[dim - weight] += (-1) ** degree * multiplicity
    nonzero = {exponent: value for exponent, value in terms.items() if value}
    if any(exponent < 0 for exponent in nonzero):
        raise NonPolynomialResultError(f"class list {classes.classes} with dim {dim} leaves negative powers of q")
    return IntPoly.from_terms(nonzero, "q")


def _q(*terms: tuple[int, int]) -> IntPoly:
    return IntPoly.from_terms(dict(terms), "q")


def count_poly_U() -> IntPoly:
    return point_count_poly(tate_classes_U(), DIM_U)


def count_poly_M() -> IntPoly:
    return point_count_poly(tate_classes_M(), DIM_M)


def count_poly_pgl4() -> IntPoly:
    return point_count_poly(tate_classes_pgl4(), DIM_PGL4)


def count_poly_P2() -> IntPoly:
    return point_count_poly(tate_classes_P2(), DIM_P2)


def target_count_U() -> IntPoly:
    return poly_product(
        [_q((10, 1)), _q((2, 1), (1, 1), (0, 1)), _q((4, 1), (0, -1)), _q((3, 1), (0, -1)), _q((2, 1), (0, -1))],
        "q",
    )


def check_count_identities() -> dict[str, IntPoly]:
    u_poly = count_poly_U()
    m_poly = count_poly_M()
    pgl4_poly = count_poly_pgl4()
    p2_poly = count_poly_P2()
    if u_poly != target_count_U():
        raise LedgerInconsistencyError(f"#U(q) = {u_poly.expanded()}, expected {target_count_U().expanded()}")
    if u_poly - m_poly * p2_poly != IntPoly((), "q"):
        raise LedgerInconsistencyError("#U(q) differs from #M(q)(q^2+q+1)")
    if m_poly != _q((4, 1)) * pgl4_poly:
        raise LedgerInconsistencyError("#M(q) differs from q^4 #PGL(4,q)")
    if tate_classes_U().poincare() != poincare_U():
        raise LedgerInconsistencyError("Tate classes of U do not reproduce P(U;t)")
    return {"U": u_poly, "M": m_poly, "PGL4": pgl4_poly, "P2": p2_poly}


def pgl4_order(q: int) -> int:
    return count_poly_pgl4()(q)


def predict(q: int, allow_char_3: bool = False) -> Predictions:
    p, _ = parse_prime_power(q)
    if p == 3 and not allow_char_3:
        raise UnsupportedCharacteristicError("predictions exclude characteristic 3")
    smooth = count_poly_M()(q)
    points = count_poly_U()(q)
    return {
        "q": q,
        "expected_M": smooth,
        "expected_U": points,
        "expected_average": {"num": q * q + q + 1, "den": 1},
        "expected_pgl4": pgl4_order(q),
        "expected_trace_mean": {"num": 0, "den": 1},
        "expected_total_indexed": class_count(q),
        "expected_all_forms_point_sum": projective_point_count(q) * (q**19 - 1) // (q - 1),
        "admissible_traces": list(ADMISSIBLE_TRACES),
        "t6_allowed": q not in T6_FORBIDDEN_Q,
    }


def ledger_self_check() -> dict[str, Any]:
    """Run every consistency check; raises LedgerInconsistencyError on the first failure."""
    page = assemble_E1()
    xp = poincare_Xp(page)
    up = poincare_Up(xp)
    pu = poincare_U()
    LOGGER.info("Ledger page has %s entries of total rank %s", len(page.entries), page.total_rank)
    return {
        "dim_L": check_subtype_dimensions(),
        "differentials": degeneration_check(page),
        "stein": stein_bound_check(page),
        "P_Xp": xp,
        "P_Up": up,
        "P_U": pu,
        "moduli_quotient": moduli_quotient(pu),
        "vfund_vanishing": vfund_vanishing_check(pu),
        "counts": check_count_identities(),
    }
