from __future__ import annotations

from collections.abc import Sequence


class CensusError(Exception):
    pass


class MalformedInputError(CensusError, ValueError):
    pass


class UnsupportedFieldError(CensusError, ValueError):
    pass


class ReducibleModulusError(CensusError, ValueError):
    pass


class FieldDivisionByZeroError(CensusError, ZeroDivisionError):
    pass


class IncompatibleFieldsError(CensusError, ValueError):
    pass


class ContextMismatchError(CensusError, ValueError):
    pass


class ZeroFormError(CensusError, ValueError):
    pass


class UnsupportedCharacteristicError(CensusError, ValueError):
    pass


class ResumeMismatchError(CensusError, ValueError):
    pass


class ConfigMismatchError(CensusError, ValueError):
    pass


class LedgerInconsistencyError(CensusError, AssertionError):
    pass


class NonPolynomialResultError(CensusError, ArithmeticError):
    pass


class OracleDisagreementError(CensusError, RuntimeError):
    """Search and Macaulay verdicts differ for one form."""

    def __init__(self, coeffs: Sequence[int], search_smooth: bool, macaulay_smooth: bool) -> None:
        self.coeffs = tuple(int(value) for value in coeffs)
        self.search_smooth = search_smooth
        self.macaulay_smooth = macaulay_smooth
        super().__init__(
            f"smoothness strategies disagree (search={search_smooth}, macaulay={macaulay_smooth}) "
            f"for coefficients {list(self.coeffs)}"
        )


class NonIntegralTraceError(CensusError, ArithmeticError):
    def __init__(self, point_count: int, q: int) -> None:
        self.point_count = point_count
        self.q = q
        super().__init__(f"{point_count} points over F_{q} is not of the form q^2 + (t+1)q + 1")
