from typing import Any, Literal, TypedDict


class RationalDict(TypedDict):
    num: int
    den: int


class FindingDict(TypedDict):
    kind: str
    index: int
    sample: int | None
    coeffs: str
    detail: str


class ConfidenceIntervalDict(TypedDict):
    level: str
    centre: RationalDict
    half_width: str


class RunMetadataDict(TypedDict):
    created_at: str
    duration_seconds: float
    partitions: int
    workers: int
    chunk_size: int
    resumed_from: str | None


class CensusReport(TypedDict):
    q: int
    p: int
    k: int
    modulus: list[int]
    mode: str
    total_indexed: int
    visited: int
    window: list[int] | None
    smooth_count: int
    point_sum: int
    average: RationalDict | None
    trace_histogram: dict[str, int]
    line_histogram: dict[str, int] | None
    point_square_sum: int
    confidence_interval: ConfidenceIntervalDict | None
    trace_mean: RationalDict | None
    all_forms_point_sum: int
    findings: list[FindingDict]
    disagreement_count: int
    nonintegral_count: int
    engine_version: str
    config: dict[str, Any]
    config_hash: str
    run_metadata: RunMetadataDict


class VerificationCheck(TypedDict):
    id: str
    name: str
    status: Literal["pass", "fail", "skipped"]
    expected: Any
    observed: Any
    detail: str


class VerificationOutcome(TypedDict):
    passed: bool
    checks: list[VerificationCheck]
    notices: list[str]


class Predictions(TypedDict):
    q: int
    expected_M: int
    expected_U: int
    expected_average: RationalDict
    expected_pgl4: int
    expected_trace_mean: RationalDict
    expected_total_indexed: int
    expected_all_forms_point_sum: int
    admissible_traces: list[int]
    t6_allowed: bool
