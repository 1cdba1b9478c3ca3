from __future__ import annotations

import logging
import multiprocessing
import time
from collections import Counter
from collections.abc import Iterator, Sequence
from concurrent.futures import FIRST_COMPLETED, Executor, Future, ProcessPoolExecutor, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from decimal import ROUND_CEILING, Decimal, localcontext
from fractions import Fraction
from functools import reduce
from pathlib import Path
from typing import Any

import numpy as np
from numpy.random import Philox
from tqdm import tqdm

from .census_errors import (
    ConfigMismatchError,
    MalformedInputError,
    NonIntegralTraceError,
    ResumeMismatchError,
    UnsupportedCharacteristicError,
    UnsupportedFieldError,
)
from .census_forms import (
    CubicForm,
    count_lines_batch,
    count_points,
    count_points_batch,
    format_coefficients,
    line_array,
    point_array,
)
from .census_gf import FieldCtx
from .census_models import CensusReport, ConfidenceIntervalDict, FindingDict
from .census_smoothness import STRATEGIES, classify_batch
from .census_storage import load_checkpoint, utc_now_iso, write_checkpoint
from .census_utils import (
    BATCH_ELEMENT_BUDGET,
    CONFIDENCE_LEVEL,
    DEFAULT_CHECKPOINT_INTERVAL,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_SEARCH_DEPTH,
    ENGINE_VERSION,
    FINDINGS_CAP,
    HALF_WIDTH_PLACES,
    INDEX_LIMIT,
    Z_99,
    class_count,
    rational_dict,
    sha256_hex,
)

LOGGER = logging.getLogger(__name__)

MODES = ("exhaustive", "sample")
COEFFICIENT_COUNT = 20
SAMPLE_WORDS = 4
TWO_128 = 1 << 128


def _block_starts(q: int) -> list[int]:
    """Start of the block of classes whose first nonzero coefficient sits at each position."""
    starts = [0]
    for lead in range(COEFFICIENT_COUNT):
        starts.append(starts[-1] + q ** (COEFFICIENT_COUNT - 1 - lead))
    return starts


def index_to_coefficients(ctx: FieldCtx, indices: Sequence[int] | np.ndarray) -> np.ndarray:
    """Monic representatives of the given class indices as a (n, 20) int64 array."""
    q = ctx.q
    total = class_count(q)
    starts = _block_starts(q)
    if total < INDEX_LIMIT:
        index = np.asarray(indices, dtype=np.int64).reshape(-1)
        if index.size and (index.min() < 0 or index.max() >= total):
            raise MalformedInputError(f"class indices must lie in [0, {total})")
        lead = np.searchsorted(np.asarray(starts[1:], dtype=np.int64), index, side="right")
        offset = index - np.asarray(starts, dtype=np.int64)[lead]
        coeffs = np.zeros((index.size, COEFFICIENT_COUNT), dtype=np.int64)
        coeffs[np.arange(index.size), lead] = 1
        for position in range(1, COEFFICIENT_COUNT):
            digit = (offset // q ** (COEFFICIENT_COUNT - 1 - position)) % q
            coeffs[:, position] = np.where(position > lead, digit, coeffs[:, position])
        return coeffs

    rows = []
    for raw in indices:
        value = int(raw)
        if not 0 <= value < total:
            raise MalformedInputError(f"class indices must lie in [0, {total})")
        lead = next(j for j in range(COEFFICIENT_COUNT) if value < starts[j + 1])
        offset = value - starts[lead]
        row = [0] * COEFFICIENT_COUNT
        row[lead] = 1
        for position in range(COEFFICIENT_COUNT - 1, lead, -1):
            offset, row[position] = divmod(offset, q)
        rows.append(row)
    return np.asarray(rows, dtype=np.int64).reshape(-1, COEFFICIENT_COUNT)


def coefficients_to_index(form: CubicForm) -> int:
    """Index of the projective class of form; the form is scaled to its monic representative first."""
    ctx = form.ctx
    if form.is_zero:
        raise MalformedInputError("the zero form has no class index")
    lead = next(j for j, value in enumerate(form.coeffs) if value)
    scale = ctx.inv(form.coeffs[lead])
    index = _block_starts(ctx.q)[lead]
    for position in range(lead + 1, COEFFICIENT_COUNT):
        index += ctx.mul(scale, form.coeffs[position]) * ctx.q ** (COEFFICIENT_COUNT - 1 - position)
    return index


def enum_monic_forms(ctx: FieldCtx, start: int = 0, stop: int | None = None) -> Iterator[CubicForm]:
    stop = class_count(ctx.q) if stop is None else stop
    for chunk_start in range(start, stop, DEFAULT_CHUNK_SIZE):
        chunk = range(chunk_start, min(stop, chunk_start + DEFAULT_CHUNK_SIZE))
        for row in index_to_coefficients(ctx, list(chunk)):
            yield CubicForm(ctx, tuple(int(v) for v in row))


def trace_from_count(point_count: int, q: int) -> int:
    numerator = point_count - q * q - 1
    if numerator % q:
        raise NonIntegralTraceError(point_count, q)
    return numerator // q - 1


def trace_of(form: CubicForm) -> int:
    return trace_from_count(count_points(form), form.ctx.q)


def sample_indices(q: int, seed: int, start: int, stop: int) -> list[int]:
    """Class indices of samples start..stop-1; sample s depends only on (seed, s)."""
    total = class_count(q)
    limit = TWO_128 - TWO_128 % total
    raw = Philox(key=seed, counter=start).random_raw(SAMPLE_WORDS * (stop - start))
    words = [int(word) for word in raw]
    indices = []
    for sample in range(stop - start):
        block = words[SAMPLE_WORDS * sample : SAMPLE_WORDS * (sample + 1)]
        first = (block[0] << 64) | block[1]
        second = (block[2] << 64) | block[3]
        candidate = first if first < limit else second
        indices.append(candidate % total)
    return indices


@dataclass(frozen=True)
class CensusConfig:
    ctx: FieldCtx
    mode: str = "exhaustive"
    samples: int | None = None
    seed: int | None = None
    strategy: str = "cross_check"
    search_depth: int = DEFAULT_SEARCH_DEPTH
    compute_lines: bool = False
    allow_char_3: bool = False
    window: tuple[int, int] | None = None
    partitions: int = 1
    workers: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE
    checkpoint_interval: int = DEFAULT_CHECKPOINT_INTERVAL
    checkpoint_path: Path | None = None
    resume_path: Path | None = None
    stop_after: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of: {', '.join(MODES)}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of: {', '.join(STRATEGIES)}")
        if self.mode == "sample":
            if self.samples is None or self.samples < 1:
                raise MalformedInputError("sample mode needs a sample count of at least 1")
            if self.seed is None or not 0 <= self.seed < TWO_128:
                raise MalformedInputError("sample mode needs a seed in [0, 2^128)")
        elif class_count(self.ctx.q) >= INDEX_LIMIT:
            raise UnsupportedFieldError(f"exhaustive mode over GF({self.ctx.q}) exceeds the 64-bit class index")
        for name in ("search_depth", "partitions", "workers", "chunk_size", "checkpoint_interval"):
            if getattr(self, name) < 1:
                raise MalformedInputError(f"{name} must be at least 1")
        if self.window is not None:
            start, stop = self.window
            if not 0 <= start < stop <= self.total:
                raise MalformedInputError(f"window {start}:{stop} lies outside [0, {self.total}]")

    @property
    def total(self) -> int:
        return class_count(self.ctx.q) if self.mode == "exhaustive" else int(self.samples or 0)

    @property
    def span(self) -> tuple[int, int]:
        return self.window if self.window is not None else (0, self.total)

    def echo(self) -> dict[str, Any]:
        return {
            "q": self.ctx.q,
            "p": self.ctx.p,
            "k": self.ctx.k,
            "modulus": list(self.ctx.modulus),
            "mode": self.mode,
            "samples": self.samples,
            "seed": self.seed,
            "strategy": self.strategy,
            "search_depth": self.search_depth,
            "compute_lines": self.compute_lines,
            "allow_char_3": self.allow_char_3,
            "window": list(self.window) if self.window is not None else None,
        }


def census_config_hash(config: CensusConfig) -> str:
    return sha256_hex(config.echo())


def _finding_key(finding: FindingDict) -> tuple[int, int, str]:
    sample = finding["sample"]
    return (finding["index"], -1 if sample is None else sample, finding["kind"])


@dataclass
class CensusTally:
    config_hash: str = ""
    visited: int = 0
    smooth_count: int = 0
    point_sum: int = 0
    point_square_sum: int = 0
    all_forms_point_sum: int = 0
    trace_histogram: Counter[int] = field(default_factory=Counter)
    line_histogram: Counter[int] = field(default_factory=Counter)
    disagreement_count: int = 0
    nonintegral_count: int = 0
    findings: list[FindingDict] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "visited": self.visited,
            "smooth_count": self.smooth_count,
            "point_sum": self.point_sum,
            "point_square_sum": self.point_square_sum,
            "all_forms_point_sum": self.all_forms_point_sum,
            "trace_histogram": {str(key): self.trace_histogram[key] for key in sorted(self.trace_histogram)},
            "line_histogram": {str(key): self.line_histogram[key] for key in sorted(self.line_histogram)},
            "disagreement_count": self.disagreement_count,
            "nonintegral_count": self.nonintegral_count,
            "findings": list(self.findings),
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> CensusTally:
        return cls(
            config_hash=str(payload.get("config_hash", "")),
            visited=int(payload.get("visited", 0)),
            smooth_count=int(payload.get("smooth_count", 0)),
            point_sum=int(payload.get("point_sum", 0)),
            point_square_sum=int(payload.get("point_square_sum", 0)),
            all_forms_point_sum=int(payload.get("all_forms_point_sum", 0)),
            trace_histogram=Counter({int(k): int(v) for k, v in payload.get("trace_histogram", {}).items()}),
            line_histogram=Counter({int(k): int(v) for k, v in payload.get("line_histogram", {}).items()}),
            disagreement_count=int(payload.get("disagreement_count", 0)),
            nonintegral_count=int(payload.get("nonintegral_count", 0)),
            findings=list(payload.get("findings", [])),
        )


def merge_tallies(first: CensusTally, second: CensusTally) -> CensusTally:
    if first.config_hash and second.config_hash and first.config_hash != second.config_hash:
        raise ConfigMismatchError(
            f"cannot merge partial results of different configurations ({first.config_hash[:12]} vs {second.config_hash[:12]})"
        )
    findings = sorted(first.findings + second.findings, key=_finding_key)[:FINDINGS_CAP]
    return CensusTally(
        config_hash=first.config_hash or second.config_hash,
        visited=first.visited + second.visited,
        smooth_count=first.smooth_count + second.smooth_count,
        point_sum=first.point_sum + second.point_sum,
        point_square_sum=first.point_square_sum + second.point_square_sum,
        all_forms_point_sum=first.all_forms_point_sum + second.all_forms_point_sum,
        trace_histogram=first.trace_histogram + second.trace_histogram,
        line_histogram=first.line_histogram + second.line_histogram,
        disagreement_count=first.disagreement_count + second.disagreement_count,
        nonintegral_count=first.nonintegral_count + second.nonintegral_count,
        findings=findings,
    )


def _finding(kind: str, index: int, sample: int | None, ctx: FieldCtx, row: np.ndarray, detail: str) -> FindingDict:
    coeffs = format_coefficients(CubicForm(ctx, tuple(int(v) for v in row)))
    LOGGER.warning("Finding %s at class %s: %s (%s)", kind, index, coeffs, detail)
    return {"kind": kind, "index": index, "sample": sample, "coeffs": coeffs, "detail": detail}


def _classify_rows(config: CensusConfig, coeffs: np.ndarray, indices: list[int], samples: list[int | None]) -> CensusTally:
    ctx = config.ctx
    q = ctx.q
    tally = CensusTally(config_hash=census_config_hash(config), visited=len(indices))
    counts = count_points_batch(ctx, coeffs)
    tally.all_forms_point_sum = int(counts.sum())
    verdict = classify_batch(ctx, coeffs, config.strategy, config.search_depth)

    for row in np.flatnonzero(verdict.disagreement):
        tally.disagreement_count += 1
        counted = "smooth" if verdict.smooth[row] else "singular"
        tally.findings.append(
            _finding("oracle_disagreement", indices[row], samples[row], ctx, coeffs[row], f"counted as {counted}")
        )

    smooth_rows = np.flatnonzero(verdict.smooth)
    smooth_counts = counts[smooth_rows]
    numerators = smooth_counts - q * q - 1
    integral = numerators % q == 0
    for row, point_count in zip(smooth_rows[~integral], smooth_counts[~integral]):
        tally.nonintegral_count += 1
        tally.findings.append(
            _finding("nonintegral_trace", indices[row], samples[row], ctx, coeffs[row], f"{int(point_count)} points")
        )

    kept = smooth_counts[integral]
    tally.smooth_count = int(kept.size)
    tally.point_sum = int(kept.sum())
    tally.point_square_sum = int((kept.astype(object) ** 2).sum()) if kept.size else 0
    tally.trace_histogram = Counter(int(t) for t in numerators[integral] // q - 1)
    if config.compute_lines and kept.size:
        smooth_coeffs = coeffs[smooth_rows[integral]]
        step = max(1, BATCH_ELEMENT_BUDGET // (4 * line_array(ctx).shape[0]))
        for offset in range(0, smooth_coeffs.shape[0], step):
            lines = count_lines_batch(ctx, smooth_coeffs[offset : offset + step])
            tally.line_histogram.update(int(n) for n in lines)
    return tally


def census_chunk(config: CensusConfig, start: int, stop: int) -> CensusTally:
    """Tally of positions start..stop-1 (class indices in exhaustive mode, sample numbers otherwise)."""
    ctx = config.ctx
    if config.mode == "exhaustive":
        indices = list(range(start, stop))
        samples: list[int | None] = [None] * len(indices)
    else:
        indices = sample_indices(ctx.q, int(config.seed or 0), start, stop)
        samples = list(range(start, stop))
    batch = max(1, BATCH_ELEMENT_BUDGET // point_array(ctx).shape[0])
    tally = CensusTally(config_hash=census_config_hash(config))
    for offset in range(0, len(indices), batch):
        part = indices[offset : offset + batch]
        coeffs = index_to_coefficients(ctx, part)
        tally = merge_tallies(tally, _classify_rows(config, coeffs, part, samples[offset : offset + batch]))
    return tally


def _make_executor(max_workers: int) -> Executor:
    try:
        return ProcessPoolExecutor(max_workers=max_workers, mp_context=multiprocessing.get_context("fork"))
    except (ValueError, OSError) as exc:
        LOGGER.warning("Process pool unavailable (%s); using threads", exc)
        return ThreadPoolExecutor(max_workers=max_workers)


@dataclass
class _Partition:
    start: int
    stop: int
    next_index: int
    tally: CensusTally
    pending: dict[int, tuple[int, CensusTally]] = field(default_factory=dict)

    def absorb(self, chunk_start: int, chunk_stop: int, tally: CensusTally) -> int:
        """Buffer a finished chunk and fold in every chunk now contiguous with next_index."""
        self.pending[chunk_start] = (chunk_stop, tally)
        advanced = 0
        while self.next_index in self.pending:
            chunk_stop, chunk_tally = self.pending.pop(self.next_index)
            self.tally = merge_tallies(self.tally, chunk_tally)
            advanced += chunk_stop - self.next_index
            self.next_index = chunk_stop
        return advanced

    def as_checkpoint(self) -> dict[str, Any]:
        return {"start": self.start, "stop": self.stop, "next_index": self.next_index, "tally": self.tally.to_dict()}


def split_range(start: int, stop: int, parts: int) -> list[tuple[int, int]]:
    size = stop - start
    parts = max(1, min(parts, size))
    bounds = [start + size * i // parts for i in range(parts + 1)]
    return [(bounds[i], bounds[i + 1]) for i in range(parts)]


def _initial_partitions(config: CensusConfig, config_hash: str) -> list[_Partition]:
    if config.resume_path is not None:
        checkpoint = load_checkpoint(config.resume_path)
        if checkpoint["config_hash"] != config_hash:
            raise ResumeMismatchError(
                f"checkpoint {config.resume_path} was written for configuration {checkpoint['config_hash'][:12]}, "
                f"not {config_hash[:12]}"
            )
        LOGGER.info("Resuming census %s from %s", config_hash[:12], config.resume_path)
        return [
            _Partition(item["start"], item["stop"], item["next_index"], CensusTally.from_dict(item["tally"]))
            for item in checkpoint["partitions"]
        ]
    start, stop = config.span
    return [
        _Partition(part_start, part_stop, part_start, CensusTally(config_hash=config_hash))
        for part_start, part_stop in split_range(start, stop, config.partitions)
    ]


def _chunk_tasks(config: CensusConfig, partitions: list[_Partition]) -> list[tuple[int, int, int]]:
    """(partition, start, stop) chunks interleaved across partitions."""
    per_partition = [
        [
            (number, chunk_start, min(partition.stop, chunk_start + config.chunk_size))
            for chunk_start in range(partition.next_index, partition.stop, config.chunk_size)
        ]
        for number, partition in enumerate(partitions)
    ]
    tasks = []
    longest = max((len(chunks) for chunks in per_partition), default=0)
    for position in range(longest):
        tasks.extend(chunks[position] for chunks in per_partition if position < len(chunks))
    return tasks


def _save(config: CensusConfig, config_hash: str, partitions: list[_Partition]) -> None:
    if config.checkpoint_path is not None:
        write_checkpoint(config.checkpoint_path, config_hash, [partition.as_checkpoint() for partition in partitions])


def _half_width(variance: Fraction, count: int) -> str:
    with localcontext() as context:
        context.prec = 50
        spread = (Decimal(variance.numerator) / Decimal(variance.denominator) / Decimal(count)).sqrt()
        width = Decimal(Z_99) * spread
        return str(width.quantize(Decimal(1).scaleb(-HALF_WIDTH_PLACES), rounding=ROUND_CEILING))


def confidence_interval(tally: CensusTally) -> ConfidenceIntervalDict | None:
    """Normal-approximation interval for the mean point count of a smooth sampled surface."""
    n = tally.smooth_count
    if n < 2:
        return None
    mean = Fraction(tally.point_sum, n)
    variance = (Fraction(tally.point_square_sum) - n * mean * mean) / (n - 1)
    return {"level": CONFIDENCE_LEVEL, "centre": rational_dict(mean), "half_width": _half_width(variance, n)}


def build_report(config: CensusConfig, tally: CensusTally, duration: float, resumed_from: str | None = None) -> CensusReport:
    ctx = config.ctx
    q = ctx.q
    average = Fraction(tally.point_sum, tally.smooth_count) if tally.smooth_count else None
    trace_total = sum(t * count for t, count in tally.trace_histogram.items())
    trace_mean = Fraction(trace_total, tally.smooth_count) if tally.smooth_count else None
    report: CensusReport = {
        "q": q,
        "p": ctx.p,
        "k": ctx.k,
        "modulus": list(ctx.modulus),
        "mode": config.mode,
        "total_indexed": tally.visited,
        "visited": tally.visited,
        "window": list(config.window) if config.window is not None else None,
        "smooth_count": tally.smooth_count,
        "point_sum": tally.point_sum,
        "average": rational_dict(average) if average is not None else None,
        "trace_histogram": {str(t): tally.trace_histogram[t] for t in sorted(tally.trace_histogram)},
        "line_histogram": (
            {str(n): tally.line_histogram[n] for n in sorted(tally.line_histogram)} if config.compute_lines else None
        ),
        "point_square_sum": tally.point_square_sum,
        "confidence_interval": confidence_interval(tally) if config.mode == "sample" else None,
        "trace_mean": rational_dict(trace_mean) if trace_mean is not None else None,
        "all_forms_point_sum": tally.all_forms_point_sum,
        "findings": list(tally.findings),
        "disagreement_count": tally.disagreement_count,
        "nonintegral_count": tally.nonintegral_count,
        "engine_version": ENGINE_VERSION,
        "config": config.echo(),
        "config_hash": tally.config_hash,
        "run_metadata": {
            "created_at": utc_now_iso(),
            "duration_seconds": round(duration, 3),
            "partitions": config.partitions,
            "workers": config.workers,
            "chunk_size": config.chunk_size,
            "resumed_from": resumed_from,
        },
    }
    return report


def run_census(config: CensusConfig, progress: bool = True) -> CensusReport | None:
    """Run or resume a census; returns None when stopped early by stop_after."""
    ctx = config.ctx
    if ctx.p == 3 and not config.allow_char_3:
        raise UnsupportedCharacteristicError(f"GF({ctx.q}) has characteristic 3; pass the char-3 override to run it")
    if ctx.p == 3:
        LOGGER.warning("Characteristic 3 census over GF(%s) is experimental", ctx.q)

    config_hash = census_config_hash(config)
    partitions = _initial_partitions(config, config_hash)
    tasks = _chunk_tasks(config, partitions)
    remaining = sum(stop - start for _, start, stop in tasks)
    LOGGER.info(
        "Census %s over GF(%s): mode=%s strategy=%s positions=%s partitions=%s workers=%s",
        config_hash[:12], ctx.q, config.mode, config.strategy, remaining, len(partitions), config.workers,
    )

    started = time.perf_counter()
    since_checkpoint = 0
    processed = 0
    stopped = False
    bar = tqdm(total=remaining, desc=f"Census GF({ctx.q})", unit="class", disable=not progress)

    def record(task: tuple[int, int, int], tally: CensusTally) -> None:
        nonlocal since_checkpoint, processed
        number, chunk_start, chunk_stop = task
        since_checkpoint += partitions[number].absorb(chunk_start, chunk_stop, tally)
        processed += chunk_stop - chunk_start
        bar.update(chunk_stop - chunk_start)
        if since_checkpoint >= config.checkpoint_interval:
            _save(config, config_hash, partitions)
            since_checkpoint = 0

    def should_stop() -> bool:
        return config.stop_after is not None and processed >= config.stop_after

    try:
        if config.workers == 1:
            for task in tasks:
                if should_stop():
                    stopped = True
                    break
                record(task, census_chunk(config, task[1], task[2]))
        else:
            with _make_executor(config.workers) as executor:
                queue = iter(tasks)
                in_flight: dict[Future[CensusTally], tuple[int, int, int]] = {}
                while True:
                    while not should_stop() and len(in_flight) < 2 * config.workers:
                        task = next(queue, None)
                        if task is None:
                            break
                        in_flight[executor.submit(census_chunk, config, task[1], task[2])] = task
                    if not in_flight:
                        stopped = should_stop() and processed < remaining
                        break
                    done, _ = wait(in_flight, return_when=FIRST_COMPLETED)
                    for future in done:
                        record(in_flight.pop(future), future.result())
    finally:
        bar.close()

    if stopped:
        _save(config, config_hash, partitions)
        LOGGER.info("Census %s stopped after %s positions", config_hash[:12], processed)
        return None
    _save(config, config_hash, partitions)

    tally = reduce(merge_tallies, (partition.tally for partition in partitions), CensusTally(config_hash=config_hash))
    resumed_from = str(config.resume_path) if config.resume_path is not None else None
    report = build_report(config, tally, time.perf_counter() - started, resumed_from)
    LOGGER.info(
        "Census %s finished: visited=%s smooth=%s point_sum=%s findings=%s",
        config_hash[:12], tally.visited, tally.smooth_count, tally.point_sum, len(tally.findings),
    )
    return report
