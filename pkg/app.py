from __future__ import annotations

import argparse
import json
import logging
import sys
from contextlib import contextmanager
from collections.abc import Iterator, Sequence
from pathlib import Path
from typing import Any, cast

from cubic_census.census_errors import (
    CensusError,
    LedgerInconsistencyError,
    MalformedInputError,
    NonIntegralTraceError,
    OracleDisagreementError,
    UnsupportedCharacteristicError,
    UnsupportedFieldError,
)
from cubic_census.census_forms import CubicForm, count_lines, count_points, parse_coefficients
from cubic_census.census_gf import FieldCtx, field_create, format_modulus
from cubic_census.census_ledger import (
    M_FACTORS,
    UP_FACTORS,
    XP_FACTORS,
    IntPoly,
    assemble_E1,
    betti_from_page,
    check_count_identities,
    check_page_shape,
    check_subtype_dimensions,
    degeneration_check,
    derive_e1_page,
    format_factored,
    moduli_quotient,
    poincare_M,
    poincare_U,
    poincare_Up,
    poincare_Xp,
    predict,
    serre_candidates,
    stein_bound_check,
    subtype_table,
    tate_classes_M,
    tate_classes_P2,
    tate_classes_pgl4,
    tate_classes_U,
    vfund_vanishing_check,
)
from cubic_census.census_models import CensusReport, Predictions, VerificationOutcome
from cubic_census.census_run import CensusConfig, run_census, trace_from_count
from cubic_census.census_smoothness import STRATEGIES, SmoothnessVerdict, is_smooth
from cubic_census.census_storage import default_report_path, export_histogram_csv, load_report, write_report
from cubic_census.census_verify import verify_report
from cubic_census.census_utils import (
    DEFAULT_CHECKPOINT_INTERVAL,
    DEFAULT_CHUNK_SIZE,
    DEFAULT_SEARCH_DEPTH,
    EXIT_INVALID_INPUT,
    EXIT_OK,
    EXIT_UNSUPPORTED_FIELD,
    EXIT_VERIFICATION_FAILED,
    LOG_DIR,
    format_rational,
    parse_modulus,
    parse_prime_power,
    parse_window,
    rational_from_dict,
)

LOGGER = logging.getLogger("cubic_census.app")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LEDGER_TARGETS = ("tables", "pages", "poincare", "predict", "dims", "differentials", "counts")
MAX_FINDINGS_TO_SHOW = 10


def get_status_icon(status: str) -> str:
    if status == "pass":
        return "✅"
    if status == "fail":
        return "❌"
    if status == "skipped":
        return "⏭️"
    return "ℹ️"


@contextmanager
def blame(flag: str) -> Iterator[None]:
    """Prefix input errors raised while handling a flag with the flag's name."""
    try:
        yield
    except (MalformedInputError, UnsupportedFieldError, UnsupportedCharacteristicError) as exc:
        raise type(exc)(f"{flag}: {exc}") from exc
    except CensusError as exc:
        if isinstance(exc, ValueError):
            raise MalformedInputError(f"{flag}: {exc}") from exc
        raise


def configure_logging(level: str, log_file: str | None) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        path = Path(log_file)
        if not path.is_absolute() and path.parent == Path("."):
            path = LOG_DIR / path
        path.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(path, encoding="utf-8"))
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, handlers=handlers, force=True)


def resolve_field(q: int, modulus_text: str | None = None) -> FieldCtx:
    with blame("--q"):
        p, k = parse_prime_power(q)
    modulus = None
    if modulus_text:
        with blame("--modulus"):
            modulus = parse_modulus(modulus_text)
    with blame("--modulus" if modulus_text else "--q"):
        return field_create(p, k, modulus)


def poly_payload(poly: IntPoly, factors: Sequence[IntPoly] | None = None) -> dict[str, Any]:
    payload: dict[str, Any] = {"expanded": poly.expanded(), "coefficients": list(poly.coeffs)}
    if factors is not None:
        payload["factored"] = format_factored(factors)
    return payload


def render_histogram(title: str, header: str, histogram: dict[str, int]) -> list[str]:
    lines = [title, f"  {header:>6}  {'count':>12}"]
    for key in sorted(histogram, key=int):
        lines.append(f"  {key:>6}  {histogram[key]:>12,}")
    return lines


def render_census_summary(report: CensusReport, path: Path | None = None) -> str:
    average = rational_from_dict(report["average"]) if report["average"] else None
    trace_mean = rational_from_dict(report["trace_mean"]) if report["trace_mean"] else None
    lines = [
        f"🧮 Census over GF({report['q']}) [{report['mode']}]",
        f"  classes visited:     {report['total_indexed']:,}",
        f"  smooth surfaces:     {report['smooth_count']:,}",
        f"  point sum:           {report['point_sum']:,}",
        f"  average points:      {format_rational(average)}",
        f"  average trace:       {format_rational(trace_mean)}",
        f"  all-forms point sum: {report['all_forms_point_sum']:,}",
    ]
    interval = report.get("confidence_interval")
    if interval:
        centre = rational_from_dict(interval["centre"])
        lines.append(f"  {interval['level']} interval:     {format_rational(centre)} +/- {interval['half_width']}")
    lines.extend(render_histogram("📊 Trace histogram", "t", report["trace_histogram"]))
    if report["line_histogram"] is not None:
        lines.extend(render_histogram("📏 Line histogram", "lines", report["line_histogram"]))
    findings = report["findings"]
    if findings:
        lines.append(f"⚠️ Findings: {report['disagreement_count']} disagreements, {report['nonintegral_count']} non-integral traces")
        for finding in findings[:MAX_FINDINGS_TO_SHOW]:
            lines.append(f"  [{finding['kind']}] class {finding['index']}: {finding['coeffs']} ({finding['detail']})")
    if path is not None:
        lines.append(f"💾 Report written to {path}")
    return "\n".join(lines)


def render_verdict(verdict: SmoothnessVerdict) -> list[str]:
    lines = [f"  smooth:          {'yes' if verdict.smooth else 'no'} ({verdict.method})"]
    if verdict.rank is not None:
        lines.append(f"  Macaulay rank:   {verdict.rank} of {verdict.target_dim}")
    if verdict.witness is not None:
        witness = verdict.witness
        lines.append(f"  singular point:  {witness.point.format()} over GF({witness.point.ctx.q})")
        lines.append(f"  partials there:  {list(witness.partial_values)}")
    return lines


def render_verification(outcome: VerificationOutcome, path: Path) -> str:
    lines = [f"{'✅' if outcome['passed'] else '❌'} Verification of {path}"]
    for notice in outcome["notices"]:
        lines.append(f"ℹ️ {notice}")
    for check in outcome["checks"]:
        line = f"  {get_status_icon(check['status'])} ({check['id']}) {check['name']}"
        if check["status"] == "fail":
            line += f": expected {check['expected']}, observed {check['observed']}"
        if check["detail"]:
            line += f" [{check['detail']}]"
        lines.append(line)
    return "\n".join(lines)


def render_predictions(predictions: Predictions) -> str:
    average = rational_from_dict(predictions["expected_average"])
    return "\n".join(
        [
            f"🔮 Predictions for q={predictions['q']}",
            f"  #M(F_q)  smooth surfaces:    {predictions['expected_M']:,}",
            f"  #U(F_q)  point sum:          {predictions['expected_U']:,}",
            f"  average points:              {format_rational(average)}",
            f"  #PGL(4,F_q):                 {predictions['expected_pgl4']:,}",
            f"  classes in P^19(F_q):        {predictions['expected_total_indexed']:,}",
            f"  all-forms point sum:         {predictions['expected_all_forms_point_sum']:,}",
            f"  admissible traces:           {predictions['admissible_traces']}",
            f"  t=6 occurs:                  {'yes' if predictions['t6_allowed'] else 'no'}",
        ]
    )


def ledger_payload(emit: str, q: int | None, allow_char_3: bool = False) -> dict[str, Any]:
    if emit == "tables":
        return {"subtypes": [record.as_dict() for record in subtype_table()]}
    if emit == "pages":
        page = assemble_E1()
        check_page_shape(page)
        return {
            "E1": page.as_dict(),
            "e1": derive_e1_page(page).as_dict(),
            "betti": {str(i): rank for i, rank in sorted(betti_from_page(page).items())},
        }
    if emit == "poincare":
        xp = poincare_Xp()
        pu = poincare_U()
        return {
            "P_Xp": poly_payload(xp, XP_FACTORS),
            "P_Up": poly_payload(poincare_Up(xp), UP_FACTORS),
            "P_U": poly_payload(pu, next(c["factors"] for c in serre_candidates() if c["divisible"])),
            "P_M": poly_payload(poincare_M(), M_FACTORS),
            "P_U_over_P_M": poly_payload(moduli_quotient(pu)),
            "candidates": [
                {"label": c["label"], "divisible_by_1_plus_t7": c["divisible"], **poly_payload(c["poly"], c["factors"])}
                for c in serre_candidates()
            ],
            "vfund_vanishing": vfund_vanishing_check(pu),
        }
    if emit == "predict":
        if q is None:
            raise MalformedInputError("--q: required for --emit predict")
        with blame("--q"):
            return dict(predict(q, allow_char_3=allow_char_3))
    if emit == "dims":
        stored = {record.id: record.dim_L for record in subtype_table()}
        return {
            "dim_L": [
                {"id": subtype_id, "stored": stored[subtype_id], "derived": derived}
                for subtype_id, derived in check_subtype_dimensions().items()
            ]
        }
    if emit == "differentials":
        differentials = degeneration_check()
        return {
            "differentials": [
                {"r": d["r"], "source": list(d["source"]), "target": list(d["target"]), "forced_zero": True}
                for d in differentials
            ],
            "stein": stein_bound_check(),
        }
    if emit == "counts":
        counts = check_count_identities()
        classes = {"M": tate_classes_M(), "PGL4": tate_classes_pgl4(), "P2": tate_classes_P2(), "U": tate_classes_U()}
        return {
            "point_counts": {name: poly_payload(poly) for name, poly in counts.items()},
            "tate_classes": {name: value.as_list() for name, value in classes.items()},
        }
    raise MalformedInputError(f"--emit must be one of: {', '.join(LEDGER_TARGETS)}")


def render_ledger(emit: str, payload: dict[str, Any]) -> str:
    if emit == "tables":
        lines = [f"{'type':<6}{'kind':<10}{'n':>3}{'dimA':>6}{'dimL':>6}{'deg':>5}  cohomology"]
        for row in payload["subtypes"]:
            cohomology = ", ".join(f"H^{c['degree']}={c['rank']}" for c in row["cohomology"]) or "0"
            cells = [row[key] if row[key] is not None else "-" for key in ("n_points", "dim_A", "dim_L", "deg")]
            lines.append(f"{row['id']:<6}{row['kind']:<10}{cells[0]:>3}{cells[1]:>6}{cells[2]:>6}{cells[3]:>5}  {cohomology}")
        return "\n".join(lines)
    if emit == "pages":
        lines = ["E1 entries (p, q): rank"]
        for name in ("E1", "e1"):
            lines.append(f"{name}:")
            lines.extend(f"  ({e['p']:>2}, {e['q']:>2}): {e['rank']}" for e in payload[name]["entries"])
        lines.append("Betti numbers: " + ", ".join(f"b{i}={r}" for i, r in payload["betti"].items()))
        return "\n".join(lines)
    if emit == "poincare":
        lines = []
        for key in ("P_Xp", "P_Up", "P_U", "P_M", "P_U_over_P_M"):
            entry = payload[key]
            factored = entry.get("factored", "")
            lines.append(f"{key:<13} {factored}")
            lines.append(f"{'':<13} = {entry['expanded']}")
        for candidate in payload["candidates"]:
            verdict = "divisible" if candidate["divisible_by_1_plus_t7"] else "not divisible"
            lines.append(f"candidate {candidate['label']}: {candidate['factored']} ({verdict} by 1+t^7)")
        lines.append(f"vfund vanishing: {payload['vfund_vanishing']}")
        return "\n".join(lines)
    if emit == "predict":
        return render_predictions(cast(Predictions, payload))
    if emit == "dims":
        return "\n".join(f"{row['id']:<6} stored {row['stored']:>3}  derived {row['derived']:>3}" for row in payload["dim_L"])
    if emit == "differentials":
        lines = [
            f"d^{d['r']}: {tuple(d['source'])} -> {tuple(d['target'])} vanishes" for d in payload["differentials"]
        ]
        stein = payload["stein"]
        lines.append(f"max Betti degree {stein['max_betti_degree']} <= {stein['bound']}")
        return "\n".join(lines)
    lines = []
    for name, entry in payload["point_counts"].items():
        lines.append(f"#{name}(q) = {entry['expanded']}")
    return "\n".join(lines)


def cmd_census(args: argparse.Namespace) -> int:
    ctx = resolve_field(args.q, args.modulus)
    if args.mode == "sample" and (args.samples is None or args.seed is None):
        raise MalformedInputError("--samples and --seed are required in sample mode")
    if args.stop_after is not None and not args.checkpoint:
        raise MalformedInputError("--stop-after needs --checkpoint to record progress")
    window = None
    if args.window:
        with blame("--window"):
            window = parse_window(args.window)
    with blame("census flags"):
        config = CensusConfig(
            ctx=ctx,
            mode=args.mode,
            samples=args.samples,
            seed=args.seed,
            strategy=args.strategy,
            search_depth=args.search_depth,
            compute_lines=args.lines,
            allow_char_3=args.allow_char_3,
            window=window,
            partitions=args.partitions,
            workers=args.threads,
            chunk_size=args.chunk_size,
            checkpoint_interval=args.checkpoint_interval,
            checkpoint_path=Path(args.checkpoint) if args.checkpoint else None,
            resume_path=Path(args.resume) if args.resume else None,
            stop_after=args.stop_after,
        )
    report = run_census(config, progress=not args.quiet)
    if report is None:
        print(f"⏸️ Census stopped early; resume with --resume {args.checkpoint}")
        return EXIT_OK
    path = Path(args.out) if args.out else default_report_path(ctx.q, args.mode)
    write_report(report, path)
    if args.csv:
        for written in export_histogram_csv(report, Path(args.csv)):
            LOGGER.info("Histogram exported to %s", written)
    print(render_census_summary(report, path))
    return EXIT_OK


def _read_form(args: argparse.Namespace) -> CubicForm:
    ctx = resolve_field(args.q, getattr(args, "modulus", None))
    with blame("--coeffs"):
        form = parse_coefficients(ctx, args.coeffs)
        if form.is_zero:
            raise MalformedInputError("the zero form does not define a surface")
    return form


def cmd_surface(args: argparse.Namespace) -> int:
    form = _read_form(args)
    q = form.ctx.q
    try:
        verdict = is_smooth(form, "cross_check", args.search_depth)
    except OracleDisagreementError as exc:
        print(f"❌ Smoothness oracles disagree: search={exc.search_smooth} macaulay={exc.macaulay_smooth}")
        return EXIT_VERIFICATION_FAILED
    points = count_points(form)
    lines = [f"🧊 Surface over GF({q}) [{format_modulus(form.ctx.modulus)}]"]
    lines.extend(render_verdict(verdict))
    lines.append(f"  rational points: {points}")
    status = EXIT_OK
    if verdict.smooth:
        try:
            lines.append(f"  trace t:         {trace_from_count(points, q)}")
        except NonIntegralTraceError:
            lines.append(f"  trace t:         not an integer ({points} points)")
            status = EXIT_VERIFICATION_FAILED
    lines.append(f"  rational lines:  {count_lines(form)}")
    print("\n".join(lines))
    return status


def cmd_smooth(args: argparse.Namespace) -> int:
    form = _read_form(args)
    try:
        verdict = is_smooth(form, args.strategy, args.search_depth)
    except OracleDisagreementError as exc:
        print(f"❌ Smoothness oracles disagree: search={exc.search_smooth} macaulay={exc.macaulay_smooth}")
        return EXIT_VERIFICATION_FAILED
    print("\n".join([f"Smoothness over GF({form.ctx.q})"] + render_verdict(verdict)))
    return EXIT_OK


def cmd_ledger(args: argparse.Namespace) -> int:
    payload = ledger_payload(args.emit, args.q, args.allow_char_3)
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(render_ledger(args.emit, payload))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    path = Path(args.report)
    with blame(f"--report {path}"):
        report = load_report(path)
    allow_char_3 = bool(report.get("config", {}).get("allow_char_3", False))
    predictions = predict(int(report["q"]), allow_char_3=allow_char_3)
    outcome = verify_report(report, predictions)
    print(render_verification(outcome, path))
    return EXIT_OK if outcome["passed"] else EXIT_VERIFICATION_FAILED


def _add_form_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--q", type=int, required=True, help="field size, a prime power")
    parser.add_argument("--modulus", help="defining polynomial, leading coefficient first, comma separated")
    parser.add_argument("--coeffs", required=True, help="20 comma-separated coefficients in monomial order")
    parser.add_argument("--search-depth", type=int, default=DEFAULT_SEARCH_DEPTH)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubic-census", description="Census of cubic surfaces over finite fields")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-file", help="also log to this file (bare names go to logs/)")
    parser.add_argument("--quiet", action="store_true", help="hide progress bars")
    commands = parser.add_subparsers(dest="command", required=True)

    census = commands.add_parser("census", help="enumerate or sample cubic surfaces")
    census.add_argument("--q", type=int, required=True)
    census.add_argument("--modulus")
    census.add_argument("--mode", choices=["exhaustive", "sample"], default="exhaustive")
    census.add_argument("--samples", type=int)
    census.add_argument("--seed", type=int)
    census.add_argument("--strategy", choices=list(STRATEGIES), default="cross_check")
    census.add_argument("--search-depth", type=int, default=DEFAULT_SEARCH_DEPTH)
    census.add_argument("--lines", action=argparse.BooleanOptionalAction, default=False)
    census.add_argument("--allow-char-3", action="store_true")
    census.add_argument("--partitions", type=int, default=1)
    census.add_argument("--threads", type=int, default=1, help="worker processes")
    census.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    census.add_argument("--checkpoint")
    census.add_argument("--checkpoint-interval", type=int, default=DEFAULT_CHECKPOINT_INTERVAL)
    census.add_argument("--resume")
    census.add_argument("--stop-after", type=int, help="checkpoint and stop after this many classes")
    census.add_argument("--window", help="START:STOP slice of the index range")
    census.add_argument("--out")
    census.add_argument("--csv", help="prefix for CSV histogram exports")
    census.set_defaults(handler=cmd_census)

    surface = commands.add_parser("surface", help="inspect one surface")
    _add_form_flags(surface)
    surface.set_defaults(handler=cmd_surface)

    smooth = commands.add_parser("smooth", help="run one smoothness strategy")
    _add_form_flags(smooth)
    smooth.add_argument("--strategy", choices=list(STRATEGIES), default="cross_check")
    smooth.set_defaults(handler=cmd_smooth)

    ledger = commands.add_parser("ledger", help="emit cohomology bookkeeping")
    ledger.add_argument("--emit", choices=list(LEDGER_TARGETS), required=True)
    ledger.add_argument("--q", type=int)
    ledger.add_argument("--allow-char-3", action="store_true")
    ledger.add_argument("--format", choices=["text", "json"], default="text")
    ledger.set_defaults(handler=cmd_ledger)

    verify = commands.add_parser("verify", help="check a report against predictions")
    verify.add_argument("--report", required=True)
    verify.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, args.log_file)
    try:
        return args.handler(args)
    except (UnsupportedFieldError, UnsupportedCharacteristicError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED_FIELD
    except LedgerInconsistencyError as exc:
        print(f"error: ledger inconsistency: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION_FAILED
    except (CensusError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT


if __name__ == "__main__":
    sys.exit(main())
