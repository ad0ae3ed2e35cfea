"""Command-line driver: ``pmlc run``, ``pmlc sweep``, ``pmlc verify-privacy``.

Exit codes: 0 ok, 1 verification failure, 2 invalid input, 3 resource budget.

A params file holds ``key = value`` lines (``#`` starts a comment). Keys are
the ten parameters ``N T S M P L q K E R`` plus ``seed``, ``rounds``,
``unresponsive``, ``grid``, ``coalitions`` and ``budget``. Command-line
flags override the file, which overrides the preset.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from pmlc.metrics import reconcile, reports_to_csv, reports_to_json
from pmlc.privacy import (
    BudgetExceeded,
    PrivacyReport,
    UnderMaskedScheme,
    sampled_view_distance,
    verify_t_privacy,
)
from pmlc.protocol import Params, ProtocolError, validate
from pmlc.simulator import RoundConfig, run_round, sweep

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

PARAM_KEYS = ("N", "T", "S", "M", "P", "L", "q", "K", "E", "R")

PRESETS = {
    "paper-example": dict(N=6, T=1, S=1, M=3, P=3, L=4, q=11, K=3, E=2, R=1),
    "plc": dict(N=6, T=1, S=1, M=3, P=1, L=16, K=4, E=4, R=0),
    "tiny-privacy": dict(N=4, T=1, S=0, M=4, P=1, L=2, q=7, K=1, E=1, R=0),
}


class UsageError(Exception):
    pass


def read_config(path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def resolve_settings(args) -> dict[str, str]:
    settings: dict[str, str] = {}
    if args.preset:
        settings.update({k: str(v) for k, v in PRESETS[args.preset].items()})
    if args.params:
        try:
            settings.update(read_config(args.params))
        except OSError as exc:
            raise UsageError(f"cannot read params file: {exc}") from exc
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        settings[key.strip()] = value.strip()
    for key in ("seed", "rounds", "unresponsive", "grid", "coalitions", "budget"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = str(value)
    return settings


def params_from(settings: dict[str, str], *, need_hyper: bool = True) -> Params:
    try:
        values = {k: int(settings[k]) for k in PARAM_KEYS if k in settings}
    except ValueError as exc:
        raise UsageError(f"non-integer parameter: {exc}") from exc
    missing = [k for k in ("N", "T", "S", "M", "P", "L") if k not in values]
    if missing:
        raise UsageError(f"missing parameters {missing}")
    if not need_hyper:
        values.setdefault("K", 1)
    return Params(**values)


def parse_unresponsive(spec: str | None, seed: int) -> RoundConfig:
    if spec is None or spec == "none":
        return RoundConfig.fixed(())
    if spec == "random":
        return RoundConfig.random(seed)
    if spec.startswith("fixed:"):
        ids = [s for s in spec[len("fixed:"):].split(",") if s]
        try:
            return RoundConfig.fixed(int(s) for s in ids)
        except ValueError as exc:
            raise UsageError(f"bad server id in {spec!r}") from exc
    raise UsageError(f"--unresponsive must be none, fixed:<ids> or random, got {spec!r}")


def _range(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split("|")]


def parse_grid(spec: str | None, base: Params, auto_e: bool) -> list[tuple[int, int | None, int]]:
    """Grid points as (K, E, R); E is None when it should be advised.

    Either explicit points ``"K,E,R;K,E,R"`` (E may be ``auto``) or ranges
    ``"K=1:4,R=0:2,E=1:3"`` (inclusive; omitted K and R span the feasible
    range, omitted E means auto).
    """
    budget = base.N - base.S - base.T
    try:
        if spec and "=" not in spec:
            points = []
            for chunk in filter(None, (c.strip() for c in spec.split(";"))):
                K, E, R = (v.strip() for v in chunk.split(","))
                points.append((int(K), None if auto_e or E == "auto" else int(E), int(R)))
            return points
        ranges = {}
        for part in filter(None, (p.strip() for p in (spec or "").split(","))):
            key, value = part.split("=", 1)
            ranges[key.strip()] = _range(value.strip())
    except ValueError as exc:
        raise UsageError(f"cannot parse grid {spec!r}") from exc
    Ks = ranges.get("K", list(range(1, max(budget, 0) + 1)))
    Rs = ranges.get("R", list(range(0, max(budget, 0) + 1)))
    Es = [None] if auto_e or "E" not in ranges else ranges["E"]
    return [(K, E, R) for K in Ks for E in Es for R in Rs]


def random_instance(params: Params, seed: int):
    rng = np.random.default_rng([seed, 0xC0FFEE])
    C = rng.integers(0, params.q, size=(params.P, params.M))
    files = rng.integers(0, params.q, size=(params.M, params.L))
    return C, files


def format_reports(reports, fmt: str) -> str:
    if fmt == "csv":
        return reports_to_csv(reports)
    if fmt == "json":
        return reports_to_json(reports)
    columns = ("K", "E", "R", "decode_ok", "upload_symbols", "theoretical_upload",
               "download_symbols", "theoretical_download", "answer_mul_count", "decode_mul_count")
    rows = [[str(r.row()[c]) for c in columns] for r in reports]
    widths = [max(len(c), *(len(row[i]) for row in rows)) if rows else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in rows]
    return "\n".join(lines) + "\n"


def emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    settings = resolve_settings(args)
    params = params_from(settings)
    violations = validate(params)
    if violations:
        for v in violations:
            print(f"invalid params: {v}", file=sys.stderr)
        return EXIT_INPUT
    seed = int(settings.get("seed", 0))
    rounds = int(settings.get("rounds", 1))
    config = parse_unresponsive(settings.get("unresponsive"), seed)
    try:
        config.validate(params)
    except ValueError as exc:
        print(f"invalid round config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    C, files = random_instance(params, seed)
    reports = []
    status = EXIT_OK
    for r in range(rounds):
        try:
            _, transcript = run_round(params, C, files, config, seed=seed, round_index=r)
        except ProtocolError as exc:
            print(f"round {r}: decode FAILED ({exc})", file=sys.stderr)
            status = EXIT_FAIL
            continue
        report = transcript.cost_report()
        problems = reconcile(report)
        verdict = "ok" if transcript.decode_ok and not problems else "MISMATCH"
        silent = ",".join(map(str, sorted(transcript.unresponsive))) or "-"
        print(f"round {r}: unresponsive={silent} decode {verdict}", file=sys.stderr)
        for p in problems:
            print(f"  {p}", file=sys.stderr)
        if problems:
            status = EXIT_FAIL
        reports.append(report)
    try:
        emit(format_reports(reports, args.format), args.out)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return status


def cmd_sweep(args) -> int:
    settings = resolve_settings(args)
    base = params_from(settings, need_hyper=False)
    seed = int(settings.get("seed", 0))
    grid = parse_grid(settings.get("grid"), base, args.auto_e)
    reports = sweep(base, grid, seed=seed, round_config=parse_unresponsive(settings.get("unresponsive", "random"), seed))
    valid = [r for r in reports if r.status == "ok"]
    for r in reports:
        if r.status != "ok":
            p = r.params
            print(f"skipped K={p.K} E={p.E} R={p.R}: {'; '.join(r.violations)}", file=sys.stderr)
    if not valid:
        print("no valid grid points", file=sys.stderr)
        return EXIT_INPUT
    status = EXIT_OK
    for r in valid:
        if reconcile(r) or not r.decode_ok:
            status = EXIT_FAIL
    try:
        emit(format_reports(valid, args.format), args.out)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return status


def parse_coalitions(spec: str | None, params: Params) -> list[list[int]]:
    if spec is None or spec == "all":
        return [
            list(c)
            for size in range(1, params.T + 1)
            for c in itertools.combinations(range(params.N), size)
        ]
    try:
        return [[int(v) for v in chunk.split(",") if v.strip()] for chunk in spec.split(";")]
    except ValueError as exc:
        raise UsageError(f"cannot parse coalitions {spec!r}") from exc


def cmd_verify_privacy(args) -> int:
    settings = resolve_settings(args)
    params = params_from(settings)
    violations = validate(params)
    if violations:
        for v in violations:
            print(f"invalid params: {v}", file=sys.stderr)
        return EXIT_INPUT
    seed = int(settings.get("seed", 0))
    budget = int(settings.get("budget", 10**6))
    coalitions = parse_coalitions(settings.get("coalitions"), params)
    if any(len(c) > params.T for c in coalitions):
        print(f"coalitions larger than T={params.T} are not covered", file=sys.stderr)
        return EXIT_INPUT
    scheme = UnderMaskedScheme() if args.negative_control else None
    rng = np.random.default_rng([seed, 0xBEEF])
    pairs = [(np.zeros((params.P, params.M), dtype=np.int64), rng.integers(0, params.q, (params.P, params.M)))]
    while len(pairs) < args.pairs:
        pairs.append((rng.integers(0, params.q, (params.P, params.M)), rng.integers(0, params.q, (params.P, params.M))))

    if args.samples:
        results = []
        for C1, C2 in pairs:
            for c in coalitions:
                d = sampled_view_distance(params, C1, C2, c, args.samples, seed=seed, scheme=scheme)
                results.append({
                    "coalition": c,
                    "estimate": round(d.estimate, 6),
                    "bound": round(d.bound, 6),
                    "samples": d.samples,
                    "consistent_with_zero": d.consistent_with_zero,
                })
        emit(json.dumps(results, indent=2) + "\n", args.out)
        return EXIT_OK if all(r["consistent_with_zero"] for r in results) else EXIT_FAIL

    combined = PrivacyReport(True, coalitions)
    try:
        for C1, C2 in pairs:
            report = verify_t_privacy(params, C1, C2, coalitions, budget=budget, scheme=scheme)
            combined.leaks.extend(report.leaks)
    except BudgetExceeded as exc:
        print(f"budget exceeded: need {exc.required} noise tensors, budget {exc.budget}", file=sys.stderr)
        return EXIT_BUDGET
    combined.ok = not combined.leaks
    emit(combined.to_json(), args.out)
    print("privacy " + ("ok" if combined.ok else "LEAK detected"), file=sys.stderr)
    return EXIT_OK if combined.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmlc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--preset", choices=sorted(PRESETS))
        p.add_argument("--params", help="key = value params file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one setting")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("csv", "json", "table"), default="table")

    run = sub.add_parser("run", help="run protocol rounds and report costs")
    common(run)
    run.add_argument("--rounds", type=int)
    run.add_argument("--unresponsive", help="none | fixed:<ids> | random")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="one round per (K, E, R) grid point")
    common(sw)
    sw.add_argument("--grid", help='"K=1:4,R=0:2,E=1:3" or "K,E,R;K,E,R"')
    sw.add_argument("--auto-e", action="store_true", help="E = K / gcd(K, P) at every point")
    sw.add_argument("--unresponsive", help="none | fixed:<ids> | random (default random)")
    sw.set_defaults(func=cmd_sweep)

    vp = sub.add_parser("verify-privacy", help="check T-privacy by enumeration or sampling")
    common(vp)
    vp.add_argument("--coalitions", help='"all" or "0;1;0,2"')
    vp.add_argument("--budget", type=int, help="max noise tensors to enumerate")
    vp.add_argument("--pairs", type=int, default=5, help="coefficient-matrix pairs to compare")
    vp.add_argument("--samples", type=int, help="Monte-Carlo mode with this many samples per side")
    vp.add_argument("--negative-control", action="store_true", help="use an under-masked scheme that must leak")
    vp.set_defaults(func=cmd_verify_privacy, format="json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
