"""Communication costs and operation counts: closed forms vs. measurements."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from math import log2

from pmlc.protocol import InvalidParams, Params, validate

__all__ = [
    "CostReport",
    "CSV_COLUMNS",
    "theoretical_upload",
    "theoretical_download",
    "answer_multiplies",
    "complexity_orders",
    "reconcile",
    "reports_to_csv",
    "reports_to_json",
]

PARAM_NAMES = ("N", "T", "S", "M", "P", "L", "q", "K", "E", "R")

CSV_COLUMNS = PARAM_NAMES + (
    "status",
    "decode_ok",
    "upload_symbols",
    "theoretical_upload",
    "download_symbols",
    "theoretical_download",
    "upload_bytes",
    "download_bytes",
    "query_mul_count",
    "answer_mul_count",
    "theoretical_answer_mul",
    "decode_mul_count",
)


def _checked(params: Params) -> Params:
    violations = validate(params)
    if violations:
        raise InvalidParams(violations)
    return params


def theoretical_upload(params: Params) -> int:
    """Total query symbols over all N servers: (N - R) E^2 M P / K."""
    p = _checked(params)
    num = (p.N - p.R) * p.E**2 * p.M * p.P
    assert num % p.K == 0
    return num // p.K


def theoretical_download(params: Params) -> int:
    """Answer symbols from the N - S servers used for decoding: (N - S) P L / K."""
    p = _checked(params)
    num = (p.N - p.S) * p.P * p.L
    assert num % p.K == 0
    return num // p.K


def answer_multiplies(params: Params) -> int:
    """Exact field multiplications one server spends on its answer.

    ((N - R) ME / N) outer products of a length-PE/K column with a
    length-L/E row.
    """
    p = _checked(params)
    return (p.N - p.R) * p.per_server * p.width * p.piece_length


def complexity_orders(params: Params) -> dict[str, float]:
    """Asymptotic operation-count orders without constants (informational only).

    The query and decoding terms assume quasi-linear multipoint evaluation
    and interpolation, which this package does not implement.
    """
    p = _checked(params)

    def fast(n):
        n = max(n, 3)
        return n * log2(n) ** 2 * log2(log2(n))

    return {
        "query": p.E**2 * p.M * p.P * fast(p.N - p.R) / p.K,
        "server": p.E * (p.N - p.R) * p.M * p.P * p.L / (p.N * p.K),
        "decode": p.P * p.L * fast(p.N - p.S) / p.K,
    }


@dataclass
class CostReport:
    """Measured costs of one round next to the closed-form values.

    ``answer_mul_count`` is the maximum over responding servers.
    """

    params: Params
    upload_symbols: int = 0
    download_symbols: int = 0
    upload_bytes: int = 0
    download_bytes: int = 0
    query_mul_count: int = 0
    answer_mul_count: int = 0
    decode_mul_count: int = 0
    decode_ok: bool | None = None
    status: str = "ok"
    violations: list[str] = field(default_factory=list)

    @property
    def theoretical(self) -> dict[str, int] | None:
        if self.violations or validate(self.params):
            return None
        return {
            "upload": theoretical_upload(self.params),
            "download": theoretical_download(self.params),
            "answer_mul": answer_multiplies(self.params),
        }

    def row(self) -> dict:
        theo = self.theoretical or {}
        row = {name: getattr(self.params, name) for name in PARAM_NAMES}
        row.update(
            status=self.status,
            decode_ok="" if self.decode_ok is None else int(self.decode_ok),
            upload_symbols=self.upload_symbols,
            theoretical_upload=theo.get("upload", ""),
            download_symbols=self.download_symbols,
            theoretical_download=theo.get("download", ""),
            upload_bytes=self.upload_bytes,
            download_bytes=self.download_bytes,
            query_mul_count=self.query_mul_count,
            answer_mul_count=self.answer_mul_count,
            theoretical_answer_mul=theo.get("answer_mul", ""),
            decode_mul_count=self.decode_mul_count,
        )
        return row

    def to_dict(self) -> dict:
        out = asdict(self)
        out["params"] = self.params.as_dict()
        out["theoretical"] = self.theoretical
        return out


def reconcile(report: CostReport) -> list[str]:
    """Differences between measured and closed-form counts; empty when exact."""
    theo = report.theoretical
    if theo is None:
        return [f"invalid params: {'; '.join(validate(report.params) or report.violations)}"]
    out = []
    if report.upload_symbols != theo["upload"]:
        out.append(f"upload: measured {report.upload_symbols} != theoretical {theo['upload']}")
    if report.download_symbols != theo["download"]:
        out.append(f"download: measured {report.download_symbols} != theoretical {theo['download']}")
    if report.answer_mul_count != theo["answer_mul"]:
        out.append(
            f"answer multiplies: measured {report.answer_mul_count} != theoretical {theo['answer_mul']}"
        )
    return out


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        writer.writerow(report.row())
    return buf.getvalue()


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"
