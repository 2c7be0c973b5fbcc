"""Serialization of cycrir results to JSON and CSV, with schema validation."""

import csv
import io
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

from jsonschema import Draft202012Validator

from config_reader import AnalysisSettings
from cyclicnet import CyclicNetwork
from errors import CycrirError
from rirbounds import PerturbationVerdict, RirReport

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).with_name("rir_report.schema.json")
REPORT_KEYS = (
    "n", "mu", "h", "nominal", "rho_p", "rho_plus", "unstable_indices", "marginal_indices",
    "closed_form_first_order", "norm_based_first_order", "agree", "rho_upper_homogeneous",
    "rho_c_estimate", "consistency_flags", "tolerances", "runtime_ms",
)


def format_cell(value: Any) -> str:
    """CSV text for one value: 17 significant digits, empty for None, lower-case booleans."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, complex):
        return f"{value.real:.17g}{value.imag:+.17g}i"
    if isinstance(value, (list, tuple)):
        return ";".join(format_cell(v) for v in value)
    return str(value)


def _real_coeffs(poly) -> List[float]:
    return [float(c.real) for c in poly.coeffs]


def _complex_obj(z: complex) -> Dict[str, float]:
    return {"re": float(z.real), "im": float(z.imag)}


def report_to_dict(net: CyclicNetwork, report: RirReport, settings: AnalysisSettings,
                   runtime_ms: float) -> Dict[str, Any]:
    """The JSON form of a report; its key set is exactly REPORT_KEYS."""
    payload = {
        "n": net.n,
        "mu": net.mu,
        "h": {"num": _real_coeffs(net.h.num), "den": _real_coeffs(net.h.den)},
        "nominal": {
            "classification": report.nominal.classification.value,
            "roots": [_complex_obj(r) for r in report.nominal.roots],
            "margin": report.nominal.stability_margin,
        },
        "rho_p": report.rho_p,
        "rho_plus": report.rho_plus,
        "unstable_indices": list(report.unstable_indices),
        "marginal_indices": list(report.marginal_indices),
        "closed_form_first_order": report.closed_form_first_order,
        "norm_based_first_order": report.norm_based_first_order,
        "agree": report.agree,
        "rho_upper_homogeneous": report.rho_upper_homogeneous,
        "rho_c_estimate": report.rho_c_estimate,
        "consistency_flags": list(report.consistency_flags),
        "tolerances": {
            "tol_axis": settings.tol_axis,
            "margin_req": settings.margin_req,
            "rho_bisect_tol": settings.rho_bisect_tol,
        },
        "runtime_ms": float(runtime_ms),
    }
    return payload


def verdict_to_dict(verdict: PerturbationVerdict) -> Dict[str, Any]:
    return {
        "stabilizes": verdict.stabilizes,
        "max_root_real_part": verdict.max_root_real_part,
        "norms": list(verdict.norms),
        "max_norm": verdict.max_norm,
    }


def homogenize_to_dict(delta: complex, product_residual: float) -> Dict[str, Any]:
    return {"delta": _complex_obj(delta), "abs": abs(delta), "product_residual": float(product_residual)}


class ReportWriter:
    """Validate payloads against the shipped schema and write them as JSON or CSV.

    Args:
        out: destination file; None writes to standard output
    """

    def __init__(self, out: Optional[Union[str, Path]] = None):
        self.out = Path(out) if out is not None else None
        with open(SCHEMA_PATH, "r", encoding="utf-8") as file:
            self.schema = json.load(file)

    def validate(self, payload: Mapping[str, Any], kind: str = "rir") -> None:
        """Check payload against the report schema or one of its ``$defs``.

        Raises:
            CycrirError: payload does not match the schema
        """
        if kind == "rir":
            schema = self.schema
        else:
            schema = {"$defs": self.schema["$defs"], "$ref": f"#/$defs/{kind}"}
        errors = sorted(Draft202012Validator(schema).iter_errors(payload), key=lambda e: list(e.path))
        if errors:
            where = "/".join(str(p) for p in errors[0].path) or "<root>"
            raise CycrirError(f"{kind} output failed schema validation at {where}: {errors[0].message}")

    def write_json(self, payload: Any, kind: Optional[str] = None) -> None:
        if kind is not None:
            self.validate(payload, kind)
        text = json.dumps(payload, indent=2, allow_nan=False)
        self._emit(text + "\n")

    def write_csv(self, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> None:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(row.get(column)) for column in columns])
        self._emit(buffer.getvalue())

    def write_flat_csv(self, payload: Mapping[str, Any]) -> None:
        """One-row CSV of a nested payload with dotted column names."""
        flat = flatten_payload(payload)
        self.write_csv(list(flat), [flat])

    def _emit(self, text: str) -> None:
        if self.out is None:
            sys.stdout.write(text)
            return
        self.out.parent.mkdir(parents=True, exist_ok=True)
        with open(self.out, "w", encoding="utf-8", newline="") as file:
            file.write(text)
        logger.info("wrote %s", self.out)


def flatten_payload(data: Mapping[str, Any], parent_key: str = "", separator: str = ".") -> Dict[str, Any]:
    """Flatten nested mappings to dotted keys; lists of {re, im} objects become one cell."""
    items: List = []
    for key, value in data.items():
        new_key = f"{parent_key}{separator}{key}" if parent_key else key
        if isinstance(value, Mapping):
            items.extend(flatten_payload(value, new_key, separator).items())
        elif isinstance(value, list) and value and isinstance(value[0], Mapping):
            items.append((new_key, [format_cell(complex(v["re"], v["im"])) for v in value]))
        else:
            items.append((new_key, value))
    return dict(items)


def write_csv_file(path: Path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Plain CSV file from positional rows (Nyquist data)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    logger.info("wrote %s", path)
