"""
Output layer: CSV tables, PASS/FAIL reports and JSON summaries.

Every float is written with 17 significant digits and rows are emitted in a
caller-defined sorted order, so identical inputs give byte-identical files.
"""
import csv
import io
import json
import logging
import math
import os
import sys

from core import Parity

logger = logging.getLogger(__name__)

BRANCH_COLUMNS = ["parity", "m", "n", "h", "re_z", "im_z", "re_zeta", "im_zeta",
                  "asymptotic_im_zeta", "scaling_diagnostic", "residual"]
EIGEN_COLUMNS = ["n", "re_z", "im_z", "residual", "newton_iters"]
QUASIMODE_COLUMNS = ["n", "ratio", "lower_bound_C"]
RESOLVENT_COLUMNS = ["s", "norm", "argmax_n", "grid_N"]
TRACE_COLUMNS = ["t", "E", "cumulative_damping"]


def fmt(value):
    """Locale-free text for one cell"""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, Parity):
        return value.value
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    try:
        return format(float(value), ".17g")
    except (TypeError, ValueError):
        return str(value)


class ResultsManager:
    """Static helpers that turn module results into files"""

    @staticmethod
    def render_csv(header, rows):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
        return buf.getvalue()

    @staticmethod
    def write_text(path, text):
        """Write text to path, or to stdout when path is None or '-'"""
        if path in (None, "-"):
            sys.stdout.write(text)
            return True
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        with open(path, "w", newline="\n", encoding="utf-8") as f:
            f.write(text)
        logger.info("wrote %s", path)
        return True

    @staticmethod
    def write_csv(path, header, rows):
        return ResultsManager.write_text(path, ResultsManager.render_csv(header, rows))

    @staticmethod
    def branch_rows(roots, asymptotic):
        """Rows in BRANCH_COLUMNS order; asymptotic maps a root to its Im zeta prediction"""
        rows = []
        for r in roots:
            rows.append([r.parity, r.m, float(r.n), r.h, r.z.real, r.z.imag, r.zeta_t.real,
                         r.zeta_t.imag, asymptotic(r), r.scaling_diagnostic, r.residual])
        rows.sort(key=lambda row: (row[0].value, row[1], -row[3]))
        return rows

    @staticmethod
    def eigen_rows(solutions):
        rows = [[float(s.n.n), s.z.real, s.z.imag, s.residual, s.newton_iters] for s in solutions]
        rows.sort(key=lambda row: (row[2], row[1], row[0]))
        return rows

    @staticmethod
    def mode_dump(x, v):
        """Three columns x, re_v, im_v for a reconstructed mode"""
        return ResultsManager.render_csv(["x", "re_v", "im_v"],
                                         ([float(a), float(c.real), float(c.imag)] for a, c in zip(x, v)))

    @staticmethod
    def trace_rows(trace, per_mode=False):
        header = list(TRACE_COLUMNS)
        modes = sorted(trace.mode_energies) if per_mode else []
        header += [f"E_n{n}" for n in modes]
        rows = []
        for i, (t, E, D) in enumerate(zip(trace.times, trace.energies, trace.damping_integrals)):
            rows.append([t, E, D] + [trace.mode_energies[n][i] for n in modes])
        return header, rows

    @staticmethod
    def render_report(title, checks):
        """PASS/FAIL text; checks are (name, passed, detail) triples, passed=None is INFO"""
        lines = [f"# {title}"]
        for name, passed, detail in checks:
            status = "INFO" if passed is None else ("PASS" if passed else "FAIL")
            lines.append(f"{status} {name}: {detail}")
        graded = [passed for _, passed, _ in checks if passed is not None]
        lines.append(f"# {sum(graded)}/{len(graded)} passed")
        return "\n".join(lines) + "\n"

    @staticmethod
    def export_to_json(export_path, data):
        """Write a summary dictionary as JSON"""
        try:
            text = json.dumps(data, indent=4, sort_keys=True, default=fmt) + "\n"
            return ResultsManager.write_text(export_path, text)
        except (OSError, TypeError) as e:
            logger.error("export error for %s: %s", export_path, e)
            return False
