"""CSV and JSON rendering for datasets, traces and error reports.

Floats are written with ``repr`` so every file round-trips exactly and two
runs with identical inputs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

from .genetic import GATrace
from .network import Dataset, TrainTrace
from .pipeline import ErrorReport

__all__ = [
    "dataset_csv",
    "train_trace_csv",
    "ga_trace_csv",
    "report_csv",
    "report_dict",
    "dumps_json",
    "atomic_write",
]


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return repr(float(x))


def dataset_csv(data: Dataset) -> str:
    header = ["idx", *data.input_names, *data.target_names]
    rows = ([i, *map(_num, x), *map(_num, t)] for i, (x, t) in enumerate(zip(data.X, data.T)))
    return _csv(header, rows)


def train_trace_csv(trace: TrainTrace) -> str:
    return _csv(["epoch", "mse"], ([i, _num(v)] for i, v in enumerate(trace.mse, start=1)))


def ga_trace_csv(trace: GATrace) -> str:
    rows = ([g, _num(b), _num(m)] for g, (b, m) in enumerate(zip(trace.best, trace.mean)))
    return _csv(["generation", "best", "mean"], rows)


def _output_columns(report: ErrorReport) -> list[str]:
    if len(report.output_names) == 1:
        return ["target", "nf_out", "gnf_out"]
    cols = []
    for name in report.output_names:
        cols += [f"target_{name}", f"nf_out_{name}", f"gnf_out_{name}"]
    return cols


def report_csv(report: ErrorReport) -> str:
    header = ["idx", *report.input_names, *_output_columns(report), "error1", "error2"]
    e1, e2 = report.error1, report.error2
    rows = []
    for i in range(len(report)):
        outs = []
        for k in range(len(report.output_names)):
            outs += [_num(report.target[i, k]), _num(report.nf_out[i, k]), _num(report.gnf_out[i, k])]
        rows.append([i, *map(_num, report.X[i]), *outs, _num(e1[i]), _num(e2[i])])
    return _csv(header, rows)


def report_dict(report: ErrorReport, **extra) -> dict:
    e1, e2 = report.error1, report.error2
    records = []
    for i in range(len(report)):
        records.append(
            {
                "idx": i,
                "inputs": dict(zip(report.input_names, report.X[i].tolist())),
                "target": report.target[i].tolist(),
                "nf_out": report.nf_out[i].tolist(),
                "gnf_out": report.gnf_out[i].tolist(),
                "error1": float(e1[i]),
                "error2": float(e2[i]),
            }
        )
    return {**extra, "aggregates": report.aggregates(), "records": records}


def dumps_json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
