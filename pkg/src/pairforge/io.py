"""ClickStream v1 text files and CSV output with an embedded config echo."""
from __future__ import annotations

import csv
import math

import numpy as np

from .errors import ClickFileError
from .spad import ClickStream

CLICK_HEADER = "#pairforge-clicks v1"


def write_clicks(path, streams):
    """Write one or more ClickStreams; records are grouped per detector, time-sorted."""
    if isinstance(streams, ClickStream):
        streams = [streams]
    with open(path, "w") as fh:
        fh.write(CLICK_HEADER + "\n")
        for s in streams:
            order = np.argsort(s.time_ps, kind="stable")
            lines = (f"{s.label}\t{t}\t{g}\n" for t, g in zip(s.time_ps[order], s.gate_index[order]))
            fh.writelines(lines)


def read_clicks(path):
    """Parse a ClickStream v1 file into ``{label: ClickStream}``."""
    times, gates = {}, {}
    with open(path) as fh:
        first = fh.readline().rstrip("\r\n")
        if first != CLICK_HEADER:
            raise ClickFileError(f"first line must be the header {CLICK_HEADER!r}, got {first!r}", line=1)
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ClickFileError("expected 'label<TAB>time_ps<TAB>gate_index'", line=lineno)
            label, t, g = parts
            try:
                t, g = int(t), int(g)
            except ValueError:
                raise ClickFileError("time_ps and gate_index must be integers", line=lineno) from None
            if t < 0:
                raise ClickFileError("time_ps must be >= 0", line=lineno)
            prev = times.setdefault(label, [])
            if prev and t < prev[-1]:
                raise ClickFileError(f"records for detector {label!r} are not sorted by time", line=lineno)
            prev.append(t)
            gates.setdefault(label, []).append(g)
    return {lab: ClickStream(lab, np.array(times[lab], dtype=np.int64), np.array(gates[lab], dtype=np.int64))
            for lab in times}


def _cell(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_csv(path, header, rows, config_text=None):
    """CSV with an optional leading ``#``-comment block echoing the resolved config."""
    with open(path, "w", newline="") as fh:
        if config_text:
            for line in config_text.rstrip("\n").splitlines():
                fh.write(f"# {line}\n" if line else "#\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
