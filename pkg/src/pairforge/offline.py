"""Estimators applied to recorded click files instead of a live simulation."""
from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .io import read_clicks
from .spad import ClickStream
from .tcspc import ACCIDENTAL_DELAYS_PS, car_from_streams, g2_estimate


def _merge(files):
    streams = {}
    for f in files:
        for label, s in read_clicks(f).items():
            if label in streams:
                raise ConfigError(f"detector {label!r} appears in more than one file")
            streams[label] = s
    return streams


def _get(streams, label):
    if label in streams:
        return streams[label]
    return ClickStream(label, np.zeros(0, np.int64), np.zeros(0, np.int64))


def analyze_offline(click_files, protocol, dark_files=(), *, bin_width_ps=512, zero_offset_ps=0,
                    integration_time_s=0.0, labels=None, triple_bin_ps=2500, center_offset_ps=0):
    """Run the CAR or g2 estimator on ClickStream v1 files.

    CAR reads ``signal``/``idler`` records from ``click_files`` and, when
    given, the matched dark run from ``dark_files``; without dark files D is
    zero.  g2 reads ``A``/``B``/``C``.  ``labels`` renames those roles.
    A detector with no records counts as an empty stream.
    """
    if isinstance(click_files, (str, bytes)) or hasattr(click_files, "__fspath__"):
        click_files = [click_files]
    live = _merge(click_files)
    if protocol == "car":
        s_lab, i_lab = labels or ("signal", "idler")
        dark = _merge(dark_files) if dark_files else {}
        return car_from_streams(_get(live, s_lab), _get(live, i_lab), _get(dark, s_lab), _get(dark, i_lab),
                                bin_width_ps=bin_width_ps, accidental_delays_ps=ACCIDENTAL_DELAYS_PS,
                                zero_delay_offset_ps=zero_offset_ps, integration_time_s=integration_time_s)
    if protocol == "g2":
        a, b, c = labels or ("A", "B", "C")
        return g2_estimate(_get(live, a), _get(live, b), _get(live, c), triple_bin_ps, center_offset_ps)
    raise ConfigError(f"unknown protocol {protocol!r}; expected 'car' or 'g2'")
