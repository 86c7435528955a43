import numpy as np
import pytest

from pairforge.config import default_cw_config, default_pulsed_config
from pairforge.errors import ClickFileError, ConfigError
from pairforge.experiments import herald_center_offset, run_cw_pair_experiment, run_pulsed_heralded_experiment
from pairforge.io import CLICK_HEADER, read_clicks, write_clicks, write_csv
from pairforge.offline import analyze_offline
from pairforge.spad import ClickStream


def test_three_line_fixture_gives_one_coincidence(tmp_path):
    f = tmp_path / "fixture.clicks"
    f.write_text(f"{CLICK_HEADER}\nsignal\t5120\t0\nidler\t5120\t0\n")
    res = analyze_offline(f, "car")
    assert res.c_raw == 1
    assert res.a_raw == 0 and res.d == 0


def test_bad_header_names_the_rule(tmp_path):
    f = tmp_path / "bad.clicks"
    f.write_text("#pairforge-clicks v2\nsignal\t1\t0\n")
    with pytest.raises(ClickFileError, match="header") as info:
        read_clicks(f)
    assert info.value.line == 1


@pytest.mark.parametrize("body, line", [
    ("signal\t10\t0\nsignal\t5\t1\n", 3),
    ("signal\t10\n", 2),
    ("signal\tten\t0\n", 2),
    ("idler\t1\t0\nsignal\t-4\t0\n", 3),
])
def test_malformed_lines_report_line_number(tmp_path, body, line):
    f = tmp_path / "x.clicks"
    f.write_text(CLICK_HEADER + "\n" + body)
    with pytest.raises(ClickFileError) as info:
        read_clicks(f)
    assert info.value.line == line


def test_write_read_round_trip(tmp_path):
    a = ClickStream("A", [0, 512, 4096], [0, 1, 8])
    b = ClickStream("B", [1024], [2])
    write_clicks(tmp_path / "s.clicks", [a, b])
    back = read_clicks(tmp_path / "s.clicks")
    assert np.array_equal(back["A"].time_ps, a.time_ps)
    assert np.array_equal(back["A"].gate_index, a.gate_index)
    assert np.array_equal(back["B"].time_ps, b.time_ps)


def test_unknown_protocol(tmp_path):
    f = tmp_path / "e.clicks"
    f.write_text(CLICK_HEADER + "\n")
    with pytest.raises(ConfigError):
        analyze_offline(f, "hom")


def test_csv_config_echo(tmp_path):
    write_csv(tmp_path / "o.csv", ["a", "b"], [[1, float("nan")]], "[x]\nk = 1\n\n")
    lines = (tmp_path / "o.csv").read_text().splitlines()
    assert lines == ["# [x]", "# k = 1", "a,b", "1,nan"]


def test_cw_round_trip_bit_identical(tmp_path):
    cfg = default_cw_config(integration_time_s=0.5)
    run = run_cw_pair_experiment(cfg)
    write_clicks(tmp_path / "live.clicks", list(run.streams.values()))
    write_clicks(tmp_path / "dark.clicks", list(run.dark_streams.values()))
    res = analyze_offline(tmp_path / "live.clicks", "car", [tmp_path / "dark.clicks"], integration_time_s=0.5)
    assert res == run.result


def test_pulsed_round_trip_bit_identical(tmp_path):
    cfg = default_pulsed_config(integration_time_s=0.5)
    run = run_pulsed_heralded_experiment(cfg)
    write_clicks(tmp_path / "h.clicks", list(run.streams.values()))
    res = analyze_offline(tmp_path / "h.clicks", "g2", center_offset_ps=herald_center_offset(cfg))
    assert res == run.g2
