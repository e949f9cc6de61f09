import json
import re
from pathlib import Path

import numpy as np
import pytest

from twostage import corpus
from twostage.corpus import (
    CorpusRecord,
    extract_variables,
    load_manifest,
    read_records_csv,
    records_csv,
    render_svg,
    scatter_svg,
    screen_corpus,
    summarize,
)
from twostage.errors import CorpusLoadError, UsageError


def write_csv(path: Path, header, rows):
    path.write_text(",".join(header) + "\n" + "".join(",".join(map(str, r)) + "\n" for r in rows))


def write_manifest(path: Path, entries, **extra):
    doc = {"entries": entries, **extra}
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def values_csv(tmp_path):
    rng = np.random.default_rng(3)
    vals = rng.gamma(3.0, 2.0, size=40)
    groups = ["a"] * 15 + ["b"] * 25
    write_csv(tmp_path / "d.csv", ["g", "v", "c"], [(g, repr(float(v)), i % 3) for i, (g, v) in enumerate(zip(groups, vals))])
    return tmp_path / "d.csv", vals, groups


def test_empty_manifest(tmp_path):
    m = load_manifest(write_manifest(tmp_path / "m.json", []))
    assert m.entries == ()
    assert extract_variables(m) == []


def test_missing_manifest(tmp_path):
    with pytest.raises(CorpusLoadError, match="not found"):
        load_manifest(tmp_path / "nope.json")


def test_malformed_json(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{oops")
    with pytest.raises(CorpusLoadError, match="not valid JSON"):
        load_manifest(p)


def test_nonexistent_path_is_named(tmp_path):
    p = write_manifest(tmp_path / "m.json", [{"path": "ghost.csv", "value_column": "v"}])
    with pytest.raises(CorpusLoadError, match=r"entry 0.*ghost\.csv"):
        load_manifest(p)


def test_unknown_transform(tmp_path, values_csv):
    p = write_manifest(tmp_path / "m.json", [{"path": "d.csv", "value_column": "v", "transform": "sqrt"}])
    with pytest.raises(CorpusLoadError, match="entry 0.*sqrt"):
        load_manifest(p)


def test_missing_column(tmp_path, values_csv):
    p = write_manifest(tmp_path / "m.json", [{"path": "d.csv", "value_column": "v"},
                                             {"path": "d.csv", "value_column": "zzz"}])
    with pytest.raises(CorpusLoadError, match="entry 1.*zzz"):
        load_manifest(p)


def test_single_variable_and_log_twin(tmp_path, values_csv):
    p = write_manifest(tmp_path / "m.json", [{"path": "d.csv", "value_column": "v", "include_log_twin": True}])
    vars_ = extract_variables(load_manifest(p))
    assert [v.variable_id for v in vars_] == ["d.csv/v/all/none", "d.csv/v/all/log"]
    assert np.allclose(vars_[1].values, np.log(vars_[0].values))


def test_stratification_order(tmp_path, values_csv):
    _, vals, groups = values_csv
    p = write_manifest(tmp_path / "m.json", [{"path": "d.csv", "value_column": "v", "group_columns": ["g"]}])
    vars_ = extract_variables(load_manifest(p))
    assert [v.variable_id for v in vars_] == ["d.csv/v/g=a/none", "d.csv/v/g=b/none"]
    assert [v.n for v in vars_] == [15, 25]


def test_small_count_variable_dropped(tmp_path, values_csv):
    p = write_manifest(tmp_path / "m.json", [{"path": "d.csv", "value_column": "c"}])
    issues = []
    assert extract_variables(load_manifest(p), issues) == []
    assert any("distinct" in msg for msg in issues)


def test_first_difference_length(tmp_path):
    write_csv(tmp_path / "ts.csv", ["v"], [(1,), (4,), (9,), (16,), (25,)])
    p = write_manifest(tmp_path / "m.json", [{"path": "ts.csv", "value_column": "v", "transform": "first_difference"}],
                       min_distinct=1)
    (var,) = extract_variables(load_manifest(p))
    assert list(var.values) == [3, 5, 7, 9]


def test_log_of_non_positive_skips_variable(tmp_path):
    write_csv(tmp_path / "z.csv", ["v"], [(v,) for v in [0.0, 1.5, 2.5, 3.1, 4.2, 5.3, 6.4, 7.2, 8.8, 9.9, 10.5]])
    p = write_manifest(tmp_path / "m.json", [{"path": "z.csv", "value_column": "v", "transform": "log"}])
    issues = []
    assert extract_variables(load_manifest(p), issues) == []
    assert any("non-positive" in msg for msg in issues)


def test_non_numeric_cell_skips_only_that_entry(tmp_path, values_csv):
    write_csv(tmp_path / "bad.csv", ["v"], [("1.0",), ("abc",)])
    p = write_manifest(tmp_path / "m.json", [{"path": "bad.csv", "value_column": "v"},
                                             {"path": "d.csv", "value_column": "v"}])
    issues = []
    vars_ = extract_variables(load_manifest(p), issues)
    assert [v.variable_id for v in vars_] == ["d.csv/v/all/none"]
    assert any("abc" in msg for msg in issues)


def test_missing_values_dropped(tmp_path):
    rows = [(v,) for v in ["NA", 1.1, 2.2, "", 3.3, 4.4, 5.5, 6.6, 7.7, 8.8, 9.9, 10.1, "Inf"]]
    write_csv(tmp_path / "na.csv", ["v"], rows)
    p = write_manifest(tmp_path / "m.json", [{"path": "na.csv", "value_column": "v"}])
    (var,) = extract_variables(load_manifest(p))
    assert var.n == 10


def test_difference_invariant_to_constant_shift(tmp_path):
    rng = np.random.default_rng(4)
    walk = np.cumsum(rng.normal(size=60))
    write_csv(tmp_path / "a.csv", ["v"], [(repr(float(v)),) for v in walk])
    write_csv(tmp_path / "b.csv", ["v"], [(repr(float(v) + 1000.0),) for v in walk])
    recs = []
    for name in ("a.csv", "b.csv"):
        p = write_manifest(tmp_path / f"{name}.json", [{"path": name, "value_column": "v", "transform": "first_difference"}])
        r, _ = screen_corpus(extract_variables(load_manifest(p)))
        recs.append(r[0])
    assert recs[0].n == recs[1].n == 59
    assert recs[0].sw_p == pytest.approx(recs[1].sw_p, abs=1e-9)


def test_screen_empty():
    records, summary = screen_corpus([])
    assert records == []
    assert summary.total_variables == 0
    assert all(v is None for v in summary.reject_proportion_by_bin.values())


def test_screen_skips_out_of_range():
    vars_ = [corpus.Variable("tiny", np.array([1.0, 2.0])), corpus.Variable("ok", np.array([1.0, 2.0, 4.0, 8.0]))]
    records, summary = screen_corpus(vars_)
    assert [r.variable_id for r in records] == ["ok"]
    assert summary.skipped == 1


def test_summary_matches_raw_records():
    rng = np.random.default_rng(9)
    records = [CorpusRecord(f"v{i}", int(n), 0.9, float(p))
               for i, (n, p) in enumerate(zip(rng.integers(3, 1000, 300), rng.uniform(0, 0.2, 300)))]
    s = summarize(records)
    assert sum(s.bin_counts.values()) == s.total_variables == 300
    for b in corpus.DEFAULT_BINS:
        inside = [r for r in records if b.low < r.n <= b.high]
        assert s.bin_counts[b.label] == len(inside)
        assert s.reject_proportion_by_bin[b.label] == sum(r.sw_p < 0.05 for r in inside) / len(inside)
    big = [r for r in records if r.n > 250]
    assert s.count_n_gt_250 == len(big)
    assert s.count_n_gt_250_passing == sum(r.sw_p >= 0.05 for r in big)


def test_synthetic_gamma_corpus_rejection_grows_with_n():
    records, summary = screen_corpus(corpus.synthetic_variables())
    props = summary.reject_proportion_by_bin
    assert props["n>250"] > props["n<=30"]
    assert all(r.sw_p < 0.05 for r in records if r.n == 1000)


def test_records_csv_round_trip():
    recs = [CorpusRecord("a/b/c", 10, 0.91234, 0.1234567890123), CorpusRecord("x,y", 300, 0.5, 1e-12)]
    text = records_csv(recs)
    assert text.splitlines()[0] == "variable_id,n,w,p"
    assert read_records_csv(text) == recs


def test_pipeline_is_byte_reproducible(tmp_path):
    mpath = corpus.write_synthetic_corpus(tmp_path / "syn", sizes=(10, 300), per_size=5)
    outs = []
    for _ in range(2):
        recs, _ = screen_corpus(extract_variables(load_manifest(mpath)))
        outs.append((records_csv(recs), render_svg(recs)))
    assert outs[0] == outs[1]


# ------------------------------------------------------------------------ SVG

def _circles(svg):
    return re.findall(r'<circle class="point" cx="([\d.]+)" cy="([\d.]+)"', svg)


def test_svg_one_record(tmp_path):
    path = tmp_path / "p.svg"
    scatter_svg([CorpusRecord("v", 40, 0.95, 0.3)], path)
    svg = path.read_text()
    assert svg.startswith("<?xml")
    assert len(_circles(svg)) == 1
    assert svg.count('class="ref-line"') == 1
    assert "href" not in svg


def test_svg_point_at_alpha_sits_on_line():
    svg = render_svg([CorpusRecord("v", 40, 0.95, 0.05), CorpusRecord("w", 400, 0.9, 0.5)], alpha=0.05)
    line_y = re.search(r'class="ref-line" x1="[\d.]+" y1="([\d.]+)"', svg).group(1)
    assert _circles(svg)[0][1] == line_y


def test_svg_log_axis_ordering():
    svg = render_svg([CorpusRecord("a", 10, 0.9, 0.5), CorpusRecord("b", 100, 0.9, 0.5),
                      CorpusRecord("c", 1000, 0.9, 0.5)])
    xs = [float(cx) for cx, _ in _circles(svg)]
    assert xs[0] < xs[1] < xs[2]
    assert xs[1] - xs[0] == pytest.approx(xs[2] - xs[1], abs=0.02)


def test_svg_empty_is_usage_error(tmp_path):
    with pytest.raises(UsageError):
        scatter_svg([], tmp_path / "x.svg")


def test_svg_unwritable_path():
    with pytest.raises(OSError):
        scatter_svg([CorpusRecord("v", 40, 0.95, 0.3)], "/nonexistent-dir/x.svg")
