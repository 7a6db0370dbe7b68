import io
import json

import numpy as np
import pytest

from cellscope.cellspace import NB201, serialize_genotype
from cellscope.pipeline import (
    SCHEMA,
    CorpusError,
    RunConfig,
    build_evaluator,
    dump_report,
    load_report,
    parse_surrogate_descriptor,
    read_corpus,
    run_pipeline,
    select,
)
from cellscope.sampler import group_sample
from cellscope.surrogate import SyntheticSurrogate

from conftest import DARTS_V2, NB201_EXAMPLE


@pytest.fixture(scope="module")
def corpus():
    return group_sample("random", 120, "darts", np.random.default_rng(0))


@pytest.fixture(scope="module")
def report(corpus):
    return run_pipeline(RunConfig(top_fraction=0.1, repetitions=3), corpus)


def test_report_shape(report, corpus):
    assert report["schema"] == SCHEMA
    assert report["corpus"]["size"] == 120 and report["corpus"]["selected"] == 12
    assert len(report["oi"]["records"]) == 12 * 16
    assert abs(sum(report["oi"]["important_fractions"].values()) - 1) < 1e-12
    table = report["motifs"]["table"]
    ratios = [row["ratio"] for row in table]
    assert ratios == sorted(ratios, reverse=True)
    assert all(0 < row["support_target"] <= 1 for row in table)
    assert 0 <= report["residual"]["corpus"] <= 1


def test_selection_is_top_by_accuracy(report, corpus):
    ev = SyntheticSurrogate()
    accs = sorted((ev.evaluate(a) for a in corpus), reverse=True)
    assert [row["accuracy"] for row in report["selection"]] == accs[:12]
    assert report["residual"]["selected"] >= report["residual"]["corpus"]


def test_byte_identical_reruns(corpus):
    cfg = RunConfig(top_fraction=0.1, repetitions=3, seed=4)
    assert dump_report(run_pipeline(cfg, corpus)) == dump_report(run_pipeline(cfg, corpus))


def test_seed_only_affects_reference(corpus):
    a = run_pipeline(RunConfig(top_fraction=0.1, repetitions=3, seed=1, motif_limit=10**6), corpus)
    b = run_pipeline(RunConfig(top_fraction=0.1, repetitions=3, seed=2, motif_limit=10**6), corpus)
    assert a["selection"] == b["selection"] and a["oi"] == b["oi"]

    def targets(rep):
        return sorted((r["code"], r["count_target"]) for r in rep["motifs"]["table"])

    assert a["motifs"]["frequent"] == b["motifs"]["frequent"]
    assert targets(a) == targets(b)


def test_workers_do_not_change_report(corpus):
    a = run_pipeline(RunConfig(top_fraction=0.1, repetitions=2), corpus)
    b = run_pipeline(RunConfig(top_fraction=0.1, repetitions=2, workers=3), corpus)
    del a["config"], b["config"]
    assert a == b


def test_single_architecture_corpus(darts_v2):
    rep = run_pipeline(RunConfig(repetitions=2), [darts_v2])
    assert rep["corpus"]["selected"] == 1
    assert all(row["support_target"] == 1.0 for row in rep["motifs"]["table"])
    assert all(row["support_ref"] in (0.0, 0.5, 1.0) for row in rep["motifs"]["table"])
    load_report(dump_report(rep))


def test_full_fraction_selects_everything(corpus):
    small = corpus[:15]
    rep = run_pipeline(RunConfig(top_fraction=1.0, repetitions=1), small)
    assert sorted(row["id"] for row in rep["selection"]) == list(range(15))


def test_bottom_tail(corpus):
    rep = run_pipeline(RunConfig(top_fraction=0.1, tail="bottom", repetitions=1), corpus)
    ev = SyntheticSurrogate()
    accs = sorted(ev.evaluate(a) for a in corpus)
    assert [row["accuracy"] for row in rep["selection"]] == accs[:12]


def test_supplied_accuracies_override_surrogate(corpus):
    items = [(a, i / 100) for i, a in enumerate(corpus[:20])]
    rep = run_pipeline(RunConfig(top_fraction=0.1, repetitions=1), items)
    assert [row["id"] for row in rep["selection"]] == [19, 18]


def test_genotype_strings_accepted(darts_v2):
    rep = run_pipeline(RunConfig(repetitions=1), [DARTS_V2])
    assert rep["selection"][0]["genotype"] == serialize_genotype(darts_v2)


def test_nb201_pipeline():
    archs = group_sample("random", 60, NB201, np.random.default_rng(0))
    rep = run_pipeline(RunConfig(space="nb201", top_fraction=0.2, repetitions=2), archs)
    assert rep["motifs"]["cell"] == "normal"
    assert len(rep["oi"]["records"]) == 12 * 6


def test_errors(darts_v2):
    with pytest.raises(CorpusError):
        run_pipeline(RunConfig(), [])
    with pytest.raises(CorpusError):
        run_pipeline(RunConfig(space="nb201"), [darts_v2])
    with pytest.raises(CorpusError):
        run_pipeline(RunConfig(), [NB201_EXAMPLE])


def test_select_rounding():
    entries = [(None, a) for a in (0.5, 0.9, 0.9, 0.1)]
    assert select(entries, 0.5) == [1, 2]
    assert select(entries, 0.01) == [1]
    assert select(entries, 1.0, "bottom") == [3, 0, 1, 2]
    assert len(select([(None, 0.0)] * 2589 * 20, 0.05)) == 2589


# ------------------------------------------------------------------ config & io


def test_run_config_validation():
    for bad in (dict(top_fraction=0), dict(tail="middle"), dict(space="nasbench101"), dict(workers=0),
                dict(min_support=0), dict(surrogate="oracle"), dict(output_format="xml")):
        with pytest.raises(ValueError):
            RunConfig(**bad)


def test_surrogate_descriptors(tmp_path):
    assert parse_surrogate_descriptor("synthetic") == ("synthetic", None)
    assert parse_surrogate_descriptor("tabular:t.csv") == ("tabular", "t.csv")
    assert parse_surrogate_descriptor("http:localhost:8000") == ("http", "http://localhost:8000")
    assert parse_surrogate_descriptor("http://svc:1") == ("http", "http://svc:1")
    with pytest.raises(CorpusError, match="missing.csv"):
        build_evaluator(f"tabular:{tmp_path / 'missing.csv'}")


def test_read_corpus_formats(tmp_path, darts_v2):
    csv_text = f'genotype,accuracy\n"{DARTS_V2}",0.97\n"{DARTS_V2}",\n'
    rows = read_corpus(io.StringIO(csv_text))
    assert rows == [(darts_v2, 0.97), (darts_v2, None)]
    p = tmp_path / "lines.txt"
    p.write_text(DARTS_V2 + "\n\n" + DARTS_V2 + "\n")
    assert read_corpus(p) == [(darts_v2, None), (darts_v2, None)]


def test_read_corpus_errors():
    with pytest.raises(CorpusError, match="empty"):
        read_corpus(io.StringIO("\n\n"))
    with pytest.raises(CorpusError, match="line 3"):
        read_corpus(io.StringIO(f'genotype,accuracy\n"{DARTS_V2}",0.9\n"Genotype(",0.8\n'))
    with pytest.raises(CorpusError, match="line 2"):
        read_corpus(io.StringIO(f'genotype,accuracy\n"{DARTS_V2}",high\n'))
    with pytest.raises(CorpusError, match="line 1"):
        read_corpus(io.StringIO("genotype,score\n"))
    with pytest.raises(CorpusError, match="line 1"):
        read_corpus(io.StringIO(DARTS_V2 + "\n"), "nb201")


def test_report_round_trip(report):
    assert load_report(dump_report(report)) == json.loads(dump_report(report))


def test_load_report_rejects_unknown_fields(report):
    data = json.loads(dump_report(report))
    data["extra"] = 1
    with pytest.raises(ValueError, match="unknown"):
        load_report(json.dumps(data))
    data = json.loads(dump_report(report))
    data["motifs"]["table"][0]["p_value"] = 0.1
    with pytest.raises(ValueError, match="unknown"):
        load_report(json.dumps(data))
    data = json.loads(dump_report(report))
    data["config"]["gpu"] = True
    with pytest.raises(Exception):
        load_report(json.dumps(data))


def test_load_report_rejects_other_schema(report):
    data = json.loads(dump_report(report))
    data["schema"] = "cellscope.report/2"
    with pytest.raises(ValueError, match="schema"):
        load_report(json.dumps(data))
