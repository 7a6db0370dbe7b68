import json
import subprocess
import sys

import numpy as np
import pytest

from cellscope.cellspace import DARTS, parse_genotype, serialize_genotype
from cellscope.cli import main
from cellscope.costmodel import PRESETS, count_params
from cellscope.pipeline import load_report
from cellscope.sampler import group_sample

from conftest import DARTS_V2


def run(capsys, *argv, environ=None):
    code = main(list(argv), environ or {})
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def corpus_file(tmp_path):
    archs = group_sample("random", 60, DARTS, np.random.default_rng(0))
    p = tmp_path / "corpus.txt"
    p.write_text("".join(serialize_genotype(a) + "\n" for a in archs))
    return str(p)


def test_space_stats(capsys):
    code, out, _ = run(capsys, "space", "stats", "--space", "darts")
    data = json.loads(out)
    assert code == 0
    assert data["cells"] == 1_037_664_180
    assert data["architectures_approx"] == "1.08e+18"
    assert data["group_cells"]["primskip"] == 11_520
    _, out, _ = run(capsys, "space", "stats", "--space", "nb201")
    assert json.loads(out)["cells"] == 15_625


def test_sample_deterministic(capsys):
    a = run(capsys, "sample", "--group", "primskip", "-n", "3", "--seed", "7")
    b = run(capsys, "sample", "--group", "primskip", "-n", "3", "--seed", "7")
    assert a == b and a[0] == 0
    lines = a[1].splitlines()
    assert len(lines) == 3
    for line in lines:
        parse_genotype(line)
    _, out, _ = run(capsys, "sample", "--group", "skip", "-n", "2", "--format", "json")
    assert all(all(r["attestation"].values()) for r in json.loads(out))


def test_env_override(capsys):
    a = run(capsys, "sample", "-n", "2", "--seed", "11")[1]
    b = run(capsys, "sample", "-n", "2", environ={"CELLSCOPE_SEED": "11"})[1]
    assert a == b
    # explicit flags win over the environment
    c = run(capsys, "sample", "-n", "2", "--seed", "11", environ={"CELLSCOPE_SEED": "3"})[1]
    assert c == a
    d = run(capsys, "sample", "-n", "3", environ={"CELLSCOPE_POOL_ALLOWED": "1", "CELLSCOPE_GROUP": "primskip", "CELLSCOPE_P": "1"})[1]
    assert "sep_conv" not in d


def test_env_provides_required_flag(capsys, corpus_file):
    code, out, _ = run(capsys, "oi", "compute", "--cells", "normal", environ={"CELLSCOPE_CORPUS": corpus_file})
    assert code == 0 and len(json.loads(out)) == 60 * 8


def test_bad_env_value_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sample"], {"CELLSCOPE_SEED": "seven"})
    assert exc.value.code == 2


def test_missing_tabular_exits_1(capsys, corpus_file):
    code, out, err = run(capsys, "oi", "compute", "--corpus", corpus_file, "--surrogate", "tabular:missing.csv")
    assert code == 1 and out == ""
    assert "missing.csv" in err


def test_usage_errors_exit_2():
    for argv in ([], ["bogus"], ["sample", "--group", "nope"], ["oi", "compute"]):
        with pytest.raises(SystemExit) as exc:
            main(argv, {})
        assert exc.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cellscope", "space", "stats"], capture_output=True, text=True)
    assert res.returncode == 0 and "1037664180" in res.stdout
    res = subprocess.run([sys.executable, "-m", "cellscope", "frobnicate"], capture_output=True, text=True)
    assert res.returncode == 2 and "usage" in res.stderr


def test_data_errors_exit_1(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("Genotype(normal=[]\n")
    code, _, err = run(capsys, "oi", "compute", "--corpus", str(bad))
    assert code == 1 and "line 1" in err
    code, _, err = run(capsys, "cost", "--genotype", "nonsense")
    assert code == 1 and err.startswith("cellscope: error:")
    code, _, err = run(capsys, "cost")
    assert code == 1
    code, _, err = run(capsys, "pareto", "--input", str(tmp_path / "none.csv"))
    assert code == 1 and "none.csv" in err


def test_cost(capsys, darts_v2):
    code, out, _ = run(capsys, "cost", "--genotype", DARTS_V2, "--preset", "imagenet")
    data = json.loads(out)
    assert code == 0 and set(data) == {"params", "macs"}
    assert data["params"] == count_params(darts_v2, PRESETS["imagenet"])
    _, out2, _ = run(capsys, "cost", "--genotype", DARTS_V2, "--preset", "imagenet", "--auxiliary")
    assert json.loads(out2)["params"] > data["params"]


def test_cost_from_file(capsys, tmp_path):
    p = tmp_path / "g.txt"
    p.write_text(DARTS_V2 + "\n")
    a = run(capsys, "cost", "--input", str(p))[1]
    b = run(capsys, "cost", "--genotype", DARTS_V2)[1]
    assert a == b


def test_edit(capsys):
    code, out, _ = run(capsys, "edit", "--genotype", DARTS_V2)
    data = json.loads(out)
    assert code == 0
    assert data["distance"] == len(data["edits"])
    edited = parse_genotype(data["edited"])
    assert edited.normal == edited.reduce


def test_pareto(capsys, tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("id,accuracy,params,flops\na,0.94,3000000,1\nb,0.93,4000000,2\nc,0.95,5000000,3\n")
    code, out, _ = run(capsys, "pareto", "--input", str(p))
    assert code == 0
    assert [line.split(",")[0] for line in out.splitlines()] == ["id", "a", "c"]
    _, out, _ = run(capsys, "pareto", "--input", str(p), "--cost", "flops", "--format", "json")
    assert [r["id"] for r in json.loads(out)] == ["a", "c"]


def test_wilcoxon(capsys, tmp_path):
    p = tmp_path / "pairs.csv"
    p.write_text("a,b\n" + "".join(f"{0.9 + i / 100},{0.8}\n" for i in range(1, 6)))
    code, out, _ = run(capsys, "wilcoxon", "--input", str(p))
    data = json.loads(out)
    assert code == 0 and data["p_greater"] == 0.03125


def test_oi_compute_and_aggregate(capsys, tmp_path, corpus_file):
    out_file = tmp_path / "oi.json"
    code, _, _ = run(capsys, "oi", "compute", "--corpus", corpus_file, "-o", str(out_file))
    assert code == 0
    records = json.loads(out_file.read_text())
    assert len(records) == 60 * 16
    code, out, _ = run(capsys, "oi", "aggregate", "--records", str(out_file))
    data = json.loads(out)
    assert len(data["aggregates"]) == 14
    _, out, _ = run(capsys, "oi", "aggregate", "--records", str(out_file), "--threshold", "1.0")
    assert all(v == 0 for v in json.loads(out)["important_fractions"].values())
    _, out, _ = run(capsys, "oi", "compute", "--corpus", corpus_file, "--format", "csv")
    assert out.splitlines()[0].startswith("arch_id,")


def test_pipeline_and_motifs(capsys, tmp_path, corpus_file):
    argv = ["pipeline", "--corpus", corpus_file, "--top-fraction", "0.2", "--repetitions", "2", "--seed", "3"]
    a = run(capsys, *argv)
    b = run(capsys, *argv)
    assert a == b and a[0] == 0
    report = load_report(a[1])
    assert report["corpus"]["selected"] == 12
    code, out, _ = run(capsys, "motifs", "mine", "--corpus", corpus_file, "--top-fraction", "0.2", "--format", "csv")
    assert code == 0 and out.splitlines()[0].startswith("code,edges,count_target")
