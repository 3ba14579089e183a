import json
import os

import pytest

from flowdisc.cli import main, summarize
from flowdisc.core import instance_from_json
from flowdisc.util import ValidationError


def run(args):
    return main(args)


def test_gen_and_maxflow_roundtrip(tmp_path):
    inst_path = str(tmp_path / "inst.json")
    out_path = str(tmp_path / "res.json")
    assert run(["gen", "instance", "--n", "4", "--m", "2", "--seed", "3",
                "--out", inst_path]) == 0
    assert run(["maxflow", "--instance", inst_path, "--colorer", "greedy",
                "--out", out_path]) == 0
    data = json.loads(open(out_path).read())
    assert set(data) == {"T_star", "assignment", "levels", "max_flow"}
    assert run(["check", "--instance", inst_path, "--result", out_path]) == 0


def test_totalflow_result_schema(tmp_path):
    inst_path = str(tmp_path / "inst.json")
    out_path = str(tmp_path / "tf.json")
    assert run(["gen", "instance", "--n", "3", "--m", "2", "--seed", "8",
                "--out", inst_path]) == 0
    assert run(["totalflow", "--instance", inst_path, "--colorer", "greedy",
                "--out", out_path]) == 0
    data = json.loads(open(out_path).read())
    assert set(data) == {"lp_cost", "alpha_levels", "total_flow", "assignment"}
    assert run(["check", "--instance", inst_path, "--result", out_path]) == 0


def test_byte_identical_reruns(tmp_path):
    a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    for path in (a, b):
        assert run(["gen", "instance", "--n", "5", "--m", "2", "--seed", "11",
                    "--out", path]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()
    ra, rb = str(tmp_path / "ra.json"), str(tmp_path / "rb.json")
    assert run(["maxflow", "--instance", a, "--colorer", "greedy", "--out", ra]) == 0
    assert run(["maxflow", "--instance", b, "--colorer", "greedy", "--out", rb]) == 0
    assert open(ra, "rb").read() == open(rb, "rb").read()


def test_color_subcommand(tmp_path):
    v_path = str(tmp_path / "v.json")
    c_path = str(tmp_path / "c.json")
    assert run(["gen", "vectors", "--n", "6", "--m", "2", "--seed", "2",
                "--out", v_path]) == 0
    assert run(["color", "--vectors", v_path, "--colorer", "brute",
                "--mode", "one-sided", "--out", c_path]) == 0
    data = json.loads(open(c_path).read())
    assert "signs" in data and "discrepancy" in data
    assert all(s in (-1, 1) for s in data["signs"])


def test_game_trace_dimensions(tmp_path):
    trace_path = str(tmp_path / "t.csv")
    assert run(["game", "--hard-k", "4", "--maker", "pairing", "--breaker", "tree",
                "--trace", trace_path]) == 0
    rows = open(trace_path).read().strip().splitlines()
    assert rows[0] == "turn,player,index_or_wait,sign,max_prefix_after"
    assert len(rows) - 1 == 17  # one move per element of the k=4 instance


def test_reduce_roundtrip(tmp_path):
    v_path = str(tmp_path / "v.json")
    seq = {"m": 2, "vectors": [["1/4", "-1/8"], ["-1/2", "1/3"]]}
    with open(v_path, "w") as fh:
        json.dump(seq, fh)
    out = str(tmp_path / "r.json")
    assert run(["reduce", "--vectors", v_path, "--mode", "roundtrip", "--out", out]) == 0
    data = json.loads(open(out).read())
    assert set(data) >= {"opt_value", "extracted_value", "brute_value"}
    inst_out = str(tmp_path / "ri.json")
    assert run(["reduce", "--vectors", v_path, "--mode", "instance", "--out", inst_out]) == 0
    inst = instance_from_json(json.loads(open(inst_out).read()))
    assert inst.n == 2 * 3


def test_sdp_subcommands(tmp_path):
    v_path = str(tmp_path / "v.json")
    seq = {"m": 1, "vectors": [["1/2"], ["-1/2"]]}
    with open(v_path, "w") as fh:
        json.dump(seq, fh)
    assert run(["sdp", "--mode", "choose-r", "--delta", "1/2", "--n", "4", "--m", "2"]) == 0
    assert run(["sdp", "--mode", "verify", "--vectors", v_path, "--delta", "1/2",
                "--r", "2", "--out", str(tmp_path / "s.json")]) == 0
    assert run(["sdp", "--mode", "mc", "--delta", "1/2", "--n", "4", "--m", "2",
                "--samples", "20000", "--seed", "1"]) == 0


def test_bench_summary(tmp_path):
    outdir = str(tmp_path / "bench")
    assert run(["bench", "--count", "2", "--n", "4", "--m", "2", "--seed", "5",
                "--outdir", outdir]) == 0
    assert os.path.exists(os.path.join(outdir, "summary.csv"))
    lines = open(os.path.join(outdir, "summary.csv")).read().strip().splitlines()
    assert len(lines) == 3  # header + one row per run


def test_summarize_rejects_mixed_kinds(tmp_path):
    inst_path = str(tmp_path / "i.json")
    assert run(["gen", "instance", "--n", "3", "--m", "2", "--seed", "1",
                "--out", inst_path]) == 0
    inst = instance_from_json(json.loads(open(inst_path).read()))
    fake_max = {"T_star": "1/1", "assignment": [0] * inst.n, "levels": [],
                "max_flow": "1/1"}
    fake_tot = {"lp_cost": "1/1", "alpha_levels": [], "total_flow": "1/1",
                "assignment": [0] * inst.n}
    with pytest.raises(ValidationError):
        summarize([(inst, fake_max), (inst, fake_tot)])


def test_summarize_empty_batch():
    csv_text, pretty, ok = summarize([])
    assert ok and csv_text.splitlines()[0].startswith("n,")


def test_summarize_flags_violated_bound(tmp_path):
    inst_path = str(tmp_path / "i.json")
    res_path = str(tmp_path / "r.json")
    assert run(["gen", "instance", "--n", "3", "--m", "2", "--seed", "4",
                "--out", inst_path]) == 0
    assert run(["maxflow", "--instance", inst_path, "--colorer", "greedy",
                "--out", res_path]) == 0
    inst = instance_from_json(json.loads(open(inst_path).read()))
    data = json.loads(open(res_path).read())
    data["max_flow"] = "1000/1"  # doctored: no longer matches the evaluation
    csv_text, pretty, ok = summarize([(inst, data)])
    assert not ok
    assert "VIOLATED" in csv_text


def test_exit_code_validation_error(tmp_path, capsys):
    assert run(["maxflow", "--instance", str(tmp_path / "missing.json")]) == 1
    err = capsys.readouterr().err
    assert "missing.json" in err


def test_exit_code_malformed_file(tmp_path, capsys):
    bad = str(tmp_path / "bad.json")
    with open(bad, "w") as fh:
        fh.write('{"m": 1, "jobs": [{"r": "zzz", "p": ["1/1"]}]}')
    assert run(["maxflow", "--instance", bad]) == 1
    assert "zzz" in capsys.readouterr().err
