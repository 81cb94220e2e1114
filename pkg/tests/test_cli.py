import io
import json
import subprocess
import sys

import pytest

from klpoly import bruhatmap
from klpoly.bruhatmap import BruhatMap
from klpoly.charformula import build_setup, enumerate_B
from klpoly.cli import (EXIT_INPUT, EXIT_IO, EXIT_LIMIT, decode_element, encode_element, main,
                        parse_record)
from klpoly.klsolver import all_canonical, check_contract


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def last_json(out):
    return json.loads(out.strip().splitlines()[-1])


def test_build_map(capsys, tmp_path):
    path = tmp_path / "a3.klbm"
    code, out = run(capsys, "build-map", "--type", "affine:A3", "--parabolic", "finite",
                    "--target", "longest-restricted", "--out", str(path))
    assert code == 0 and last_json(out)["n"] == 8
    reg = enumerate_B(build_setup("affine:A3"))
    assert BruhatMap.deserialize(str(path), reg.setup.system) == reg.B_leq_map
    code, out = run(capsys, "build-map", "--type", "B2", "--parabolic", "empty", "--target", "longest")
    assert code == 0 and last_json(out)["n"] == 8
    code, _ = run(capsys, "build-map", "--type", "B2", "--out", str(tmp_path / "no" / "x.klbm"))
    assert code == EXIT_IO


def test_validation_errors(capsys):
    assert run(capsys, "build-map", "--type", "H3")[0] == EXIT_INPUT
    assert run(capsys, "build-map", "--type", "A3", "--target", "1,x")[0] == EXIT_INPUT
    assert run(capsys, "build-map", "--type", "A3", "--parabolic", "1", "--target", "1")[0] == EXIT_INPUT
    assert run(capsys, "kl", "--type", "A3", "--mod", "6,9")[0] == EXIT_INPUT
    assert run(capsys, "build-map", "--type", "A3", "--limit-n", "5")[0] == EXIT_LIMIT
    assert run(capsys, "charformula", "--type", "A2", "--p", "5", "--lambda", "1,1")[0] == EXIT_INPUT
    assert run(capsys, "charformula", "--type", "A2", "--p", "2", "--lambda", "0,0")[0] == EXIT_INPUT
    with pytest.raises(SystemExit):
        main(["kl", "--type", "A3", "--strategy", "magic"])


def test_stats_G2(capsys):
    code, out = run(capsys, "stats", "--type", "affine:G2", "--threads", "1")
    info = last_json(out)
    assert code == 0
    assert (info["|B|"], info["|B_<=|"], info["m"]) == (12, 16, 10)
    assert info["max_m_at_1_le_2^m"]


def test_h1(capsys):
    code, out = run(capsys, "h1", "--type", "affine:D4", "--threads", "1")
    assert code == 0 and last_json(out)["max_h1"] == 2
    code, out = run(capsys, "h1", "--type", "D4", "--threads", "1", "--strategy", "fromscratch")
    assert last_json(out)["max_h1"] == 2


def test_charformula_A2(capsys):
    code, out = run(capsys, "charformula", "--type", "A2", "--p", "7", "--lambda", "p-2,p-2")
    lines = [json.loads(l) for l in out.strip().splitlines()]
    assert code == 0
    assert lines[-1]["dim_L"] == 6**3 - 1
    assert [r["m_at_-1"] for r in lines[:-1]] == [1, -1]


def records_of(text):
    return [parse_record(l) for l in text.strip().splitlines()]


def test_kl_records(capsys):
    code, out = run(capsys, "kl", "--type", "affine:B3", "--threads", "1")
    assert code == 0
    reg = enumerate_B(build_setup("affine:B3"))
    bm = reg.B_leq_map
    got = {}
    for line in out.strip().splitlines():
        rec = json.loads(line)
        x, y, f = parse_record(line)
        d = int(bm.lengths[x] - bm.lengths[y])
        assert (rec["a"] - d) % 2 == 0
        assert rec["at_1"] == f.evaluate(1) and rec["at_-1"] == f.evaluate(-1)
        got.setdefault(x, {})[y] = f
    for ce in all_canonical(bm):
        assert ce.polys == got[ce.x_index]
        check_contract(ce, bm)


@pytest.mark.parametrize("extra", [[], ["--strategy", "fromscratch"], ["--strategy", "hybrid"],
                                   ["--mod", "auto"], ["--threads", "8"]])
def test_kl_modes_identical(capsys, extra, tmp_path):
    base = tmp_path / "base.jsonl"
    assert main(["kl", "--type", "B3", "--threads", "1", "--out", str(base)]) == 0
    other = tmp_path / "other.jsonl"
    assert main(["kl", "--type", "B3", "--out", str(other)] + extra) == 0
    assert base.read_bytes() == other.read_bytes()


def test_kl_single_index(capsys):
    code, out = run(capsys, "kl", "--type", "affine:C3", "--index", "40", "--threads", "1")
    assert code == 0
    assert {x for x, _, _ in records_of(out)} == {40}
    code, full = run(capsys, "kl", "--type", "affine:C3", "--threads", "1")
    assert [l for l in full.splitlines() if l.startswith('{"x":40,')] == out.strip().splitlines()


def test_checkpoint_resume(tmp_path, capsys):
    args = ["kl", "--type", "affine:B3", "--threads", "1"]
    ref = tmp_path / "ref.jsonl"
    assert main(args + ["--out", str(ref)]) == 0
    out, ck = tmp_path / "out.jsonl", tmp_path / "ck"
    resume = args + ["--out", str(out), "--checkpoint-dir", str(ck)]
    assert main(resume + ["--stop-after", "10"]) == EXIT_LIMIT
    # a partially written tail beyond the committed state is discarded on resume
    with open(out, "ab") as fh:
        fh.write(b'{"x":999')
    assert main(resume + ["--stop-after", "17"]) == EXIT_LIMIT
    assert main(resume) == 0
    assert out.read_bytes() == ref.read_bytes()
    assert not (ck / "state.json").exists()


def test_checkpoint_mismatch(tmp_path, capsys):
    out, ck = tmp_path / "out.jsonl", tmp_path / "ck"
    base = ["kl", "--type", "affine:B3", "--threads", "1", "--out", str(out), "--checkpoint-dir", str(ck)]
    assert main(base + ["--stop-after", "3"]) == EXIT_LIMIT
    assert main(base[:-4] + ["--strategy", "hybrid"] + base[-4:]) == EXIT_INPUT


def test_klel_roundtrip():
    reg = enumerate_B(build_setup("affine:C3"))
    bm = reg.B_leq_map
    elems = list(all_canonical(bm))
    blob = b"".join(encode_element(ce) for ce in elems)
    src = io.BytesIO(blob)
    back = []
    while (ce := decode_element(src, bm)) is not None:
        back.append(ce)
    assert back == elems
    with pytest.raises(ValueError):
        decode_element(io.BytesIO(b"KLEX" + blob[4:]), bm)
    with pytest.raises(ValueError):
        decode_element(io.BytesIO(blob[:30]), bm)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "klpoly", "build-map", "--type", "G2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["n"] == 12
