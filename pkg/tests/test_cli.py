import json
import struct
import subprocess
import sys
import zlib

import numpy as np
import pytest

from gaitkey import cli
from gaitkey.cli import EXIT_CORRUPT, EXIT_DIMENSION, EXIT_INPUT, EXIT_OK, EXIT_REJECT, HelperFormatError, main
from gaitkey.cohort import CohortModel, build_cohort, sample_templates
from gaitkey.gf_bch import bch_construct
from gaitkey.ieco import ieco_generate
from gaitkey.template import PipelineMeta, SymbolString

N = 64
CODE = ["--n", "31", "--k", "16", "--phi", "1"]


@pytest.fixture
def files(tmp_path):
    users = build_cohort(CohortModel(N=N, num_users=2, seed=3))
    rng = np.random.default_rng(0)
    paths = {}
    for name, user in [("enroll", 0), ("genuine", 0), ("impostor", 1)]:
        p = tmp_path / f"{name}.csv"
        np.savetxt(p, sample_templates(users[user], 0.01, 5, rng), delimiter=",")
        paths[name] = p
    paths["helper"] = tmp_path / "helper.bin"
    paths["key"] = tmp_path / "key.hex"
    paths["dir"] = tmp_path
    return paths


def enroll(files, *extra):
    return main(["enroll", "--templates", str(files["enroll"]), "--helper", str(files["helper"]), "--out", str(files["key"]), *CODE, *extra])


def test_enroll_then_reproduce(files, capsys):
    assert enroll(files, "--seed", "1") == EXIT_OK
    key = files["key"].read_text().strip()
    assert len(key) == 4 and key == key.lower()  # 16 bits
    capsys.readouterr()
    assert main(["reproduce", "--templates", str(files["genuine"]), "--helper", str(files["helper"])]) == EXIT_OK
    assert capsys.readouterr().out.strip() == key
    assert main(["reproduce", "--templates", str(files["impostor"]), "--helper", str(files["helper"])]) == EXIT_REJECT


def test_key_not_in_helper_file(files):
    enroll(files, "--seed", "1")
    key = bytes.fromhex(files["key"].read_text().strip())
    assert key not in files["helper"].read_bytes()


def test_enroll_twice_differs(files, tmp_path):
    enroll(files)
    first = (files["helper"].read_bytes(), files["key"].read_text())
    enroll(files)
    assert files["helper"].read_bytes() != first[0]
    assert files["key"].read_text() != first[1]


def test_fresh_process_parses_helper(files):
    enroll(files, "--seed", "2")
    out = subprocess.run(
        [sys.executable, "-m", "gaitkey.cli", "reproduce", "--templates", str(files["enroll"]), "--helper", str(files["helper"])],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0
    assert out.stdout.strip() == files["key"].read_text().strip()


def test_truncated_helper_is_corrupt_not_reject(files):
    enroll(files, "--seed", "3")
    buf = files["helper"].read_bytes()
    for cut in (1, 10, len(buf) // 2):
        files["helper"].write_bytes(buf[:-cut])
        assert main(["reproduce", "--templates", str(files["genuine"]), "--helper", str(files["helper"])]) == EXIT_CORRUPT


def test_input_errors(files, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,oops\n")
    assert main(["enroll", "--templates", str(bad), "--helper", str(files["helper"]), *CODE]) == EXIT_INPUT
    one = tmp_path / "one.csv"
    np.savetxt(one, np.zeros((1, N)), delimiter=",")
    assert main(["enroll", "--templates", str(one), "--helper", str(files["helper"]), *CODE]) == EXIT_INPUT
    assert main(["enroll", "--templates", str(files["enroll"]), "--helper", str(files["helper"]), "--n", "31", "--k", "17"]) == EXIT_INPUT
    # phi*n larger than K
    assert main(["enroll", "--templates", str(files["enroll"]), "--helper", str(files["helper"]), "--n", "63", "--k", "36", "--phi", "2"]) == EXIT_DIMENSION
    enroll(files, "--seed", "4")
    narrow = tmp_path / "narrow.csv"
    np.savetxt(narrow, np.zeros((3, N - 1)), delimiter=",")
    assert main(["reproduce", "--templates", str(narrow), "--helper", str(files["helper"])]) == EXIT_DIMENSION
    assert main(["reproduce", "--templates", str(files["genuine"]), "--helper", str(tmp_path / "missing.bin")]) == EXIT_INPUT
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "nonsense"])
    assert exc.value.code == EXIT_INPUT


def _random_helper(rng):
    n, k = [(15, 5), (15, 7), (31, 16), (63, 36)][rng.integers(4)]
    phi = int(rng.integers(1, 4))
    s = SymbolString(rng.integers(0, 1 << phi, n), phi)
    K = int(rng.integers(phi * n, 4 * phi * n))
    idx = np.sort(rng.choice(K, phi * n, replace=False))
    meta = PipelineMeta(int(rng.integers(0, 2**63)), K + 1, K, tuple(int(i) for i in idx))
    _, h = ieco_generate(s, bch_construct(n, k), int(rng.integers(8, 200)), rng, key_bits=int(rng.integers(1, 300)), meta=meta)
    return h


def test_helper_roundtrip_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        h = _random_helper(rng)
        buf = cli.serialize_helper(h)
        parsed = cli.parse_helper(buf)
        assert parsed == h
        assert cli.serialize_helper(parsed) == buf


def test_helper_corruption_detected():
    rng = np.random.default_rng(6)
    buf = cli.serialize_helper(_random_helper(rng))
    for pos in rng.choice(len(buf), 40, replace=False):
        bad = bytearray(buf)
        bad[pos] ^= 1 << int(rng.integers(8))
        with pytest.raises(HelperFormatError):
            cli.parse_helper(bytes(bad))
    with pytest.raises(HelperFormatError):
        cli.parse_helper(buf + b"\x00")


def test_unknown_version_rejected():
    rng = np.random.default_rng(7)
    buf = bytearray(cli.serialize_helper(_random_helper(rng)))
    struct.pack_into("<H", buf, 4, 2)
    body = bytes(buf[:-4])
    with pytest.raises(HelperFormatError, match="version"):
        cli.parse_helper(body + struct.pack("<I", zlib.crc32(body)))


def test_simulate_report_reproducible(tmp_path):
    args = ["simulate", "--users", "3", "--trials", "3", "--impostor-trials", "10", "--seed", "11", "--k", "131,147"]
    assert main([*args, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main([*args, "--out", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "simulate.json").read_bytes() == (tmp_path / "b" / "simulate.json").read_bytes()
    assert (tmp_path / "a" / "far_frr.tsv").read_bytes() == (tmp_path / "b" / "far_frr.tsv").read_bytes()
    report = json.loads((tmp_path / "a" / "simulate.json").read_text())
    assert [r["k"] for r in report["rows"]] == [131, 147]


def test_simulate_zero_noise_and_bad_combos(tmp_path):
    out = tmp_path / "z"
    assert main(["simulate", "--bit-level", "--zeta", "0", "--users", "2", "--trials", "5", "--impostor-trials", "5", "--seed", "1", "--out", str(out)]) == EXIT_OK
    rows = json.loads((out / "simulate.json").read_text())["rows"]
    assert all(r["frr"] == 0 for r in rows)
    assert main(["simulate", "--zeta", "0.1", "--users", "2"]) == EXIT_INPUT
    assert main(["simulate", "--users", "1"]) == EXIT_INPUT
    assert main(["simulate", "--k", "130", "--users", "2"]) == EXIT_INPUT


def test_analyze_modes(tmp_path):
    out = tmp_path / "f"
    assert main(["analyze", "formulas", "--trials", "600", "--phi-grid", "1,2", "--seed", "1", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "formulas.json").read_text())
    assert len(rep["intra"]) == 6 and len(rep["inter"]) == 6
    assert (out / "eq_intra.tsv").read_text().startswith("param\tphi\tanalytic\tempirical")
    assert all(abs(r["analytic"] - 0.5) < 1e-12 for r in rep["inter"] if r["param"] == 0.5)

    out = tmp_path / "a"
    assert main(["analyze", "attack", "--n", "15", "--k", "5", "--trials", "2", "--budget", "40", "--seed", "2", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "attack.json").read_text())
    assert {"eco_recovered_fraction", "ieco_successes", "ieco_claim_accuracy"} <= rep.keys()

    out = tmp_path / "u"
    assert main(["analyze", "unlinkability", "--users", "3", "--trials", "6", "--seed", "3", "--out", str(out)]) == EXIT_OK
    assert "D_sys" in json.loads((out / "unlinkability.json").read_text())

    out = tmp_path / "h"
    assert main(["analyze", "histograms", "--users", "3", "--trials", "2", "--seed", "4", "--out", str(out)]) == EXIT_OK
    assert (out / "hist_omega.tsv").exists() and (out / "hist_codeword.tsv").exists()
