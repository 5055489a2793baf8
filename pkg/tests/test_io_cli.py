import json
import subprocess
import sys

import numpy as np
import pytest

from ppovm import extremality as ex
from ppovm import io
from ppovm import process as pp
from ppovm import quantum as qo
from ppovm import sampling as sm
from ppovm.cli import main
from ppovm.selftest import bell_tester, reducible_tester


def write(path, obj):
    io.write(str(path), io.scene_from_object(obj) if not isinstance(obj, (dict, np.ndarray)) else obj)
    return str(path)


def write_matrix(path, A):
    path.write_text(io.dumps(io.matrix_to_json(A)))
    return str(path)


def objects(rng):
    return [
        sm.random_povm(3, 2, rng),
        pp.realize(sm.random_triple(2, 2, 2, 3, rng)),
        sm.random_triple(2, 3, 2, 2, rng),
        sm.random_triple(2, 2, 2, 2, rng, mixed=True),
        sm.random_channel(2, 3, rng),
        ex.rotated(ex.diagonal_algebra(3), sm.random_unitary(3, rng)),
    ]


def payload_arrays(obj):
    if isinstance(obj, qo.Povm) or isinstance(obj, pp.ProcessPovm):
        return list(obj)
    if isinstance(obj, pp.RepresentationTriple):
        return list(obj.M) + [obj.T if obj.is_pure else obj.rho]
    if isinstance(obj, qo.Channel):
        return list(obj.kraus)
    return list(obj.basis)


def test_round_trip_is_bit_exact(rng):
    for obj in objects(rng):
        text = io.dumps(io.scene_from_object(obj, {"note": "x"}))
        back = io.scene_to_object(io.loads(text))
        assert type(back) is type(obj)
        for a, b in zip(payload_arrays(obj), payload_arrays(back)):
            assert np.array_equal(a, b)
        assert io.dumps(io.scene_from_object(back, {"note": "x"})) == text


def test_matrix_round_trip_special_values():
    A = np.array([[1e-300 + 0.1j, -0.0], [np.pi, 1 / 3 - 2j]])
    B = io.loads(io.dumps(io.matrix_to_json(A)))
    assert np.array_equal(A, B)


@pytest.mark.parametrize(
    "text",
    [
        "{not json",
        '{"rows": 2, "cols": 2, "data": [[1, 0]]}',
        '{"rows": 1, "cols": 1, "data": [[1, "a"]]}',
        '{"kind": "tensor", "dims": {"dK": 1, "dH": 1, "dH0": 1}, "n": 1, "payload": {}}',
        '{"kind": "povm", "dims": {"dK": 0, "dH": 1, "dH0": 1}, "n": 1, "payload": {}}',
        '{"kind": "povm", "dims": {"dK": 1, "dH": 1, "dH0": 1}, "n": 1, "payload": {}, "meta": {"a": 1}}',
        "[1, 2]",
    ],
)
def test_parse_errors(text):
    with pytest.raises(io.ParseError):
        doc = io.loads(text)
        io.scene_to_object(doc)


def test_payload_shape_errors():
    doc = io.scene_from_object(qo.Povm((np.eye(2) / 2, np.eye(2) / 2))).to_json()
    doc["n"] = 3
    with pytest.raises(io.ParseError):
        io.scene_to_object(io.scene_from_json(doc))


def test_validate_reports_residuals():
    bad = qo.Povm((0.45 * np.eye(2), 0.45 * np.eye(2)))
    checks = {c.name: c for c in io.validate(bad)}
    assert not checks["povm.normalization"].ok
    assert abs(checks["povm.normalization"].residual - 0.1) < 1e-15


# -- CLI -------------------------------------------------------------------


def test_validate_exit_codes(tmp_path, capsys):
    pvm = write(tmp_path / "pvm.json", qo.Povm((np.diag([1.0, 0]), np.diag([0, 1.0]))))
    assert main(["validate", pvm]) == 0
    short = write(tmp_path / "short.json", qo.Povm((0.45 * np.eye(2), 0.45 * np.eye(2))))
    assert main(["validate", short]) == 1
    assert "FAIL povm.normalization residual=1.000e-01" in capsys.readouterr().out
    junk = tmp_path / "junk.json"
    junk.write_text("{oops")
    assert main(["validate", str(junk)]) == 2
    assert main(["validate", str(tmp_path / "missing.json")]) == 2


def test_realize_and_minimize(tmp_path, rng):
    M = sm.random_povm(4, 3, rng)
    triple = write(tmp_path / "t.json", pp.RepresentationTriple(2, M, T=np.eye(2) / np.sqrt(2)))
    out = tmp_path / "F.json"
    assert main(["realize", triple, "--out", str(out)]) == 0
    _, F = io.read_object(str(out))
    assert max(np.abs(a - b / 2).max() for a, b in zip(F, M)) < 1e-15
    tri = tmp_path / "min.json"
    assert main(["minimize", str(out), "--out", str(tri)]) == 0
    doc, t = io.read_object(str(tri))
    assert pp.tester_distance(pp.realize(t), F) <= 1e-9
    assert float(doc.meta["round_trip_residual"]) <= 1e-9
    pure = write(tmp_path / "p.json", pp.realize(pp.RepresentationTriple(2, M, T=np.outer([1, 0], [0.6, 0.8]))))
    assert main(["minimize", pure, "--out", str(tri)]) == 0
    assert io.read_object(str(tri))[0].dims["dH0"] == 1
    assert main(["minimize", triple]) == 2


def test_certify_outputs(tmp_path, capsys):
    bell = write(tmp_path / "bell.json", bell_tester())
    assert main(["certify", bell]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"] == "Extremal" and out["purity_dim"] == 1 and "witness" not in out
    red = write(tmp_path / "red.json", reducible_tester())
    assert main(["certify", red, "--seed", "5"]) == 0
    first = capsys.readouterr().out
    out = json.loads(first)
    assert out["verdict"] == "NotExtremal"
    assert out["witness"]["recombination_residual"] <= 1e-8 and out["witness"]["gap"] > 1e-6
    assert main(["certify", red, "--seed", "5"]) == 0
    assert capsys.readouterr().out == first
    single = write(tmp_path / "one.json", pp.realize(pp.RepresentationTriple(1, qo.Povm((np.eye(2),)), T=np.array([[0.6, 0.8]]))))
    assert main(["certify", single]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "Extremal"


def test_certify_unknown_exits_3(tmp_path, monkeypatch, capsys):
    def stuck(F, eps=1e-9, seed=0, tol=1e-8):
        return ex.ExtremalityCertificate(ex.Verdict.UNKNOWN, 3, diagnostics=("no usable split",))

    monkeypatch.setattr(ex, "certify_process_extremal", stuck)
    red = write(tmp_path / "red.json", reducible_tester())
    assert main(["certify", red]) == 3
    assert "no usable split" in capsys.readouterr().err


def test_naimark_on_pvm(tmp_path, capsys, rng):
    pvm = write(tmp_path / "pvm.json", sm.random_pvm(3, 3, rng))
    assert main(["naimark", pvm]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["dilated_dim"] == 3
    assert max(out["residuals"].values()) < 1e-12


def test_commutant_command(tmp_path, rng):
    pvm = write(tmp_path / "pvm.json", qo.Povm((np.diag([1.0, 0, 0]), np.diag([0, 1.0, 1.0]))))
    out = tmp_path / "c.json"
    assert main(["commutant", pvm, "--out", str(out)]) == 0
    _, A = io.read_object(str(out))
    assert A.dim == 5
    assert all(c.ok for c in io.validate(A))


def test_face_sample_command(tmp_path, rng):
    M = sm.random_povm(4, 2, rng)
    T = sm.random_input(2, 2, rng)
    povm = write(tmp_path / "M.json", M)
    t_file = write_matrix(tmp_path / "T.json", T)
    x_file = write_matrix(tmp_path / "X.json", np.eye(2))
    out = tmp_path / "F.json"
    assert main(["face-sample", povm, t_file, x_file, "--out", str(out)]) == 0
    _, F = io.read_object(str(out))
    assert pp.tester_distance(F, pp.realize(pp.RepresentationTriple(2, M, T=T))) < 1e-14
    big = write_matrix(tmp_path / "X2.json", 2 * np.eye(2))
    assert main(["face-sample", povm, t_file, big]) == 1


def test_random_is_deterministic(tmp_path):
    a, b, c = (tmp_path / f"{k}.json" for k in "abc")
    for kind in ("povm", "pvm", "channel", "triple", "process_povm"):
        assert main(["random", kind, "--dims", "2", "2", "1", "--n", "2", "--seed", "7", "--out", str(a)]) == 0
        assert main(["random", kind, "--dims", "2", "2", "1", "--n", "2", "--seed", "7", "--out", str(b)]) == 0
        assert main(["random", kind, "--dims", "2", "2", "1", "--n", "2", "--seed", "8", "--out", str(c)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()
        assert main(["validate", str(a)]) == 0


def test_environment_defaults_and_flag_precedence(tmp_path, monkeypatch):
    a, b, c = (tmp_path / f"{k}.json" for k in "abc")
    monkeypatch.setenv("PPOVM_SEED", "7")
    assert main(["random", "povm", "--out", str(a)]) == 0
    assert main(["random", "povm", "--seed", "7", "--out", str(b)]) == 0
    assert main(["random", "povm", "--seed", "9", "--out", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()
    monkeypatch.setenv("PPOVM_EPS", "abc")
    assert main(["random", "povm", "--out", str(a)]) == 2
    assert main(["random", "povm", "--eps", "1e-6", "--out", str(a)]) == 0
    assert main(["random", "povm", "--eps", "-1", "--out", str(a)]) == 2


def test_max_dim_guard(tmp_path):
    assert main(["random", "povm", "--dims", "3", "1", "3"]) == 0
    assert main(["random", "povm", "--dims", "9", "1", "1"]) == 1
    assert main(["random", "povm", "--dims", "4", "1", "1", "--max-dim", "3"]) == 1


def test_selftest_mutation_writes_repro(tmp_path, capsys):
    code = main(["selftest", "--suite", "realization_identity", "--mutate", "realize-scale", "--repro-dir", str(tmp_path)])
    assert code == 1
    repro = tmp_path / "ppovm-repro-realization_identity.json"
    assert repro.exists()
    assert json.loads(repro.read_text())
    assert main(["selftest", "--suite", "realization_identity", "--repro-dir", str(tmp_path)]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ppovm", "random", "povm", "--seed", "3"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert io.loads(proc.stdout).kind == "povm"
