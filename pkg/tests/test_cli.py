import numpy as np
import pytest
import yaml

from weakkubo import __version__, config
from weakkubo.cli import main
from weakkubo.linalg import hermitian_exp
from weakkubo.model import Povm
from weakkubo.presets import qubit_qubit


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def write(tmp_path, s, name="s.yaml"):
    path = tmp_path / name
    config.dump(s, path)
    return str(path)


def test_average_csv_header_and_columns(capsys):
    code, out, _ = run(["average", "--preset", "qubit_qubit", "--n-t", "128", "-f", "+"], capsys)
    assert code == 0
    lines = out.split("\r\n")
    h = config.scenario_hash(qubit_qubit(n_t=128))
    assert lines[0] == f"# weakkubo {__version__} command=average scenario={h} n_t=128"
    assert lines[1] == "lam,f,exact,main,modified_kubo,ordinary_kubo"
    assert lines[2].startswith("0.050000000000000003,+,")


def test_outputs_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(["sweep", "--preset", "random_seeded", "--param", "seed=3", "-f", "f0",
                    "--lambdas", "0.1,0.05,0.02", "-o", str(path)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes().startswith(b"# weakkubo")


def test_records_output(capsys):
    code, out, _ = run(["kubo", "--preset", "qubit_qubit", "--n-t", "64", "-f", "-",
                        "--format", "records"], capsys)
    doc = yaml.safe_load(out)
    assert code == 0 and doc["columns"] == ["lam", "f", "modified_kubo", "ordinary_kubo"]
    assert doc["n_t"] == 64


def test_scenario_file_matches_preset(tmp_path, capsys):
    path = write(tmp_path, qubit_qubit(n_t=64))
    _, from_file, _ = run(["average", "--scenario", path, "-f", "+"], capsys)
    _, from_preset, _ = run(["average", "--preset", "qubit_qubit", "--n-t", "64", "-f", "+"], capsys)
    assert from_file == from_preset


@pytest.mark.parametrize("argv", [
    ["average", "--preset", "qubit_qubit", "-f", "+", "--param", "bogus=1"],
    ["average", "--preset", "qubit_qubit", "-f", "+", "--param", "n_t=1.5"],
    ["average", "--preset", "qubit_qubit", "-f", "nope"],
    ["average", "--preset", "qubit_qubit", "-f", "+", "--eps", "0.1"],
])
def test_bad_config_exit_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2 and out == "" and "bad config" in err


def test_unknown_file_key_exit_2(tmp_path, capsys):
    path = tmp_path / "s.yaml"
    path.write_text(config.dumps(qubit_qubit(n_t=8)).replace("dim_s:", "dims: 2\n  dim_s:", 1))
    assert run(["exact", "--scenario", str(path)], capsys)[0] == 2


def test_argparse_rejects_unknown_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["average", "--preset", "qubit_qubit", "-f", "+", "--lamda", "0.1"])
    assert exc.value.code == 2


def test_invalid_scenario_exit_3(tmp_path, capsys):
    s = qubit_qubit(n_t=8)
    bad = type(s)(**{**s.__dict__, "rho_i": 1.1 * s.rho_i})
    code, out, err = run(["exact", "--scenario", write(tmp_path, bad)], capsys)
    assert code == 3 and "rho_i.trace" in err and out == ""
    code, out, _ = run(["validate", "--scenario", write(tmp_path, bad)], capsys)
    assert code == 3 and "rho_i.trace" in out


def test_postselection_floor_exit_4(tmp_path, capsys):
    s = qubit_qubit(lam=0.0, n_t=16)
    u = hermitian_exp(s.h_s, 1.0)
    _, v = np.linalg.eigh(u @ s.rho_i @ u.conj().T)
    s = s.with_sys_povm(Povm.projective(v, [0.0, 1.0], ["dark", "bright"]))
    code, _, err = run(["weakvalues", "--scenario", write(tmp_path, s), "-f", "dark"], capsys)
    assert code == 4 and "floor" in err


def test_io_failure_exit_5(tmp_path, capsys):
    target = tmp_path / "missing" / "out.csv"
    code, _, err = run(["exact", "--preset", "qubit_qubit", "--n-t", "16", "-o", str(target)],
                       capsys)
    assert code == 5 and "I/O" in err
    assert run(["exact", "--scenario", str(tmp_path / "nope.yaml")], capsys)[0] == 5


def test_search_and_campaign(capsys):
    code, out, _ = run(["search-negativity", "--trials", "2"], capsys)
    assert code == 0 and out.split("\r\n")[2].startswith("1,0,2,0,")
    code, out, _ = run(["campaign", "--n", "2"], capsys)
    assert code == 0 and ",0," not in out
