import json

import jsonschema
import pytest

from subgeom import labcli


def run_cli(*argv):
    return labcli.main([str(a) for a in argv])


def read_report(out):
    with open(out / "report.json") as fh:
        return json.load(fh)


def test_list_names_and_tags(capsys):
    assert run_cli("list") == 0
    text = capsys.readouterr().out
    for name, tag in [("poly-tv-rate", "thm3.1"), ("levy-return-time", "thm3.9b"),
                      ("maximal-inequality", "prop4.1"), ("non-confinement", "appA")]:
        line = next(l for l in text.splitlines() if l.startswith(name + " "))
        assert tag in line


def test_verify_default_passes(tmp_path):
    assert run_cli("verify", "--out", tmp_path) == 0
    rep = read_report(tmp_path)
    jsonschema.validate(rep, labcli.REPORT_SCHEMA)
    assert {c["id"] for c in rep["claims"]} == {"drift-super", "drift-sub"}
    assert rep["verdict"] == "pass"


@pytest.mark.parametrize("triple, failing", [("k3-p2-psi-low", "drift-sub"),
                                             ("k3-p2-phi-half", "drift-super")])
def test_verify_wrong_triple_fails(tmp_path, triple, failing):
    assert run_cli("verify", "--out", tmp_path, "--override", f"verify.triple={triple}") == 1
    bad = [c["id"] for c in read_report(tmp_path)["claims"] if c["verdict"] == "fail"]
    assert bad == [failing]


def test_verify_empty_grid_is_config_error(tmp_path, capsys):
    cfg = tmp_path / "v.ini"
    cfg.write_text("[verify]\ngrid = []\n")
    assert run_cli("verify", "--config", cfg, "--out", tmp_path) == 2
    assert "empty" in capsys.readouterr().err


def test_zero_paths_is_config_error(tmp_path):
    assert run_cli("run", "maximal-inequality", "--seed", 1, "--paths", 0, "--out", tmp_path) == 2


def test_missing_seed_is_config_error(tmp_path, capsys):
    assert run_cli("run", "maximal-inequality", "--out", tmp_path) == 2
    assert "seed" in capsys.readouterr().err


def test_unknown_experiment(tmp_path):
    assert run_cli("run", "no-such-thing", "--seed", 1, "--out", tmp_path) == 2


def test_empty_threshold_grid(tmp_path):
    cfg = tmp_path / "e.ini"
    cfg.write_text("[experiment]\nname = poly-invariant-tail\nseed = 1\n[grid]\nthresholds = []\n")
    assert run_cli("run", "--config", cfg, "--out", tmp_path / "o") == 2


def test_runs_are_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ("run", "maximal-inequality", "--seed", 42, "--paths", 2000)
    assert run_cli(*args, "--out", a) == 0
    assert run_cli(*args, "--out", b) == 0
    ra, rb = read_report(a), read_report(b)
    assert [c["measured"] for c in ra["claims"]] == [c["measured"] for c in rb["claims"]]
    assert labcli.report_diff(a / "report.json", b / "report.json") == []
    for claim in ra["claims"]:
        jsonschema.validate(claim, labcli.CLAIM_SCHEMA)


def test_curve_tables_are_byte_identical(tmp_path):
    args = ("run", "levy-return-time", "--seed", 9, "--paths", 200_000)
    run_cli(*args, "--out", tmp_path / "a")
    run_cli(*args, "--out", tmp_path / "b")
    (name,) = read_report(tmp_path / "a")["curves"]
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_report_diff_flags_verdict_change(tmp_path, capsys):
    for name, triple in [("a", "k3-p2"), ("b", "k3-p2-psi-low")]:
        run_cli("verify", "--out", tmp_path / name, "--override", f"verify.triple={triple}")
    capsys.readouterr()
    assert run_cli("report-diff", tmp_path / "a" / "report.json", tmp_path / "b" / "report.json") == 1
    rows = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert rows == [{"id": "drift-sub", "change": "verdict", "first": rows[0]["first"],
                     "second": rows[0]["second"]}]


def test_ini_and_json_configs_agree(tmp_path):
    ini = tmp_path / "c.ini"
    ini.write_text("[experiment]\nname = maximal-inequality\nseed = 3\npaths = 500\n"
                   "[grid]\ns = 2.0\n")
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"experiment": {"name": "maximal-inequality", "seed": 3, "paths": 500},
                              "grid": {"s": 2.0}}))
    assert labcli.load_config(str(ini)) == labcli.load_config(str(js))


def test_override_parsing():
    cfg = {s: {} for s in labcli.SECTIONS}
    labcli.apply_override(cfg, "grid.times=1,2,4")
    labcli.apply_override(cfg, "seed=7")
    labcli.apply_override(cfg, "model.mu=0.5")
    assert cfg["grid"]["times"] == [1, 2, 4]
    assert cfg["experiment"]["seed"] == 7 and cfg["model"]["mu"] == 0.5
    with pytest.raises(labcli.ConfigError):
        labcli.apply_override(cfg, "nosign")
    with pytest.raises(labcli.ConfigError):
        labcli.apply_override(cfg, "bogus.key=1")


def test_unknown_section_rejected(tmp_path):
    cfg = tmp_path / "x.ini"
    cfg.write_text("[extras]\na = 1\n")
    with pytest.raises(labcli.ConfigError):
        labcli.load_config(str(cfg))


def test_curves_written_with_header(tmp_path):
    assert run_cli("run", "levy-return-time", "--seed", 5, "--paths", 200_000, "--out", tmp_path) \
        in (0, 1)
    rep = read_report(tmp_path)
    assert rep["curves"]
    first = (tmp_path / rep["curves"][0]).read_text().splitlines()
    assert first[0] == "x,y,ci" and len(first) > 4


@pytest.mark.slow
def test_poly_invariant_tail_claim_shape(tmp_path):
    code = run_cli("run", "poly-invariant-tail", "--seed", 11, "--out", tmp_path,
                   "--override", "grid.total_steps=2000000")
    assert code in (0, 1)
    (c,) = read_report(tmp_path)["claims"]
    assert c["expected"] == -2.0 and c["tag"] == "thm3.2a"
