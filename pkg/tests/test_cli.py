import json

import pytest

from quasisasaki import cli, zoo


def test_parser_rejects_unknown_suite(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.build_parser().parse_args(["verify", "--suites", "structure,bogus"])
    assert exc.value.code == 2
    assert "unknown suites" in capsys.readouterr().err


@pytest.mark.parametrize("flag, value", [("--tol", "0"), ("--points", "0"), ("--fd-step", "-1")])
def test_parser_rejects_bad_numbers(flag, value):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["verify", flag, value])


def test_config_validation():
    with pytest.raises(ValueError):
        cli.SuiteConfig(suites=("nope",))
    with pytest.raises(ValueError):
        cli.SuiteConfig(tol=-1.0)


def test_workhorse_passes_everything():
    doc, status = cli.run(cli.SuiteConfig(model="s3xr4", points=16, seed=42))
    assert status == 0
    assert doc["summary"]["fail"] == 0 and doc["summary"]["unstable"] == 0
    assert set(doc["suites"]) == set(cli.SUITES)
    assert doc["classification"] == {"tag": "3-quasi-Sasakian", "rank": 3, "c": 2.0, "alpha": None}


def test_flat_rank4l3_is_not_applicable():
    doc, status = cli.run(cli.SuiteConfig(model="flat", points=4, suites=("rank4l3",)))
    assert status == 0
    recs = doc["suites"]["rank4l3"]
    assert recs and all(r["status"] == "n/a" for r in recs)


def test_corrupted_model_file_fails(tmp_path, capsys):
    path = tmp_path / "broken.json"
    zoo.save_model(zoo.perturb(zoo.build("s3xr4"), "phi", (0, 4, 5)), path)
    report = tmp_path / "report.json"
    status = cli.main(["verify", "--model-file", str(path), "--points", "4", "--report", str(report), "--quiet"])
    assert status == 1
    doc = json.loads(report.read_text())
    fails = [r for recs in doc["suites"].values() for r in recs if r["status"] == "fail"]
    assert fails and all(r["residual"] for r in fails)
    assert capsys.readouterr().out == ""


def test_unknown_model_exits_with_diagnostic(capsys):
    assert cli.main(["describe", "--model", "torus"]) == 2
    assert "UnknownModel" in capsys.readouterr().err


@pytest.mark.parametrize("argv, expected", [
    (["--model", "s7", "--r", "1"], {"dimension": "7", "class": "3-alpha-Sasakian (alpha=1)", "rank": "7",
                                     "c": "2.0", "l": "1", "m": "0"}),
    (["--model", "flat", "--n", "1"], {"dimension": "7", "class": "3-cosymplectic", "rank": "1", "c": "0.0"}),
    (["--model", "s3xr4"], {"dimension": "7", "rank": "3", "c": "2.0", "l": "0", "m": "1"}),
])
def test_describe(capsys, argv, expected):
    assert cli.main(["describe", *argv]) == 0
    out = dict(line.split(": ", 1) for line in capsys.readouterr().out.splitlines())
    assert {k: out[k] for k in expected} == expected


def test_models_listing(capsys):
    assert cli.main(["models"]) == 0
    names = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
    assert names == sorted(zoo.CATALOGUE)


def test_report_is_canonical_json():
    doc, _ = cli.run(cli.SuiteConfig(model="s3", points=2, suites=("structure",)))
    text = cli.dumps(doc)
    assert text == cli.dumps(json.loads(text))
