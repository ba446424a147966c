import json

import pytest

from hodgelab import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_spectrum_disc_oracle(capsys):
    code, out, _ = run(capsys, "spectrum", "--domain", "disc", "--method", "oracle", "--bc", "dirichlet", "--count", "20")
    assert code == 0
    data = json.loads(out)
    vals = data["spectrum"]["values"]
    assert len(vals) >= 20
    assert vals[0] == pytest.approx(5.78318596295, abs=1e-10)
    assert data["tool"] == "hodgelab" and data["version"]
    assert data["config"]["count"] == 20


def test_spectrum_square_feec_neumann_starts_at_zero(capsys):
    code, out, _ = run(capsys, "spectrum", "--domain", "square", "--method", "feec", "--bc", "neumann",
                       "--refine", "3", "--count", "10")
    assert code == 0
    vals = json.loads(out)["spectrum"]["values"]
    assert len(vals) == 10
    assert abs(vals[0]) < 1e-8
    assert vals[1] == pytest.approx(9.8696, rel=0.02)


def test_spectrum_ball4d_feec_is_usage_error(capsys):
    code, _, err = run(capsys, "spectrum", "--domain", "ball4d", "--method", "feec", "--count", "5")
    assert code == 2
    assert "hodgelab:" in err


def test_missing_domain_is_usage_error(capsys):
    code, _, _ = run(capsys, "spectrum", "--count", "5")
    assert code == 2


def test_bad_count_is_usage_error(capsys):
    code, _, _ = run(capsys, "spectrum", "--domain", "disc", "--count", "0")
    assert code == 2


def test_verify_rohleder_disc_marks_tie_at_j3(capsys):
    code, out, _ = run(capsys, "verify", "--check", "rohleder", "--domain", "disc", "--method", "oracle",
                       "--indices", "1..30")
    assert code == 0
    rows = json.loads(out)["report"]["rows"]
    assert [r["j"] for r in rows] == list(range(1, 31))
    row3 = rows[2]
    # lambda_5(N) = lambda_6(N) = j_{1,1}^2 = lambda_3(D): index 3 + 3 would be equality
    assert row3["sharp_shift"] == 3
    assert row3["tie"] == "6..6"


def test_verify_conjecture_ball3d_edge_case(capsys):
    code, out, _ = run(capsys, "verify", "--check", "conjecture", "--domain", "ball3d", "--method", "oracle",
                       "--indices", "1..1", "--shift", "4")
    assert code == 1
    assert json.loads(out)["report"]["rows"][0]["status"] == "fail"


def test_verify_conjecture_ball3d_default_shift_passes(capsys):
    code, _, _ = run(capsys, "verify", "--check", "conjecture", "--domain", "ball3d", "--method", "oracle",
                     "--indices", "1..1")
    assert code == 0


def test_verify_freitas_disc_fails(capsys):
    code, _, _ = run(capsys, "verify", "--check", "freitas", "--domain", "disc", "--method", "oracle",
                     "--indices", "1..10")
    assert code == 1


def test_verify_alternating_sum_annulus(capsys):
    code, out, _ = run(capsys, "verify", "--check", "alternating_sum", "--domain", "annulus", "--method", "feec",
                       "--refine", "2")
    assert code == 0
    report = json.loads(out)["report"]
    assert "alternating" in report["check"]
    assert any("chi = 0" in n for n in report["notes"])


def test_verify_feec_margin_study_too_coarse_is_usage_error(capsys):
    code, _, err = run(capsys, "verify", "--check", "friedlander", "--domain", "square", "--method", "feec",
                       "--refine", "2", "--levels", "3", "--indices", "1..3")
    assert code == 2
    assert "eigenvalues" in err


def test_verify_feec_friedlander_square(capsys):
    code, out, _ = run(capsys, "verify", "--check", "friedlander", "--domain", "square", "--method", "feec",
                       "--refine", "4", "--levels", "3", "--indices", "1..3")
    assert code == 0
    data = json.loads(out)
    assert set(data["margin_studies"]) == {"neumann", "dirichlet"}
    assert all(r["status"] == "strict" for r in data["report"]["rows"])


def test_converge_one_level_is_usage_error(capsys):
    code, _, _ = run(capsys, "converge", "--domain", "square", "--quantity", "neumann", "--levels", "1")
    assert code == 2


def test_converge_square_neumann_order(capsys):
    code, out, _ = run(capsys, "converge", "--domain", "square", "--quantity", "neumann", "--levels", "4",
                       "--count", "4")
    assert code == 0
    table = json.loads(out)["convergence"]
    orders = [o for o in table["order"] if o is not None]
    assert orders and all(1.5 < o < 2.5 for o in orders)


@pytest.mark.parametrize("fmt", ["csv", "md"])
def test_converge_text_formats_embed_config(capsys, fmt):
    code, out, _ = run(capsys, "converge", "--domain", "square", "--quantity", "neumann", "--levels", "2",
                       "--count", "3", "--format", fmt)
    assert code == 0
    head = out.splitlines()[0]
    assert '"tool": "hodgelab"' in head and '"config"' in head


def test_identical_configs_give_identical_bytes(tmp_path):
    # the output path is part of the embedded config, so reuse it
    out = tmp_path / "r.json"
    argv = ["verify", "--check", "prop51", "--domain", "square", "--method", "oracle", "--indices", "1..20",
            "-o", str(out)]
    assert cli.main(argv) == 0
    first = out.read_bytes()
    assert cli.main(argv) == 0
    assert out.read_bytes() == first


def test_config_file_and_flag_override(tmp_path, capsys):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"domain": "disc", "method": "oracle", "bc": "neumann", "count": 5}))
    code, out, _ = run(capsys, "spectrum", "--config", str(conf))
    assert code == 0
    data = json.loads(out)
    assert data["config"]["bc"] == "neumann"
    assert data["spectrum"]["values"][0] == 0.0
    code, out, _ = run(capsys, "spectrum", "--config", str(conf), "--bc", "dirichlet")
    assert json.loads(out)["config"]["bc"] == "dirichlet"


def test_config_unknown_key_is_usage_error(tmp_path, capsys):
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps({"domain": "disc", "colour": "blue"}))
    code, _, _ = run(capsys, "spectrum", "--config", str(conf))
    assert code == 2


def test_mesh_command_writes_json(tmp_path):
    out = tmp_path / "m.json"
    assert cli.main(["mesh", "--domain", "square", "--refine", "1", "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data


def test_parse_indices():
    assert list(cli.parse_indices("1..5")) == [1, 2, 3, 4, 5]
    with pytest.raises(cli.UsageError):
        cli.parse_indices("5..1")
