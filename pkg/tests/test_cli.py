import json

import pytest

from mdlab.cli import main


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def read_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# {")  # manifest header
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return header, rows


def test_coeffs_rademacher_golden(tmp_path):
    assert main(["coeffs", "--model", "rademacher", "--n", "400", "--m", "5",
                 "--out", str(tmp_path)]) == 0
    doc = read_json(tmp_path / "coefficients.json")
    c = doc["coefficients"]
    assert c["eps_m"] == pytest.approx(0.25, abs=1e-14)
    assert c["gamma_m"] == 0.0
    assert c["delta_m"] == 0.0
    assert doc["manifest"]["tool"].startswith("mdlab ")
    assert doc["gates"]["all_ok"] is True


def test_coeffs_reports_truncation_error(tmp_path):
    assert main(["coeffs", "--model", "two_state:rho=0.4", "--n", "120",
                 "--m", "6", "--out", str(tmp_path)]) == 0
    doc = read_json(tmp_path / "coefficients.json")
    assert doc["coefficients"]["gamma_m"] > 0
    assert doc["coefficients"]["gamma_truncation_error"] < 1e-10


def test_coeffs_block_size_from_beta(tmp_path):
    assert main(["coeffs", "--model", "two_state:rho=0.4", "--n", "1024",
                 "--beta", "2", "--out", str(tmp_path)]) == 0
    assert read_json(tmp_path / "coefficients.json")["coefficients"]["m"] == 7


def test_coeffs_sampled_model_gets_certified_bounds(tmp_path):
    assert main(["coeffs", "--model", "moving_average:c=1,L_trunc=12",
                 "--n", "256", "--m", "4", "--out", str(tmp_path)]) == 0
    doc = read_json(tmp_path / "coefficients.json")
    assert doc["mode"] == "certified_upper_bounds"
    assert doc["coefficients"]["gamma_bound"] >= 0
    assert doc["coefficients"]["delta_sq_bound"] >= 0


def test_missing_model_file_is_config_error(tmp_path, capsys):
    code = main(["coeffs", "--model", "/nowhere/else.model", "--n", "10",
                 "--m", "2", "--out", str(tmp_path)])
    assert code == 2
    assert "/nowhere/else.model" in capsys.readouterr().err


def test_model_file_round_trip(tmp_path):
    model_file = tmp_path / "chain.model"
    model_file.write_text(
        "states = up down\ndenom = 1\nf_num = 1 -1\n"
        "transition = 0.9 0.1  0.3 0.7\n")
    assert main(["coeffs", "--model", str(model_file), "--n", "64", "--m", "4",
                 "--out", str(tmp_path)]) == 0
    doc = read_json(tmp_path / "coefficients.json")
    assert doc["model"]["name"] == "chain.model"
    assert doc["coefficients"]["sigma_n"] > 0


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as err:
        main(["nosuchcommand"])
    assert err.value.code == 2


def test_unknown_model_is_config_error(tmp_path):
    assert main(["coeffs", "--model", "bogus_model", "--n", "16", "--m", "2",
                 "--out", str(tmp_path)]) == 2


def test_broken_chain_is_model_error(tmp_path, capsys):
    model_file = tmp_path / "flip.model"
    model_file.write_text(
        "states = a b\ndenom = 1\nf_num = 1 -1\ntransition = 0 1  1 0\n")
    code = main(["coeffs", "--model", str(model_file), "--n", "16", "--m", "2",
                 "--out", str(tmp_path)])
    assert code == 3
    assert "period" in capsys.readouterr().err


def test_verify_bundle_and_ratio_shape(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--model", "two_state:rho=0.4", "--n", "1024",
                 "--beta", "2", "--x-max", "2", "--x-count", "21",
                 "--out", str(out)]) == 0
    header, rows = read_csv(out / "ratio.csv")
    assert header[:5] == ["x", "ratio", "lo", "hi", "envelope"]
    first, last = float(rows[0][1]), float(rows[-1][1])
    assert abs(first - 1.0) < abs(last - 1.0)
    ks = read_json(out / "ks.json")
    assert ks["checks"]["violation"] is None
    assert ks["ks_exact"] > 0
    assert ks["quad_char"]["exact"] <= ks["quad_char"]["bound"]
    header2, rows2 = read_csv(out / "bounds.csv")
    assert header2 == ["x", "exact_tail", "bernstein", "envelope", "envelope_valid"]
    for row in rows2:
        assert float(row[1]) <= float(row[2])


def test_verify_rademacher_ratio_value(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--model", "rademacher", "--n", "100", "--m", "5",
                 "--x-min", "0", "--x-max", "2", "--x-count", "3",
                 "--out", str(out)]) == 0
    _, rows = read_csv(out / "ratio.csv")
    at_one = [r for r in rows if float(r[0]) == 1.0][0]
    assert float(at_one[1]) == pytest.approx(1.16, abs=0.005)


def test_verify_rejects_bad_constant(tmp_path):
    assert main(["verify", "--model", "rademacher", "--n", "64", "--m", "4",
                 "--constant", "-1", "--out", str(tmp_path)]) == 2


def test_verify_byte_identical_across_threads(tmp_path):
    out1, out4 = tmp_path / "a", tmp_path / "b"
    for out, threads in ((out1, "1"), (out4, "4")):
        assert main(["verify", "--model", "two_state:rho=0.4", "--n", "256",
                     "--m", "5", "--seed", "11", "--threads", threads,
                     "--out", str(out)]) == 0
    for name in ("ratio.csv", "bounds.csv", "ks.json"):
        assert (out1 / name).read_bytes() == (out4 / name).read_bytes()


def test_config_file_overrides_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 64}))
    assert main(["coeffs", "--model", "rademacher", "--n", "400", "--m", "4",
                 "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert read_json(tmp_path / "coefficients.json")["coefficients"]["n"] == 64


def test_mdp_subcommand(tmp_path):
    assert main(["mdp", "--model", "rademacher", "--n", "100", "--c", "1",
                 "--a-exp", "0.25", "--n-grid", "1000000",
                 "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "mdp.csv")
    assert header == ["n", "scaled_log_tail", "limit"]
    assert abs(float(rows[0][1]) + 0.5) <= 0.05


def test_coupling_subcommand(tmp_path):
    assert main(["coupling", "--model", "two_state:rho=0.4", "--n", "256",
                 "--m", "5", "--chains", "5000", "--out", str(tmp_path)]) == 0
    doc = read_json(tmp_path / "coupling.json")
    assert doc["report"]["lambda_hat"] < 0
    header, rows = read_csv(tmp_path / "pairs.csv")
    assert header == ["z", "y", "gap"]
    assert len(rows) == 5000
    z, y, gap = (float(v) for v in rows[0])
    assert gap == pytest.approx(abs(y - z), abs=1e-12)


def test_report_subcommand(tmp_path):
    out = tmp_path / "rep"
    assert main(["report", "--model", "rademacher", "--n", "128", "--m", "4",
                 "--chains", "2000", "--x-max", "2", "--x-count", "9",
                 "--n-grid", "10000", "--out", str(out)]) == 0
    summary = read_json(out / "summary.json")
    assert all(v == "ok" for v in summary["results"].values())
    for name in ("coefficients.json", "ratio.csv", "bounds.csv", "ks.json",
                 "coupling.json", "pairs.csv", "mdp.csv", "summary.json"):
        assert (out / name).exists()


def test_manifest_headers_share_config_hash(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--model", "rademacher", "--n", "64", "--m", "4",
                 "--out", str(out)]) == 0
    hashes = set()
    for name in ("ratio.csv", "bounds.csv"):
        first = (out / name).read_text().splitlines()[0]
        hashes.add(json.loads(first[2:])["config_hash"])
    assert len(hashes) == 1
