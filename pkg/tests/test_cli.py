import json

import numpy as np

from casq.cli import main
from casq.ingest import write_fcidump

from conftest import make_random_integrals


def run_cli(args, tmp_path, out_name="out"):
    out = tmp_path / out_name
    code = main(args + ["--out", str(out)])
    manifest = None
    mpath = out / "manifest.json"
    if mpath.is_file():
        manifest = json.loads(mpath.read_text())
    return code, out, manifest


def test_count_table_spaces(tmp_path, capsys):
    code, _, manifest = run_cli(
        ["count", "--nelec", "13", "--norb", "14", "--ms2", "1"], tmp_path)
    assert code == 0
    assert capsys.readouterr().out.strip() == "10306296"
    assert manifest["config"]["count"] == 10306296
    code, _, _ = run_cli(["count", "--nelec", "9", "--norb", "5",
                          "--ms2", "1"], tmp_path, "out2")
    assert code == 0


def test_count_parity_error(tmp_path, capsys):
    code, _, manifest = run_cli(
        ["count", "--nelec", "2", "--norb", "2", "--ms2", "1"], tmp_path)
    assert code == 1
    assert manifest["status"] == "failed"
    assert "parity" in capsys.readouterr().err


def test_casci_lf_preset_zeta_zero(tmp_path, capsys):
    code, out, manifest = run_cli(
        ["casci", "--lf", "d1-tetragonal", "--zeta", "0"], tmp_path)
    assert code == 0
    report = json.loads((out / "casci_report.json").read_text())
    assert len(report) == 5
    assert all(r["multiplicity"] == 2 for r in report)
    # single-determinant states at zeta = 0 in the diagonal field
    for r in report:
        assert len(r["decomposition"]) == 1
        assert r["decomposition"][0].endswith("(100%)")
    assert manifest["status"] == "ok"
    assert "casci" in manifest["timings_s"]


def test_casci_oracle_mode(tmp_path):
    code, out, manifest = run_cli(
        ["casci", "--lf", "d9-planar", "--oracle", "dense"], tmp_path)
    assert code == 0
    assert "oracle" in manifest["timings_s"]


def test_casci_fcidump_roundtrip(tmp_path):
    ints = make_random_integrals(4, 201)
    (tmp_path / "model.fcidump").write_text(write_fcidump(ints, 4, 0))
    (tmp_path / "run.cfg").write_text(
        "cas_nelec=4\ncas_norb=4\nroots_mult_1=3\nroots_mult_3=2\n")
    code, out, manifest = run_cli(
        ["casci", "--fcidump", str(tmp_path / "model.fcidump"),
         "--config", str(tmp_path / "run.cfg")], tmp_path)
    assert code == 0
    report = json.loads((out / "casci_report.json").read_text())
    mults = sorted(r["multiplicity"] for r in report)
    assert mults == [1, 1, 1, 3, 3]
    assert len(manifest["inputs"]) == 2


def test_casci_missing_fcidump(tmp_path):
    code, _, manifest = run_cli(
        ["casci", "--fcidump", str(tmp_path / "absent.fcidump")], tmp_path)
    assert code == 1
    assert manifest["status"] == "failed"


def test_casci_requires_one_source(tmp_path, capsys):
    code, _, _ = run_cli(["casci"], tmp_path)
    assert code == 1
    assert "exactly one of" in capsys.readouterr().err


def test_gtensor_d1_zeta_zero(tmp_path, capsys):
    code, out, _ = run_cli(["gtensor", "--lf", "d1", "--zeta", "0"], tmp_path)
    assert code == 0
    data = json.loads((out / "gtensor_report.json").read_text())
    eha = next(r for r in data["g"] if r["method"] == "EHA")
    assert (eha["g_x"], eha["g_y"], eha["g_z"]) == (2.002, 2.002, 2.002)
    assert "2.002" in capsys.readouterr().out


def test_gtensor_d1_ordering(tmp_path):
    code, out, _ = run_cli(["gtensor", "--lf", "d1"], tmp_path)
    assert code == 0
    data = json.loads((out / "gtensor_report.json").read_text())
    for row in data["g"]:
        assert row["g_z"] < row["g_x"] <= 2.0024
        assert row["g_x"] == row["g_y"]


def test_gtensor_d9_ordering(tmp_path):
    code, out, _ = run_cli(["gtensor", "--lf", "d9"], tmp_path)
    assert code == 0
    data = json.loads((out / "gtensor_report.json").read_text())
    for row in data["g"]:
        assert row["g_z"] > row["g_x"] >= 2.003


def test_gtensor_even_electron_refused(tmp_path, capsys):
    ints = make_random_integrals(3, 202)
    (tmp_path / "even.fcidump").write_text(write_fcidump(ints, 2, 0))
    code, _, _ = run_cli(
        ["gtensor", "--fcidump", str(tmp_path / "even.fcidump")], tmp_path)
    assert code == 1
    assert "odd electron" in capsys.readouterr().err


def test_spectrum_from_lines(tmp_path):
    (tmp_path / "lines.txt").write_text(
        "2.0 1.0 Q\n# comment\n3.1 0.5\n")
    (tmp_path / "spec.cfg").write_text(
        "cas_nelec=1\ncas_norb=1\nspectrum_min_ev=0\nspectrum_max_ev=5\n"
        "spectrum_step_ev=0.01\nspectrum_fwhm_ev=0.1\n")
    code, out, _ = run_cli(
        ["spectrum", "--lines", str(tmp_path / "lines.txt"),
         "--config", str(tmp_path / "spec.cfg")], tmp_path)
    assert code == 0
    rows = (out / "spectrum.csv").read_text().strip().splitlines()
    assert rows[0] == "energy_eV,intensity"
    data = np.array([r.split(",") for r in rows[1:]], dtype=float)
    peak = data[np.argmax(data[:, 1]), 0]
    assert abs(peak - 2.0) <= 0.01
    lines = json.loads((out / "lines.json").read_text())
    assert lines[0]["band"] == "Q"


def test_spectrum_zero_lines_flat(tmp_path):
    (tmp_path / "lines.txt").write_text("")
    code, out, _ = run_cli(
        ["spectrum", "--lines", str(tmp_path / "lines.txt")], tmp_path)
    assert code == 0
    rows = (out / "spectrum.csv").read_text().strip().splitlines()[1:]
    assert all(float(r.split(",")[1]) == 0.0 for r in rows)


def test_spectrum_two_degenerate_lines_double(tmp_path):
    (tmp_path / "one.txt").write_text("2.0 0.5\n")
    (tmp_path / "two.txt").write_text("2.0 0.5\n2.0 0.5\n")
    _, out1, _ = run_cli(["spectrum", "--lines", str(tmp_path / "one.txt")],
                         tmp_path, "o1")
    _, out2, _ = run_cli(["spectrum", "--lines", str(tmp_path / "two.txt")],
                         tmp_path, "o2")
    a = np.array([r.split(",")[1] for r in
                  (out1 / "spectrum.csv").read_text().strip().splitlines()[1:]],
                 dtype=float)
    b = np.array([r.split(",")[1] for r in
                  (out2 / "spectrum.csv").read_text().strip().splitlines()[1:]],
                 dtype=float)
    assert np.allclose(b, 2 * a, atol=1e-12)


def test_spectrum_missing_dipoles(tmp_path, capsys):
    ints = make_random_integrals(3, 203)
    (tmp_path / "m.fcidump").write_text(write_fcidump(ints, 3, 1))
    code, _, _ = run_cli(
        ["spectrum", "--fcidump", str(tmp_path / "m.fcidump")], tmp_path)
    assert code == 1
    assert "dipole" in capsys.readouterr().err


def test_spectrum_with_dipoles_from_prop(tmp_path):
    ints = make_random_integrals(3, 204)
    (tmp_path / "m.fcidump").write_text(write_fcidump(ints, 3, 1))
    rng = np.random.default_rng(0)
    d = rng.standard_normal((3, 3))
    d = (d + d.T) / 2.0
    prop_text = "DIP_X\n" + "\n".join(" ".join(map(str, row)) for row in d)
    (tmp_path / "m.prop").write_text(prop_text)
    code, out, _ = run_cli(
        ["spectrum", "--fcidump", str(tmp_path / "m.fcidump"),
         "--prop", str(tmp_path / "m.prop"), "--roots-mult", "2=3"], tmp_path)
    assert code == 0
    lines = json.loads((out / "lines.json").read_text())
    assert len(lines) == 2
    assert all(ln["f_osc"] >= 0 for ln in lines)


def test_manifest_written_on_every_run(tmp_path):
    for args, name in [
        (["count", "--nelec", "1", "--norb", "5", "--ms2", "1"], "a"),
        (["casci", "--lf", "d1"], "b"),
        (["casci", "--fcidump", "/nonexistent"], "c"),
    ]:
        _, out, manifest = run_cli(args, tmp_path, name)
        assert manifest is not None
        assert manifest["artifact_version"]
        assert manifest["exit_code"] is not None


def test_reproducible_reports(tmp_path):
    _, out1, _ = run_cli(["casci", "--lf", "d9-planar"], tmp_path, "r1")
    _, out2, _ = run_cli(["casci", "--lf", "d9-planar"], tmp_path, "r2")
    assert (out1 / "casci_report.txt").read_text() == \
        (out2 / "casci_report.txt").read_text()


def test_roots_mult_flag_parsing(tmp_path, capsys):
    code, _, _ = run_cli(
        ["casci", "--lf", "d1", "--roots-mult", "banana"], tmp_path)
    assert code == 1
    assert "N=K" in capsys.readouterr().err


def test_casci_nonconvergence_exit_code(tmp_path, capsys):
    ints = make_random_integrals(6, 205)
    (tmp_path / "m.fcidump").write_text(write_fcidump(ints, 6, 0))
    (tmp_path / "hard.cfg").write_text(
        "cas_nelec=6\ncas_norb=6\nroots_mult_1=4\n"
        "davidson_tol=1e-15\ndavidson_max_iter=1\nguess_dim=8\n")
    code, _, manifest = run_cli(
        ["casci", "--fcidump", str(tmp_path / "m.fcidump"),
         "--config", str(tmp_path / "hard.cfg")], tmp_path)
    assert code == 2
    assert manifest["status"] == "failed"
    assert "non-convergence" in capsys.readouterr().err


def test_casci_norb_mismatch(tmp_path, capsys):
    ints = make_random_integrals(4, 206)
    (tmp_path / "m.fcidump").write_text(write_fcidump(ints, 4, 0))
    (tmp_path / "bad.cfg").write_text("cas_nelec=4\ncas_norb=6\nroots_mult_1=1\n")
    code, _, _ = run_cli(
        ["casci", "--fcidump", str(tmp_path / "m.fcidump"),
         "--config", str(tmp_path / "bad.cfg")], tmp_path)
    assert code == 1
    assert "does not match" in capsys.readouterr().err
