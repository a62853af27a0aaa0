import json
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from hybridspec import cli, fileio, presets
from hybridspec.params import ConfigError
from hybridspec.spectra import Spectrum, compute_spectrum, sweep_transmon


def write_config(path, system=None, **options):
    data = {"system": (system or presets.triple_resonance()).to_dict()}
    data.update(options)
    path.write_text(json.dumps(data))
    return str(path)


def sig_close(a, b, digits=9):
    np.testing.assert_allclose(a, b, rtol=10.0 ** (1 - digits), atol=0)


# ------------------------------------------------------------- files

@settings(max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(arrays(np.float64, 20, elements=st.floats(-1e3, 1e3)),
       arrays(np.float64, 20, elements=st.floats(-1e3, 1e3)))
def test_spectrum_csv_round_trip(tmp_path, re, im):
    if not np.any(np.hypot(re, im) > 1e-3):
        return
    f = 3000.0 + np.cumsum(np.full(20, 0.0137))
    s = Spectrum.from_s21(f, re + 1j * im)
    path = tmp_path / "s.csv"
    fileio.write_spectrum(path, s)
    back = fileio.read_spectrum(path)
    assert back.format == "complex"
    sig_close(back.spectrum.freqs, f)
    sig_close(back.spectrum.s21.real, re)
    sig_close(back.spectrum.s21.imag, im)


def test_spectrum_csv_header(tmp_path, triple):
    s = compute_spectrum("bare", triple, 2990, 3010, 5)
    text = fileio.format_spectrum(s)
    assert text.splitlines()[0] == "freq_mhz,s21_re,s21_im,s21_db"
    assert len(text.splitlines()) == 6


def test_power_only_and_db_files(tmp_path):
    f = np.linspace(1.0, 2.0, 11)
    p = np.linspace(0.1, 1.0, 11)
    path = tmp_path / "p.csv"
    fileio.write_spectrum(path, Spectrum.from_power(f, p))
    back = fileio.read_spectrum(path)
    assert back.format == "magnitude-dB" and back.spectrum.s21 is None
    sig_close(back.spectrum.power, p, 8)
    dbfile = tmp_path / "db.csv"
    dbfile.write_text("freq_mhz,s21_db\n1.0,-3.0103\n2.0,0\n")
    np.testing.assert_allclose(fileio.read_spectrum(dbfile).spectrum.power, [0.5, 1.0],
                               rtol=1e-5)


def test_nan_rows_dropped_with_count(tmp_path):
    path = tmp_path / "n.csv"
    path.write_text("freq_mhz,s21_re,s21_im,s21_db\n1,1,0,0\n2,nan,0,0\n3,,,\n4,0.5,0.5,-3\n")
    with pytest.warns(UserWarning, match="dropped 2 row"):
        tf = fileio.read_spectrum(path)
    assert tf.dropped == 2 and len(tf.spectrum) == 2


@pytest.mark.filterwarnings("ignore:.*dropped")
@pytest.mark.parametrize("text", [
    "", "f,s21_db\n1,0\n", "freq_mhz,other\n1,0\n", "freq_mhz,s21_db\n2,0\n1,0\n",
    "freq_mhz,s21_db\n1,abc\n", "freq_mhz,s21_db\n1,nan\n",
])
def test_bad_trace_files(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(fileio.TraceFormatError):
        fileio.read_spectrum(path)


def test_sweep_and_branch_csv(tmp_path, triple):
    g = sweep_transmon(triple, np.linspace(2990, 3010, 5), np.linspace(2950, 3050, 51))
    fileio.write_sweep(tmp_path / "g.csv", g)
    fileio.write_branches(tmp_path / "b.csv", g)
    back = fileio.read_sweep(tmp_path / "g.csv")
    sig_close(back.sweep_values, g.sweep_values)
    np.testing.assert_allclose(back.magnitude_db, g.magnitude_db, rtol=1e-8, atol=1e-12)
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == ("f_t_mhz,branch1_mhz,branch2_mhz,branch3_mhz,"
                        "res_weight1,res_weight2,res_weight3")
    assert len(lines) == 6
    (tmp_path / "bad.csv").write_text("probe_mhz,1,2\n3000,0\n")
    with pytest.raises(fileio.TraceFormatError):
        fileio.read_sweep(tmp_path / "bad.csv")


def test_atomic_write_leaves_no_temp(tmp_path):
    path = tmp_path / "out.txt"
    fileio.atomic_write(path, "a")
    fileio.atomic_write(path, "b")
    assert path.read_text() == "b" and os.listdir(tmp_path) == ["out.txt"]
    with pytest.raises(OSError):
        fileio.atomic_write(tmp_path / "missing" / "x.txt", "c")


def test_config_loading(tmp_path, triple):
    cfg = fileio.load_config(write_config(tmp_path / "c.json", f_min=2950.0, f_max=3050.0,
                                          fixed=["kappa"]))
    assert cfg.system == triple and cfg.get("f_min") == 2950.0
    cases = [
        ({"f_min": 3050.0, "f_max": 2950.0}, "f_min"),
        ({"fixed": ["kapa"]}, "fixed"),
        ({"n_points": "many"}, "n_points"),
        ({"colour": 1}, "colour"),
    ]
    for opts, key in cases:
        with pytest.raises(ConfigError) as exc:
            fileio.load_config(write_config(tmp_path / "c.json", **opts))
        assert exc.value.key == key and key in str(exc.value)
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "system": {"f_r": 3000.0,}\n}')
    with pytest.raises(ConfigError, match=":2:"):
        fileio.load_config(bad)
    with pytest.raises(ConfigError):
        fileio.parse_config({"model": "jc"})


# ------------------------------------------------------------- CLI

def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_modes(capsys, tmp_path, triple):
    code, out, _ = run(capsys, "modes")
    data = json.loads(out)
    assert code == 0 and len(data["one_photon"]) == 5 and len(data["two_photon"]) == 15
    np.testing.assert_allclose(data["single_excitation"],
                               [3001.2 - 18.692793, 3001.2, 3001.2 + 18.692793], atol=1e-6)
    zero = triple.evolve(g_t=0.0, omega_e=0.0, f_t=3100.0, f_r=2950.0)
    code, out, _ = run(capsys, "modes", "--config", write_config(tmp_path / "z.json", zero))
    assert json.loads(out)["single_excitation"] == [2950.0, 3001.2, 3100.0]


def test_modes_bad_config(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"system": {"f_r": 3000.0, "kapa": 1}}')
    code, _, err = run(capsys, "modes", "--config", path)
    assert code == 1 and "kapa" in err
    code, _, err = run(capsys, "modes", "--config", tmp_path / "absent.json")
    assert code == 1


def test_simulate_and_peaks(capsys, tmp_path):
    out = tmp_path / "t.csv"
    assert run(capsys, "simulate", "--out", out, "--f-min", 2960, "--f-max", 3040,
               "--points", 1601, "--plot-script")[0] == 0
    assert (tmp_path / "t.gp").exists()
    code, text, _ = run(capsys, "peaks", out)
    peaks = json.loads(text)
    assert code == 0 and len(peaks) == 2
    assert peaks[1]["center"] - peaks[0]["center"] == pytest.approx(37.39, abs=0.1)
    flat = tmp_path / "flat.csv"
    flat.write_text("freq_mhz,s21_db\n1,0\n2,0\n3,0\n")
    assert json.loads(run(capsys, "peaks", flat)[1]) == []


def test_simulate_noise_needs_seed_and_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "simulate", "--noise", 0.02, "--out", a)[0] == 1
    assert not a.exists()
    for path in (a, b):
        assert run(capsys, "simulate", "--noise", 0.02, "--seed", 9, "--out", path,
                   "--points", 301)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_bare_model(capsys, tmp_path, triple):
    out = tmp_path / "bare.csv"
    assert run(capsys, "simulate", "--model", "bare", "--out", out, "--f-min", 3000,
               "--f-max", 3002.4, "--points", 2401)[0] == 0
    peaks = json.loads(run(capsys, "peaks", out)[1])
    assert len(peaks) == 1 and peaks[0]["fwhm"] == pytest.approx(triple.kappa, rel=0.01)


def test_sweep_command(capsys, tmp_path):
    out = tmp_path / "sw.csv"
    code = run(capsys, "sweep", "--out", out, "--steps", 11, "--points", 201, "--hyperfine")[0]
    assert code == 0
    header = (tmp_path / "sw_branches.csv").read_text().splitlines()[0]
    assert header.count("branch") == 5
    grid = fileio.read_sweep(out)
    assert grid.magnitude_db.shape == (201, 11)
    assert run(capsys, "sweep", "--steps", 3)[0] == 1  # needs --out


def test_sweep_single_column_matches_simulate(capsys, tmp_path):
    sw, sim = tmp_path / "sw.csv", tmp_path / "sim.csv"
    run(capsys, "sweep", "--out", sw, "--steps", 1, "--sweep-min", 3001.2, "--points", 101)
    run(capsys, "simulate", "--out", sim, "--points", 101)
    np.testing.assert_allclose(fileio.read_sweep(sw).magnitude_db[:, 0],
                               np.loadtxt(sim, delimiter=",", skiprows=1, usecols=3),
                               atol=1e-6)


def test_fit_commands(capsys, tmp_path):
    truth = presets.jc_characterization()
    cfg = write_config(tmp_path / "jc.json", truth.evolve(g_t=16.0))
    trace = tmp_path / "jc.csv"
    run(capsys, "simulate", "--config", write_config(tmp_path / "truth.json", truth),
        "--model", "jc", "--noise", 0.02, "--seed", 1,
        "--out", trace, "--f-min", 2975, "--f-max", 3040, "--points", 801)
    code, text, _ = run(capsys, "fit", trace, "--config", cfg, "--model", "jc")
    res = json.loads(text)
    assert code == 0 and res["converged"] and res["model"] == "jc"
    assert abs(res["params"]["g_t"] - truth.g_t) < 3 * res["sigma"]["g_t"]
    assert "kappa" not in res["params"]
    code, text, _ = run(capsys, "fit", trace, "--config", cfg, "--model", "jc",
                        "--fixed", "kappa,gamma_t")
    assert "gamma_t" not in json.loads(text)["sigma"]
    assert run(capsys, "fit", trace, "--config", cfg, "--model", "jc", "--fixed", "gamm")[0] == 1
    code, text, _ = run(capsys, "fit", trace, "--model", "lorentzian", "--n-peaks", 2)
    assert code == 0 and "center_2" in json.loads(text)["params"]


def test_fit_stepwise_command(capsys, tmp_path):
    out = tmp_path / "sw.csv"
    run(capsys, "sweep", "--out", out, "--steps", 41, "--points", 481, "--f-min", 2940,
        "--f-max", 3060)
    code, text, _ = run(capsys, "fit", out, "--model", "stepwise")
    res = json.loads(text)
    assert code == 0 and res["params"]["f_s"] == pytest.approx(3001.2, abs=0.05)
    assert res["derived"]["stage2_rms"] == res["residual_rms"]


def test_fit_exit_codes(capsys, tmp_path, monkeypatch):
    trace = tmp_path / "t.csv"
    run(capsys, "simulate", "--out", trace, "--points", 201)
    real = cli.fitting.fit_lorentzians

    def capped(s, n):
        res = real(s, n)
        res.converged = False
        return res

    monkeypatch.setattr(cli.fitting, "fit_lorentzians", capped)
    code, text, _ = run(capsys, "fit", trace, "--model", "lorentzian")
    assert code == 2 and json.loads(text)["converged"] is False

    def broken(*a, **k):
        raise cli.StepwiseError("nothing to track")

    monkeypatch.setattr(cli, "stepwise_estimate", broken)
    sw = tmp_path / "sw.csv"
    run(capsys, "sweep", "--out", sw, "--steps", 3, "--points", 51)
    assert run(capsys, "fit", sw, "--model", "stepwise")[0] == 3
    assert run(capsys, "fit", trace)[0] == 1  # no model given
    assert run(capsys, "bogus")[0] == 1


def test_partial_files_removed_on_failure(capsys, tmp_path, monkeypatch):
    def fail(*a, **k):
        raise cli.fileio.TraceFormatError("disk trouble")

    monkeypatch.setattr(cli.fileio, "write_branches", fail)
    out = tmp_path / "sw.csv"
    assert run(capsys, "sweep", "--out", out, "--steps", 3, "--points", 51)[0] == 1
    assert not out.exists()
