import json

import numpy as np
import pytest

from hyperspdc import __version__
from hyperspdc.cli import main
from hyperspdc.hyperhom import PAIRS, PortPairTrace
from hyperspdc.jsa import bin_coefficients, ideal_jsa, load_matrix_csv, save_matrix_csv, schmidt_decompose
from hyperspdc.pipeline import ConfigError, ExperimentConfig, PipelineError, run, validate


def _write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def _cfg(tmp_path, data):
    return ExperimentConfig.load(_write(tmp_path, data))


SMALL_JSA = {"layout": "c4", "n_points": 96, "delta_rad_per_ps": 6.0, "sigma_rad_per_ps": 1.0}


# -------------------------------------------------------------- validation


def test_valid_config_has_no_diagnostics(tmp_path):
    cfg = _cfg(tmp_path, {"kind": "schmidt", "output_dir": "o", "jsa": SMALL_JSA})
    assert validate(cfg) == []


def test_negative_sigma_names_the_field(tmp_path):
    cfg = _cfg(tmp_path, {"kind": "schmidt", "output_dir": "o", "jsa": {**SMALL_JSA, "sigma_rad_per_ps": -1.0}})
    diags = validate(cfg)
    assert len(diags) == 1
    assert "jsa.sigma_rad_per_ps" in diags[0]


def test_hom_inter_without_jsa(tmp_path):
    cfg = _cfg(tmp_path, {"kind": "hom-inter", "output_dir": "o"})
    assert "missing jsa input" in validate(cfg)


def test_all_problems_are_listed(tmp_path):
    cfg = _cfg(tmp_path, {
        "kind": "tofs-roundtrip",
        "jsa": {"layout": "c4", "n_points": 0, "sigma": 1.0},
        "tofs": {"bin_width_ps": -5},
    })
    diags = "\n".join(validate(cfg))
    for needle in ("jsa.n_points", "jsa.sigma", "unknown key", "tofs.bin_width_ps", "seed", "output_dir"):
        assert needle in diags


def test_missing_input_file_is_diagnosed(tmp_path):
    cfg = _cfg(tmp_path, {"kind": "schmidt", "output_dir": "o", "jsa": {"real_csv": "nowhere.csv"}})
    diags = validate(cfg)
    assert len(diags) == 1 and "nowhere.csv" in diags[0]
    with pytest.raises(ConfigError, match="nowhere.csv"):
        run(cfg)


def test_unknown_kind_and_block(tmp_path):
    diags = validate(_cfg(tmp_path, {"kind": "hom", "output_dir": "o", "extras": {}}))
    assert any(d.startswith("kind:") for d in diags)
    assert any(d.startswith("extras:") for d in diags)


# -------------------------------------------------------------------- runs


def test_manifest_lists_every_file(tmp_path):
    out = tmp_path / "o"
    res = run(_cfg(tmp_path, {"kind": "simulate-jsa", "output_dir": str(out), "seed": 0, "jsa": SMALL_JSA}))
    written = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
    manifest = json.loads((out / "manifest.json").read_text())
    assert [f["path"] for f in manifest["files"]] == written == list(res.files)
    assert manifest["version"] == __version__
    assert manifest["seed"] == 0
    assert manifest["parameters"]["jsa"]["sigma_rad_per_ps"] == 1.0
    assert all(len(f["sha256"]) == 64 for f in manifest["files"])


def test_identical_config_and_seed_give_identical_bytes(tmp_path):
    base = {"kind": "tofs-roundtrip", "seed": 11, "jsa": {**SMALL_JSA, "n_points": 64}, "tofs": {"n_pairs": 20000}}
    a = run(_cfg(tmp_path, {**base, "output_dir": str(tmp_path / "a")}))
    b = run(_cfg(tmp_path, {**base, "output_dir": str(tmp_path / "b")}))
    assert a.files == b.files
    for name in a.files + ("manifest.json",):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    c = run(_cfg(tmp_path, {**base, "seed": 12, "output_dir": str(tmp_path / "c")}))
    assert (tmp_path / "c" / "tofs_histogram.csv").read_bytes() != (tmp_path / "a" / "tofs_histogram.csv").read_bytes()


def test_four_bin_figure_data(tmp_path):
    out = tmp_path / "o"
    run(_cfg(tmp_path, {"kind": "figure-repro", "output_dir": str(out), "figure": {"target": "four-bin-jsa"},
                        "jsa": SMALL_JSA}))
    re, s, i = load_matrix_csv(out / "jsa_real.csv")
    im, _, _ = load_matrix_csv(out / "jsa_imag.csv")
    ref = ideal_jsa("c4", 6.0, 1.0, 96).normalized()
    np.testing.assert_allclose(re + 1j * im, ref.values, atol=1e-14)
    summary = json.loads((out / "schmidt.json").read_text())
    # oracle: the discrete bin-coefficient matrix
    A, _ = bin_coefficients("c4")
    lam = np.linalg.svd(A, compute_uv=False) ** 2
    assert summary["K"] == pytest.approx(1 / np.sum(lam**2), abs=1e-6)
    marg = np.loadtxt(out / "marginals.csv", delimiter=",", skiprows=1)
    ds = s[1] - s[0]
    assert marg[:, 1].sum() * ds == pytest.approx(1.0)
    # signal marginal weights: 1/4, 1/2, 1/4 in the three signal bins
    w0 = ref.s_axis.center
    for off, w in ((-6.0, 0.25), (0.0, 0.5), (6.0, 0.25)):
        sel = np.abs(marg[:, 0] - w0 - off) < 3.0
        assert marg[sel, 1].sum() * ds == pytest.approx(w, abs=1e-6)


def test_hom_hyper_phi0_da_writes_three_traces(tmp_path):
    out = tmp_path / "o"
    res = run(_cfg(tmp_path, {"kind": "hom-hyper", "output_dir": str(out), "jsa": SMALL_JSA,
                              "hyperhom": {"phi_rad": 0.0, "basis": "DA"}}))
    csvs = [f for f in res.files if f.endswith(".csv")]
    assert len(csvs) == 3
    traces = {t.pair: t for t in (PortPairTrace.from_csv(out / f) for f in csvs)}
    assert set(traces) == set(PAIRS)
    zero = int(np.argmin(np.abs(traces["same-pol-cross-port"].delays)))
    # only same-polarisation cross-port coincidences at zero delay, the others vanish there
    assert traces["same-pol-cross-port"].probability[zero] == pytest.approx(1.0, abs=1e-9)
    assert traces["cross-pol-same-port"].probability[zero] < 1e-9
    assert traces["cross-pol-cross-port"].probability[zero] < 1e-9
    # away from the dip everything returns to the uncorrelated split
    far = traces["same-pol-cross-port"].probability[0]
    assert far == pytest.approx(0.5, abs=1e-6)


def test_module_errors_name_module_and_config(tmp_path):
    # a non-square grid is fine for Schmidt analysis but not for intra-pair interference
    m = np.ones((4, 6))
    save_matrix_csv(tmp_path / "re.csv", m, np.arange(4.0) + 1000, np.arange(6.0) + 1000)
    cfg_path = _write(tmp_path, {"kind": "hom-intra", "output_dir": str(tmp_path / "o"),
                                 "jsa": {"real_csv": "re.csv"}})
    with pytest.raises(PipelineError) as err:
        run(ExperimentConfig.load(cfg_path))
    assert err.value.module == "hom"
    assert str(cfg_path) in str(err.value)


def test_jsa_from_files_round_trip(tmp_path):
    ref = ideal_jsa("c4", 6.0, 1.0, 64).normalized()
    ref.to_csv(tmp_path / "re.csv", tmp_path / "im.csv")
    out = tmp_path / "o"
    run(_cfg(tmp_path, {"kind": "schmidt", "output_dir": str(out),
                        "jsa": {"real_csv": "re.csv", "imag_csv": "im.csv"}}))
    K = json.loads((out / "schmidt.json").read_text())["K"]
    assert K == pytest.approx(schmidt_decompose(ref).K, rel=1e-12)


def test_noisy_hom_fit_recovers_parameters(tmp_path):
    out = tmp_path / "o"
    run(_cfg(tmp_path, {"kind": "hom-intra", "output_dir": str(out), "seed": 5, "jsa": SMALL_JSA,
                        "hom": {"counts_per_point": 5000}}))
    fit = json.loads((out / "hom_fit.json").read_text())
    assert fit["model"] == "intra-pi"
    assert abs(fit["delta"] - 6.0) < 4 * fit["delta_stderr"] + 0.02


# ---------------------------------------------------------------------- CLI


def test_cli_missing_input_file(tmp_path, capsys):
    cfg = _write(tmp_path, {"kind": "hom-intra", "output_dir": "o", "jsa": {"real_csv": "absent.csv"}})
    assert main(["hom-intra", "--config", str(cfg)]) != 0
    assert "absent.csv" in capsys.readouterr().err


def test_cli_missing_config_file(tmp_path, capsys):
    assert main(["schmidt", "--config", str(tmp_path / "none.json")]) != 0
    assert "none.json" in capsys.readouterr().err


def test_cli_validate_only(tmp_path, capsys):
    good = _write(tmp_path, {"kind": "schmidt", "jsa": SMALL_JSA})
    assert main(["schmidt", "--config", str(good), "--validate-only"]) == 0
    assert main(["hom-inter", "--validate-only"]) == 1
    assert "missing jsa input" in capsys.readouterr().out
    assert not (tmp_path / "o").exists()


def test_cli_kind_mismatch(tmp_path, capsys):
    cfg = _write(tmp_path, {"kind": "schmidt", "jsa": SMALL_JSA})
    assert main(["hom-intra", "--config", str(cfg), "--validate-only"]) == 1


def test_cli_seed_override_and_out(tmp_path, capsys):
    cfg = _write(tmp_path, {"kind": "tomo-fit", "seed": 1, "tomo": {"mc_trials": 50}})
    assert main(["tomo-fit", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "7"]) == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["seed"] == 7
    summary = json.loads((tmp_path / "a" / "tomo_summary.json").read_text())
    assert summary["fidelity"] > 0.99
    assert summary["fidelity_mc_failed"] == 0


def test_cli_design_crystal(tmp_path):
    out = tmp_path / "o"
    assert main(["design-crystal", "--out", str(out)]) == 0
    summary = json.loads((out / "crystal_summary.json").read_text())
    assert summary["fidelity"] > 0.99
    assert summary["antinode_phase_difference_rad"] == pytest.approx(np.pi, abs=0.01)
    poling = np.loadtxt(out / "poling.csv", delimiter=",", skiprows=1)
    assert np.min(np.diff(poling[:, 0])) >= 0.009 - 1e-9
