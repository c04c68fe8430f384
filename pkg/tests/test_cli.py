import numpy as np
import pytest

from helmfem.cli import RunConfig, cmd_plane_wave, cmd_scattering, cmd_verify, main

HEADER = ("n,h,p,k,E_fem,E_ba,E_est,E_est_guar,eff_est,eff_guar,"
          "eta,osc,c_ba,c_up")


def test_plane_wave_schema_and_determinism(tmp_path):
    config = RunConfig(command="plane-wave", k=np.pi, degree=1, n_values=(4,))
    lines1 = cmd_plane_wave(config)
    lines2 = cmd_plane_wave(RunConfig(command="plane-wave", k=np.pi,
                                      degree=1, n_values=(4,)))
    assert lines1[0] == HEADER
    assert lines1 == lines2
    row = lines1[1].split(",")
    assert len(row) == len(HEADER.split(","))
    assert row[0] == "4"


def test_plane_wave_degenerate_n1():
    lines = cmd_plane_wave(RunConfig(command="plane-wave", k=2.0, degree=1,
                                     n_values=(1,)))
    assert len(lines) == 2


def test_plane_wave_writes_file(tmp_path):
    out = tmp_path / "sweep.csv"
    cmd_plane_wave(RunConfig(command="plane-wave", k=np.pi, degree=1,
                             n_values=(2, 4), out=str(out)))
    text = out.read_text().splitlines()
    assert text[0] == HEADER
    assert len(text) == 3


def test_scattering_zero_iterations(tmp_path):
    out = tmp_path / "adapt.csv"
    lines, states = cmd_scattering(RunConfig(
        command="scattering", k=2 * np.pi, degree=1, iterations=0,
        out=str(out), p_ref=2))
    assert len(states) == 1
    assert lines[1] == "iter,n_elem,h_min,h_max,E_fem,E_est,eff"
    assert "c_up=42.05" in lines[0]
    assert lines[2].startswith("0,44,")


def test_scattering_k10pi_header():
    lines, _ = cmd_scattering(RunConfig(
        command="scattering", k=10 * np.pi, degree=1, iterations=0, p_ref=2))
    assert "c_up=198.94" in lines[0]


def test_scattering_snapshots(tmp_path):
    snap = tmp_path / "snaps"
    cmd_scattering(RunConfig(command="scattering", k=2 * np.pi, degree=1,
                             iterations=1, p_ref=2, snapshot_dir=str(snap)))
    assert (snap / "mesh_iter_000.txt").exists()
    assert (snap / "elem_iter_000.csv").exists()
    header = (snap / "elem_iter_000.csv").read_text().splitlines()[0]
    assert header == "elem,eta_K,err_K"


def test_verify_passes():
    assert cmd_verify() == 0


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(command="plane-wave", k=-1.0).validate()
    with pytest.raises(ValueError):
        RunConfig(command="plane-wave", degree=9).validate()
    with pytest.raises(ValueError):
        RunConfig(command="plane-wave", n_values=(0,)).validate()


def test_main_entry(tmp_path, capsys):
    out = tmp_path / "cli.csv"
    assert main(["plane-wave", "--k", "2.0", "--p", "1", "--n", "2",
                 "--out", str(out)]) == 0
    assert out.read_text().startswith("n,h,p,k,")


def test_worker_count_env(monkeypatch):
    from helmfem.solver import worker_count
    monkeypatch.setenv("HELM_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("HELM_THREADS", "junk")
    assert worker_count() == 1
    monkeypatch.delenv("HELM_THREADS")
    assert worker_count() == 1
