import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from helpers import kinked_pair
from softcue.cli import main
from softcue.skinfit import LayerStack, forward_compression
from softcue.trace import write_traces


def run(argv, tmp_path, name="report.json"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out), "--no-timestamp"])
    return code, json.loads(out.read_text())


def synth_spring(path, seed=0, k=1.5, noise=0.0):
    code = main(["synth", "--model", "spring", "--k", str(k), "--rate", "1", "--peak", "2",
                 "--seed", str(seed), "--noise", str(noise), "--out", str(path)])
    assert code == 0


def test_synth_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    synth_spring(a, seed=7, noise=0.02)
    synth_spring(b, seed=7, noise=0.02)
    assert a.read_bytes() == b.read_bytes()
    assert "# seed=7" in a.read_text()


def test_synth_hertz_and_skin(tmp_path):
    assert main(["synth", "--model", "hertz", "--profile", "ramp-hold", "--hold", "0.5",
                 "--out", str(tmp_path / "h.csv")]) == 0
    assert main(["synth", "--model", "skin", "--k", "2.5", "--out", str(tmp_path / "s.csv")]) == 0
    assert "d_mm,force_N" in (tmp_path / "s.csv").read_text()


def test_cues_three_springs(tmp_path):
    trials = tmp_path / "trials"
    trials.mkdir()
    for i in range(3):
        synth_spring(trials / f"t{i}.csv", seed=i)
    table = tmp_path / "cues.csv"
    code, rep = run(["cues", str(trials), "--table", str(table)], tmp_path)
    assert code == 0 and rep["errors"] == []
    assert [r["trial"] for r in rep["results"]["trials"]] == ["t0", "t1", "t2"]
    for r in rep["results"]["trials"]:
        assert r["fused_stiffness"] == pytest.approx(1.5, abs=1e-6)
    assert rep["schema"] == 1 and rep["command"] == "cues" and "timestamp" not in rep
    assert len(table.read_text().splitlines()) == 4


def test_cues_empty_directory(tmp_path):
    (tmp_path / "none").mkdir()
    code, rep = run(["cues", str(tmp_path / "none")], tmp_path)
    assert code == 0 and rep["results"]["trials"] == []


def test_cues_malformed_file(tmp_path):
    trials = tmp_path / "trials"
    trials.mkdir()
    synth_spring(trials / "a.csv", seed=1, noise=0.01)
    synth_spring(trials / "b.csv", seed=2, noise=0.01)
    (trials / "c.csv").write_text("t,force,displacement\n0,zero,1\n")
    code, rep = run(["cues", str(trials)], tmp_path)
    assert code != 0
    assert len(rep["results"]["trials"]) == 2
    assert [e["file"] for e in rep["errors"]] == ["c.csv"]


def test_reports_are_byte_identical(tmp_path):
    trials = tmp_path / "trials"
    trials.mkdir()
    synth_spring(trials / "a.csv", noise=0.01, seed=3)
    synth_spring(trials / "b.csv", noise=0.01, seed=4)
    out = tmp_path / "r.json"
    main(["cues", str(trials), "--no-timestamp", "--out", str(out)])
    first = out.read_bytes()
    main(["cues", str(trials), "--no-timestamp", "--out", str(out)])
    assert out.read_bytes() == first


def test_timestamp_present_by_default(tmp_path):
    (tmp_path / "none").mkdir()
    main(["cues", str(tmp_path / "none"), "--out", str(tmp_path / "r.json")])
    assert "timestamp" in json.loads((tmp_path / "r.json").read_text())


def test_frechet_time(tmp_path):
    h, s, t_cross = kinked_pair(0.5, 1.0, 2.0)
    write_traces(tmp_path / "h.csv", h)
    write_traces(tmp_path / "s.csv", s)
    profile = tmp_path / "profile.csv"
    code, rep = run(["frechet-time", "--first", str(tmp_path / "h.csv"),
                     "--second", str(tmp_path / "s.csv"), "--window", "1",
                     "--profile", str(profile)], tmp_path)
    assert code == 0
    assert t_cross < rep["results"]["time_s"] <= t_cross + 0.05 + 1e-12
    with open(profile) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "dissimilarity", "reference", "ratio"]
    assert len(rows) - 1 == rep["results"]["profile_points"]


def test_recognize_time(tmp_path):
    synth_spring(tmp_path / "a.csv")
    traj = tmp_path / "traj.csv"
    code, rep = run(["recognize-time", str(tmp_path / "a.csv"), "--meas-variance", "0.5",
                     "--init-variance", "1", "--trajectory", str(traj)], tmp_path)
    assert code == 0
    assert rep["results"]["terminal_stiffness"] == pytest.approx(1.5, abs=1e-9)
    assert rep["results"]["recognized"]
    assert traj.read_text().splitlines()[0] == "t,gain,estimate,variance"


def _responses(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["condition", "pair", "truth", "response"])
        w.writerows(rows)


def _block(condition, pair, hit_n, fa_n, n=100):
    rows = [(condition, pair, "different", "different")] * hit_n
    rows += [(condition, pair, "different", "same")] * (n - hit_n)
    rows += [(condition, pair, "same", "different")] * fa_n
    rows += [(condition, pair, "same", "same")] * (n - fa_n)
    return rows


def test_dprime_table_rows(tmp_path):
    path = tmp_path / "resp.csv"
    _responses(path, _block("passive-same", "10,4&90,6", 35, 33)
               + _block("passive-same", "10,4&90,8", 43, 35)
               + _block("passive-same", "90,6&90,8", 33, 38))
    code, rep = run(["dprime", str(path)], tmp_path)
    assert code == 0
    got = {r["pair"]: r["dprime"] for r in rep["results"]["table"]}
    assert got["10,4&90,6"] == pytest.approx(0.41, abs=0.06)
    assert got["10,4&90,8"] == pytest.approx(0.84, abs=0.06)
    assert got["90,6&90,8"] == 0.0


def test_dprime_malformed_rows(tmp_path):
    path = tmp_path / "resp.csv"
    _responses(path, _block("c", "p", 7, 3, n=10) + [("c", "p", "same", "perhaps")])
    code, rep = run(["dprime", str(path)], tmp_path)
    assert code == 1
    assert rep["errors"][0]["line"] == 22
    assert len(rep["results"]["table"]) == 1


def test_dprime_needs_correction(tmp_path):
    path = tmp_path / "resp.csv"
    _responses(path, _block("c", "p", 10, 0, n=10))
    code, rep = run(["dprime", str(path)], tmp_path)
    assert code == 1 and rep["results"]["table"][0]["dprime"] is None
    code, rep = run(["dprime", str(path), "--correction", "half_trial"], tmp_path)
    assert code == 0 and rep["results"]["table"][0]["hit"] == 0.95


def test_psychfit(tmp_path):
    from softcue.psycho import psychometric

    levels = np.linspace(0, 0.8, 9)
    path = tmp_path / "psy.csv"
    with open(path, "w") as fh:
        fh.write("level,n_correct,n_total\n")
        for x, p in zip(levels, psychometric(levels, 0.4, 8.0)):
            fh.write(f"{x},{400 * p},400\n")
    curve = tmp_path / "curve.csv"
    code, rep = run(["psychfit", str(path), "--curve", str(curve)], tmp_path)
    assert code == 0
    assert rep["results"]["threshold"] == pytest.approx(0.4, abs=1e-3)
    assert rep["results"]["deviance"] <= 1e-6
    assert len(curve.read_text().splitlines()) == 102


def test_skinfit_round_trip(tmp_path):
    assert main(["synth", "--model", "skin", "--k", "2.5", "--out", str(tmp_path / "s.csv")]) == 0
    code, rep = run(["skinfit", str(tmp_path / "s.csv")], tmp_path)
    assert code == 0
    assert rep["results"]["k"] == pytest.approx(2.5, rel=1e-3)
    assert rep["results"]["moduli_kPa"]["hypodermis"] == pytest.approx(2.5, rel=1e-3)


def test_skinfit_hand_written_csv(tmp_path):
    d = np.linspace(0, 3, 20)
    F = forward_compression(LayerStack(k=0.7, area=30.0), d)
    path = tmp_path / "m.csv"
    path.write_text("d_mm,force_N\n" + "".join(f"{a!r},{b!r}\n" for a, b in zip(d.tolist(), F.tolist())))
    code, rep = run(["skinfit", str(path), "--area", "30"], tmp_path)
    assert rep["results"]["k"] == pytest.approx(0.7, rel=1e-3)


def test_area_unit_square(tmp_path):
    path = tmp_path / "print.csv"
    path.write_text("x_px,y_px\n0,0\n1,0\n1,1\n0,1\nscale_bar_px,5\n")
    code, rep = run(["area", str(path)], tmp_path)
    assert code == 0 and rep["results"]["area_cm2"] == 1.0


def test_cluster(tmp_path):
    rng = np.random.default_rng(2)
    path = tmp_path / "pts.csv"
    with open(path, "w") as fh:
        fh.write("force,displacement,label\n")
        for lab, (cx, cy) in enumerate([(1, 1), (1, 4), (4, 1), (4, 4)]):
            for x, y in rng.normal((cx, cy), 0.3, (30, 2)):
                fh.write(f"{x},{y},{lab}\n")
    code, rep = run(["cluster", str(path), "--k", "4", "--seed", "3"], tmp_path)
    assert code == 0
    assert rep["results"]["columns"] == ["force", "displacement"]
    assert rep["results"]["match_rate"] >= 0.9
    hist = rep["results"]["sse_history"]
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_stats_compare_and_spearman(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("group,value\n" + "".join(f"a,{v}\n" for v in range(1, 6))
                    + "".join(f"b,{v}\n" for v in range(6, 11)))
    code, rep = run(["stats", str(path), "--iterations", "200"], tmp_path)
    assert code == 0
    assert rep["results"]["U"] == 0 and rep["results"]["p"] == pytest.approx(2 / 252)
    path = tmp_path / "xy.csv"
    path.write_text("x,y\n1,2\n2,3\n3,9\n")
    code, rep = run(["stats", str(path), "--test", "spearman"], tmp_path)
    assert rep["results"]["rho"] == 1.0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nk = 2.0\nseed=5\nnoise = 0.01\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["synth", "--config", str(cfg), "--out", str(a)]) == 0
    assert "# k=2.0" in a.read_text() and "# seed=5" in a.read_text()
    assert main(["synth", "--config", str(cfg), "--k", "3", "--out", str(b)]) == 0
    assert "# k=3.0" in b.read_text()


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = red\n")
    with pytest.raises(SystemExit):
        main(["synth", "--config", str(cfg)])


def test_config_satisfies_required_arguments(tmp_path):
    h, s, _ = kinked_pair(0.5, 1.0, 2.0)
    write_traces(tmp_path / "h.csv", h)
    write_traces(tmp_path / "s.csv", s)
    cfg = tmp_path / "pair.cfg"
    cfg.write_text(f"first = {tmp_path / 'h.csv'}\nsecond = {tmp_path / 's.csv'}\nwindow = 1\n")
    code, rep = run(["frechet-time", "--config", str(cfg)], tmp_path)
    assert code == 0 and rep["settings"]["window"] == 1


def test_missing_file_exit_code(tmp_path):
    assert main(["area", str(tmp_path / "missing.csv"), "--no-timestamp"]) == 2


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "softcue", "--version"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip().startswith("softcue")
