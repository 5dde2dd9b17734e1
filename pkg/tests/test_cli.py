import subprocess
import sys

import pytest

from gfdomain.cli import main


def test_certify_table(capsys):
    assert main(["certify", "cubic2d"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("[S]") and out[1].startswith("0  ([-0.333")


def test_certify_csv_with_global_flags_after_verb(tmp_path, capsys):
    rc = main(["certify", "cubic2d", "--s", "random", "--count", "2", "--format", "csv",
               "--seed", "1", "--order", "6", "--out", str(tmp_path)])
    assert rc == 0
    text = (tmp_path / "certify_cubic2d.csv").read_text()
    assert text == capsys.readouterr().out
    assert len(text.splitlines()) == 3 and ",6," in text.splitlines()[1]


def test_certify_fixed_box_and_explicit_s(capsys):
    assert main(["certify", "cubic2d", "--s-values", "0 2 0", "--box-scale", "1.0",
                 "--max-pieces", "4000", "--format", "csv"]) == 0
    row = capsys.readouterr().out.splitlines()[1]
    assert row.startswith("S1,Certified,1.0,")


def test_seed_determinism(capsys):
    args = ["--seed", "3", "certify", "cubic2d", "--s", "random", "--count", "2", "--format", "csv"]
    main(args)
    a = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == a


def test_sweep(tmp_path, capsys):
    assert main(["--out", str(tmp_path), "sweep", "cubic2d", "--count", "3", "--scales", "0,1",
                 "--target-scale", "0.2"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("scale,fraction\n0.0,1.0\n") and "# spearman" in out
    assert (tmp_path / "sweep_cubic2d.csv").exists()


def test_track(tmp_path, capsys):
    assert main(["track", "cubic2d", "--turns", "500", "--launches", "10", "--max-amp", "0.3",
                 "--axis", "0", "--record", "3", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "axis,aperture" and out[1].startswith("q1,")
    assert len(list((tmp_path / "orbits").iterdir())) == 10


def test_integrate_and_config(tmp_path, capsys):
    assert main(["--order", "9", "integrate", "growth"]) == 0
    out = capsys.readouterr().out
    assert "RDA VARIABLE" in out and "max_remainder" in out
    cfg = tmp_path / "c.cfg"
    cfg.write_text("brho = proton1MeV\nsext_form = standard\n")
    assert main(["--config", str(cfg), "--order", "3", "--out", str(tmp_path), "integrate", "cell",
                 "--halfwidth", "0.05"]) == 0
    assert (tmp_path / "flow_cell.tm").read_text().count("REFERENCE POINT") == 4


def test_numerical_error_exit_code(capsys):
    assert main(["--order", "3", "integrate", "cell", "--halfwidth", "0.1", "0.1", "0.8", "0.8"]) == 2
    assert "numerical error" in capsys.readouterr().err


def test_dump_tm_component(capsys):
    assert main(["--order", "3", "dump-tm", "table3", "--component", "0"]) == 0
    out = capsys.readouterr().out
    assert out.count("RDA VARIABLE") == 1 and "0.1398" in out


def test_bad_verb_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "gfdomain", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for verb in ("certify", "sweep", "track", "integrate", "dump-tm"):
        assert verb in r.stdout
