"""Command-line surface: exit codes, staged outputs and report contents."""

import numpy as np
import pandas as pd
import pytest

from src import config
from src.channel import channel_from_geometry, embed_channel, export_s_parameters, write_s_parameters
from src.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from src.harness import RECIPES
from src.settings import load_config

BASELINE = str(config.CONFIGS_DIR / "baseline.toml")
MISALIGNED = str(config.CONFIGS_DIR / "misaligned.toml")


def _toml(tmp_path, text, name="link.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read(path):
    return pd.read_csv(path, comment='#')


def test_channel_dump(tmp_path, capsys):
    out = tmp_path / "out" / "channel.csv"
    assert main(["channel", "--config", BASELINE, "--out", str(out)]) == EXIT_OK
    frame = _read(out)
    assert set(frame['matrix']) == {'H', 'M', 'Mt', 'H_hat', 'h_oam'}
    assert (frame['matrix'] == 'H').sum() == 64
    assert "circulant residual" in capsys.readouterr().out
    assert [p.name for p in out.parent.iterdir()] == ["channel.csv"]


def test_channel_without_fold_skips_reduction(tmp_path, capsys):
    cfg = _toml(tmp_path, "[geometry]\nn_rx = 12\n")
    out = tmp_path / "channel.csv"
    assert main(["channel", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert "reduction skipped" in capsys.readouterr().err
    assert set(_read(out)['matrix']) == {'H', 'M', 'Mt'}


def test_evaluate_report(tmp_path, capsys):
    out = tmp_path / "report.csv"
    assert main(["evaluate", "--config", BASELINE, "--out", str(out), "--per-mode"]) == EXIT_OK
    table = _read(out)
    assert table['snr_db'].tolist() == [0.0, 5.0, 10.0, 15.0, 20.0, 25.0]
    assert table['capacity_oam'].is_monotonic_increasing
    high = table[table['snr_db'] >= 20]
    assert (high['capacity_oam'] > high['capacity_siso']).all()
    assert "Per-mode report" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# config_digest: ")
    assert lines[1] == "# seed: 42"


def test_oam_ahead_of_siso_and_mimo_from_16_db(tmp_path):
    text = (config.CONFIGS_DIR / "baseline.toml").read_text().replace(
        "snr_db = [0, 5, 10, 15, 20, 25]", "snr_db = [" + ", ".join(map(str, range(16, 31))) + "]")
    out = tmp_path / "report.csv"
    assert main(["evaluate", "--config", _toml(tmp_path, text), "--out", str(out)]) == EXIT_OK
    t = _read(out)
    assert t['snr_db'].tolist() == [float(s) for s in range(16, 31)]
    assert (t['capacity_oam'] > t['capacity_siso']).all()
    assert (t['capacity_oam'] > t['capacity_mimo']).all()


def test_bounds_bracket_the_simplified_capacity(tmp_path):
    out = tmp_path / "report.csv"
    assert main(["evaluate", "--config", BASELINE, "--bounds", "--out", str(out)]) == EXIT_OK
    t = _read(out)
    assert (t['bounds_lower'] <= t['capacity_oam_simplified'] + 1e-9).all()
    assert (t['capacity_oam_simplified'] <= t['bounds_upper'] + 1e-9).all()


def test_bounds_need_alignment(tmp_path, capsys):
    out = tmp_path / "report.csv"
    assert main(["evaluate", "--config", MISALIGNED, "--bounds", "--out", str(out)]) == EXIT_CONFIG
    assert "aligned" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_zero_power_reports_zero_capacity(tmp_path):
    cfg = _toml(tmp_path, "[budget]\ntx_power_w = 0\nsnr_db = []\n")
    out = tmp_path / "report.csv"
    assert main(["evaluate", "--config", cfg, "--out", str(out)]) == EXIT_OK
    t = _read(out)
    assert len(t) == 1
    for column in ('capacity_oam', 'capacity_ls', 'capacity_siso'):
        assert t[column].iloc[0] == 0.0


def test_config_errors_exit_2(tmp_path, capsys):
    cfg = _toml(tmp_path, "[geometry]\nwobble = 1\n")
    assert main(["evaluate", "--config", cfg]) == EXIT_CONFIG
    assert "wobble" in capsys.readouterr().err
    assert main(["sweep", "fig99"]) == EXIT_CONFIG
    assert main(["sweep"]) == EXIT_CONFIG
    assert main(["sweep", "fig4b", "--axis", "budget.snr_db=0,10"]) == EXIT_CONFIG


def test_trials_argument():
    with pytest.raises(SystemExit) as info:
        main(["evaluate", "--trials", "0.5"])
    assert info.value.code == 2


# ----------------------------------------------------------------------------
# S-parameter import
# ----------------------------------------------------------------------------

def test_import_matches_direct_evaluation(tmp_path):
    cfg = load_config(BASELINE)
    geom = cfg.link_geometry()
    ch = channel_from_geometry(geom, cfg.coil_electrical(geom), convention=cfg.convention)
    sparams = tmp_path / "link_s.csv"
    export_s_parameters(ch, sparams)

    direct, imported = tmp_path / "direct.csv", tmp_path / "imported.csv"
    assert main(["evaluate", "--config", BASELINE, "--out", str(direct)]) == EXIT_OK
    assert main(["import-s", str(sparams), "--config", BASELINE, "--out", str(imported)]) == EXIT_OK
    a, b = _read(direct), _read(imported)
    np.testing.assert_allclose(b['capacity_ls'], a['capacity_ls'], rtol=1e-10)
    np.testing.assert_allclose(b['ber_ls'], a['ber_ls'], rtol=1e-10)
    assert 'capacity_oam' not in b
    assert 'ber_analytic' not in b


def test_import_missing_entry_exits_2(tmp_path, capsys):
    path = tmp_path / "s.csv"
    write_s_parameters(embed_channel(np.ones((4, 4)), 13.56e6), path)
    kept = [ln for ln in path.read_text().splitlines() if not ln.startswith("3,5,")]
    path.write_text("\n".join(kept) + "\n")
    assert main(["import-s", str(path)]) == EXIT_CONFIG
    assert "(3, 5)" in capsys.readouterr().err


def test_import_port_count_checked(tmp_path):
    path = tmp_path / "s.csv"
    write_s_parameters(embed_channel(np.ones((4, 4)), 13.56e6), path)
    assert main(["import-s", str(path), "--n-tx", "8"]) == EXIT_CONFIG


def test_dead_imported_channel_exits_3(tmp_path, capsys):
    path = tmp_path / "s.csv"
    write_s_parameters(embed_channel(np.zeros((8, 8)), 13.56e6), path)
    cfg = _toml(tmp_path, "[pilot]\nsnr_db = inf\n")
    out = tmp_path / "out" / "report.csv"
    assert main(["import-s", str(path), "--config", cfg, "--out", str(out)]) == EXIT_NUMERICAL
    assert "error:" in capsys.readouterr().err
    assert not out.exists()


# ----------------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------------

def _inline_sweep(out):
    return main(["sweep", "--axis", "budget.snr_db=0:10:5", "--metrics", "capacity_oam,capacity_ls",
                 "--config", BASELINE, "--seed", "3", "--jobs", "1", "--quiet", "--json",
                 "--out", str(out)])


def test_inline_sweep_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a" / "custom.csv", tmp_path / "b" / "custom.csv"
    assert _inline_sweep(a) == EXIT_OK
    assert _inline_sweep(b) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix('.json').exists()
    table = _read(a)
    assert table['budget.snr_db'].tolist() == [0.0, 5.0, 10.0]
    assert "3 evaluated, 0 skipped" in capsys.readouterr().out


def test_sweep_reports_skipped_points(tmp_path, capsys):
    out = tmp_path / "r.csv"
    args = ["sweep", "--axis", "geometry.coil_radius_tx_mm=0,5", "--metrics", "capacity_oam",
            "--quiet", "--out", str(out)]
    assert main(args) == EXIT_OK
    assert "1 evaluated, 1 skipped" in capsys.readouterr().out
    assert _read(out)['skipped'].iloc[0].startswith("GeometryError")


def test_sweep_bad_axis(tmp_path):
    assert main(["sweep", "--axis", "budget.snr_db", "--metrics", "capacity_oam"]) == EXIT_CONFIG
    assert main(["sweep", "--axis", "budget.snr_db=0:a:1", "--metrics", "capacity_oam"]) == EXIT_CONFIG
    assert main(["sweep", "--axis", "budget.snr_db=0,10"]) == EXIT_CONFIG


def test_recipes_listing(capsys):
    assert main(["recipes"]) == EXIT_OK
    listed = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
    assert listed == list(RECIPES)
