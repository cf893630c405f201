"""TOML configuration loading, validation and editing."""

import json
import math

import pytest

from src import config
from src.elliptic import EllipticConvention
from src.errors import ConfigError
from src.settings import SimulationConfig, config_from_mapping, load_config, snapshot_digest


def _write(tmp_path, text):
    path = tmp_path / "link.toml"
    path.write_text(text)
    return path


def test_baseline_file():
    cfg = load_config(config.CONFIGS_DIR / "baseline.toml")
    geom = cfg.link_geometry()
    assert (geom.n_tx, geom.n_rx) == (8, 8)
    assert geom.axial_distance == pytest.approx(25e-3)
    assert geom.is_aligned
    assert cfg.link_budget().snr_grid == (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)
    assert cfg.pilot_config().pilot_snr == pytest.approx(1000.0)
    elec = cfg.coil_electrical()
    assert elec.resonance_frequency == pytest.approx(13.56e6)
    assert cfg.convention is EllipticConvention.STANDARD
    assert cfg.flags.correlation == 'coupling'


def test_misaligned_file_uses_perfect_csi():
    cfg = load_config(config.CONFIGS_DIR / "misaligned.toml")
    geom = cfg.link_geometry()
    assert geom.offset_x == pytest.approx(5e-3)
    assert geom.tilt_x == pytest.approx(math.radians(10))
    assert cfg.pilot_config().perfect


def test_omitted_keys_take_defaults(tmp_path):
    cfg = load_config(_write(tmp_path, "[geometry]\naxial_distance_mm = 30\n"))
    assert cfg.geometry.axial_distance_mm == 30.0
    assert isinstance(cfg.geometry.axial_distance_mm, float)
    assert cfg.geometry.n_tx == config.N_TX
    assert cfg.electrical.resonance_mhz == pytest.approx(13.35)
    assert cfg.flags.correlation == 'coupling'
    assert config_from_mapping({}) == SimulationConfig()


def test_unknown_key_reports_its_line(tmp_path):
    path = _write(tmp_path, "[geometry]\nn_tx = 8\nwobble = 3\n")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.key == "geometry.wobble"
    assert info.value.line == 3


def test_unknown_section(tmp_path):
    path = _write(tmp_path, "[budget]\ntx_power_w = 8\n\n[antenna]\ngain = 2\n")
    with pytest.raises(ConfigError) as info:
        load_config(path)
    assert info.value.key == "antenna"
    assert info.value.line == 4


@pytest.mark.parametrize("text,key", [
    ('[geometry]\nn_tx = "eight"\n', "geometry.n_tx"),
    ('[geometry]\nn_tx = 8.5\n', "geometry.n_tx"),
    ('[flags]\ncrosstalk = 1\n', "flags.crosstalk"),
    ('[flags]\nconvention = "half"\n', "flags.convention"),
    ('[budget]\nsnr_db = [0, true]\n', "budget.snr_db"),
    ('[budget]\nsnr_db = 10\n', "budget.snr_db"),
    ('[pilot]\nsnr_db = "high"\n', "pilot.snr_db"),
])
def test_wrong_types(tmp_path, text, key):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, text))
    assert info.value.key == key
    assert info.value.line == 2


def test_infeasible_geometry(tmp_path):
    path = _write(tmp_path, "# overlapping coils\n[geometry]\ncoil_radius_tx_mm = 20\n")
    with pytest.raises(ConfigError, match="overlap") as info:
        load_config(path)
    assert info.value.key == "geometry"
    assert info.value.line == 2


def test_infeasible_pilot(tmp_path):
    path = _write(tmp_path, "[pilot]\nlength = 16\nroot = 2\n")
    with pytest.raises(ConfigError, match="coprime") as info:
        load_config(path)
    assert info.value.key == "pilot.root"
    assert info.value.line == 3


def test_zero_trials(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, "[run]\ntrials = 0\n"))
    assert info.value.key == "run.trials"


def test_toml_syntax_error(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(_write(tmp_path, "[geometry]\nn_tx = 8\nn_rx = = 4\n"))
    assert info.value.line == 3


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.toml")


def test_infinite_pilot_snr_and_choices(tmp_path):
    cfg = load_config(_write(tmp_path, '[pilot]\nsnr_db = inf\n\n[flags]\nconvention = "Doubled"\n'))
    assert cfg.pilot_config().perfect
    assert cfg.convention is EllipticConvention.DOUBLED


def test_electrical_overrides(tmp_path):
    cfg = load_config(_write(tmp_path, "[electrical]\nself_inductance_h = 1e-6\nresistance_ohm = 0.5\n"))
    elec = cfg.coil_electrical()
    assert elec.self_inductance == 1e-6
    assert elec.resistance == 0.5


def test_replace_and_get():
    base = SimulationConfig()
    tilted = base.replace("geometry.tilt_x_deg", 10)
    assert tilted.get("geometry.tilt_x_deg") == 10.0
    assert base.get("geometry.tilt_x_deg") == 0.0
    assert base.replace("geometry.n_tx", 4.0).geometry.n_tx == 4
    assert base.replace("budget.snr_db", [0, 10]).budget.snr_db == (0.0, 10.0)
    with pytest.raises(ConfigError):
        base.replace("geometry.n_tx", "four")
    with pytest.raises(ConfigError):
        base.replace("geometry.wobble", 1)
    with pytest.raises(ConfigError):
        base.get("tilt_x_deg")


def test_snapshot_and_digest():
    base = SimulationConfig()
    snap = base.snapshot()
    assert set(snap) == {"geometry", "electrical", "budget", "pilot", "flags", "run"}
    json.dumps(snap)
    assert base.digest() == SimulationConfig().digest()
    assert base.digest() == snapshot_digest(snap)
    assert base.replace("run.seed", 7).digest() != base.digest()
    assert len(base.digest()) == 64
