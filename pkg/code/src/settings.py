"""
Simulation Configuration Files
==============================

Loads a TOML file into a frozen SimulationConfig and converts its file units
(mm, degrees, MHz, ohm*mm^2/m, mm^2, W) into the SI objects the library uses.

Example::

    [geometry]
    n_tx = 8
    n_rx = 8
    axial_distance_mm = 25.0
    tilt_x_deg = 10.0

    [budget]
    tx_power_w = 8.0
    snr_db = [0, 5, 10, 15, 20]

    [pilot]
    snr_db = inf          # perfect CSI

Unknown sections or keys, wrong types and infeasible values raise ConfigError
naming the key and, when the key appears in the file, its line.
"""

import hashlib
import json
import math
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace as dc_replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union, get_args, get_origin

from . import config
from .elliptic import EllipticConvention
from .errors import ConfigError, OamNfcError
from .geometry import LinkGeometry
from .inductance import CoilElectrical, coil_electrical
from .txrx import LinkBudget, PilotConfig

CONVENTIONS = ('standard', 'doubled')
DETECTORS = ('blind', 'ls')
CORRELATIONS = ('identity', 'coupling', 'spatial')


@dataclass(frozen=True)
class GeometrySection:
    n_tx: int = config.N_TX
    n_rx: int = config.N_RX
    ring_radius_tx_mm: float = config.RING_RADIUS_M * 1e3
    ring_radius_rx_mm: float = config.RING_RADIUS_M * 1e3
    coil_radius_tx_mm: float = config.COIL_RADIUS_M * 1e3
    coil_radius_rx_mm: float = config.COIL_RADIUS_M * 1e3
    turns_tx: int = config.TURNS
    turns_rx: int = config.TURNS
    axial_distance_mm: float = config.AXIAL_DISTANCE_M * 1e3
    offset_x_mm: float = 0.0
    offset_y_mm: float = 0.0
    tilt_x_deg: float = 0.0
    tilt_y_deg: float = 0.0


@dataclass(frozen=True)
class ElectricalSection:
    frequency_mhz: float = config.FREQUENCY_HZ / 1e6
    resonance_mhz: float = config.RESONANCE_HZ / 1e6
    resistivity: float = config.RESISTIVITY_OHM_M * 1e6      # ohm*mm^2/m
    wire_section_mm2: float = config.WIRE_SECTION_M2 * 1e6
    self_inductance_h: Optional[float] = None
    capacitance_f: Optional[float] = None
    resistance_ohm: Optional[float] = None


@dataclass(frozen=True)
class BudgetSection:
    tx_power_w: float = config.TX_POWER_W
    noise_power_w: float = config.NOISE_POWER_W
    snr_db: Tuple[float, ...] = ()


@dataclass(frozen=True)
class PilotSection:
    length: int = config.PILOT_LENGTH
    root: int = config.PILOT_ROOT
    snr_db: float = config.PILOT_SNR_DB


@dataclass(frozen=True)
class FlagsSection:
    crosstalk: bool = True
    convention: str = 'standard'
    detector: str = 'blind'
    correlation: str = 'coupling'
    waterfill: bool = False


@dataclass(frozen=True)
class RunSection:
    seed: int = config.RANDOM_SEED
    trials: int = config.BER_TRIALS


_SECTIONS = {
    'geometry': GeometrySection,
    'electrical': ElectricalSection,
    'budget': BudgetSection,
    'pilot': PilotSection,
    'flags': FlagsSection,
    'run': RunSection,
}

_CHOICES = {
    ('flags', 'convention'): CONVENTIONS,
    ('flags', 'detector'): DETECTORS,
    ('flags', 'correlation'): CORRELATIONS,
}


@dataclass(frozen=True)
class SimulationConfig:
    geometry: GeometrySection = field(default_factory=GeometrySection)
    electrical: ElectricalSection = field(default_factory=ElectricalSection)
    budget: BudgetSection = field(default_factory=BudgetSection)
    pilot: PilotSection = field(default_factory=PilotSection)
    flags: FlagsSection = field(default_factory=FlagsSection)
    run: RunSection = field(default_factory=RunSection)

    # ------------------------------------------------------------------
    # SI views
    # ------------------------------------------------------------------

    def link_geometry(self) -> LinkGeometry:
        g = self.geometry
        return LinkGeometry(
            n_tx=g.n_tx,
            n_rx=g.n_rx,
            ring_radius_tx=g.ring_radius_tx_mm * 1e-3,
            ring_radius_rx=g.ring_radius_rx_mm * 1e-3,
            coil_radius_tx=g.coil_radius_tx_mm * 1e-3,
            coil_radius_rx=g.coil_radius_rx_mm * 1e-3,
            turns_tx=g.turns_tx,
            turns_rx=g.turns_rx,
            axial_distance=g.axial_distance_mm * 1e-3,
            offset_x=g.offset_x_mm * 1e-3,
            offset_y=g.offset_y_mm * 1e-3,
            tilt_x=math.radians(g.tilt_x_deg),
            tilt_y=math.radians(g.tilt_y_deg),
        )

    def coil_electrical(self, geom: Optional[LinkGeometry] = None) -> CoilElectrical:
        e = self.electrical
        return coil_electrical(
            geom or self.link_geometry(),
            frequency=e.frequency_mhz * 1e6,
            resonance_frequency=e.resonance_mhz * 1e6,
            resistivity=e.resistivity * 1e-6,
            wire_cross_section=e.wire_section_mm2 * 1e-6,
            self_inductance_h=e.self_inductance_h,
            capacitance_f=e.capacitance_f,
            resistance_ohm=e.resistance_ohm,
        )

    def link_budget(self) -> LinkBudget:
        b = self.budget
        return LinkBudget(b.tx_power_w, b.noise_power_w, b.snr_db)

    def pilot_config(self) -> PilotConfig:
        p = self.pilot
        return PilotConfig.from_db(p.length, p.root, p.snr_db)

    @property
    def convention(self) -> EllipticConvention:
        return EllipticConvention(self.flags.convention)

    # ------------------------------------------------------------------
    # Editing and identity
    # ------------------------------------------------------------------

    def replace(self, path: str, value: Any) -> 'SimulationConfig':
        """Copy with one dotted key (e.g. 'geometry.tilt_x_deg') set; types are checked."""
        section, key = _split_path(path)
        current = getattr(self, section)
        coerced = _coerce(section, key, value, _field_types(type(current))[key])
        return dc_replace(self, **{section: dc_replace(current, **{key: coerced})})

    def get(self, path: str) -> Any:
        section, key = _split_path(path)
        return getattr(getattr(self, section), key)

    def snapshot(self) -> Dict[str, Dict[str, Any]]:
        out = {}
        for name in _SECTIONS:
            section = asdict(getattr(self, name))
            out[name] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in section.items()}
        return out

    def digest(self) -> str:
        return snapshot_digest(self.snapshot())

    def validate(self, text: Optional[str] = None) -> 'SimulationConfig':
        """Build every SI object once so infeasible values fail before any computation."""
        try:
            geom = self.link_geometry()
        except OamNfcError as exc:
            raise ConfigError(str(exc), key='geometry', line=_locate(text, 'geometry')) from exc
        try:
            self.coil_electrical(geom)
        except OamNfcError as exc:
            raise ConfigError(str(exc), key='electrical', line=_locate(text, 'electrical')) from exc
        try:
            self.link_budget()
            self.pilot_config()
        except OamNfcError as exc:
            key = getattr(exc, 'key', None) or 'budget'
            raise ConfigError(str(exc), key=key, line=_locate(text, key)) from exc
        if self.run.trials < 1:
            raise ConfigError("trials must be >= 1", key='run.trials', line=_locate(text, 'run.trials'))
        return self


def snapshot_digest(snapshot: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical (sorted, compact) JSON form."""
    text = json.dumps(snapshot, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode()).hexdigest()


# ==============================================================================
# PARSING
# ==============================================================================

def _split_path(path: str) -> Tuple[str, str]:
    parts = path.split('.')
    if len(parts) != 2 or parts[0] not in _SECTIONS:
        raise ConfigError(f"unknown setting {path!r}; use 'section.key'", key=path)
    section, key = parts
    if key not in _field_types(_SECTIONS[section]):
        raise ConfigError(f"unknown setting {path!r}", key=path)
    return section, key


def _field_types(section_cls) -> Dict[str, Any]:
    return {f.name: f.type for f in fields(section_cls)}


def _locate(text: Optional[str], path: Optional[str]) -> Optional[int]:
    """1-based line of a section header or 'key =' assignment inside its section."""
    if not text or not path:
        return None
    parts = path.split('.')
    section_pattern = re.compile(rf'^\s*\[\s*{re.escape(parts[0])}\s*\]')
    lines = text.splitlines()
    if len(parts) == 1:
        for i, line in enumerate(lines, 1):
            if section_pattern.match(line):
                return i
        return None
    key_pattern = re.compile(rf'^\s*{re.escape(parts[1])}\s*=')
    inside = False
    for i, line in enumerate(lines, 1):
        if re.match(r'^\s*\[', line):
            inside = bool(section_pattern.match(line))
        elif inside and key_pattern.match(line):
            return i
    return None


def _coerce(section: str, key: str, value: Any, annotation: Any, text: Optional[str] = None) -> Any:
    path = f"{section}.{key}"
    line = _locate(text, path)

    def fail(expected: str):
        raise ConfigError(f"expected {expected}, got {value!r}", key=path, line=line)

    origin = get_origin(annotation)
    if origin is Union:
        if value is None:
            return None
        inner = [a for a in get_args(annotation) if a is not type(None)][0]
        return _coerce(section, key, value, inner, text)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            fail("a list of numbers")
        items = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                fail("a list of numbers")
            items.append(float(item))
        return tuple(items)
    if annotation is bool:
        if not isinstance(value, bool):
            fail("true or false")
        return value
    if annotation is int:
        if isinstance(value, bool):
            fail("an integer")
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            fail("an integer")
        return value
    if annotation is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail("a number")
        return float(value)
    if annotation is str:
        if not isinstance(value, str):
            fail("a string")
        choices = _CHOICES.get((section, key))
        if choices and value.lower() not in choices:
            fail(f"one of {', '.join(choices)}")
        return value.lower()
    return value


def config_from_mapping(data: Mapping[str, Any], text: Optional[str] = None) -> SimulationConfig:
    """Validate a parsed mapping (sections of key/value pairs) into a SimulationConfig."""
    sections = {}
    for name, body in data.items():
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]", key=name, line=_locate(text, name))
        if not isinstance(body, Mapping):
            raise ConfigError(f"[{name}] must be a table", key=name, line=_locate(text, name))
        types = _field_types(_SECTIONS[name])
        values = {}
        for key, value in body.items():
            if key not in types:
                raise ConfigError(f"unknown key {key!r} in [{name}]", key=f"{name}.{key}",
                                  line=_locate(text, f"{name}.{key}"))
            values[key] = _coerce(name, key, value, types[key], text)
        sections[name] = _SECTIONS[name](**values)
    return SimulationConfig(**sections).validate(text)


def load_config(path: Union[str, Path]) -> SimulationConfig:
    """
    Read and validate a TOML configuration file.

    Raises:
        ConfigError: unreadable file, TOML syntax error, unknown key, wrong
            type or infeasible value
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = re.search(r'line (\d+)', str(exc))
        raise ConfigError(f"{path}: {exc}", line=int(match.group(1)) if match else None) from exc
    return config_from_mapping(data, text)
