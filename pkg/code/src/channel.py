"""
Channel Assembly
================

Complex voltage-gain channel H of a coil-ring link, the row-averaged reduced
channel used by the OAM detector, block-circulant diagnostics, and the
S-parameter CSV dialect used to import externally simulated channels.

S-parameter dialect::

    # sparam v1, f_hz=<f>, n_tx=<N_t>, n_rx=<N_r>
    row,col,re,im
    1,1,<re>,<im>
    ...

Indices are 1-based and every entry of the (N_t + N_r)^2 matrix is present.
Ports 1..N_t are the transmit coils; H is rows N_t+1..N_t+N_r, columns 1..N_t.
"""

import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy import fft

from . import config
from .elliptic import EllipticConvention
from .errors import ChannelShapeError, SParameterError
from .geometry import LinkGeometry
from .inductance import CoilElectrical, MutualInductanceMatrix, build_inductance_matrices

SOURCES = ('analytic', 'imported')

_SPARAM_HEADER = re.compile(
    r'^#\s*sparam\s+v1\s*,\s*f_hz\s*=\s*(?P<f>[^,\s]+)\s*,'
    r'\s*n_tx\s*=\s*(?P<n_tx>\d+)\s*,\s*n_rx\s*=\s*(?P<n_rx>\d+)\s*$'
)


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Channel H (N_r x N_t) with its provenance."""
    h: np.ndarray
    source: str
    frequency: float
    geometry: Optional[LinkGeometry] = None
    mutual: Optional[MutualInductanceMatrix] = field(default=None, repr=False)
    electrical: Optional[CoilElectrical] = field(default=None, repr=False)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.ndim != 2 or min(h.shape) < 1:
            raise ChannelShapeError(f"channel must be a non-empty matrix, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ChannelShapeError("channel has non-finite entries")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        object.__setattr__(self, 'h', h)

    @property
    def n_rx(self) -> int:
        return self.h.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h.shape[1]

    @property
    def fold(self) -> Optional[int]:
        """I = N_r / N_t, or None when N_r is not a multiple of N_t."""
        if self.n_rx % self.n_tx:
            return None
        return self.n_rx // self.n_tx


@dataclass(frozen=True, eq=False)
class ReducedChannel:
    """Row-averaged channel H_hat (N_t x N_t) and the fold I it averaged over."""
    h_hat: np.ndarray
    fold: int


# ==============================================================================
# ASSEMBLY
# ==============================================================================

def assemble_channel(
    mi: MutualInductanceMatrix,
    elec: CoilElectrical,
    crosstalk: bool = True,
    geometry: Optional[LinkGeometry] = None,
) -> ChannelMatrix:
    """
    H = (-j w / Z) M - (w^2 / Z^2) M M^t.

    Args:
        mi: Transmit-receive and transmit-transmit inductances
        elec: Coil model giving w and Z
        crosstalk: Keep the transmit crosstalk term
        geometry: Optional geometry tag carried on the result

    Returns:
        Analytic ChannelMatrix
    """
    if mi.tx_tx.shape != (mi.n_tx, mi.n_tx):
        raise ChannelShapeError(
            f"crosstalk matrix {mi.tx_tx.shape} does not match M with {mi.n_tx} columns"
        )
    w = elec.omega
    z = elec.impedance
    h = (-1j * w / z) * mi.tx_rx
    if crosstalk:
        h = h - (w ** 2 / z ** 2) * (mi.tx_rx @ mi.tx_tx)
    return ChannelMatrix(h=h, source='analytic', frequency=elec.frequency,
                         geometry=geometry, mutual=mi, electrical=elec)


def channel_from_geometry(
    geom: LinkGeometry,
    elec: CoilElectrical,
    crosstalk: bool = True,
    convention: EllipticConvention = EllipticConvention.STANDARD,
) -> ChannelMatrix:
    """Geometry -> inductances -> H."""
    mi = build_inductance_matrices(geom, convention=convention)
    return assemble_channel(mi, elec, crosstalk=crosstalk, geometry=geom)


def crosstalk_ratio(mi: MutualInductanceMatrix, elec: CoilElectrical) -> float:
    """max |crosstalk term| / max |H| of the full channel."""
    w = elec.omega
    z = elec.impedance
    second = (w ** 2 / z ** 2) * (mi.tx_rx @ mi.tx_tx)
    full = (-1j * w / z) * mi.tx_rx - second
    peak = np.max(np.abs(full))
    if peak == 0:
        return 0.0
    return float(np.max(np.abs(second)) / peak)


# ==============================================================================
# REDUCTION AND CIRCULANT STRUCTURE
# ==============================================================================

def reduce_channel(ch: ChannelMatrix) -> ReducedChannel:
    """
    Average every consecutive block of I rows.

    Raises:
        ChannelShapeError: N_r is not a multiple of N_t
    """
    fold = ch.fold
    if fold is None:
        raise ChannelShapeError(
            f"N_r = {ch.n_rx} is not a multiple of N_t = {ch.n_tx}; "
            "use the estimation path instead"
        )
    h_hat = ch.h.reshape(ch.n_tx, fold, ch.n_tx).mean(axis=1)
    return ReducedChannel(h_hat=h_hat, fold=fold)


def circulant_residual(rc: Union[ReducedChannel, np.ndarray]) -> float:
    """max |h[i, j] - h[i+1, j+1]| (cyclic) / max |h|; 0 for an exact circulant."""
    h = rc.h_hat if isinstance(rc, ReducedChannel) else np.asarray(rc)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ChannelShapeError(f"circulant residual needs a square matrix, got {h.shape}")
    peak = np.max(np.abs(h))
    if peak == 0:
        return 0.0
    shifted = np.roll(h, shift=(-1, -1), axis=(0, 1))
    return float(np.max(np.abs(h - shifted)) / peak)


def oam_matrix(rc: Union[ReducedChannel, np.ndarray]) -> np.ndarray:
    """
    H_OAM = W^H H_hat W with W[n1, n2] = exp(+j 2 pi (n1-1)(n2-1) / N) / sqrt(N).

    W^H X is an orthonormal forward FFT down the columns and X W an
    orthonormal inverse FFT along the rows.
    """
    h = rc.h_hat if isinstance(rc, ReducedChannel) else np.asarray(rc)
    return fft.fft(fft.ifft(h, axis=1, norm='ortho'), axis=0, norm='ortho')


def circulant_eigenvalues(first_column: np.ndarray) -> np.ndarray:
    """Eigenvalues of the circulant with the given first column, mode order 0..N-1."""
    return fft.fft(np.asarray(first_column))


# ==============================================================================
# S-PARAMETER DOCUMENTS
# ==============================================================================

@dataclass(frozen=True, eq=False)
class SParameterDocument:
    """One-frequency scattering matrix of an (N_t + N_r)-port link."""
    frequency: float
    n_tx: int
    n_rx: int
    s: np.ndarray

    def __post_init__(self):
        ports = self.n_tx + self.n_rx
        if self.n_tx < 1 or self.n_rx < 1:
            raise SParameterError(f"port counts must be positive, got n_tx={self.n_tx}, n_rx={self.n_rx}")
        if self.s.shape != (ports, ports):
            raise SParameterError(
                f"S matrix shape {self.s.shape} inconsistent with {ports} ports"
            )
        if not np.all(np.isfinite(self.s)):
            raise SParameterError("S matrix has non-finite entries")
        if not np.isfinite(self.frequency) or self.frequency <= 0:
            raise SParameterError(f"frequency must be positive, got {self.frequency!r}")


def import_s_parameters(doc: SParameterDocument) -> ChannelMatrix:
    """H is the bottom-left N_r x N_t block of S."""
    h = doc.s[doc.n_tx:doc.n_tx + doc.n_rx, :doc.n_tx].copy()
    return ChannelMatrix(h=h, source='imported', frequency=doc.frequency)


def embed_channel(h: np.ndarray, frequency: float, s: Optional[np.ndarray] = None) -> SParameterDocument:
    """Place H in the bottom-left block of S (identity elsewhere unless S is given)."""
    h = np.asarray(h, dtype=complex)
    n_rx, n_tx = h.shape
    ports = n_tx + n_rx
    full = np.eye(ports, dtype=complex) if s is None else np.array(s, dtype=complex)
    full[n_tx:, :n_tx] = h
    return SParameterDocument(frequency=frequency, n_tx=n_tx, n_rx=n_rx, s=full)


def read_s_parameters(path: Union[str, Path]) -> SParameterDocument:
    """
    Parse an S-parameter CSV document.

    Raises:
        SParameterError: bad header, malformed rows, duplicates, missing or
            non-finite entries. Missing entries report the first missing
            (row, col) in row-major order.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SParameterError(f"cannot read {path}: {exc}") from exc

    lines = text.splitlines()
    if not lines:
        raise SParameterError(f"{path} is empty")
    match = _SPARAM_HEADER.match(lines[0].strip())
    if match is None:
        raise SParameterError(
            f"{path}: first line must be '# sparam v1, f_hz=<f>, n_tx=<N_t>, n_rx=<N_r>', "
            f"got {lines[0]!r}"
        )
    try:
        frequency = float(match.group('f'))
    except ValueError:
        raise SParameterError(f"{path}: invalid frequency {match.group('f')!r}") from None
    n_tx, n_rx = int(match.group('n_tx')), int(match.group('n_rx'))
    ports = n_tx + n_rx

    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith('#')]
    if body and body[0].replace(' ', '').lower() == 'row,col,re,im':
        body = body[1:]
    if not body:
        raise SParameterError(f"{path}: missing entry (row, col) = (1, 1)", missing=(1, 1))
    try:
        df = pd.read_csv(io.StringIO('\n'.join(body)), names=['row', 'col', 're', 'im'],
                         header=None, float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise SParameterError(f"{path}: malformed rows: {exc}") from exc

    if df.isna().any().any():
        raise SParameterError(f"{path}: rows must have four fields row,col,re,im")
    try:
        rows = df['row'].astype(np.int64).to_numpy()
        cols = df['col'].astype(np.int64).to_numpy()
        re_part = df['re'].astype(float).to_numpy()
        im_part = df['im'].astype(float).to_numpy()
    except (ValueError, TypeError) as exc:
        raise SParameterError(f"{path}: non-numeric entry: {exc}") from exc

    if np.any((rows < 1) | (rows > ports) | (cols < 1) | (cols > ports)):
        raise SParameterError(f"{path}: index outside 1..{ports}")
    flat = (rows - 1) * ports + (cols - 1)
    if len(np.unique(flat)) != len(flat):
        raise SParameterError(f"{path}: duplicate (row, col) entries")

    present = np.zeros(ports * ports, dtype=bool)
    present[flat] = True
    if not present.all():
        first = int(np.argmin(present))
        missing = (first // ports + 1, first % ports + 1)
        raise SParameterError(f"{path}: missing entry (row, col) = {missing}", missing=missing)

    s = np.empty(ports * ports, dtype=complex)
    s[flat] = re_part + 1j * im_part
    return SParameterDocument(frequency=frequency, n_tx=n_tx, n_rx=n_rx, s=s.reshape(ports, ports))


def write_s_parameters(doc: SParameterDocument, path: Union[str, Path]):
    """Write a document in the CSV dialect with round-trip precision."""
    ports = doc.n_tx + doc.n_rx
    rows, cols = np.divmod(np.arange(ports * ports), ports)
    flat = doc.s.reshape(-1)
    df = pd.DataFrame({
        'row': rows + 1,
        'col': cols + 1,
        're': flat.real,
        'im': flat.imag,
    })
    with open(path, 'w') as f:
        f.write(f"# sparam v1, f_hz={doc.frequency!r}, n_tx={doc.n_tx}, n_rx={doc.n_rx}\n")
        df.to_csv(f, index=False, float_format=config.MATRIX_FLOAT_FORMAT, lineterminator='\n')


def export_s_parameters(ch: ChannelMatrix, path: Union[str, Path], s: Optional[np.ndarray] = None):
    write_s_parameters(embed_channel(ch.h, ch.frequency, s), path)


# ==============================================================================
# MATRIX DUMPS
# ==============================================================================

def matrix_frame(name: str, matrix: np.ndarray) -> pd.DataFrame:
    """Long-format (matrix, row, col, re, im) table, 1-based indices."""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    rows, cols = np.indices(matrix.shape)
    return pd.DataFrame({
        'matrix': name,
        'row': rows.ravel() + 1,
        'col': cols.ravel() + 1,
        're': matrix.real.ravel(),
        'im': matrix.imag.ravel(),
    })


def write_matrix_csv(frames: pd.DataFrame, path: Union[str, Path], header_lines=()):
    """Write a matrix dump with optional '#' metadata lines."""
    with open(path, 'w') as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        frames.to_csv(f, index=False, float_format=config.MATRIX_FLOAT_FORMAT, lineterminator='\n')
