"""
Link Metrics
============

Capacity and BER of the OAM link with and without channel estimation, the
closed-form aligned capacity with its upper and lower limits, and the SISO
and MIMO reference links.

All capacities are in bits/s/Hz (log base 2). The per-mode SINR used by a
capacity formula and by the matching erfc BER formula is the same array.
"""

import math
import warnings
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import linalg, special

from . import config
from .channel import ChannelMatrix, ReducedChannel, channel_from_geometry, oam_matrix, reduce_channel
from .elliptic import EllipticConvention
from .errors import GeometryError, OamNfcError, RankDeficientError
from .geometry import LinkGeometry, receive_centers, transmit_centers
from .inductance import CoilElectrical, mutual_pair_local, mutual_tx_rx
from .results import SweepResult
from .txrx import LinkBudget, PilotConfig, dft_operator, estimate_channel_ls, pseudo_inverse

SCHEMES = ('oam_blind', 'oam_ls', 'oam_simplified', 'siso', 'mimo', 'mimo_wf')
CORRELATION_MODELS = ('identity', 'coupling', 'spatial')


@dataclass(frozen=True, eq=False)
class OamSpectrum:
    """H_OAM = W^H H_hat W, its diagonal and the per-mode (column) interference power."""
    matrix: np.ndarray
    diagonal: np.ndarray
    offdiag_power_per_mode: np.ndarray
    fold: int = 1


@dataclass(frozen=True)
class Bounds:
    """Closed-form kernel limits plus the energy (Jensen) and dominant-tap limits."""
    lower: float
    upper: float
    jensen_upper: float
    dominance_lower: float


@dataclass(frozen=True, eq=False)
class CapacityReport:
    per_mode_sinr: np.ndarray
    total_bits: float
    scheme: str
    bounds: Optional[Bounds] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        expected = float(np.sum(np.log2(1 + self.per_mode_sinr)))
        if not math.isclose(self.total_bits, expected, rel_tol=1e-12, abs_tol=1e-12):
            raise ValueError(f"total {self.total_bits} != sum of per-mode capacities {expected}")
        if self.bounds is not None:
            slack = 1e-9 * max(1.0, abs(self.total_bits))
            if not self.bounds.lower - slack <= self.total_bits <= self.bounds.upper + slack:
                raise ValueError(
                    f"capacity {self.total_bits} outside [{self.bounds.lower}, {self.bounds.upper}]"
                )

    @classmethod
    def from_sinr(cls, sinr: np.ndarray, scheme: str, bounds: Optional[Bounds] = None) -> 'CapacityReport':
        sinr = np.asarray(sinr, dtype=float)
        return cls(per_mode_sinr=sinr, total_bits=float(np.sum(np.log2(1 + sinr))),
                   scheme=scheme, bounds=bounds)


def _erfc_ber(sinr: np.ndarray) -> float:
    return float(np.sum(special.erfc(np.sqrt(sinr))) / (2 * len(sinr)))


# ==============================================================================
# OAM WITHOUT ESTIMATION
# ==============================================================================

def oam_spectrum(ch: Union[ChannelMatrix, ReducedChannel]) -> OamSpectrum:
    rc = reduce_channel(ch) if isinstance(ch, ChannelMatrix) else ch
    h_oam = oam_matrix(rc)
    power = np.abs(h_oam) ** 2
    offdiag = power.sum(axis=0) - np.diag(power)
    return OamSpectrum(matrix=h_oam, diagonal=np.diag(h_oam).copy(),
                       offdiag_power_per_mode=np.maximum(offdiag, 0.0), fold=rc.fold)


def sinr_blind(spectrum: OamSpectrum, budget: LinkBudget) -> np.ndarray:
    """|h_l|^2 / (N_0 N_t / (P_t I) + sum_{q != l} |H_OAM[q, l]|^2)."""
    n_tx = len(spectrum.diagonal)
    signal = np.abs(spectrum.diagonal) ** 2
    if budget.total_tx_power == 0:
        return np.zeros(n_tx)
    noise = budget.noise_power * n_tx / (budget.total_tx_power * spectrum.fold)
    denom = noise + spectrum.offdiag_power_per_mode
    with np.errstate(divide='ignore', invalid='ignore'):
        sinr = np.where(denom > 0, signal / np.where(denom > 0, denom, 1.0), np.inf)
    return np.where(signal == 0, 0.0, sinr)


def capacity_oam(ch: ChannelMatrix, budget: LinkBudget) -> CapacityReport:
    """Blind-detection OAM capacity; requires N_r = I N_t."""
    return CapacityReport.from_sinr(sinr_blind(oam_spectrum(ch), budget), 'oam_blind')


def ber_oam_analytic(ch: ChannelMatrix, budget: LinkBudget) -> float:
    """(1 / 2N_t) sum erfc(sqrt(SINR_l)) with the blind SINR."""
    return _erfc_ber(sinr_blind(oam_spectrum(ch), budget))


# ==============================================================================
# CLOSED-FORM ALIGNED CAPACITY AND LIMITS
# ==============================================================================

def _require_aligned(geom: LinkGeometry):
    if not geom.is_aligned:
        raise GeometryError("closed-form capacity needs an aligned receive ring (no offset, no tilt)")


def _pair_gain(geom: LinkGeometry, elec: CoilElectrical, d: np.ndarray,
               convention: EllipticConvention) -> np.ndarray:
    """w |M(d)| / |Z| for coaxial-normal pairs at height D and horizontal offset d."""
    m = mutual_pair_local(geom.coil_radius_tx, geom.coil_radius_rx, d, geom.axial_distance, 0.0,
                          geom.turns_tx, geom.turns_rx, convention)
    return elec.omega * np.asarray(m) / abs(elec.impedance)


def mode_coefficients(geom: LinkGeometry, elec: CoilElectrical,
                      convention: EllipticConvention = EllipticConvention.STANDARD) -> np.ndarray:
    """
    c_k = (1/I) sum_i (w / |Z|) M[i + I k, 1], k = 0..N_t-1.

    The first column of the reduced crosstalk-free channel up to the common
    phase -j Z* / |Z|; its DFT gives the mode gains.
    """
    _require_aligned(geom)
    if geom.n_rx % geom.n_tx:
        raise GeometryError(f"N_r = {geom.n_rx} is not a multiple of N_t = {geom.n_tx}")
    fold = geom.n_rx // geom.n_tx
    m = np.arange(1, geom.n_rx + 1)
    delta = 2 * np.pi * m / geom.n_rx - 2 * np.pi / geom.n_tx
    d = np.sqrt(np.maximum(
        geom.ring_radius_tx ** 2 + geom.ring_radius_rx ** 2
        - 2 * geom.ring_radius_tx * geom.ring_radius_rx * np.cos(delta), 0.0))
    gains = np.atleast_1d(_pair_gain(geom, elec, d, convention))
    return gains.reshape(geom.n_tx, fold).mean(axis=1)


def capacity_oam_simplified(
    geom: LinkGeometry,
    elec: CoilElectrical,
    budget: LinkBudget,
    convention: EllipticConvention = EllipticConvention.STANDARD,
    with_bounds: bool = False,
) -> CapacityReport:
    """
    Aligned OAM capacity straight from the geometry, crosstalk dropped.

    sum_l log2(1 + P_t I / (N_0 N_t) |lambda_l|^2), lambda = DFT(c).
    """
    coeffs = mode_coefficients(geom, elec, convention)
    fold = geom.n_rx // geom.n_tx
    if budget.total_tx_power == 0:
        sinr = np.zeros(geom.n_tx)
    else:
        scale = budget.total_tx_power * fold / (budget.noise_power * geom.n_tx) \
            if budget.noise_power > 0 else math.inf
        sinr = scale * np.abs(np.fft.fft(coeffs)) ** 2
    bounds = capacity_bounds(geom, elec, budget, convention) if with_bounds else None
    return CapacityReport.from_sinr(sinr, 'oam_simplified', bounds)


def capacity_bounds(
    geom: LinkGeometry,
    elec: CoilElectrical,
    budget: LinkBudget,
    convention: EllipticConvention = EllipticConvention.STANDARD,
) -> Bounds:
    """
    Upper and lower limits of the aligned capacity.

    The closed-form kernel values use the pair gain at d = |R_r - R_t|
    (upper) and d = R_r + R_t (lower) as N_t log2(1 + P_t I^2 g^2 / N_0).
    These are reported as lower / upper unmodified. The Jensen limit
    N_t log2(1 + a sum |c_k|^2) and the dominant-tap limit
    N_t log2(1 + a max(0, |c_0| - sum_{k>0} |c_k|)^2), a = P_t I / (N_0 N_t),
    enclose the value by construction and ride along for comparison.
    """
    coeffs = mode_coefficients(geom, elec, convention)
    n_tx = geom.n_tx
    fold = geom.n_rx // n_tx
    if budget.total_tx_power == 0:
        return Bounds(0.0, 0.0, 0.0, 0.0)
    snr = budget.snr
    near = abs(geom.ring_radius_rx - geom.ring_radius_tx)
    far = geom.ring_radius_rx + geom.ring_radius_tx
    g_near, g_far = np.abs(_pair_gain(geom, elec, np.array([near, far]), convention))
    upper = n_tx * math.log2(1 + snr * fold ** 2 * g_near ** 2)
    lower = n_tx * math.log2(1 + snr * fold ** 2 * g_far ** 2)

    a = snr * fold / n_tx
    energy = float(np.sum(np.abs(coeffs) ** 2))
    jensen = n_tx * math.log2(1 + a * energy)
    margin = max(0.0, abs(coeffs[0]) - float(np.sum(np.abs(coeffs[1:]))))
    dominance = n_tx * math.log2(1 + a * margin ** 2)
    return Bounds(lower=lower, upper=upper, jensen_upper=jensen, dominance_lower=dominance)


# ==============================================================================
# OAM WITH LS ESTIMATION
# ==============================================================================

def sinr_ls(ch: ChannelMatrix, h_est: np.ndarray, budget: LinkBudget) -> np.ndarray:
    """
    Per-mode SINR after W^H pinv(H_e).

    Signal (P_t/N_t)|A_ll|^2, interference (P_t/N_t) sum_{q != l} |A_lq|^2
    (row l), noise N_0 D_ll with A = W^H pinv(H_e) H W and
    D = W^H pinv(H_e) [W^H pinv(H_e)]^H.

    Raises:
        RankDeficientError: H_e has rank below N_t
    """
    h_est = np.asarray(h_est, dtype=complex)
    n_tx = ch.n_tx
    pinv, rank, condition = pseudo_inverse(h_est)
    if rank < n_tx:
        raise RankDeficientError(rank=rank, expected=n_tx, condition=condition)
    w = dft_operator(n_tx)
    filt = w.adjoint @ pinv
    a = filt @ ch.h @ w.matrix
    d = np.real(np.sum(np.abs(filt) ** 2, axis=1))

    if budget.total_tx_power == 0:
        return np.zeros(n_tx)
    per_mode = budget.total_tx_power / n_tx
    power = np.abs(a) ** 2
    signal = per_mode * np.diag(power)
    interference = per_mode * (power.sum(axis=1) - np.diag(power))
    denom = np.maximum(interference, 0.0) + budget.noise_power * d
    with np.errstate(divide='ignore', invalid='ignore'):
        sinr = np.where(denom > 0, signal / np.where(denom > 0, denom, 1.0), np.inf)
    return np.where(signal == 0, 0.0, sinr)


def capacity_ls(ch: ChannelMatrix, h_est: np.ndarray, budget: LinkBudget) -> CapacityReport:
    return CapacityReport.from_sinr(sinr_ls(ch, h_est, budget), 'oam_ls')


def ber_ls(ch: ChannelMatrix, h_est: np.ndarray, budget: LinkBudget) -> float:
    return _erfc_ber(sinr_ls(ch, h_est, budget))


# ==============================================================================
# SISO AND MIMO REFERENCES
# ==============================================================================

def capacity_siso(geom: LinkGeometry, elec: CoilElectrical, budget: LinkBudget,
                  convention: EllipticConvention = EllipticConvention.STANDARD) -> float:
    """log2(1 + (P_t / N_0) w^2 |M_11|^2 / |Z|^2) between coil 1 of each ring."""
    if budget.total_tx_power == 0:
        return 0.0
    m11 = mutual_tx_rx(geom, 1, 1, convention=convention)
    gain = (elec.omega * abs(m11) / abs(elec.impedance)) ** 2
    return float(math.log2(1 + budget.snr * gain))


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root via eigen-decomposition."""
    vals, vecs = linalg.eigh(matrix)
    return (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.conj().T


def _check_correlation(matrix: np.ndarray, size: int, label: str):
    if matrix.shape != (size, size):
        raise ValueError(f"{label} correlation must be {size}x{size}, got {matrix.shape}")
    if not np.allclose(matrix, matrix.conj().T, atol=1e-10):
        raise ValueError(f"{label} correlation is not Hermitian")
    if not np.allclose(np.diag(matrix), 1.0, atol=1e-10):
        raise ValueError(f"{label} correlation must have a unit diagonal")
    if linalg.eigvalsh(matrix).min() < -1e-10:
        raise ValueError(f"{label} correlation is not positive semidefinite")


def nearest_correlation(matrix: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues and rescale to a unit diagonal."""
    matrix = (matrix + matrix.conj().T) / 2
    vals, vecs = linalg.eigh(matrix)
    psd = (vecs * np.maximum(vals, 0.0)) @ vecs.conj().T
    scale = np.sqrt(np.real(np.diag(psd)))
    scale[scale == 0] = 1.0
    out = psd / np.outer(scale, scale)
    np.fill_diagonal(out, 1.0)
    return out


def correlation_matrix(
    kind: str,
    geom: LinkGeometry,
    side: str,
    frequency: float,
    convention: EllipticConvention = EllipticConvention.STANDARD,
) -> np.ndarray:
    """
    Antenna correlation of one coil ring.

    Args:
        kind: 'identity'; 'coupling' (I + |M_coplanar| / L from the ring's own
            coplanar mutual inductances); 'spatial' (J0(2 pi d / wavelength))
        geom: Link geometry
        side: 'tx' or 'rx'
        frequency: Carrier (Hz), used by 'spatial'
        convention: Elliptic convention for 'coupling'
    """
    if side not in ('tx', 'rx'):
        raise ValueError(f"side must be 'tx' or 'rx', got {side!r}")
    centers = transmit_centers(geom) if side == 'tx' else receive_centers(geom)
    size = len(centers)
    if kind == 'identity':
        return np.eye(size)

    dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
    if kind == 'spatial':
        wavelength = config.SPEED_OF_LIGHT / frequency
        return nearest_correlation(special.j0(2 * np.pi * dist / wavelength))
    if kind == 'coupling':
        radius = geom.coil_radius_tx if side == 'tx' else geom.coil_radius_rx
        turns = geom.turns_tx if side == 'tx' else geom.turns_rx
        corr = np.eye(size)
        if size > 1:
            off = ~np.eye(size, dtype=bool)
            m = mutual_pair_local(radius, radius, dist[off], 0.0, 0.0, turns, turns, convention)
            inductance = config.MU_0 * turns ** 2 * np.pi * radius / 2
            corr[off] = np.abs(m) / inductance
        return nearest_correlation(corr)
    raise ValueError(f"unknown correlation model {kind!r}; expected one of {CORRELATION_MODELS}")


def waterfill(gains: np.ndarray, total_power: float) -> np.ndarray:
    """
    Water-filling powers for eigenchannel gains gamma_i (sigma_i^2 / N_0).

    Channels are dropped weakest first until the water level clears every
    remaining inverse gain.
    """
    gains = np.asarray(gains, dtype=float)
    powers = np.zeros_like(gains)
    active = np.flatnonzero(gains > 0)
    if total_power <= 0 or active.size == 0:
        return powers
    order = active[np.argsort(gains[active])[::-1]]
    inv = 1 / gains[order]
    used = len(order)
    level = (total_power + inv[:used].sum()) / used
    while used > 1 and level <= inv[used - 1]:
        used -= 1
        level = (total_power + inv[:used].sum()) / used
    powers[order[:used]] = np.maximum(level - inv[:used], 0.0)
    return powers


def capacity_mimo(
    ch: ChannelMatrix,
    budget: LinkBudget,
    corr_tx: Optional[np.ndarray] = None,
    corr_rx: Optional[np.ndarray] = None,
    waterfill_power: bool = False,
    normalize: bool = False,
) -> float:
    """
    log2 det(I + P_t / (N_0 N_t) H_MIMO H_MIMO^H), H_MIMO = G_r H G_t.

    G are PSD square roots of the correlation matrices. With normalize the
    correlated channel is rescaled to ||H||_F. waterfill_power replaces equal
    power by water-filling over the singular values under total power P_t.
    """
    h = ch.h
    corr_tx = np.eye(ch.n_tx) if corr_tx is None else np.asarray(corr_tx)
    corr_rx = np.eye(ch.n_rx) if corr_rx is None else np.asarray(corr_rx)
    _check_correlation(corr_tx, ch.n_tx, 'transmit')
    _check_correlation(corr_rx, ch.n_rx, 'receive')

    h_mimo = psd_sqrt(corr_rx) @ h @ psd_sqrt(corr_tx)
    if normalize:
        norm = np.linalg.norm(h_mimo)
        if norm > 0:
            h_mimo = h_mimo * (np.linalg.norm(h) / norm)

    if budget.total_tx_power == 0:
        return 0.0
    sigma2 = linalg.svd(h_mimo, compute_uv=False) ** 2
    if budget.noise_power == 0:
        return math.inf if np.any(sigma2 > 0) else 0.0
    if waterfill_power:
        gains = sigma2 / budget.noise_power
        powers = waterfill(gains, budget.total_tx_power)
        return float(np.sum(np.log2(1 + powers * gains)))
    return float(np.sum(np.log2(1 + budget.total_tx_power / (budget.noise_power * ch.n_tx) * sigma2)))


def capacity_mimo_for(ch: ChannelMatrix, budget: LinkBudget, model: str = 'coupling',
                      waterfill_power: bool = False,
                      convention: EllipticConvention = EllipticConvention.STANDARD) -> float:
    """
    capacity_mimo with both correlation matrices built from the channel's geometry.

    The correlated channel keeps the received energy ||H||_F of the
    uncorrelated one, so the comparison only sees the change in rank.
    """
    if ch.geometry is None or model == 'identity':
        return capacity_mimo(ch, budget, waterfill_power=waterfill_power)
    corr_tx = correlation_matrix(model, ch.geometry, 'tx', ch.frequency, convention)
    corr_rx = correlation_matrix(model, ch.geometry, 'rx', ch.frequency, convention)
    return capacity_mimo(ch, budget, corr_tx, corr_rx, waterfill_power=waterfill_power,
                         normalize=True)


# ==============================================================================
# GRIDS AND SUMMARIES
# ==============================================================================

def capacity_gap_surface(
    geom: LinkGeometry,
    elec: CoilElectrical,
    budget: LinkBudget,
    n_grid: Iterable[int],
    pilot: Optional[PilotConfig] = None,
    correlation: str = 'coupling',
    crosstalk: bool = True,
    seed: int = config.RANDOM_SEED,
) -> SweepResult:
    """
    C_LS - C_MIMO over every (N_t, N_r) pair of n_grid.

    Infeasible points (overlapping coils, rank-deficient estimates) are kept
    with their reason in the 'skipped' column.
    """
    n_values = list(n_grid)
    pilot = pilot or PilotConfig(pilot_snr=math.inf)
    rows = []
    for i, n_tx in enumerate(n_values):
        for j, n_rx in enumerate(n_values):
            row = {'geometry.n_tx': n_tx, 'geometry.n_rx': n_rx,
                   'capacity_ls': np.nan, 'capacity_mimo': np.nan,
                   'capacity_gap': np.nan, 'skipped': ''}
            try:
                point = replace(geom, n_tx=n_tx, n_rx=n_rx)
                ch = channel_from_geometry(point, elec, crosstalk=crosstalk)
                rng = np.random.default_rng(np.random.SeedSequence([seed, i * len(n_values) + j]))
                h_est = estimate_channel_ls(ch, pilot, rng)
                c_ls = capacity_ls(ch, h_est, budget).total_bits
                c_mimo = capacity_mimo_for(ch, budget, correlation)
                row.update(capacity_ls=c_ls, capacity_mimo=c_mimo, capacity_gap=c_ls - c_mimo)
            except OamNfcError as exc:
                row['skipped'] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    table = pd.DataFrame(rows)
    return SweepResult(name='capacity_gap', axes=['geometry.n_tx', 'geometry.n_rx'],
                       metrics=['capacity_ls', 'capacity_mimo', 'capacity_gap'],
                       table=table, seed=seed)


def half_power_point(axis_values: Sequence[float], capacities: Sequence[float],
                     reference: Optional[float] = None) -> Optional[float]:
    """
    Smallest |x| at which capacity falls to half its value at x = 0.

    Both signs of the axis are scanned outward from 0 with linear
    interpolation between grid points. None when the curve never halves.
    """
    x = np.asarray(axis_values, dtype=float)
    c = np.asarray(capacities, dtype=float)
    if reference is None:
        reference = float(c[np.argmin(np.abs(x))])
    target = reference / 2
    crossings = []
    for side in (x >= 0, x <= 0):
        xs, cs = x[side], c[side]
        order = np.argsort(np.abs(xs))
        xs, cs = np.abs(xs[order]), cs[order]
        for k in range(1, len(xs)):
            if np.isnan(cs[k - 1]) or np.isnan(cs[k]):
                continue
            if cs[k - 1] > target >= cs[k]:
                frac = (cs[k - 1] - target) / (cs[k - 1] - cs[k])
                crossings.append(xs[k - 1] + frac * (xs[k] - xs[k - 1]))
                break
    if not crossings:
        return None
    return float(min(crossings))


def per_mode_report(ch: ChannelMatrix, budget: LinkBudget,
                    h_est: Optional[np.ndarray] = None) -> pd.DataFrame:
    """Per-mode gain, interference, SINR and bits for the blind and LS paths."""
    rows = {'mode': np.arange(ch.n_tx)}
    if ch.fold is not None:
        spectrum = oam_spectrum(ch)
        blind = sinr_blind(spectrum, budget)
        rows.update(gain=np.abs(spectrum.diagonal),
                    interference=spectrum.offdiag_power_per_mode,
                    sinr_blind_db=10 * np.log10(np.maximum(blind, 1e-300)),
                    bits_blind=np.log2(1 + blind))
    h_est = ch.h if h_est is None else h_est
    try:
        ls = sinr_ls(ch, h_est, budget)
        rows.update(sinr_ls_db=10 * np.log10(np.maximum(ls, 1e-300)), bits_ls=np.log2(1 + ls))
    except RankDeficientError as exc:
        warnings.warn(f"LS columns omitted: {exc}", RuntimeWarning, stacklevel=2)
    return pd.DataFrame(rows)
