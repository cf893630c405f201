"""
OAM Transceiver
===============

Communication layer of the link: OAM excitation through the unitary DFT,
additive white Gaussian noise, detection without channel estimation
(row averaging + DFT + per-mode division), Zadoff-Chu pilot LS channel
estimation with pseudo-inverse detection, MSE evaluation and Monte Carlo BER.

Conventions:
- Mode symbols x carry amplitude sqrt(P_t / N_t), so E{x^H x} = P_t.
- N_0 is the complex noise power per receive coil.
- Vectors may be batched: shape (N, B) holds B independent uses of the link.
"""

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import fft, linalg
from statsmodels.stats.proportion import proportion_confint

from . import config
from .channel import ChannelMatrix, oam_matrix, reduce_channel
from .errors import ChannelShapeError, ConfigError, RankDeficientError


# ==============================================================================
# TYPES
# ==============================================================================

@dataclass(frozen=True, eq=False)
class DftOperator:
    """Unitary W with W[n1, n2] = exp(j 2 pi (n1-1)(n2-1) / N) / sqrt(N)."""
    order: int
    matrix: np.ndarray

    @property
    def adjoint(self) -> np.ndarray:
        return self.matrix.conj().T


@lru_cache(maxsize=64)
def dft_operator(order: int) -> DftOperator:
    if order < 1:
        raise ChannelShapeError(f"DFT order must be positive, got {order}")
    idx = np.arange(order)
    w = np.exp(2j * np.pi * np.outer(idx, idx) / order) / np.sqrt(order)
    w.setflags(write=False)
    return DftOperator(order=order, matrix=w)


@dataclass(frozen=True)
class PilotConfig:
    """ZC pilot of length T, root p and per-coil pilot SNR P (linear; inf = perfect CSI)."""
    length: int = config.PILOT_LENGTH
    root: int = config.PILOT_ROOT
    pilot_snr: float = 10 ** (config.PILOT_SNR_DB / 10)

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 1:
            raise ConfigError(f"pilot length must be a positive integer, got {self.length!r}",
                              key='pilot.length')
        if int(self.root) != self.root or self.root < 1:
            raise ConfigError(f"pilot root must be a positive integer, got {self.root!r}",
                              key='pilot.root')
        if math.gcd(int(self.root), int(self.length)) != 1:
            raise ConfigError(
                f"pilot root {self.root} must be coprime with length {self.length}",
                key='pilot.root',
            )
        if not self.pilot_snr > 0:
            raise ConfigError(f"pilot SNR must be positive, got {self.pilot_snr!r}",
                              key='pilot.snr_db')

    @classmethod
    def from_db(cls, length: int, root: int, snr_db: float) -> 'PilotConfig':
        return cls(length=length, root=root, pilot_snr=10 ** (snr_db / 10))

    @property
    def perfect(self) -> bool:
        return math.isinf(self.pilot_snr)


@dataclass(frozen=True)
class LinkBudget:
    """Total transmit power P_t and per-coil noise power N_0, both in watts."""
    total_tx_power: float
    noise_power: float
    snr_grid: Tuple[float, ...] = ()

    def __post_init__(self):
        for name in ('total_tx_power', 'noise_power'):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {value!r}",
                                  key=f"budget.{name}")
        object.__setattr__(self, 'snr_grid', tuple(float(s) for s in self.snr_grid))

    @property
    def snr(self) -> float:
        """P_t / N_0 (linear)."""
        if self.noise_power == 0:
            return math.inf
        return self.total_tx_power / self.noise_power

    @property
    def snr_db(self) -> float:
        snr = self.snr
        if snr == 0:
            return -math.inf
        return 10 * math.log10(snr)

    def at_snr(self, snr_db: float) -> 'LinkBudget':
        """Same P_t with N_0 = P_t / SNR. A zero-power budget is returned unchanged."""
        if self.total_tx_power == 0:
            return self
        return LinkBudget(self.total_tx_power, self.total_tx_power / 10 ** (snr_db / 10),
                          self.snr_grid)

    def symbol_amplitude(self, n_tx: int) -> float:
        return math.sqrt(self.total_tx_power / n_tx)


@dataclass(frozen=True, eq=False)
class Detection:
    """Hard decisions (constellation indices and values) and soft estimates."""
    indices: np.ndarray
    symbols: np.ndarray
    soft: np.ndarray
    undetectable: np.ndarray     # per-mode flag
    condition: float = 1.0


@dataclass(frozen=True, eq=False)
class BerCurve:
    """Empirical BER per SNR point with Wilson intervals."""
    detector: str
    snr_db: np.ndarray
    errors: np.ndarray
    bits: np.ndarray
    ber: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    condition: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        """Binomial standard deviation of each BER estimate."""
        return np.sqrt(self.ber * (1 - self.ber) / self.bits)


def bpsk(amplitude: float = 1.0) -> np.ndarray:
    return amplitude * np.array([-1.0 + 0j, 1.0 + 0j])


# ==============================================================================
# EXCITATION AND PROPAGATION
# ==============================================================================

def oam_excite(x: np.ndarray, w: DftOperator) -> np.ndarray:
    """Coil excitation v_t = W x."""
    x = np.asarray(x, dtype=complex)
    if x.shape[0] != w.order:
        raise ChannelShapeError(f"{x.shape[0]} mode symbols for a DFT of order {w.order}")
    return w.matrix @ x


def complex_noise(shape, n0: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples of variance n0."""
    scale = math.sqrt(n0 / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def propagate(ch: ChannelMatrix, v_t: np.ndarray, n0: float,
              rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    v_r = H v_t + n with n ~ CN(0, n0) i.i.d. per receive coil.

    n0 = 0 returns H v_t exactly and draws nothing.
    """
    v_t = np.asarray(v_t, dtype=complex)
    if v_t.shape[0] != ch.n_tx:
        raise ChannelShapeError(f"excitation length {v_t.shape[0]} != N_t = {ch.n_tx}")
    if n0 < 0:
        raise ValueError(f"noise power must be >= 0, got {n0}")
    clean = ch.h @ v_t
    if n0 == 0:
        return clean
    if rng is None:
        raise ValueError("a random generator is required when n0 > 0")
    return clean + complex_noise(clean.shape, n0, rng)


def _slice(soft: np.ndarray, constellation: np.ndarray) -> np.ndarray:
    return np.argmin(np.abs(soft[..., None] - constellation), axis=-1)


# ==============================================================================
# DETECTION WITHOUT CHANNEL ESTIMATION
# ==============================================================================

def detect_blind(
    ch: ChannelMatrix,
    v_r: np.ndarray,
    constellation: np.ndarray,
    h_oam: Optional[np.ndarray] = None,
) -> Detection:
    """
    Average each block of I receive coils, apply W^H, divide by the mode gains, slice.

    Args:
        ch: Channel the receiver assumes (only its reduced OAM diagonal is used)
        v_r: Received samples, (N_r,) or (N_r, B)
        constellation: Symbol alphabet in transmit scale
        h_oam: Mode gains to divide by; defaults to diag(W^H H_hat W) of ch

    Returns:
        Detection; modes with zero gain are flagged and decided as constellation[0]

    Raises:
        ChannelShapeError: N_r is not a multiple of N_t
    """
    rc = reduce_channel(ch)
    n_tx, fold = ch.n_tx, rc.fold
    if h_oam is None:
        h_oam = np.diag(oam_matrix(rc))
    h_oam = np.asarray(h_oam, dtype=complex)

    v_r = np.asarray(v_r, dtype=complex)
    if v_r.shape[0] != ch.n_rx:
        raise ChannelShapeError(f"received length {v_r.shape[0]} != N_r = {ch.n_rx}")
    v_hat = v_r.reshape((n_tx, fold) + v_r.shape[1:]).mean(axis=1)
    y = fft.fft(v_hat, axis=0, norm='ortho')

    peak = np.max(np.abs(h_oam)) if h_oam.size else 0.0
    undetectable = np.abs(h_oam) <= config.PINV_RCOND * peak if peak > 0 else np.ones(n_tx, bool)
    gain = np.where(undetectable, 1.0, h_oam)
    shape = (n_tx,) + (1,) * (y.ndim - 1)
    soft = np.where(undetectable.reshape(shape), 0.0, y / gain.reshape(shape))

    indices = _slice(soft, constellation)
    indices = np.where(undetectable.reshape(shape), 0, indices)
    return Detection(indices=indices, symbols=constellation[indices], soft=soft,
                     undetectable=undetectable)


# ==============================================================================
# ZADOFF-CHU PILOTS AND LS ESTIMATION
# ==============================================================================

def zc_pilot(cfg: PilotConfig, n_t: int) -> np.ndarray:
    """
    N_t x T pilot matrix; row n is the root sequence cyclically shifted by n.

    With u = (t - n) mod T the phase is -pi p u^2 / T for even T and
    -pi p u (u + 1) / T for odd T, so every row has period T and distinct
    rows are orthogonal: S S^H = T I.
    """
    length = cfg.length
    if n_t >= length:
        raise ChannelShapeError(f"pilot length {length} must exceed N_t = {n_t}")
    t = np.arange(length)
    n = np.arange(n_t)
    u = (t[None, :] - n[:, None]) % length
    if length % 2 == 0:
        phase = u ** 2
    else:
        phase = u * (u + 1)
    return np.exp(-1j * np.pi * cfg.root * phase / length)


def gram_residual(pilot: np.ndarray) -> float:
    """max |S S^H / T - I|."""
    length = pilot.shape[1]
    gram = pilot @ pilot.conj().T / length
    return float(np.max(np.abs(gram - np.eye(pilot.shape[0]))))


def _check_pilot_fits(ch: ChannelMatrix, cfg: PilotConfig):
    if cfg.length <= max(ch.n_tx, ch.n_rx):
        raise ChannelShapeError(
            f"pilot length {cfg.length} must exceed N_t = {ch.n_tx} and N_r = {ch.n_rx}"
        )


def estimate_channel_ls(ch: ChannelMatrix, cfg: PilotConfig,
                        rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    H_e = (sqrt(P) H S + N) S^H / (sqrt(P) T) with unit-variance pilot noise N.

    A perfect-CSI pilot (infinite SNR) returns H itself.
    """
    if cfg.perfect:
        return ch.h.copy()
    _check_pilot_fits(ch, cfg)
    if rng is None:
        raise ValueError("a random generator is required for a finite pilot SNR")
    pilot = zc_pilot(cfg, ch.n_tx)
    amp = math.sqrt(cfg.pilot_snr)
    received = amp * ch.h @ pilot + complex_noise((ch.n_rx, cfg.length), 1.0, rng)
    return received @ pilot.conj().T / (amp * cfg.length)


def estimation_error(ch: ChannelMatrix, cfg: PilotConfig, rng: np.random.Generator,
                     trials: int = config.MSE_TRIALS) -> float:
    """Mean squared Frobenius error of H_e; expected value N_r N_t / (P T)."""
    if cfg.perfect:
        return 0.0
    _check_pilot_fits(ch, cfg)
    pilot = zc_pilot(cfg, ch.n_tx)
    noise = complex_noise((trials, ch.n_rx, cfg.length), 1.0, rng)
    err = noise @ pilot.conj().T / (math.sqrt(cfg.pilot_snr) * cfg.length)
    return float(np.mean(np.sum(np.abs(err) ** 2, axis=(1, 2))))


def pseudo_inverse(h: np.ndarray, rcond: float = config.PINV_RCOND) -> Tuple[np.ndarray, int, float]:
    """
    SVD pseudo-inverse with a relative singular-value cutoff.

    Returns:
        (pinv, numerical rank, condition number s_max / s_min)
    """
    u, s, vh = linalg.svd(h, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros(h.shape[::-1], dtype=complex), 0, math.inf
    keep = s > rcond * s[0]
    rank = int(np.count_nonzero(keep))
    condition = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    inv_s = np.where(keep, 1 / np.where(keep, s, 1.0), 0.0)
    pinv = (vh.conj().T * inv_s) @ u.conj().T
    return pinv, rank, condition


def _ls_filter(h_est: np.ndarray, n_tx: int, rcond: float) -> Tuple[np.ndarray, float]:
    pinv, rank, condition = pseudo_inverse(h_est, rcond)
    if rank < n_tx:
        raise RankDeficientError(rank=rank, expected=n_tx, condition=condition)
    if condition > config.CONDITION_WARN:
        warnings.warn(f"estimated channel is ill conditioned (condition {condition:.3e})",
                      RuntimeWarning, stacklevel=3)
    return pinv, condition


def detect_ls(
    ch: ChannelMatrix,
    h_est: np.ndarray,
    v_r: np.ndarray,
    constellation: np.ndarray,
    rcond: float = config.PINV_RCOND,
) -> Detection:
    """
    x_LS = W^H pinv(H_e) v_r followed by nearest-symbol slicing.

    Works for any N_r >= N_t, aligned or not.

    Raises:
        RankDeficientError: H_e has numerical rank below N_t
    """
    h_est = np.asarray(h_est, dtype=complex)
    if h_est.shape != ch.h.shape:
        raise ChannelShapeError(f"estimate shape {h_est.shape} != channel shape {ch.h.shape}")
    pinv, condition = _ls_filter(h_est, ch.n_tx, rcond)
    v_r = np.asarray(v_r, dtype=complex)
    soft = fft.fft(pinv @ v_r, axis=0, norm='ortho')
    indices = _slice(soft, constellation)
    return Detection(indices=indices, symbols=constellation[indices], soft=soft,
                     undetectable=np.zeros(ch.n_tx, bool), condition=condition)


# ==============================================================================
# MSE
# ==============================================================================

def mse_ls(ch: ChannelMatrix, cfg: PilotConfig, budget: LinkBudget,
           rng: np.random.Generator, trials: int = config.MSE_TRIALS) -> float:
    """
    Monte Carlo (1/N_t) E||x_LS - x||^2 over pilot noise, data noise and BPSK data.

    Each trial draws a fresh estimate and one data vector.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    n_tx = ch.n_tx
    w = dft_operator(n_tx)
    constellation = bpsk(budget.symbol_amplitude(n_tx))
    total = 0.0
    for _ in range(trials):
        h_est = estimate_channel_ls(ch, cfg, rng)
        pinv, _ = _ls_filter(h_est, n_tx, config.PINV_RCOND)
        x = constellation[rng.integers(0, 2, size=n_tx)]
        v_r = propagate(ch, oam_excite(x, w), budget.noise_power, rng)
        x_hat = w.adjoint @ (pinv @ v_r)
        total += float(np.sum(np.abs(x_hat - x) ** 2))
    return total / (trials * n_tx)


def mse_ls_limit(ch: ChannelMatrix, budget: LinkBudget, diagonal_only: bool = False) -> float:
    """
    Limit of mse_ls as the pilot SNR grows: (N_0 / N_t) ||pinv(H)||_F^2.

    diagonal_only keeps only |diag(pinv(H))|^2, which coincides with the full
    form when pinv(H) is diagonal.
    """
    pinv, _, _ = pseudo_inverse(ch.h)
    if diagonal_only:
        power = np.sum(np.abs(np.diag(pinv)) ** 2)
    else:
        power = np.sum(np.abs(pinv) ** 2)
    return float(budget.noise_power / ch.n_tx * power)


# ==============================================================================
# MONTE CARLO BER
# ==============================================================================

def run_ber(
    ch: ChannelMatrix,
    budget: LinkBudget,
    detector: str = 'blind',
    trials: int = config.BER_TRIALS,
    rng: Optional[np.random.Generator] = None,
    snr_grid: Optional[Sequence[float]] = None,
    pilot: Optional[PilotConfig] = None,
    batch: int = config.BER_BATCH,
    alpha: float = config.WILSON_ALPHA,
) -> BerCurve:
    """
    Empirical BPSK BER per SNR point.

    Args:
        ch: Channel
        budget: P_t and the SNR grid (N_0 = P_t / SNR at each point)
        detector: 'blind' or 'ls'
        trials: Symbol vectors per SNR point (bits = trials * N_t)
        rng: Random generator; default_rng(RANDOM_SEED) when omitted
        snr_grid: Overrides budget.snr_grid; empty means the budget's own N_0
        pilot: Pilot for the 'ls' detector; perfect CSI when omitted
        batch: Vectors per vectorized block
        alpha: Wilson interval level

    Returns:
        BerCurve
    """
    if detector not in ('blind', 'ls'):
        raise ValueError(f"detector must be 'blind' or 'ls', got {detector!r}")
    if rng is None:
        rng = np.random.default_rng(config.RANDOM_SEED)
    grid = list(budget.snr_grid if snr_grid is None else snr_grid)
    points = [budget.at_snr(s) for s in grid] if grid else [budget]
    pilot = pilot or PilotConfig(pilot_snr=math.inf)

    n_tx = ch.n_tx
    w = dft_operator(n_tx)
    errors = np.zeros(len(points), dtype=np.int64)
    conditions = np.ones(len(points))

    for i, point in enumerate(points):
        constellation = bpsk(point.symbol_amplitude(n_tx))
        remaining = trials
        while remaining > 0:
            size = min(batch, remaining)
            bits = rng.integers(0, 2, size=(n_tx, size))
            v_r = propagate(ch, oam_excite(constellation[bits], w), point.noise_power, rng)
            if detector == 'blind':
                result = detect_blind(ch, v_r, constellation)
            else:
                h_est = estimate_channel_ls(ch, pilot, rng)
                result = detect_ls(ch, h_est, v_r, constellation)
                conditions[i] = max(conditions[i], result.condition)
            errors[i] += int(np.count_nonzero(result.indices != bits))
            remaining -= size

    n_bits = np.full(len(points), trials * n_tx, dtype=np.int64)
    low, high = proportion_confint(errors, n_bits, alpha=alpha, method='wilson')
    snr_axis = np.array(grid if grid else [budget.snr_db], dtype=float)
    return BerCurve(
        detector=detector,
        snr_db=snr_axis,
        errors=errors,
        bits=n_bits,
        ber=errors / n_bits,
        ci_low=np.asarray(low, dtype=float),
        ci_high=np.asarray(high, dtype=float),
        condition=conditions,
    )
