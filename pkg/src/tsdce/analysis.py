"""Baselines and analytic bounds.

Contains the explicit least-squares estimator, a simplified DFT
peak-pick/cancel baseline, the single-path upper bound, the multi-path
upper bound built from Marchenko-Pastur ordered eigenvalue statistics,
and the Fisher-matrix CRLB with Monte Carlo channel reconstruction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .algorithm import PathEstimate
from .channel import ChannelRealization
from .numkit import SeededRng, dft2d
from .observation import Codebook, Observation, to_spatial


class RankDeficiencyError(ValueError):
    """LS system does not have full column rank (QP < n_t * n_r)."""


def ls_estimate_explicit(obs: Observation, cb: Codebook) -> np.ndarray:
    """Least-squares channel estimate from the vectorized observation.

    The normal equations collapse to a scaled matrix product because the
    Kronecker system matrix has orthogonal columns with squared norm
    QP/(n_t n_r); the Kronecker matrix itself is never formed.
    """
    n_t = cb.f.shape[0]
    n_r = cb.w.shape[0]
    q_count, p_count = obs.y.shape
    if q_count * p_count < n_t * n_r:
        raise RankDeficiencyError(
            f"LS needs QP >= n_t*n_r, got {q_count * p_count} < {n_t * n_r}"
        )
    scale = n_t * n_r / (q_count * p_count * np.sqrt(obs.rho))
    return scale * (cb.w @ obs.y @ cb.f.conj().T)


def dft_peak_baseline(obs: Observation, L_d: int, n_dft: int = 1024, n_t=None, n_r=None):
    """Simplified DFT-domain peak-pick baseline with iterative cancellation.

    Zero-pads the informative spatial crop to n_dft x n_dft, reads the
    strongest DFT bin as the frequency pair, estimates the complex gain
    by derotated averaging, cancels the reconstructed cisoid and repeats.
    Frequency accuracy is limited to the bin width 2*pi/n_dft. The crop
    size defaults to the full observation (matched codebook).
    """
    q_count, p_count = obs.y.shape
    if n_dft < max(q_count, p_count) or (n_dft & (n_dft - 1)) != 0:
        raise ValueError("n_dft must be a power of two >= max(Q, P)")
    n_r = q_count if n_r is None else n_r
    n_t = p_count if n_t is None else n_t
    sp = to_spatial(obs, n_t, n_r)
    work = sp.d_bar.copy()
    m = np.arange(n_r)[:, None]
    n = np.arange(n_t)[None, :]
    estimates = []
    for _ in range(L_d):
        padded = np.zeros((n_dft, n_dft), dtype=complex)
        padded[:n_r, :n_t] = work
        spectrum = dft2d(padded)
        qi, pi_ = np.unravel_index(np.argmax(np.abs(spectrum)), spectrum.shape)
        omega_aoa = 2 * np.pi * qi / n_dft
        omega_aod = 2 * np.pi * pi_ / n_dft
        if omega_aoa > np.pi:
            omega_aoa -= 2 * np.pi
        if omega_aod > np.pi:
            omega_aod -= 2 * np.pi
        derot = work * np.exp(-1j * (omega_aoa * m + omega_aod * n))
        a_hat = derot.mean() / np.sqrt(obs.rho)
        gain = np.sqrt(n_t * n_r) * a_hat
        estimates.append(
            PathEstimate.from_freqs(abs(gain), np.angle(gain), omega_aod, omega_aoa)
        )
        cisoid = a_hat * np.exp(1j * (omega_aoa * m + omega_aod * n))
        work = work - np.sqrt(obs.rho) * cisoid
    return estimates


def upper_bound_single_path(snr_c: float, n_t: int, n_r: int) -> float:
    """Mean-SSE upper bound (sqrt(n_r)+sqrt(n_t))^2 / SNR_C for L = 1."""
    if snr_c <= 0:
        raise ValueError("snr_c must be positive")
    return (np.sqrt(n_r) + np.sqrt(n_t)) ** 2 / snr_c


@dataclass(frozen=True)
class MarchenkoPastur:
    """Marchenko-Pastur eigenvalue law for (1/n_t) Z^H Z with CN(0, s2)
    entries, aspect ratio c = n_r/n_t in (0, 1]."""

    sigma_z_sq: float
    c: float
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self):
        if self.sigma_z_sq <= 0:
            raise ValueError("sigma_z_sq must be positive")
        if not 0 < self.c <= 1:
            raise ValueError("c must lie in (0, 1]")
        sq = np.sqrt(self.c)
        object.__setattr__(self, "a", self.sigma_z_sq * (1 - sq) ** 2)
        object.__setattr__(self, "b", self.sigma_z_sq * (1 + sq) ** 2)


def mp_density(mp: MarchenkoPastur, x) -> np.ndarray:
    """Density sqrt((x-a)(b-x)) / (2 pi s2 c x) on (a, b), zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > mp.a) & (x < mp.b)
    xi = x[inside]
    out[inside] = np.sqrt((xi - mp.a) * (mp.b - xi)) / (
        2 * np.pi * mp.sigma_z_sq * mp.c * xi
    )
    return float(out) if out.ndim == 0 else out


def _mp_primitive(mp: MarchenkoPastur, x) -> np.ndarray:
    """Closed-form antiderivative of the (unnormalized) density."""
    a, b = mp.a, mp.b
    x = np.clip(np.asarray(x, dtype=float), a, b)
    root = np.sqrt(np.maximum((x - a) * (b - x), 0.0))
    t1 = np.clip((2 * x - a - b) / (b - a), -1.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t2 = np.where(x > 0, ((a + b) * x - 2 * a * b) / (x * (b - a)), -1.0)
    t2 = np.clip(t2, -1.0, 1.0)
    return root + 0.5 * (a + b) * np.arcsin(t1) - np.sqrt(a * b) * np.arcsin(t2)


def mp_cdf(mp: MarchenkoPastur, x) -> np.ndarray:
    """CDF via the antiderivative, normalized so F(a)=0 and F(b)=1.

    Endpoint normalization makes the result independent of the constant
    factor the raw antiderivative carries.
    """
    fa = _mp_primitive(mp, mp.a)
    fb = _mp_primitive(mp, mp.b)
    val = (_mp_primitive(mp, x) - fa) / (fb - fa)
    return np.clip(val, 0.0, 1.0)


def _log_order_factor(n_r: int, l: int) -> float:
    # log of (n_r - l + 1) * C(n_r, n_r - l + 1), kept in log space so
    # n_r = 64 does not overflow.
    k = n_r - l + 1
    log_binom = gammaln(n_r + 1) - gammaln(k + 1) - gammaln(n_r - k + 1)
    return np.log(k) + log_binom


def ordered_eigenvalue_mean(mp: MarchenkoPastur, l: int, n_r: int) -> float:
    """Mean of the l-th largest of n_r draws from the MP eigenvalue law.

    Integrates x * f_order(x) over (a, b) with the substitution
    x = a + (b-a) sin^2(t), which removes the square-root endpoint
    singularities of the density.
    """
    if not 1 <= l <= n_r:
        raise ValueError("rank index l must lie in 1..n_r")
    log_c = _log_order_factor(n_r, l)

    def integrand(t):
        x = mp.a + (mp.b - mp.a) * np.sin(t) ** 2
        dx = (mp.b - mp.a) * 2.0 * np.sin(t) * np.cos(t)
        f = float(mp_density(mp, x))
        cdf = float(mp_cdf(mp, x))
        if (n_r - l) > 0 and cdf <= 0.0:
            return 0.0
        if (l - 1) > 0 and cdf >= 1.0:
            return 0.0
        log_w = 0.0
        if n_r - l > 0:
            log_w += (n_r - l) * np.log(cdf)
        if l - 1 > 0:
            log_w += (l - 1) * np.log(1.0 - cdf)
        return x * f * np.exp(log_c + log_w) * dx

    val, err = integrate.quad(integrand, 0.0, np.pi / 2, epsabs=1e-10, limit=200)
    if not np.isfinite(val):
        raise ArithmeticError(f"order-statistic quadrature failed (err={err})")
    return float(val)


def upper_bound_multi_path(L: int, rho: float, n_t: int, n_r: int, sigma_z_sq: float) -> float:
    """Mean-SSE upper bound (n_t n_r / rho) * sum_l n_t * lambda_l_mean."""
    if not 1 <= L <= n_r:
        raise ValueError("L must lie in 1..n_r")
    mp = MarchenkoPastur(sigma_z_sq=sigma_z_sq, c=n_r / n_t)
    total = sum(ordered_eigenvalue_mean(mp, l, n_r) for l in range(1, L + 1))
    return n_t * n_r / rho * n_t * total


@dataclass(frozen=True)
class FisherModel:
    """Real parameter vector (|a_l|, phase_l, omega_aod_l, omega_aoa_l)
    per path, plus the white residual noise variance."""

    params: np.ndarray
    noise_var: float
    n_t: int
    n_r: int

    def __post_init__(self):
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        if len(self.params) % 4 != 0:
            raise ValueError("params length must be a multiple of 4")

    @property
    def n_paths(self) -> int:
        return len(self.params) // 4


def _channel_jacobian(model: FisherModel) -> np.ndarray:
    """Jacobian of vec(H) w.r.t. the 4L real parameters.

    H[m, n] = sum_l |a_l| exp(j(phase_l + w_aoa_l m + w_aod_l n)); each
    column below is the derivative of the vectorized channel w.r.t. one
    parameter, verified against central finite differences in the tests.
    """
    L = model.n_paths
    m = np.arange(model.n_r)[:, None]
    n = np.arange(model.n_t)[None, :]
    cols = []
    for l in range(L):
        mag, phase, w_aod, w_aoa = model.params[4 * l : 4 * l + 4]
        cis = np.exp(1j * (phase + w_aoa * m + w_aod * n))
        cols.append(cis.ravel())                       # d/d|a|
        cols.append((1j * mag * cis).ravel())          # d/d phase
        cols.append((1j * n * mag * cis).ravel())      # d/d omega_aod
        cols.append((1j * m * mag * cis).ravel())      # d/d omega_aoa
    return np.stack(cols, axis=1)


def fisher_matrix(model: FisherModel) -> np.ndarray:
    """Fisher information (2/noise_var) * Re[J^H J]; symmetric PSD."""
    j = _channel_jacobian(model)
    f = (2.0 / model.noise_var) * np.real(j.conj().T @ j)
    return 0.5 * (f + f.T)


def crlb_variances(model: FisherModel, floor_ratio: float = 1e-12):
    """Diagonal of the (eigenvalue-floored pseudo-) inverse Fisher matrix.

    Returns (variances, degenerate_flag); the flag marks realizations
    where flooring was needed (e.g. nearly coincident path frequencies).
    """
    f = fisher_matrix(model)
    vals, vecs = np.linalg.eigh(f)
    lam_max = vals[-1]
    if lam_max <= 0:
        raise ArithmeticError("Fisher matrix is identically zero")
    floor = floor_ratio * lam_max
    degenerate = bool(np.any(vals < floor))
    inv_vals = np.where(vals > floor, 1.0 / np.maximum(vals, floor), 1.0 / floor)
    inv = (vecs * inv_vals) @ vecs.conj().T
    return np.diag(inv).real.copy(), degenerate


def crlb_nmse_bound(
    channel: ChannelRealization,
    rho: float,
    sigma_z_sq: float,
    rng: SeededRng,
) -> float:
    """One CRLB-reconstruction NMSE sample for a channel realization.

    The residual variance after L-rank denoising is taken from the
    Marchenko-Pastur ordered eigenvalue means; every true parameter is
    perturbed by Gaussian noise at its CRLB variance and the channel is
    rebuilt from the perturbed parameters. The white-residual assumption
    is inherited from the bound's derivation. Averaging across
    realizations is left to the caller.
    """
    L = len(channel.paths)
    mp = MarchenkoPastur(sigma_z_sq=sigma_z_sq, c=channel.n_r / channel.n_t)
    noise_var = (
        channel.n_t
        / rho
        * sum(ordered_eigenvalue_mean(mp, l, channel.n_r) for l in range(1, L + 1))
    )
    params = np.empty(4 * L)
    for l, p in enumerate(channel.paths):
        params[4 * l : 4 * l + 4] = (
            p.gain_magnitude,
            p.gain_phase,
            p.omega_aod,
            p.omega_aoa,
        )
    model = FisherModel(params=params, noise_var=noise_var, n_t=channel.n_t, n_r=channel.n_r)
    variances, degenerate = crlb_variances(model)
    if degenerate:
        warnings.warn("near-singular Fisher matrix, pseudo-inverse applied")
    perturbed = params + rng.normal(1.0, size=params.shape) * np.sqrt(variances)
    m = np.arange(channel.n_r)[:, None]
    n = np.arange(channel.n_t)[None, :]
    h_hat = np.zeros((channel.n_r, channel.n_t), dtype=complex)
    for l in range(L):
        mag, phase, w_aod, w_aoa = perturbed[4 * l : 4 * l + 4]
        h_hat += mag * np.exp(1j * (phase + w_aoa * m + w_aod * n))
    err = np.linalg.norm(h_hat - channel.h) ** 2
    return float(err / np.linalg.norm(channel.h) ** 2)
