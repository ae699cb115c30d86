"""Time-averaged frequency, flux sensitivities, sweet spots, sidebands.

Under flux modulation the qubit precesses at its time-averaged transition
frequency, and the drive redistributes coupling into sidebands spaced by
the modulation frequency.  This module computes the average frequency two
independent ways (direct quadrature of the diagonalized frequency curve,
and a Bessel-function closed form built on the cosine series), locates
operating points where the average is first-order insensitive to both
flux knobs, maps such points over the control plane, and extracts the
complex sideband weights that set parametric gate speed.

Conventions: frequencies in GHz, flux in flux quanta, sensitivities in
GHz per flux quantum.  A point counts as a dynamical sweet spot when both
sensitivities are below 50 kHz per flux quantum.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.special import jv

from .errors import CutoffTooSmall, NoRoot, ValidationError
from .pulses import BichromaticPulse
from .transmon import FourierSeries, TransmonSpec, fourier_coefficients, transition_frequencies

__all__ = [
    "SWEET_SPOT_THRESHOLD_GHZ_PER_PHI0",
    "Sensitivities",
    "OperatingPoint",
    "NoiseModel",
    "AtlasResult",
    "SidebandSpectrum",
    "avg_frequency_timedomain",
    "avg_frequency_bessel",
    "sensitivities",
    "operating_point",
    "dephasing_proxy",
    "sweet_spot_solve",
    "sweet_spot_atlas",
    "sideband_weights",
]

# 50 kHz per flux quantum, on both knobs
SWEET_SPOT_THRESHOLD_GHZ_PER_PHI0 = 5e-5

_QUAD_NODES = 512


def _series_array(spec: TransmonSpec, channel: str) -> np.ndarray:
    return fourier_coefficients(spec, channel=channel).as_array()


def _fbar_quad(
    coeffs: np.ndarray,
    phi_dc: float,
    p: int,
    alpha: float,
    theta: float,
    amps: np.ndarray,
    nodes: int = _QUAD_NODES,
) -> np.ndarray:
    """Average frequency for a batch of ac amplitudes, via the cosine series.

    Rectangle rule on a uniform grid over one fundamental period, which is
    spectrally exact for the periodic integrand.  The n-th harmonic of the
    series is accumulated with iterated complex powers instead of n calls
    to cos, so a full amplitude scan costs one (amps x nodes) array pass.
    """
    tau = np.arange(nodes) / nodes
    drive = math.cos(alpha) * np.cos(2.0 * np.pi * tau) + math.sin(alpha) * np.cos(
        2.0 * np.pi * p * tau + theta
    )
    phi = 2.0 * np.pi * (phi_dc + np.multiply.outer(np.asarray(amps, float), drive))
    w = np.exp(1j * phi)
    acc = np.full(w.shape[0], coeffs[0])
    wn = w
    for c in coeffs[1:]:
        acc = acc + c * wn.real.mean(axis=1)
        wn = wn * w
    return acc


def _finst_quad(
    coeffs: np.ndarray,
    pulse: BichromaticPulse,
    nodes: int,
) -> np.ndarray:
    """Instantaneous frequency on a uniform grid over one fundamental period."""
    tau = np.arange(nodes) / nodes
    drive = math.cos(pulse.alpha_rad) * np.cos(2.0 * np.pi * tau) + math.sin(
        pulse.alpha_rad
    ) * np.cos(2.0 * np.pi * pulse.p * tau + pulse.theta_rad)
    phi = 2.0 * np.pi * (pulse.phi_dc_phi0 + pulse.phi_ac_phi0 * drive)
    w = np.exp(1j * phi)
    acc = np.full(nodes, coeffs[0])
    wn = w
    for c in coeffs[1:]:
        acc = acc + c * wn.real
        wn = wn * w
    return acc


def avg_frequency_timedomain(
    spec: TransmonSpec,
    pulse: BichromaticPulse,
    nodes: int = 2048,
    channel: str = "f01",
) -> float:
    """Average transition frequency by direct quadrature over one period.

    Diagonalizes the Hamiltonian at every time sample and integrates with
    a composite Simpson rule.  This route never touches the cosine-series
    machinery, so it serves as an independent check on the closed form.
    """
    if nodes < 2048:
        raise ValidationError("need at least 2048 quadrature nodes")
    tau = np.linspace(0.0, 1.0, nodes + 1)
    t_ns = tau / pulse.fm_ghz
    flux = pulse.flux(t_ns)
    f01, f12 = transition_frequencies(spec, flux)
    f = {"f01": f01, "f12": f12}[channel]
    return float(simpson(f, x=tau))


def avg_frequency_bessel(
    series: FourierSeries,
    pulse: BichromaticPulse,
    m_max: int = 48,
) -> float:
    """Average frequency from the Bessel-function closed form.

    Each cosine harmonic of the frequency curve contributes a product of
    Bessel functions evaluated at the two tone amplitudes, summed over the
    phase harmonics m with weight cos(m theta).  The sum is truncated at
    ``m_max``; if the last retained term still exceeds 1 Hz the truncation
    is rejected.
    """
    if m_max < 8:
        raise ValidationError("harmonic cutoff below 8 cannot be trusted")
    coeffs = series.as_array()
    n = np.arange(coeffs.size)
    a1 = 2.0 * np.pi * pulse.amp_fundamental_phi0
    ap = 2.0 * np.pi * pulse.amp_multiple_phi0
    m = np.arange(m_max + 1)
    phase = np.cos(
        2.0 * np.pi * pulse.phi_dc_phi0 * n[None, :]
        + (pulse.p + 1) * m[:, None] * (np.pi / 2.0)
    )
    j1 = jv(pulse.p * m[:, None], n[None, :] * a1)
    jp = jv(m[:, None], n[None, :] * ap)
    nu = ((2.0 - (m == 0))[:, None] * phase * j1 * jp) @ coeffs
    if abs(nu[m_max]) > 1e-9:
        raise CutoffTooSmall(
            f"harmonic m={m_max} still contributes {abs(nu[m_max]):.2e} GHz; "
            "raise m_max"
        )
    return float(nu @ np.cos(m * pulse.theta_rad))


@dataclass(frozen=True)
class Sensitivities:
    """First derivatives of the average frequency w.r.t. the flux knobs."""

    dfbar_dac_ghz_per_phi0: float
    dfbar_ddc_ghz_per_phi0: float


def _sensitivities_from_coeffs(
    coeffs: np.ndarray,
    phi_dc: float,
    p: int,
    alpha: float,
    theta: float,
    phi_ac: float,
    step: float = 1e-4,
) -> Sensitivities:
    # five-point central differences: O(h^4), immune to the curvature at
    # sweet spots that degrades the three-point form
    amps = phi_ac + step * np.array([-2.0, -1.0, 1.0, 2.0])
    fa = _fbar_quad(coeffs, phi_dc, p, alpha, theta, amps)
    dac = (8.0 * (fa[2] - fa[1]) - (fa[3] - fa[0])) / (12.0 * step)
    fd = np.array(
        [
            _fbar_quad(coeffs, phi_dc + s * step, p, alpha, theta, np.array([phi_ac]))[0]
            for s in (-2.0, -1.0, 1.0, 2.0)
        ]
    )
    ddc = (8.0 * (fd[2] - fd[1]) - (fd[3] - fd[0])) / (12.0 * step)
    return Sensitivities(float(dac), float(ddc))


def sensitivities(
    spec: TransmonSpec,
    pulse: BichromaticPulse,
    step_phi0: float = 1e-4,
) -> Sensitivities:
    """Flux sensitivities of the average frequency at one pulse setting."""
    coeffs = _series_array(spec, "f01")
    return _sensitivities_from_coeffs(
        coeffs,
        pulse.phi_dc_phi0,
        pulse.p,
        pulse.alpha_rad,
        pulse.theta_rad,
        pulse.phi_ac_phi0,
        step=step_phi0,
    )


@dataclass(frozen=True)
class OperatingPoint:
    """A pulse setting together with its averaged-frequency response."""

    pulse: BichromaticPulse
    f_bar_ghz: float
    dfbar_dac_ghz_per_phi0: float
    dfbar_ddc_ghz_per_phi0: float
    is_sweet_spot: bool


def operating_point(
    spec: TransmonSpec,
    pulse: BichromaticPulse,
    threshold_ghz_per_phi0: float = SWEET_SPOT_THRESHOLD_GHZ_PER_PHI0,
) -> OperatingPoint:
    """Evaluate average frequency and sensitivities, flag sweet spots.

    The flag requires both knobs below threshold; the ac stationarity
    alone is not enough when the dc bias sits off a parity-protected
    point.
    """
    coeffs = _series_array(spec, "f01")
    fbar = float(
        _fbar_quad(
            coeffs,
            pulse.phi_dc_phi0,
            pulse.p,
            pulse.alpha_rad,
            pulse.theta_rad,
            np.array([pulse.phi_ac_phi0]),
        )[0]
    )
    sens = _sensitivities_from_coeffs(
        coeffs,
        pulse.phi_dc_phi0,
        pulse.p,
        pulse.alpha_rad,
        pulse.theta_rad,
        pulse.phi_ac_phi0,
    )
    sweet = (
        abs(sens.dfbar_dac_ghz_per_phi0) < threshold_ghz_per_phi0
        and abs(sens.dfbar_ddc_ghz_per_phi0) < threshold_ghz_per_phi0
    )
    return OperatingPoint(
        pulse=pulse,
        f_bar_ghz=fbar,
        dfbar_dac_ghz_per_phi0=sens.dfbar_dac_ghz_per_phi0,
        dfbar_ddc_ghz_per_phi0=sens.dfbar_ddc_ghz_per_phi0,
        is_sweet_spot=sweet,
    )


@dataclass(frozen=True)
class NoiseModel:
    """Relative strengths of additive dc and multiplicative ac flux noise."""

    a_dc: float = 1.0
    a_ac: float = 1.0


def dephasing_proxy(point: OperatingPoint, noise: NoiseModel = NoiseModel()) -> float:
    """Relative first-order dephasing rate driven by slow flux noise.

    Quadrature sum of the two sensitivities weighted by the noise
    amplitudes.  Only ratios between operating points are meaningful; the
    absolute scale of the noise amplitudes is not calibrated.
    """
    return math.hypot(
        noise.a_dc * point.dfbar_ddc_ghz_per_phi0,
        noise.a_ac * point.dfbar_dac_ghz_per_phi0,
    )


def _dfdac_batch(
    coeffs: np.ndarray,
    phi_dc: float,
    p: int,
    alpha: float,
    theta: float,
    amps: np.ndarray,
    step: float = 1e-4,
) -> np.ndarray:
    amps = np.asarray(amps, float)
    stacked = np.concatenate(
        [amps - 2 * step, amps - step, amps + step, amps + 2 * step]
    )
    f = _fbar_quad(coeffs, phi_dc, p, alpha, theta, stacked).reshape(4, amps.size)
    return (8.0 * (f[2] - f[1]) - (f[3] - f[0])) / (12.0 * step)


def _solve_from_coeffs(
    coeffs: np.ndarray,
    phi_dc: float,
    p: int,
    alpha: float,
    theta: float,
    window: tuple[float, float],
    scan_points: int,
    xtol: float,
) -> list[tuple[float, float]]:
    lo, hi = window
    grid = np.linspace(lo, hi, scan_points)
    der = _dfdac_batch(coeffs, phi_dc, p, alpha, theta, grid)

    def d(a: float) -> float:
        return float(_dfdac_batch(coeffs, phi_dc, p, alpha, theta, np.array([a]))[0])

    roots: list[float] = []
    for i in range(scan_points - 1):
        d0, d1 = der[i], der[i + 1]
        if d0 == 0.0:
            roots.append(float(grid[i]))
            continue
        if d0 * d1 < 0.0:
            a, b, fa = float(grid[i]), float(grid[i + 1]), float(d0)
            while b - a > xtol:
                mid = 0.5 * (a + b)
                fm = d(mid)
                if fm == 0.0:
                    a = b = mid
                    break
                if fa * fm < 0.0:
                    b = mid
                else:
                    a, fa = mid, fm
            roots.append(0.5 * (a + b))
    if der[-1] == 0.0:
        roots.append(float(grid[-1]))

    # merge duplicates from a root sitting exactly on a grid node
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if not merged or r - merged[-1] > 10.0 * xtol:
            merged.append(r)
    if not merged:
        raise NoRoot(
            f"no stationary amplitude in [{lo}, {hi}] for alpha={alpha:.4f}, "
            f"theta={theta:.4f}"
        )
    fbars = _fbar_quad(coeffs, phi_dc, p, alpha, theta, np.array(merged))
    return [(float(r), float(f)) for r, f in zip(merged, fbars)]


def sweet_spot_solve(
    spec: TransmonSpec,
    phi_dc: float,
    p: int,
    alpha_rad: float,
    theta_rad: float,
    window: tuple[float, float] = (0.05, 0.9),
    scan_points: int = 64,
    xtol: float = 1e-6,
) -> list[tuple[float, float]]:
    """Amplitudes where the average frequency is stationary in the ac knob.

    Scans the window for sign changes of the derivative and bisects each
    bracket down to ``xtol``.  Returns (amplitude, average frequency)
    pairs in increasing amplitude order; raises NoRoot when the window
    contains none, which is a legitimate outcome for some mixing angles.
    """
    if not (0.0 <= window[0] < window[1]):
        raise ValidationError("window must satisfy 0 <= lo < hi")
    if scan_points < 16:
        raise ValidationError("need at least 16 scan points")
    coeffs = _series_array(spec, "f01")
    return _solve_from_coeffs(
        coeffs, phi_dc, p, alpha_rad, theta_rad, window, scan_points, xtol
    )


@dataclass(frozen=True)
class AtlasResult:
    """Sweet-spot candidates over an (alpha, theta) grid."""

    points: tuple[OperatingPoint, ...]
    n_grid_nodes: int
    n_no_root: int

    @property
    def fbar_span_ghz(self) -> tuple[float, float]:
        sweet = [pt.f_bar_ghz for pt in self.points if pt.is_sweet_spot]
        if not sweet:
            return (math.nan, math.nan)
        return (min(sweet), max(sweet))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(
                "alpha_rad,theta_rad,phi_ac_phi0,fbar_ghz,"
                "dfdac_ghz_per_phi0,sweet_flag\n"
            )
            for pt in self.points:
                fh.write(
                    f"{pt.pulse.alpha_rad:.12g},{pt.pulse.theta_rad:.12g},"
                    f"{pt.pulse.phi_ac_phi0:.12g},{pt.f_bar_ghz:.12g},"
                    f"{pt.dfbar_dac_ghz_per_phi0:.12g},{int(pt.is_sweet_spot)}\n"
                )


def _atlas_chunk(args: tuple) -> list[tuple[float, float, float, float, float, float]]:
    (coeffs, phi_dc, p, alphas, thetas, window, scan_points, xtol) = args
    coeffs = np.asarray(coeffs)
    rows = []
    for alpha in alphas:
        for theta in thetas:
            try:
                solutions = _solve_from_coeffs(
                    coeffs, phi_dc, p, alpha, theta, window, scan_points, xtol
                )
            except NoRoot:
                rows.append((alpha, theta, math.nan, math.nan, math.nan, math.nan))
                continue
            for amp, fbar in solutions:
                sens = _sensitivities_from_coeffs(
                    coeffs, phi_dc, p, alpha, theta, amp
                )
                rows.append(
                    (
                        alpha,
                        theta,
                        amp,
                        fbar,
                        sens.dfbar_dac_ghz_per_phi0,
                        sens.dfbar_ddc_ghz_per_phi0,
                    )
                )
    return rows


def sweet_spot_atlas(
    spec: TransmonSpec,
    phi_dc: float,
    p: int,
    alpha_grid: Sequence[float],
    theta_grid: Sequence[float],
    *,
    jobs: int = 1,
    fm_mhz: float = 100.0,
    window: tuple[float, float] = (0.05, 0.9),
    scan_points: int = 64,
    xtol: float = 1e-6,
    threshold_ghz_per_phi0: float = SWEET_SPOT_THRESHOLD_GHZ_PER_PHI0,
) -> AtlasResult:
    """Locate stationary amplitudes across a grid of mixing parameters.

    Every grid node is solved independently; nodes without a root are
    counted, not fatal.  The reported operating points carry a pulse with
    the given modulation frequency, which does not affect the average
    frequency or the sensitivities.  With ``jobs > 1`` the alpha rows are
    distributed over worker processes; output ordering is independent of
    the job count.
    """
    alphas = [float(a) for a in alpha_grid]
    thetas = [float(t) for t in theta_grid]
    if not alphas or not thetas:
        raise ValidationError("grids must be non-empty")
    coeffs = _series_array(spec, "f01")

    if jobs > 1:
        chunks = [
            (coeffs, phi_dc, p, [a], thetas, window, scan_points, xtol)
            for a in alphas
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_alpha = list(pool.map(_atlas_chunk, chunks))
        rows = [row for chunk in per_alpha for row in chunk]
    else:
        rows = _atlas_chunk(
            (coeffs, phi_dc, p, alphas, thetas, window, scan_points, xtol)
        )

    points: list[OperatingPoint] = []
    n_no_root = 0
    for alpha, theta, amp, fbar, dac, ddc in rows:
        if math.isnan(amp):
            n_no_root += 1
            continue
        pulse = BichromaticPulse(
            fm_mhz=fm_mhz,
            phi_ac_phi0=amp,
            alpha_rad=alpha,
            theta_rad=theta,
            p=p,
            phi_dc_phi0=phi_dc,
        )
        sweet = abs(dac) < threshold_ghz_per_phi0 and abs(ddc) < threshold_ghz_per_phi0
        points.append(
            OperatingPoint(
                pulse=pulse,
                f_bar_ghz=fbar,
                dfbar_dac_ghz_per_phi0=dac,
                dfbar_ddc_ghz_per_phi0=ddc,
                is_sweet_spot=sweet,
            )
        )
    return AtlasResult(
        points=tuple(points),
        n_grid_nodes=len(alphas) * len(thetas),
        n_no_root=n_no_root,
    )


@dataclass(frozen=True)
class SidebandSpectrum:
    """Complex sideband weights of the modulated coupling."""

    ks: tuple[int, ...]
    weights: tuple[complex, ...]
    fm_mhz: float
    f_bar_ghz: float
    channel: str

    def weight(self, k: int) -> complex:
        try:
            return self.weights[self.ks.index(k)]
        except ValueError:
            raise ValidationError(f"sideband {k} outside computed range") from None

    def frequency_ghz(self, k: int) -> float:
        """Ladder frequency of sideband k: f_bar + k * fm."""
        return self.f_bar_ghz + k * self.fm_mhz * 1e-3

    @property
    def power_in_range(self) -> float:
        return float(sum(abs(w) ** 2 for w in self.weights))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("k,re_eps,im_eps,abs_eps,f_k_ghz\n")
            for k, w in zip(self.ks, self.weights):
                fh.write(
                    f"{k},{w.real:.12g},{w.imag:.12g},{abs(w):.12g},"
                    f"{self.frequency_ghz(k):.12g}\n"
                )


def sideband_weights(
    spec: TransmonSpec,
    pulse: BichromaticPulse,
    k_range: tuple[int, int] = (-10, 10),
    *,
    channel: str = "f01",
    coupling: Callable[[np.ndarray], np.ndarray] | None = None,
    nodes: int = 4096,
) -> SidebandSpectrum:
    """Sideband weights of the coupling under the modulated phase.

    Integrates the instantaneous transition frequency into its accumulated
    phase, detrends by the average, and reads the weights off a single
    FFT over one fundamental period.  The weights over all orders satisfy
    a Parseval identity (total power one); for the quoted finite range
    the deficit is the power leaked beyond it.

    ``coupling`` optionally supplies a flux-dependent coupling curve; it
    is normalized to unit root-mean-square over the period so the
    Parseval identity is preserved.  Default is a constant coupling.
    """
    if nodes < 4096:
        raise ValidationError("need at least 4096 phase-integration nodes")
    klo, khi = k_range
    if klo > khi:
        raise ValidationError("k_range must be (low, high) with low <= high")
    if khi - klo + 1 > nodes // 4:
        raise ValidationError("k_range too wide for the node count")
    coeffs = _series_array(spec, channel)
    finst = _finst_quad(coeffs, pulse, nodes)
    cycles = finst / pulse.fm_ghz
    # trapezoid steps around the full period, including the wrap segment,
    # so the accumulated phase is exactly periodic-consistent
    dpsi = 0.5 * (cycles + np.roll(cycles, -1)) / nodes
    psi = np.concatenate(([0.0], np.cumsum(dpsi)))
    total = psi[-1]
    tau = np.arange(nodes) / nodes
    x = np.exp(2j * np.pi * (psi[:nodes] - total * tau))
    if coupling is not None:
        flux = pulse.flux(tau / pulse.fm_ghz)
        g = np.asarray(coupling(flux), dtype=float)
        if np.any(g <= 0):
            raise ValidationError("coupling curve must be positive over the pulse")
        x = x * (g / math.sqrt(float(np.mean(g * g))))
    eps = np.fft.fft(x) / nodes
    ks = tuple(range(klo, khi + 1))
    weights = tuple(complex(eps[k % nodes]) for k in ks)
    return SidebandSpectrum(
        ks=ks,
        weights=weights,
        fm_mhz=pulse.fm_mhz,
        f_bar_ghz=float(total * pulse.fm_ghz),
        channel=channel,
    )
