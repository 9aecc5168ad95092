"""Physics extraction from delay histograms.

Covers the three measurements the simulated instrument exists for:

* second-order correlation at zero delay from peak-area ratios, with a
  Poisson-propagated uncertainty,
* spontaneous-emission lifetime by fitting an exponential decay convolved
  with a Gaussian instrument response,
* detection-efficiency / dark-rate calibration from a Poissonian
  attenuation sweep via R(mu) = D + f*(1 - exp(-eta*mu)).

All fits are unweighted least squares by default; pass ``weighted=True``
for 1/max(count, 1) Poisson weighting.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

from .detectors import FWHM_PER_SIGMA, sigma_to_fwhm
from .errors import AnalysisError, FormatError
from .nlsq import levenberg_marquardt

_SQRT2 = math.sqrt(2.0)
_SQRT_PI = math.sqrt(math.pi)


# ---------------------------------------------------------------------------
# result types


@dataclass(frozen=True)
class G2Estimate:
    g2_zero: float
    sigma: float
    center_area: int
    side_areas: tuple
    n_side_peaks: int

    def record(self):
        return {
            "g2_zero": self.g2_zero,
            "g2_sigma": self.sigma,
            "center_area": self.center_area,
            "side_area_mean": float(np.mean(self.side_areas)),
            "n_side_peaks": self.n_side_peaks,
        }


@dataclass(frozen=True)
class LifetimeFit:
    tau_ps: float
    irf_fwhm_ps: float
    amplitude: float
    t0_ps: float
    background: float
    residual_rms: float
    converged: bool
    iterations: int

    def record(self):
        return {
            "tau_ps": self.tau_ps,
            "sigma_ps": self.irf_fwhm_ps / FWHM_PER_SIGMA,
            "irf_fwhm_ps": self.irf_fwhm_ps,
            "amplitude": self.amplitude,
            "t0_ps": self.t0_ps,
            "background": self.background,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class DEFit:
    eta: float
    dark_rate_hz: float
    f_hz: float
    residual_rms: float
    converged: bool
    iterations: int

    def record(self):
        return {
            "eta": self.eta,
            "dark_rate_hz": self.dark_rate_hz,
            "f_hz": self.f_hz,
            "residual_rms": self.residual_rms,
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass(frozen=True)
class DECalibrationPoint:
    mu: float
    rate_hz: float

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.rate_hz < 0:
            raise ValueError("rate_hz must be >= 0")


# ---------------------------------------------------------------------------
# g2(0) from peak areas


def g2_zero(hist, rep_period_ps, integration_halfwidth_ps=None, n_side_peaks=20):
    """Zero-delay peak area over the mean surrounding peak area.

    Side windows are placed at +/- k * rep_period_ps, nearest first
    (negative before positive at each |k|), keeping the first
    `n_side_peaks` that fit inside the histogram.  The default integration
    half-width is half a period less one bin, so adjacent windows never
    overlap.  Uncertainty is pure Poisson counting propagation,
    g * sqrt(1/A0 + 1/sum(As)); a zero center area returns g2=0 with the
    one-count upper bound 1/mean(As) as sigma.
    """
    cfg = hist.config
    if integration_halfwidth_ps is None:
        integration_halfwidth_ps = rep_period_ps / 2.0 - cfg.bin_width_ps
    if not 0 < integration_halfwidth_ps < rep_period_ps / 2.0:
        raise AnalysisError(
            f"integration_halfwidth_ps must be in (0, rep_period/2), "
            f"got {integration_halfwidth_ps}"
        )
    if n_side_peaks < 2:
        raise AnalysisError("n_side_peaks must be >= 2")

    centers = hist.bin_centers()

    def window_area(peak_center):
        lo = peak_center - integration_halfwidth_ps
        hi = peak_center + integration_halfwidth_ps
        if lo < cfg.range_min_ps or hi > cfg.range_max_ps:
            return None
        mask = np.abs(centers - peak_center) <= integration_halfwidth_ps
        return int(hist.counts[mask].sum())

    center_area = window_area(0.0)
    if center_area is None:
        raise AnalysisError("zero-delay window falls outside the histogram range")

    side_areas = []
    k = 1
    while len(side_areas) < n_side_peaks:
        found = False
        for sign in (-1, 1):
            if len(side_areas) >= n_side_peaks:
                break
            area = window_area(sign * k * rep_period_ps)
            if area is not None:
                side_areas.append(area)
                found = True
        if not found:
            # window positions move monotonically outward, so nothing
            # further out can fit either
            raise AnalysisError(
                f"histogram range only accommodates {len(side_areas)} side peaks, "
                f"{n_side_peaks} requested"
            )
        k += 1

    total_side = sum(side_areas)
    if total_side == 0:
        raise AnalysisError("all side-peak windows are empty; cannot normalize")
    mean_side = total_side / len(side_areas)
    if center_area == 0:
        return G2Estimate(0.0, 1.0 / mean_side, 0, tuple(side_areas), n_side_peaks)
    g = center_area / mean_side
    sigma = g * math.sqrt(1.0 / center_area + 1.0 / total_side)
    return G2Estimate(g, sigma, center_area, tuple(side_areas), n_side_peaks)


# ---------------------------------------------------------------------------
# peak width


def peak_fwhm(hist, center_ps, search_halfwidth_ps):
    """FWHM of the peak nearest `center_ps`, by linear interpolation at
    half maximum after subtracting a baseline taken as the median of the
    outermost 20% of bins in the search window.

    A single hot bin among empty neighbours interpolates to exactly one
    bin width.  Raises if the maximum sits on the window edge or if the
    half level is not crossed on both sides.
    """
    centers = hist.bin_centers()
    mask = np.abs(centers - center_ps) <= search_halfwidth_ps
    if mask.sum() < 5:
        raise AnalysisError("search window smaller than 5 bins")
    x = centers[mask]
    y = hist.counts[mask].astype(float)

    n_edge = max(1, int(round(0.1 * x.size)))
    baseline = float(np.median(np.concatenate([y[:n_edge], y[-n_edge:]])))
    y = y - baseline

    i_max = int(np.argmax(y))
    if i_max == 0 or i_max == x.size - 1:
        raise AnalysisError("peak maximum is on the search-window edge")
    y_max = y[i_max]
    if y_max <= 0:
        raise AnalysisError("no peak above baseline in the search window")
    half = y_max / 2.0

    def cross(direction):
        i = i_max
        while 0 <= i + direction < x.size:
            j = i + direction
            if y[j] <= half:
                # interpolate between j (below) and i (above)
                return x[i] + (x[j] - x[i]) * (y[i] - half) / (y[i] - y[j])
            i = j
        raise AnalysisError(
            "half maximum not crossed on the "
            + ("left" if direction < 0 else "right")
            + " side of the peak"
        )

    return float(cross(+1) - cross(-1))


# ---------------------------------------------------------------------------
# exponential decay convolved with a Gaussian IRF


def decay_model(t_ps, tau_ps, sigma_ps, amplitude, t0_ps, background):
    """Expected counts for an exponential decay convolved with a Gaussian IRF.

    m(t) = B + (A/2) * exp(s^2/(2 tau^2) - u/tau) * erfc((s/tau - u/s)/sqrt(2)),
    u = t - t0.  Evaluated in a scaled-complementary form,
    (A/2) * erfcx(z) * exp(-u^2/(2 s^2)) for z >= 0, so the exp(s^2/(2 tau^2))
    factor can never overflow.  As sigma -> 0 this reduces to a one-sided
    exponential; at exactly u = 0 with sigma = 0 the erfc(0) = 1 convention
    gives B + A/2.
    """
    if tau_ps <= 0:
        raise ValueError("tau_ps must be > 0")
    if sigma_ps < 0:
        raise ValueError("sigma_ps must be >= 0")
    t = np.asarray(t_ps, dtype=float)
    scalar = t.ndim == 0
    u = np.atleast_1d(t) - t0_ps
    if sigma_ps == 0:
        signal = np.where(u > 0, np.exp(-np.clip(u, 0, None) / tau_ps), 0.0)
        signal = np.where(u == 0, 0.5, signal) * amplitude
    else:
        z = (sigma_ps / tau_ps - u / sigma_ps) / _SQRT2
        signal = np.empty_like(u)
        pos = z >= 0
        signal[pos] = erfcx(z[pos]) * np.exp(-u[pos] ** 2 / (2.0 * sigma_ps**2))
        signal[~pos] = (
            np.exp(sigma_ps**2 / (2.0 * tau_ps**2) - u[~pos] / tau_ps)
            * erfc(z[~pos])
        )
        signal *= 0.5 * amplitude
    out = background + signal
    return float(out[0]) if scalar else out


def decay_model_jacobian(t_ps, tau_ps, sigma_ps, amplitude, t0_ps, background):
    """Analytic partial derivatives of `decay_model`.

    Returns an (n, 5) array with columns in signature order
    (tau_ps, sigma_ps, amplitude, t0_ps, background).  Uses
    dS/dtheta = S * dp/dtheta - (A/sqrt(pi)) * exp(-u^2/(2 s^2)) * dz/dtheta
    with p the exponent and z the erfc argument, both factors overflow-safe.
    For sigma_ps = 0 the sigma column is zero (the one-sided limit is not
    differentiable in sigma) and the remaining columns differentiate the
    plain exponential.
    """
    t = np.atleast_1d(np.asarray(t_ps, dtype=float))
    u = t - t0_ps
    J = np.zeros((t.size, 5))
    if sigma_ps == 0:
        decay = np.where(u > 0, np.exp(-np.clip(u, 0, None) / tau_ps), 0.0)
        S = amplitude * decay
        J[:, 0] = S * u / tau_ps**2
        J[:, 2] = decay
        J[:, 3] = S / tau_ps
        J[:, 4] = 1.0
        return J
    S = decay_model(t, tau_ps, sigma_ps, amplitude, t0_ps, 0.0)
    K = (amplitude / _SQRT_PI) * np.exp(-(u**2) / (2.0 * sigma_ps**2))
    dp_dtau = -sigma_ps**2 / tau_ps**3 + u / tau_ps**2
    dz_dtau = -sigma_ps / (_SQRT2 * tau_ps**2)
    dp_dsig = sigma_ps / tau_ps**2
    dz_dsig = (1.0 / tau_ps + u / sigma_ps**2) / _SQRT2
    dp_dt0 = 1.0 / tau_ps
    dz_dt0 = 1.0 / (_SQRT2 * sigma_ps)
    J[:, 0] = S * dp_dtau - K * dz_dtau
    J[:, 1] = S * dp_dsig - K * dz_dsig
    if amplitude != 0:
        J[:, 2] = S / amplitude
    else:
        J[:, 2] = decay_model(t, tau_ps, sigma_ps, 1.0, t0_ps, 0.0)
    J[:, 3] = S * dp_dt0 - K * dz_dt0
    J[:, 4] = 1.0
    return J


def _decay_initial_guess(x, y, bin_width, fix_sigma_ps):
    """Spec'd initialization: peak bin, max count, early-bin median
    background, 1/e crossing for tau, bin width (or the fixed value) for sigma."""
    i_peak = int(np.argmax(y))
    amplitude = float(y[i_peak])
    n_early = max(1, int(round(0.1 * y.size)))
    background = float(np.median(y[:n_early]))
    target = amplitude / math.e
    tau = None
    for j in range(i_peak + 1, y.size):
        if y[j] <= target:
            tau = x[j] - x[i_peak]
            break
    if tau is None or tau <= 0:
        tau = max((x[-1] - x[i_peak]) / 3.0, bin_width)
    sigma = fix_sigma_ps if fix_sigma_ps is not None else float(bin_width)
    return {
        "amplitude": amplitude,
        "t0_ps": float(x[i_peak]),
        "tau_ps": float(tau),
        "background": background,
        "sigma_ps": float(sigma),
    }


def fit_lifetime_xy(x, y, bin_width_ps, fix_sigma=None, init=None, weighted=False,
                    max_iter=200):
    """Fit `decay_model` to (x, y) samples; see `fit_lifetime`."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 5:
        raise AnalysisError("too few bins to fit a decay")
    if np.all(y == y[0]):
        raise AnalysisError("degenerate histogram: all bins equal")
    if np.count_nonzero(y) < 20:
        raise AnalysisError("need at least 20 nonzero bins to fit a decay")

    guess = _decay_initial_guess(x, y, bin_width_ps, fix_sigma)
    if init:
        guess.update({k: float(v) for k, v in init.items()})

    w = 1.0 / np.sqrt(np.maximum(y, 1.0)) if weighted else np.ones_like(y)
    free_sigma = fix_sigma is None

    def unpack(p):
        a, t0, tau, b = p[0], p[1], p[2], p[3]
        sig = abs(p[4]) if free_sigma else float(fix_sigma)
        return a, t0, tau, b, sig

    def residual(p):
        a, t0, tau, b, sig = unpack(p)
        if tau <= 0:
            return np.full(y.size, np.inf)
        return (decay_model(x, tau, sig, a, t0, b) - y) * w

    def jacobian(p):
        a, t0, tau, b, sig = unpack(p)
        full = decay_model_jacobian(x, tau, sig, a, t0, b)
        cols = [full[:, 2], full[:, 3], full[:, 0], full[:, 4]]
        if free_sigma:
            sign = 1.0 if p[4] >= 0 else -1.0
            cols.append(full[:, 1] * sign)
        return np.column_stack(cols) * w[:, None]

    p0 = [guess["amplitude"], guess["t0_ps"], guess["tau_ps"], guess["background"]]
    if free_sigma:
        p0.append(guess["sigma_ps"])
    res = levenberg_marquardt(residual, jacobian, p0, max_iter=max_iter)
    a, t0, tau, b, sig = unpack(res.params)
    return LifetimeFit(
        tau_ps=float(tau),
        irf_fwhm_ps=sigma_to_fwhm(float(sig)),
        amplitude=float(a),
        t0_ps=float(t0),
        background=float(b),
        residual_rms=res.residual_rms,
        converged=bool(res.converged and tau > 0),
        iterations=res.iterations,
    )


def fit_lifetime(hist, fix_sigma=None, init=None, weighted=False, max_iter=200):
    """Least-squares fit of the convolved decay model to a histogram.

    Free parameters are amplitude, onset t0, lifetime tau, and flat
    background, plus the IRF sigma unless `fix_sigma` (in ps) is given.
    Non-convergence is reported through `converged=False` with the best
    parameters found, not an exception.
    """
    return fit_lifetime_xy(hist.bin_centers(), hist.counts.astype(float),
                           hist.config.bin_width_ps, fix_sigma=fix_sigma,
                           init=init, weighted=weighted, max_iter=max_iter)


# ---------------------------------------------------------------------------
# IRF measurement (Gaussian peak fit)


def gaussian_model(t_ps, amplitude, center_ps, sigma_ps, baseline):
    t = np.asarray(t_ps, dtype=float)
    return baseline + amplitude * np.exp(-((t - center_ps) ** 2) / (2.0 * sigma_ps**2))


def gaussian_jacobian(t_ps, amplitude, center_ps, sigma_ps, baseline):
    """Columns in signature order (amplitude, center_ps, sigma_ps, baseline)."""
    t = np.atleast_1d(np.asarray(t_ps, dtype=float))
    u = t - center_ps
    e = np.exp(-(u**2) / (2.0 * sigma_ps**2))
    J = np.empty((t.size, 4))
    J[:, 0] = e
    J[:, 1] = amplitude * e * u / sigma_ps**2
    J[:, 2] = amplitude * e * u**2 / sigma_ps**3
    J[:, 3] = 1.0
    return J


def measure_irf(hist):
    """Gaussian least-squares fit of a single-peak histogram.

    Returns (fwhm_ps, center_ps).  Raises AnalysisError when the fit does
    not converge or collapses to a non-peak.
    """
    x = hist.bin_centers()
    y = hist.counts.astype(float)
    if np.all(y == y[0]):
        raise AnalysisError("degenerate histogram: all bins equal")
    n_edge = max(1, int(round(0.1 * y.size)))
    baseline = float(np.median(np.concatenate([y[:n_edge], y[-n_edge:]])))
    i_max = int(np.argmax(y))
    amplitude = float(y[i_max]) - baseline
    if amplitude <= 0:
        raise AnalysisError("no peak above baseline")
    center = float(x[i_max])
    above = np.nonzero(y - baseline > amplitude / 2.0)[0]
    width_guess = (x[above[-1]] - x[above[0]]) + hist.config.bin_width_ps
    sigma = max(width_guess / FWHM_PER_SIGMA, hist.config.bin_width_ps / 2.0)

    def residual(p):
        if p[2] == 0:
            return np.full(y.size, np.inf)
        return gaussian_model(x, p[0], p[1], abs(p[2]), p[3]) - y

    def jacobian(p):
        sign = 1.0 if p[2] >= 0 else -1.0
        J = gaussian_jacobian(x, p[0], p[1], abs(p[2]), p[3])
        J[:, 2] *= sign
        return J

    res = levenberg_marquardt(residual, jacobian, [amplitude, center, sigma, baseline])
    amp_fit, center_fit, sigma_fit = res.params[0], res.params[1], abs(res.params[2])
    if not res.converged or amp_fit <= 0 or sigma_fit <= 0:
        raise AnalysisError("Gaussian IRF fit failed to converge on a peak")
    return sigma_to_fwhm(float(sigma_fit)), float(center_fit)


# ---------------------------------------------------------------------------
# detection-efficiency calibration


def de_model(mu, eta, dark_rate_hz, f_hz):
    """Expected count rate R(mu) = D + f * (1 - exp(-eta*mu))."""
    mu = np.asarray(mu, dtype=float)
    return dark_rate_hz + f_hz * -np.expm1(-eta * mu)


def de_model_jacobian(mu, eta, dark_rate_hz, f_hz):
    """Columns in parameter order (eta, dark_rate_hz)."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    J = np.empty((mu.size, 2))
    J[:, 0] = f_hz * mu * np.exp(-eta * mu)
    J[:, 1] = 1.0
    return J


def fit_de(points, f_hz, weighted=False, max_iter=200):
    """Fit (eta, D) to an attenuation sweep at known drive frequency f_hz.

    Initialization: D from the smallest observed rate, eta from the
    largest-signal point assuming the linear regime, clamped into (0, 1].
    Negative fitted parameters are clamped to their bounds and flagged via
    converged=False rather than raising.
    """
    points = list(points)
    if len(points) < 3:
        raise AnalysisError("need at least 3 sweep points")
    mu = np.array([p.mu for p in points], dtype=float)
    rate = np.array([p.rate_hz for p in points], dtype=float)
    positive = mu[mu > 0]
    if positive.size == 0 or positive.max() / positive.min() < 10.0:
        raise AnalysisError(
            "insufficient sweep range: mu values must span at least one decade"
        )
    if np.all(rate == rate[0]):
        raise AnalysisError("degenerate sweep: all rates equal")
    if f_hz <= 0:
        raise AnalysisError("f_hz must be > 0")

    d0 = float(rate.min())
    i_max = int(np.argmax(rate))
    eta0 = (rate[i_max] - d0) / (f_hz * mu[i_max]) if mu[i_max] > 0 else 0.5
    eta0 = min(max(eta0, 1e-12), 1.0)

    w = 1.0 / np.sqrt(np.maximum(rate, 1.0)) if weighted else np.ones_like(rate)

    def residual(p):
        return (de_model(mu, p[0], p[1], f_hz) - rate) * w

    def jacobian(p):
        return de_model_jacobian(mu, p[0], p[1], f_hz) * w[:, None]

    res = levenberg_marquardt(residual, jacobian, [eta0, d0], max_iter=max_iter)
    eta, dark = float(res.params[0]), float(res.params[1])
    clamped = False
    if eta < 0.0 or eta > 1.0:
        eta = min(max(eta, 0.0), 1.0)
        clamped = True
    if dark < 0.0:
        dark = 0.0
        clamped = True
    return DEFit(
        eta=eta,
        dark_rate_hz=dark,
        f_hz=float(f_hz),
        residual_rms=res.residual_rms,
        converged=bool(res.converged and not clamped),
        iterations=res.iterations,
    )


DE_CSV_HEADER = "mu,rate_hz"


def write_de_sweep(points, path):
    with open(path, "w", newline="") as fh:
        fh.write(DE_CSV_HEADER + "\n")
        for p in points:
            fh.write(f"{p.mu!r},{p.rate_hz!r}\n")


def read_de_sweep(path):
    points = []
    with open(path, "r", newline="") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line.replace(" ", "") != DE_CSV_HEADER:
                    raise FormatError(f"{path}:{lineno}: expected header {DE_CSV_HEADER!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 fields")
            try:
                points.append(DECalibrationPoint(float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if not header_seen:
            raise FormatError(f"{path}: missing {DE_CSV_HEADER!r} header")
    return points
