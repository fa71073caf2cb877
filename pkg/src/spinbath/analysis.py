"""Curve fitting and data ingestion for decay-time analysis.

Decay curves are fitted to the stretched exponential c0 exp(-(t/T)^p) on
their normalized-coherence view; decay rates versus concentration are
fitted to the line 1/T = rate * c + 1/t_other with an
errors-in-variables objective when both coordinate uncertainties are
available.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .decoherence import DecayCurve
from .errors import DataFormatError, EnvelopeFailureError, FitFailureError

BASIS_VALUES = ("single_quantum", "double_quantum")
ISOTOPE_VALUES = ("c13_natural", "c12_enriched")
MEASUREMENT_VALUES = ("t2", "t2star")

SAMPLE_CSV_FIELDS = ("concentration_ppm", "concentration_err_ppm",
                     "t_seconds", "t_ci_low", "t_ci_high", "p", "basis",
                     "isotope_class", "measurement")

_STRETCH_BOUNDS_P = (0.2, 6.0)
_STRETCH_BOUNDS_C0 = (1e-6, 1.5)


@dataclass(frozen=True)
class StretchedExpFit:
    """Result of a stretched-exponential fit on normalized coherence."""

    c0: float
    t_char: float
    p: float
    c0_err: float
    t_char_err: float
    p_err: float
    residual_norm: float
    converged: bool
    covariance: np.ndarray


@dataclass(frozen=True)
class ScalingFit:
    """Linear fit of decay rate versus concentration.

    rate_per_ppm is in rad/s per ppm equivalent (1/s/ppm on decay
    rates); t_other is the zero-concentration decay time 1/intercept, or
    None for a through-origin fit.
    """

    rate_per_ppm: float
    rate_err: float
    t_other: float | None
    t_other_err: float | None
    covariance: np.ndarray
    method: str
    residual_norm: float

    def predict_time(self, concentration_ppm) -> np.ndarray:
        """Forward model: decay time at a concentration."""
        c = np.asarray(concentration_ppm, dtype=float)
        intercept = 0.0 if self.t_other is None else 1.0 / self.t_other
        out = 1.0 / (self.rate_per_ppm * c + intercept)
        if out.ndim == 0:
            return float(out)
        return out


@dataclass(frozen=True)
class SamplePoint:
    """One measured decay time at a known defect concentration."""

    concentration_ppm: float
    t_seconds: float
    measurement: str
    basis: str = "single_quantum"
    isotope_class: str = "c13_natural"
    concentration_err_ppm: float | None = None
    t_ci_low: float | None = None
    t_ci_high: float | None = None
    p_value: float | None = None
    normalized: bool = False

    def __post_init__(self):
        if self.concentration_ppm <= 0.0:
            raise ValueError("concentration must be positive")
        if self.t_seconds <= 0.0:
            raise ValueError("decay time must be positive")
        if self.basis not in BASIS_VALUES:
            raise ValueError(f"basis must be one of {BASIS_VALUES}")
        if self.isotope_class not in ISOTOPE_VALUES:
            raise ValueError(f"isotope_class must be one of {ISOTOPE_VALUES}")
        if self.measurement not in MEASUREMENT_VALUES:
            raise ValueError(
                f"measurement must be one of {MEASUREMENT_VALUES}")


def normalize_basis(point: SamplePoint) -> SamplePoint:
    """Apply the double-quantum time correction.

    Double-quantum dephasing runs at twice the single-quantum rate, so
    measured double-quantum t2star values are doubled to compare on the
    single-quantum scale.  Points that do not need the correction pass
    through unchanged; re-applying it to an already corrected point is
    an error.
    """
    if point.basis != "double_quantum" or point.measurement != "t2star":
        return point
    if point.normalized:
        raise ValueError("point is already basis-normalized")
    return replace(
        point,
        t_seconds=2.0 * point.t_seconds,
        t_ci_low=None if point.t_ci_low is None else 2.0 * point.t_ci_low,
        t_ci_high=None if point.t_ci_high is None else 2.0 * point.t_ci_high,
        normalized=True)


def _coherence_arrays(curve, values, stderr):
    if isinstance(curve, DecayCurve):
        times = curve.times
        y = curve.as_coherence()
        if stderr is None and curve.stderr is not None:
            stderr = 2.0 * curve.stderr if curve.kind == "probability" \
                else curve.stderr
    else:
        times = np.asarray(curve, dtype=float)
        if values is None:
            raise ValueError("values are required when passing raw times")
        y = np.asarray(values, dtype=float)
    if stderr is not None:
        stderr = np.asarray(stderr, dtype=float)
    return times, y, stderr


def fit_stretched_exp(curve, values=None, stderr=None) -> StretchedExpFit:
    """Fit c0 exp(-(t/T)^p) to a decay curve.

    Accepts a DecayCurve (probability curves are converted to the
    2p - 1 coherence view) or raw (times, values) arrays.  The curve is
    max-normalized before fitting with the amplitude left free; the
    characteristic time is initialized at the 1/e crossing and the fit
    restarts from jittered guesses if the first attempt fails.
    """
    times, y, sigma = _coherence_arrays(curve, values, stderr)
    if times.size != y.size:
        raise ValueError("times and values must have the same length")
    order = np.argsort(times, kind="stable")
    times, y = times[order], y[order]
    if sigma is not None:
        sigma = sigma[order]
    if times.size < 8:
        raise ValueError("need at least 8 points to fit a stretched "
                         "exponential")
    ymax = float(np.max(y))
    if ymax <= 0.0:
        raise ValueError("curve has no positive coherence values")
    yn = y / ymax
    if float(np.min(yn)) >= math.exp(-1.0):
        raise ValueError("curve never decays below 1/e of its maximum; "
                         "extend the time range before fitting")
    weights = np.ones_like(yn)
    if sigma is not None:
        scaled = sigma / ymax
        good = scaled > 0
        weights = np.where(good, 1.0 / np.where(good, scaled, 1.0), 1.0)

    crossing = np.argmax(yn < math.exp(-1.0))
    if crossing == 0:
        t0_guess = times[max(1, times.size // 4)]
    else:
        y_hi, y_lo = yn[crossing - 1], yn[crossing]
        frac = (y_hi - math.exp(-1.0)) / max(y_hi - y_lo, 1e-300)
        t0_guess = times[crossing - 1] \
            + frac * (times[crossing] - times[crossing - 1])
    t_positive = times[times > 0.0]
    t_lo = float(t_positive[0]) * 1e-3 if t_positive.size else 1e-12
    t_hi = float(times[-1]) * 1e3
    t0_guess = min(max(t0_guess, t_lo * 10), t_hi / 10)

    def residuals(theta):
        c0, t_char, p = theta
        z = np.zeros_like(times)
        pos = times > 0.0
        z[pos] = (times[pos] / t_char) ** p
        return (c0 * np.exp(-z) - yn) * weights

    def jacobian(theta):
        c0, t_char, p = theta
        z = np.zeros_like(times)
        logr = np.zeros_like(times)
        pos = times > 0.0
        z[pos] = (times[pos] / t_char) ** p
        logr[pos] = np.log(times[pos] / t_char)
        e = np.exp(-z)
        jac = np.empty((times.size, 3))
        jac[:, 0] = e * weights
        jac[:, 1] = c0 * e * p * z / t_char * weights
        jac[:, 2] = -c0 * e * z * logr * weights
        return jac

    lower = [_STRETCH_BOUNDS_C0[0], t_lo, _STRETCH_BOUNDS_P[0]]
    upper = [_STRETCH_BOUNDS_C0[1], t_hi, _STRETCH_BOUNDS_P[1]]
    jitter = np.random.default_rng(0)
    starts = [(float(yn[0]), t0_guess, 1.0)]
    for p_start in (1.5, 2.0, 3.0, 0.7):
        factor = 10.0 ** jitter.uniform(-0.3, 0.3)
        starts.append((float(np.clip(yn[0], *_STRETCH_BOUNDS_C0)),
                       t0_guess * factor, p_start))
    result = None
    for c0_0, t_0, p_0 in starts:
        start = np.clip([c0_0, t_0, p_0], lower, upper)
        try:
            attempt = least_squares(residuals, start, jac=jacobian,
                                    bounds=(lower, upper),
                                    x_scale=[1.0, t0_guess, 1.0])
        except Exception:
            continue
        if attempt.success and np.all(np.isfinite(attempt.x)):
            if result is None or attempt.cost < result.cost:
                result = attempt
    if result is None:
        raise FitFailureError(
            "stretched-exponential fit failed from all starting points "
            f"(n={times.size}, t range {times[0]:.3g}..{times[-1]:.3g})")

    c0, t_char, p = result.x
    dof = max(times.size - 3, 1)
    jac = result.jac
    try:
        cov = np.linalg.pinv(jac.T @ jac) * (2.0 * result.cost / dof)
    except np.linalg.LinAlgError:
        cov = np.full((3, 3), np.nan)
    errs = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return StretchedExpFit(c0=float(c0), t_char=float(t_char), p=float(p),
                           c0_err=float(errs[0]), t_char_err=float(errs[1]),
                           p_err=float(errs[2]),
                           residual_norm=float(np.sqrt(2.0 * result.cost)),
                           converged=True, covariance=cov)


def _rate_data(points):
    x = np.array([pt.concentration_ppm for pt in points])
    y = 1.0 / np.array([pt.t_seconds for pt in points])
    sx = np.array([pt.concentration_err_ppm
                   if pt.concentration_err_ppm else np.nan for pt in points])
    widths = []
    for pt in points:
        if pt.t_ci_low is not None and pt.t_ci_high is not None:
            widths.append(0.5 * (pt.t_ci_high - pt.t_ci_low))
        else:
            widths.append(np.nan)
    st = np.array(widths)
    sy = st / np.array([pt.t_seconds for pt in points]) ** 2
    return x, y, sx, sy


def fit_scaling(points, include_offset: bool = True) -> ScalingFit:
    """Fit decay rate versus concentration to a line.

    Uses orthogonal-distance regression when every point carries both a
    concentration uncertainty and a time confidence interval, and
    weighted (or plain) least squares otherwise.  With include_offset
    the intercept is reported as the saturation time t_other =
    1/intercept.
    """
    points = list(points)
    if len(points) < 3:
        raise ValueError("need at least 3 points")
    x, y, sx, sy = _rate_data(points)
    if np.unique(x).size < 2:
        raise FitFailureError("all points share one concentration; the "
                              "design is singular")

    use_odr = bool(np.all(np.isfinite(sx)) and np.all(sx > 0)
                   and np.all(np.isfinite(sy)) and np.all(sy > 0))

    n_par = 2 if include_offset else 1
    weights = np.ones_like(y)
    if np.all(np.isfinite(sy)) and np.all(sy > 0):
        weights = 1.0 / sy
    if include_offset:
        design = np.column_stack([x, np.ones_like(x)])
    else:
        design = x[:, None]
    wd = design * weights[:, None]
    wy = y * weights
    beta, _, rank, _ = np.linalg.lstsq(wd, wy, rcond=None)
    if rank < n_par:
        raise FitFailureError("singular design matrix")
    resid = wy - wd @ beta
    dof = max(len(y) - n_par, 1)
    gram_inv = np.linalg.pinv(wd.T @ wd)
    if np.all(np.isfinite(sy)) and np.all(sy > 0):
        cov = gram_inv
    else:
        cov = gram_inv * float(resid @ resid) / dof
    method = "wls"

    if use_odr:
        from scipy import odr

        if include_offset:
            model = odr.Model(lambda b, xv: b[0] * xv + b[1])
            beta0 = beta
        else:
            model = odr.Model(lambda b, xv: b[0] * xv)
            beta0 = beta[:1]
        data = odr.RealData(x, y, sx=sx, sy=sy)
        output = odr.ODR(data, model, beta0=list(beta0)).run()
        if output.info >= 4:
            raise FitFailureError(
                f"orthogonal-distance fit failed: {output.stopreason}")
        beta = np.asarray(output.beta)
        cov = np.asarray(output.cov_beta)
        resid = np.sqrt(output.sum_square) * np.ones(1)
        method = "odr"

    rate = float(beta[0])
    rate_err = float(np.sqrt(max(cov[0, 0], 0.0)))
    if rate <= 0.0:
        raise FitFailureError(f"fitted rate {rate:.3g} is not positive")
    t_other = None
    t_other_err = None
    if include_offset:
        intercept = float(beta[1])
        if intercept > 0.0:
            t_other = 1.0 / intercept
            t_other_err = float(np.sqrt(max(cov[1, 1], 0.0))) / intercept**2
        else:
            t_other = math.inf
            t_other_err = math.inf
    return ScalingFit(rate_per_ppm=rate, rate_err=rate_err,
                      t_other=t_other, t_other_err=t_other_err,
                      covariance=cov, method=method,
                      residual_norm=float(np.linalg.norm(resid)))


def extract_envelope(curve: DecayCurve, revival_spacing: float) -> DecayCurve:
    """Reduce a revival-modulated curve to its envelope.

    Picks the maximum value inside a ten-percent window around every
    integer multiple of the revival spacing that lies in the sampled
    range.  A window inside the range with no samples means the grid
    cannot resolve the revivals and is an error.
    """
    if revival_spacing <= 0.0:
        raise ValueError("revival_spacing must be positive")
    times, values = curve.times, curve.values
    t_max = float(times[-1])
    env_t, env_v = [], []
    k = 0
    while k * revival_spacing - 0.1 * revival_spacing <= t_max:
        center = k * revival_spacing
        mask = np.abs(times - center) <= 0.1 * revival_spacing
        if not np.any(mask):
            if center <= t_max:
                raise EnvelopeFailureError(
                    f"no samples inside the revival window at t={center:.3g}")
            break
        idx = np.argmax(np.where(mask, values, -np.inf))
        env_t.append(float(times[idx]))
        env_v.append(float(values[idx]))
        k += 1
    if len(env_t) < 1:
        raise EnvelopeFailureError("no revival maxima detected")
    return DecayCurve(times=np.array(env_t), values=np.array(env_v),
                      sequence=curve.sequence, kind=curve.kind,
                      metadata=dict(curve.metadata,
                                    envelope_spacing_s=revival_spacing))


def _parse_optional(text):
    text = (text or "").strip()
    if not text:
        return None
    return float(text)


def read_sample_csv(path) -> list:
    """Read measured sample points, validating the schema row by row."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in SAMPLE_CSV_FIELDS if c not in header]
        if missing:
            raise DataFormatError(
                f"missing columns in {path}: {', '.join(missing)}")
        points = []
        problems = []
        for lineno, row in enumerate(reader, start=2):
            try:
                points.append(SamplePoint(
                    concentration_ppm=float(row["concentration_ppm"]),
                    concentration_err_ppm=_parse_optional(
                        row["concentration_err_ppm"]),
                    t_seconds=float(row["t_seconds"]),
                    t_ci_low=_parse_optional(row["t_ci_low"]),
                    t_ci_high=_parse_optional(row["t_ci_high"]),
                    p_value=_parse_optional(row["p"]),
                    basis=row["basis"].strip(),
                    isotope_class=row["isotope_class"].strip(),
                    measurement=row["measurement"].strip()))
            except (ValueError, KeyError) as exc:
                problems.append(f"line {lineno}: {exc}")
    if problems:
        raise DataFormatError("invalid sample rows: " + "; ".join(problems))
    return points


def write_sample_csv(path, points) -> None:
    """Write sample points in the schema read_sample_csv expects."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLE_CSV_FIELDS)
        for pt in points:
            writer.writerow([
                repr(float(pt.concentration_ppm)),
                "" if pt.concentration_err_ppm is None
                else repr(float(pt.concentration_err_ppm)),
                repr(float(pt.t_seconds)),
                "" if pt.t_ci_low is None else repr(float(pt.t_ci_low)),
                "" if pt.t_ci_high is None else repr(float(pt.t_ci_high)),
                "" if pt.p_value is None else repr(float(pt.p_value)),
                pt.basis, pt.isotope_class, pt.measurement])
