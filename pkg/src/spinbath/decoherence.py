"""Coherence decay of a single probe spin under exponentially correlated noise.

The bath field is modeled as a stationary Gaussian process with rms
amplitude delta and correlation time tau_c.  Closed-form decay functions
chi(t) are provided for free induction (Ramsey) and spin echo, together
with a trajectory Monte Carlo that serves as an independent oracle.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np


class PulseSequence(enum.Enum):
    """Supported pulse sequences."""

    RAMSEY = "ramsey"
    SPIN_ECHO = "echo"

    @classmethod
    def from_name(cls, name: str) -> "PulseSequence":
        key = name.strip().lower().replace("-", "_")
        aliases = {"ramsey": cls.RAMSEY, "fid": cls.RAMSEY,
                   "free_induction": cls.RAMSEY,
                   "echo": cls.SPIN_ECHO, "spin_echo": cls.SPIN_ECHO,
                   "se": cls.SPIN_ECHO, "hahn": cls.SPIN_ECHO}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown pulse sequence {name!r}") from None


@dataclass(frozen=True)
class OuNoiseModel:
    """Noise parameters of a single bath realization.

    delta is the rms field in rad/s, tau_c the correlation time in
    seconds.
    """

    delta: float
    tau_c: float

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if self.tau_c <= 0.0:
            raise ValueError("tau_c must be positive")

    @property
    def t2_star(self) -> float:
        """Quasi-static dephasing time sqrt(2)/delta."""
        return math.sqrt(2.0) / self.delta

    @property
    def t2(self) -> float:
        """Echo decay time (12 tau_c / delta^2)^(1/3)."""
        return (12.0 * self.tau_c / self.delta**2) ** (1.0 / 3.0)


@dataclass
class DecayCurve:
    """Sampled decay curve with optional statistical and reference columns.

    values holds the probability of remaining in the bright state
    (range [1/2, 1]) unless kind is "coherence", in which case it holds
    exp(-chi) in [0, 1].
    """

    times: np.ndarray
    values: np.ndarray
    sequence: PulseSequence
    stderr: np.ndarray | None = None
    reference: np.ndarray | None = None
    kind: str = "probability"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ValueError("times and values must be matching 1-d arrays")
        if self.times.size and np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if self.kind not in ("probability", "coherence"):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
        slack = 1e-9 + (3.0 * self.stderr if self.stderr is not None else 0.0)
        low = 0.5 if self.kind == "probability" else 0.0
        if np.any(self.values > 1.0 + slack) or np.any(self.values < low - slack):
            raise ValueError(f"values outside [{low}, 1]")
        if self.kind == "probability" and self.times.size \
                and self.times[0] == 0.0:
            tol = 1e-12 + (3.0 * self.stderr[0] if self.stderr is not None else 0.0)
            if abs(self.values[0] - 1.0) > tol:
                raise ValueError("curve must start at 1 for t = 0")

    def as_coherence(self) -> np.ndarray:
        """Normalized coherence view 2p - 1 (identity for coherence curves)."""
        if self.kind == "coherence":
            return self.values.copy()
        return 2.0 * self.values - 1.0

    def to_csv(self, path) -> None:
        """Write t_s, value, stderr (and reference) plus a JSON sidecar."""
        import csv

        path = str(path)
        header = ["t_s", "value", "stderr"]
        if self.reference is not None:
            header.append("reference")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(self.times.size):
                row = [repr(float(self.times[k])), repr(float(self.values[k])),
                       repr(float(self.stderr[k])) if self.stderr is not None
                       else ""]
                if self.reference is not None:
                    row.append(repr(float(self.reference[k])))
                writer.writerow(row)
        sidecar = {"sequence": self.sequence.value, "kind": self.kind,
                   "metadata": self.metadata}
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path) -> "DecayCurve":
        """Read a curve written by to_csv (sidecar optional)."""
        import csv
        import os

        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"empty curve file {path}")
        times = np.array([float(r["t_s"]) for r in rows])
        values = np.array([float(r["value"]) for r in rows])
        stderr = None
        if rows[0].get("stderr"):
            stderr = np.array([float(r["stderr"]) for r in rows])
        reference = None
        if rows[0].get("reference"):
            reference = np.array([float(r["reference"]) for r in rows])
        sequence = PulseSequence.RAMSEY
        kind = "probability"
        metadata = {}
        sidecar = str(path) + ".json"
        if os.path.exists(sidecar):
            with open(sidecar, encoding="utf-8") as fh:
                info = json.load(fh)
            sequence = PulseSequence(info.get("sequence", "ramsey"))
            kind = info.get("kind", "probability")
            metadata = info.get("metadata", {})
        return cls(times=times, values=values, sequence=sequence,
                   stderr=stderr, reference=reference, kind=kind,
                   metadata=metadata)


def filter_function(seq: PulseSequence, omega_tau):
    """Spectral filter weight of the sequence at dimensionless omega*tau."""
    x = np.asarray(omega_tau, dtype=float)
    if seq is PulseSequence.RAMSEY:
        out = 2.0 * np.sin(x / 2.0)**2
    elif seq is PulseSequence.SPIN_ECHO:
        out = 8.0 * np.sin(x / 4.0)**4
    else:
        raise ValueError(f"unknown sequence {seq!r}")
    if out.ndim == 0:
        return float(out)
    return out


# Below this value of t/tau_c the closed forms lose precision to
# cancellation and a Taylor series takes over.
_SERIES_CROSSOVER = 1e-2


def _chi_reduced(seq: PulseSequence, x: np.ndarray) -> np.ndarray:
    """chi / (delta^2 tau_c^2) as a function of x = t / tau_c."""
    x = np.asarray(x, dtype=float)
    small = x < _SERIES_CROSSOVER
    xs = np.where(small, x, 0.0)
    if seq is PulseSequence.RAMSEY:
        exact = x - 1.0 + np.exp(-x)
        series = xs**2 / 2.0 - xs**3 / 6.0 + xs**4 / 24.0
    elif seq is PulseSequence.SPIN_ECHO:
        exact = x - 3.0 - np.exp(-x) + 4.0 * np.exp(-x / 2.0)
        series = xs**3 / 12.0 - xs**4 / 32.0 + 7.0 * xs**5 / 960.0
    else:
        raise ValueError(f"unknown sequence {seq!r}")
    return np.where(small, series, exact)


def chi(seq: PulseSequence, t, model: OuNoiseModel):
    """Decay exponent chi(t) for the given sequence and noise model."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise ValueError("t must be nonnegative")
    out = model.delta**2 * model.tau_c**2 * _chi_reduced(seq, t_arr / model.tau_c)
    if out.ndim == 0:
        return float(out)
    return out


def chi_short_time(seq: PulseSequence, t, model: OuNoiseModel):
    """Leading short-time behavior of chi(t)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0):
        raise ValueError("t must be nonnegative")
    if seq is PulseSequence.RAMSEY:
        out = 0.5 * model.delta**2 * t_arr**2
    elif seq is PulseSequence.SPIN_ECHO:
        out = model.delta**2 * t_arr**3 / (12.0 * model.tau_c)
    else:
        raise ValueError(f"unknown sequence {seq!r}")
    if out.ndim == 0:
        return float(out)
    return out


def single_nv_signal(seq: PulseSequence, times, model: OuNoiseModel
                     ) -> DecayCurve:
    """Closed-form probability curve p(t) = (1 + exp(-chi)) / 2."""
    times = np.asarray(times, dtype=float)
    values = 0.5 * (1.0 + np.exp(-chi(seq, times, model)))
    return DecayCurve(times=times, values=values, sequence=seq,
                      metadata={"model": "ou_closed_form",
                                "delta_rad_s": model.delta,
                                "tau_c_s": model.tau_c})


# Trajectories are simulated in fixed-size blocks so the stream of
# random draws, and therefore the result, does not depend on how many
# workers or batches execute them.
_TRAJECTORY_BLOCK = 1000


def _grid_layout(times: np.ndarray, tau_c: float, substeps: int | None):
    """Map a uniform output grid onto the fine simulation grid.

    Returns (h, n_fine, full_idx, half_idx) where full_idx[k] is the
    fine-step index of times[k] and half_idx[k] of times[k] / 2.
    """
    if times.size < 2:
        raise ValueError("need at least two time points")
    dt = times[1] - times[0]
    k0 = round(times[0] / dt)
    expected = (k0 + np.arange(times.size)) * dt
    if not np.allclose(times, expected, rtol=0.0, atol=1e-9 * times[-1]):
        raise ValueError("Monte Carlo evaluation needs a uniform time grid "
                         "whose start is a multiple of its spacing")
    if substeps is None:
        # At least 8 substeps per output interval: the trapezoid phase
        # integral carries an O(h^2) bias that would otherwise exceed the
        # sampling error of the barely-decayed early echo points.
        substeps = max(8, math.ceil(10.0 * dt / tau_c))
    h = 0.5 * dt / substeps
    idx = (k0 + np.arange(times.size)) * 2 * substeps
    return h, int(idx[-1]), idx.astype(int), (idx // 2).astype(int)


def ou_monte_carlo(seq: PulseSequence, times, model: OuNoiseModel,
                   n_traj: int = 10_000, seed: int | None = None,
                   substeps: int | None = None) -> DecayCurve:
    """Trajectory Monte Carlo estimate of the decay curve.

    Simulates mean-reverting noise with the exact discrete-time update,
    accumulates the phase integral per trajectory (sign-flipped after
    t/2 for spin echo), and averages cos(phase).  The standard error of
    the mean is attached per point.
    """
    if n_traj < 100:
        raise ValueError("n_traj must be at least 100")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0.0):
        raise ValueError("times must be nonnegative")

    h, n_fine, full_idx, half_idx = _grid_layout(times, model.tau_c, substeps)
    decay = math.exp(-h / model.tau_c)
    kick = model.delta * math.sqrt(1.0 - decay**2)
    snapshots = np.unique(np.concatenate([full_idx, half_idx]))
    snap_pos = {int(k): p for p, k in enumerate(snapshots)}

    n_blocks = math.ceil(n_traj / _TRAJECTORY_BLOCK)
    seeds = np.random.SeedSequence(seed).spawn(n_blocks)
    sum_cos = np.zeros(times.size)
    sum_cos2 = np.zeros(times.size)
    done = 0
    for block_seed in seeds:
        m = min(_TRAJECTORY_BLOCK, n_traj - done)
        done += m
        rng = np.random.default_rng(block_seed)
        b = model.delta * rng.standard_normal(m)
        integral = np.zeros(m)
        snap = np.empty((snapshots.size, m))
        if 0 in snap_pos:
            snap[snap_pos[0]] = 0.0
        for k in range(1, n_fine + 1):
            b_new = decay * b + kick * rng.standard_normal(m)
            integral += 0.5 * h * (b + b_new)
            b = b_new
            if k in snap_pos:
                snap[snap_pos[k]] = integral
        full = snap[[snap_pos[int(k)] for k in full_idx]]
        if seq is PulseSequence.SPIN_ECHO:
            half = snap[[snap_pos[int(k)] for k in half_idx]]
            phase = 2.0 * half - full
        else:
            phase = full
        cos = np.cos(phase)
        sum_cos += cos.sum(axis=1)
        sum_cos2 += (cos**2).sum(axis=1)

    mean = sum_cos / n_traj
    var = np.maximum(sum_cos2 / n_traj - mean**2, 0.0)
    stderr = 0.5 * np.sqrt(var / n_traj)
    values = 0.5 * (1.0 + mean)
    reference = 0.5 * (1.0 + np.exp(-chi(seq, times, model)))
    return DecayCurve(times=times, values=values, sequence=seq,
                      stderr=stderr, reference=reference,
                      metadata={"model": "ou_monte_carlo", "n_traj": n_traj,
                                "seed": seed, "step_s": h,
                                "delta_rad_s": model.delta,
                                "tau_c_s": model.tau_c})
