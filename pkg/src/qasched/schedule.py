"""Annealing schedules s(t) and the locally adiabatic time law.

The local condition ds/dt = epsilon * g^2 / D, integrated with the
instance-wide matrix-element bound D taken outside the integral, gives

    t(s) = (D / epsilon) * int_0^s max_m 1/g_{0,m}^2(s') ds'

evaluated by cumulative trapezoid on the profile's s-grid and inverted onto a
uniform time grid by monotone piecewise-linear interpolation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .spectral import SpectralProfile, numerator_bound

LINEAR = "linear"
LOCAL_ADIABATIC = "local-adiabatic"
PREDICTED = "predicted"

SCHEDULE_KINDS = (LINEAR, LOCAL_ADIABATIC, PREDICTED)

DEFAULT_EPSILON = 0.1
DEFAULT_POINTS = 500


@dataclass(frozen=True)
class Schedule:
    """s sampled on a uniform time grid t_k = k * t_f / (n_points - 1).

    kind is one of SCHEDULE_KINDS; epsilon is carried only by
    locally adiabatic schedules.  Constructing directly bypasses validation
    (some tests freeze s; raw predictions may be non-monotone); the public
    builders call validate().
    """

    kind: str
    t_f: float
    samples: np.ndarray
    epsilon: float | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def n_points(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_f, self.n_points)

    def validate(self) -> "Schedule":
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not np.isfinite(self.t_f) or self.t_f <= 0:
            raise ValueError("t_f must be finite and positive")
        if self.n_points < 2:
            raise ValueError("a schedule needs at least two samples")
        s = self.samples
        if s[0] != 0.0 or s[-1] != 1.0:
            raise ValueError("schedule endpoints must be exactly 0 and 1")
        if np.any(s < 0.0) or np.any(s > 1.0):
            raise ValueError("schedule samples must lie in [0, 1]")
        # Raw predictions are allowed to wiggle; everything else is monotone.
        if self.kind != PREDICTED and np.any(np.diff(s) < 0):
            raise ValueError("schedule samples must be nondecreasing")
        return self


def local_adiabatic_t_of_s(profile: SpectralProfile,
                           epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Tabulate t at each profile grid point; t[0] = 0, strictly increasing.

    The integrand at a grid point is the max of 1/g^2 over the available
    excited clusters; points where no excited cluster exists contribute 0
    (nothing to stay adiabatic against there).  Scales exactly as 1/epsilon.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    gaps = profile.gaps
    finite = ~np.isnan(gaps)
    if np.any(gaps[finite] <= 0):
        raise NumericalError("non-positive gap in spectral profile")
    with np.errstate(invalid="ignore"):
        inv_sq = np.where(finite, 1.0 / np.square(gaps), np.nan)
    integrand = np.zeros(len(profile.s_grid))
    has_gap = np.any(finite, axis=1)
    if np.any(has_gap):
        integrand[has_gap] = np.nanmax(inv_sq[has_gap], axis=1)
    bound = numerator_bound(profile)
    s = profile.s_grid
    segments = 0.5 * (integrand[1:] + integrand[:-1]) * np.diff(s)
    t = np.concatenate(([0.0], np.cumsum(segments))) * (bound / epsilon)
    if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
        raise NumericalError("time table is not finite and strictly increasing")
    return t


def invert_to_s_of_t(s_grid: np.ndarray, t_of_s: np.ndarray,
                     n_points: int = DEFAULT_POINTS,
                     epsilon: float | None = None) -> Schedule:
    """Resample the monotone table t(s) onto a uniform time grid.

    Piecewise-linear interpolation of the inverse map; endpoints pinned.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    t_of_s = np.asarray(t_of_s, dtype=float)
    if s_grid.shape != t_of_s.shape or s_grid.ndim != 1 or len(s_grid) < 2:
        raise ValueError("s_grid and t_of_s must be matching 1-d tables")
    if np.any(np.diff(t_of_s) <= 0):
        raise ValueError("t(s) must be strictly increasing to invert")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    t_f = float(t_of_s[-1])
    times = np.linspace(0.0, t_f, n_points)
    samples = np.interp(times, t_of_s, s_grid)
    samples[0] = float(s_grid[0])
    samples[-1] = float(s_grid[-1])
    return Schedule(LOCAL_ADIABATIC, t_f, samples, epsilon).validate()


def local_adiabatic_schedule(profile: SpectralProfile,
                             epsilon: float = DEFAULT_EPSILON,
                             n_points: int = DEFAULT_POINTS) -> Schedule:
    """Compose the time law with its inversion."""
    t = local_adiabatic_t_of_s(profile, epsilon)
    return invert_to_s_of_t(profile.s_grid, t, n_points, epsilon=epsilon)


def linear_schedule(t_f: float, n_points: int = DEFAULT_POINTS) -> Schedule:
    """The straight ramp s(t) = t / t_f on the same uniform grid."""
    samples = np.linspace(0.0, 1.0, n_points)
    return Schedule(LINEAR, float(t_f), samples).validate()


def isotonic_nondecreasing(values: np.ndarray) -> np.ndarray:
    """Least-squares nondecreasing fit by pool-adjacent-violators."""
    y = np.asarray(values, dtype=float)
    means: list[float] = []
    counts: list[int] = []
    for v in y:
        means.append(float(v))
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            total = means[-2] * counts[-2] + means[-1] * counts[-1]
            counts[-2] += counts[-1]
            means[-2] = total / counts[-2]
            means.pop()
            counts.pop()
    return np.repeat(means, counts)


def schedule_from_prediction(outputs: np.ndarray, t_f: float,
                             monotonize: bool = False) -> Schedule:
    """Turn raw network outputs into a usable schedule.

    Clips to [0, 1], optionally projects onto nondecreasing sequences, and
    pins the endpoints to exactly 0 and 1.
    """
    outputs = np.asarray(outputs, dtype=float)
    if outputs.ndim != 1 or len(outputs) < 2:
        raise ValueError("prediction must be a 1-d array of at least 2 values")
    if not np.isfinite(t_f) or t_f <= 0:
        raise ValueError("t_f must be finite and positive")
    samples = np.clip(outputs, 0.0, 1.0)
    if monotonize:
        samples = isotonic_nondecreasing(samples)
    samples = samples.copy()
    samples[0] = 0.0
    samples[-1] = 1.0
    return Schedule(PREDICTED, float(t_f), samples).validate()


def schedule_to_json(sched: Schedule) -> str:
    obj = {
        "kind": sched.kind,
        "t_f": float(sched.t_f),
        "epsilon": None if sched.epsilon is None else float(sched.epsilon),
        "s": [float(v) for v in sched.samples],
    }
    return json.dumps(obj)


def schedule_from_json(text: str) -> Schedule:
    obj = json.loads(text)
    eps = obj.get("epsilon")
    return Schedule(obj["kind"], float(obj["t_f"]),
                    np.asarray(obj["s"], dtype=float),
                    None if eps is None else float(eps))


def schedule_to_csv(sched: Schedule, path) -> None:
    """Two-column t,s file on the uniform time grid."""
    times = sched.times
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "s"])
        for t, s in zip(times, sched.samples):
            writer.writerow([repr(float(t)), repr(float(s))])
