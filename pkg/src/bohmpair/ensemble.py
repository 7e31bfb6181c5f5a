"""Ensembles of guided trajectories: seeded sampling from the quantum
density, batch evolution under the guidance flow, and distribution-level
comparisons against reference densities."""

from __future__ import annotations

import csv
import datetime
import json
import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .errors import ConfigurationError, InsufficientSampleError, ModelDomainError
from .numerics import IntegratorConfig, Trajectory, integrate_ode

# Counter-based generator, so samples are reproducible from the seed alone.
PRNG_ID = "numpy-philox-4x64"

# One-sample Kolmogorov-Smirnov critical coefficient at 99% confidence.
KS_COEFF_99 = 1.63

ENSEMBLE_CSV_COLUMNS = ("member_id", "t", "x1", "y1", "z1", "x2", "y2", "z2",
                        "v1x", "v1y", "v1z", "v2x", "v2y", "v2z", "truncated")


@dataclass
class Ensemble:
    """A set of trajectories sharing one model, seed, and integrator setup."""

    model: Any
    seed: int
    sampling: str                      # "density" or "user"
    t0: float
    members: list[Trajectory]
    integrator: IntegratorConfig | None = None
    acceptance_rate: float | None = None
    prng_id: str = PRNG_ID

    @property
    def model_tag(self) -> str:
        return self.model.tag

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def survival_fraction(self) -> float:
        if not self.members:
            return 0.0
        return sum(m.complete for m in self.members) / len(self.members)

    def states_at(self, t: float, tol: float = 1e-9) -> np.ndarray:
        """Configurations of every member holding a sample at time ``t``
        (truncated members are skipped past their last sample)."""
        rows = []
        for m in self.members:
            idx = np.argmin(np.abs(m.times - t))
            if abs(m.times[idx] - t) <= tol:
                rows.append(m.states[idx])
        return np.asarray(rows, dtype=float)

    def initial_states(self) -> np.ndarray:
        return np.asarray([m.states[0] for m in self.members], dtype=float)


@dataclass(frozen=True)
class DistributionReport:
    """Comparison of an empirical marginal against a reference density."""

    ks_statistic: float
    histogram: np.ndarray
    bin_edges: np.ndarray
    reference_density: np.ndarray      # reference evaluated on bin centres
    sample_size: int
    survival_fraction: float           # members contributing a sample at t
    t: float
    coordinate: str
    method: str                        # "pullback-quadrature" or "two-sample"
    critical_value_99: float

    @property
    def below_critical(self) -> bool:
        return self.ks_statistic < self.critical_value_99


@dataclass(frozen=True)
class GlobalConstraintReport:
    """Zero-separation times of every member, and the mismatch a single
    shared integration constant would force.

    Under per-member integration constants each trajectory crosses x1 = x2
    at its own time (a function of the initial separation only).  Under a
    single ensemble-wide constant, every member would cross at one common
    time, collapsing the separation distribution there to a point mass;
    ``point_mass_ks`` is that point mass's KS distance from the quantum
    separation marginal.
    """

    zero_times: np.ndarray
    zero_time_mean: float
    zero_time_std: float
    zero_time_range: float
    point_mass_ks: float


# -- statistics helpers ------------------------------------------------------

def ks_statistic(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """One-sample Kolmogorov-Smirnov statistic against a reference CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    lower = np.arange(0, n) / n
    upper = np.arange(1, n + 1) / n
    return float(np.max(np.maximum(f - lower, upper - f)))


def ks_two_sample(x: np.ndarray, y: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / len(x)
    fy = np.searchsorted(y, grid, side="right") / len(y)
    return float(np.max(np.abs(fx - fy)))


def ks_critical_value(n: int, coefficient: float = KS_COEFF_99) -> float:
    return coefficient / math.sqrt(n)


def quadrature_cdf(density: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                   points: int = 20001):
    """Cumulative distribution of an (unnormalized) density on [lo, hi] by
    trapezoid quadrature; returns a vectorised CDF callable."""
    xs = np.linspace(lo, hi, points)
    vals = np.asarray(density(xs), dtype=float)
    if np.any(vals < -1e-12):
        raise ValueError("density must be nonnegative")
    increments = 0.5 * (vals[1:] + vals[:-1]) * np.diff(xs)
    cum = np.concatenate([[0.0], np.cumsum(increments)])
    total = cum[-1]
    if total <= 0:
        raise ValueError("density integrates to zero on the interval")
    cum /= total

    def cdf(q):
        return np.interp(q, xs, cum, left=0.0, right=1.0)

    return cdf


# -- sampling ----------------------------------------------------------------

def sample_configurations(model, n: int, seed: int,
                          density_bound: float | None = None,
                          min_efficiency: float = 1e-4):
    """Draw ``n`` configurations from the model density by rejection with a
    uniform proposal over the model's box.

    Returns ``(points, acceptance_rate)`` where ``points`` has shape
    ``(n, model.dimension)``.  The seed fully determines the sample.  If the
    acceptance rate falls below ``min_efficiency`` the box/envelope setup is
    considered pathological and a :class:`ConfigurationError` is raised.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    bound = model.density_bound() if density_bound is None else float(density_bound)
    if bound <= 0:
        raise ConfigurationError("density bound must be positive")
    box = np.asarray(model.sampling_box(), dtype=float)
    dim = len(box)
    rng = np.random.Generator(np.random.Philox(seed))

    accepted: list[np.ndarray] = []
    got = 0
    proposed = 0
    chunk = max(4096, min(n, 1 << 18))
    while got < n:
        pts = rng.uniform(box[:, 0], box[:, 1], size=(chunk, dim))
        u = rng.uniform(size=chunk)
        keep = u * bound < model.density_batch(pts)
        proposed += chunk
        kept = pts[keep]
        accepted.append(kept)
        got += len(kept)
        if proposed >= max(100_000, 20 * n) and got / proposed < min_efficiency:
            raise ConfigurationError(
                f"rejection efficiency {got / proposed:.2e} below {min_efficiency}; "
                "the sampling box or density envelope is pathological")
    points = np.concatenate(accepted, axis=0)[:n]
    return points, got / proposed


def build_ensemble(model, n: int, seed: int, t0: float = 0.0,
                   initial_states: np.ndarray | None = None) -> Ensemble:
    """Create an unevolved ensemble, sampling initial configurations from the
    model density unless explicit states are supplied."""
    if initial_states is None:
        points, rate = sample_configurations(model, n, seed)
        sampling = "density"
    else:
        points = np.atleast_2d(np.asarray(initial_states, dtype=float))
        rate = None
        sampling = "user"
    members = []
    for row in points:
        try:
            vel = np.asarray(model.rhs(t0, row), dtype=float)
        except ModelDomainError:
            vel = np.full(len(row), np.nan)
        members.append(Trajectory(times=np.array([t0]),
                                  states=row[None, :].copy(),
                                  velocities=vel[None, :]))
    return Ensemble(model=model, seed=seed, sampling=sampling, t0=t0,
                    members=members, acceptance_rate=rate)


# -- evolution ----------------------------------------------------------------

def _split_batch(trajectory: Trajectory, n: int, dim: int) -> list[Trajectory]:
    states = trajectory.states.reshape(len(trajectory), n, dim)
    vels = trajectory.velocities.reshape(len(trajectory), n, dim)
    return [Trajectory(times=trajectory.times,
                       states=states[:, i, :].copy(),
                       velocities=vels[:, i, :].copy(),
                       complete=trajectory.complete,
                       termination=trajectory.termination)
            for i in range(n)]


def evolve_ensemble(ensemble: Ensemble, t_end: float,
                    config: IntegratorConfig | None = None,
                    sample_times: Sequence[float] | None = None) -> Ensemble:
    """Integrate every member to ``t_end`` and return the evolved ensemble.

    Members are integrated together as one stacked system when the whole
    batch stays inside the field's domain (one vectorised right-hand side
    evaluation per step); on any domain error the evolution falls back to
    per-member integration so failing members are truncated and counted
    individually rather than poisoning the batch.
    """
    cfg = config or IntegratorConfig()
    model = ensemble.model
    n, dim = ensemble.size, model.dimension
    y0 = ensemble.initial_states()
    if sample_times is None:
        sample_times = [ensemble.t0, t_end]

    members: list[Trajectory] | None = None
    try:
        batch = integrate_ode(lambda t, y: model.batch_rhs(t, y), y0.ravel(),
                              ensemble.t0, t_end, cfg, sample_times)
        if batch.complete:
            members = _split_batch(batch, n, dim)
    except ModelDomainError:
        members = None
    if members is None:
        members = [integrate_ode(model.rhs, row, ensemble.t0, t_end, cfg, sample_times)
                   for row in y0]

    return Ensemble(model=model, seed=ensemble.seed, sampling=ensemble.sampling,
                    t0=ensemble.t0, members=members, integrator=cfg,
                    acceptance_rate=ensemble.acceptance_rate,
                    prng_id=ensemble.prng_id)


# -- distribution comparison ---------------------------------------------------

def separation_marginal(model, reference: Callable | None = None) -> Callable:
    """Density of the separation x1 - x2 induced on the box: the reference
    density (the model's own by default) times the box overlap width."""
    L = model.box_length
    shape = reference if reference is not None else model._density_shape

    def marginal(d):
        d = np.asarray(d, dtype=float)
        return np.asarray(shape(d), dtype=float) * np.clip(L - np.abs(d), 0.0, None)

    return marginal


def compare_distribution(ensemble: Ensemble, t: float,
                         reference: Callable | None = None,
                         coordinate: str | None = None,
                         bins: int = 64,
                         min_survivors: int = 100) -> DistributionReport:
    """Kolmogorov-Smirnov comparison of the ensemble at time ``t`` against a
    reference density.

    Plane-wave ensembles compare the separation marginal: each sample is
    pulled back to the sampling time along the exact conserved relation (the
    flow transports the separation monotonically), and the pulled-back
    sample is tested against the quadrature CDF of the reference marginal on
    the initial box.  Spherical ensembles compare a single coordinate
    marginal against a fresh reference sample by the two-sample statistic,
    since no closed transport is available in six dimensions.
    """
    model = ensemble.model
    states = ensemble.states_at(t)
    if len(states) < min_survivors:
        raise InsufficientSampleError(
            f"only {len(states)} members have a sample at t={t} (need {min_survivors})")

    if model.tag == "planewave":
        coordinate = coordinate or "separation"
        if coordinate != "separation":
            raise ValueError("plane-wave comparisons use the separation marginal")
        samples = states[:, 0] - states[:, 1]
        pulled = np.asarray(model.inverse_flow(samples, t - ensemble.t0))
        L = model.box_length
        cdf = quadrature_cdf(separation_marginal(model, reference), -L, L)
        ks = ks_statistic(pulled, cdf)
        hist, edges = np.histogram(samples, bins=bins)
        centres = 0.5 * (edges[:-1] + edges[1:])
        back = np.asarray(model.inverse_flow(centres, t - ensemble.t0))
        marg = separation_marginal(model, reference)
        ref_density = marg(back)
        method = "pullback-quadrature"
    else:
        coordinate = coordinate or "x1"
        axis = {"x1": 0, "y1": 1, "z1": 2, "x2": 3, "y2": 4, "z2": 5}[coordinate]
        samples = states[:, axis]
        ref_points, _ = sample_configurations(model, max(2 * len(samples), 10_000),
                                              seed=ensemble.seed + 1)
        ref_samples = ref_points[:, axis]
        ks = ks_two_sample(samples, ref_samples)
        hist, edges = np.histogram(samples, bins=bins)
        centres = 0.5 * (edges[:-1] + edges[1:])
        ref_density, _ = np.histogram(ref_samples, bins=edges)
        ref_density = ref_density / max(len(ref_samples), 1)
        method = "two-sample"

    return DistributionReport(ks_statistic=ks, histogram=hist, bin_edges=edges,
                              reference_density=np.asarray(ref_density, dtype=float),
                              sample_size=len(samples),
                              survival_fraction=len(samples) / max(ensemble.size, 1),
                              t=t, coordinate=coordinate, method=method,
                              critical_value_99=ks_critical_value(len(samples)))


def global_constraint_analysis(ensemble: Ensemble) -> GlobalConstraintReport:
    """Zero-separation times per member and the point-mass mismatch of the
    shared-constant reading (plane-wave model, a != b)."""
    model = ensemble.model
    if model.tag != "planewave":
        raise ValueError("the constraint analysis applies to the plane-wave model")
    initial = ensemble.initial_states()
    deltas = initial[:, 0] - initial[:, 1]
    zero_times = ensemble.t0 - np.asarray(model.trajectory_invariant(deltas)) / (2.0 * model.speed)

    L = model.box_length
    cdf = quadrature_cdf(separation_marginal(model), -L, L)
    at_zero = float(cdf(np.array([0.0]))[0])
    point_mass_ks = max(at_zero, 1.0 - at_zero)

    return GlobalConstraintReport(zero_times=zero_times,
                                  zero_time_mean=float(np.mean(zero_times)),
                                  zero_time_std=float(np.std(zero_times)),
                                  zero_time_range=float(np.ptp(zero_times)),
                                  point_mass_ks=point_mass_ks)


# -- serialization --------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(float(value))


def write_ensemble_csv(path, ensemble: Ensemble) -> None:
    """One row per member per sample; shortest round-trip decimals; the y/z
    columns stay empty for one-dimensional models.  No timestamps, so equal
    configurations and seeds give byte-identical files."""
    one_dimensional = ensemble.model.dimension == 2
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ENSEMBLE_CSV_COLUMNS)
        for member_id, m in enumerate(ensemble.members):
            truncated = int(not m.complete)
            for i, t in enumerate(m.times):
                s, v = m.states[i], m.velocities[i]
                if one_dimensional:
                    row = [member_id, _fmt(t), _fmt(s[0]), "", "", _fmt(s[1]), "", "",
                           _fmt(v[0]), "", "", _fmt(v[1]), "", "", truncated]
                else:
                    row = [member_id, _fmt(t),
                           _fmt(s[0]), _fmt(s[1]), _fmt(s[2]),
                           _fmt(s[3]), _fmt(s[4]), _fmt(s[5]),
                           _fmt(v[0]), _fmt(v[1]), _fmt(v[2]),
                           _fmt(v[3]), _fmt(v[4]), _fmt(v[5]), truncated]
                writer.writerow(row)


def ensemble_metadata(ensemble: Ensemble, extra: dict | None = None) -> dict:
    model = ensemble.model
    params = {f: getattr(model, f) for f in model.__dataclass_fields__}
    meta = {
        "model": ensemble.model_tag,
        "params": params,
        "seed": ensemble.seed,
        "sampling": ensemble.sampling,
        "prng": ensemble.prng_id,
        "size": ensemble.size,
        "t0": ensemble.t0,
        "acceptance_rate": ensemble.acceptance_rate,
        "survival_fraction": ensemble.survival_fraction,
        "integrator": None if ensemble.integrator is None else {
            "method": ensemble.integrator.method,
            "step": ensemble.integrator.step,
            "rel_tol": ensemble.integrator.rel_tol,
            "abs_tol": ensemble.integrator.abs_tol,
            "max_steps": ensemble.integrator.max_steps,
        },
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if extra:
        meta.update(extra)
    return meta


def write_metadata(path, ensemble: Ensemble, extra: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(ensemble_metadata(ensemble, extra), fh, indent=2, sort_keys=True)
        fh.write("\n")
