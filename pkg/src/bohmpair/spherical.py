"""Two particles guided by a superposition of spherical waves emitted from a
pair of point sources on the y axis.

Source A sits at (0, +d, 0) and source B at (0, -d, 0); the wavefunction
superposes "particle 1 from A, particle 2 from B" with the exchanged
assignment, each term e^{ik(r + r')} / (r r'), restricted to the x >= 0
half-space and evolving with E = hbar^2 k^2 / m.  The state is symmetric
under particle interchange and under reflecting both y coordinates, which
shows up as exact symmetries of the guidance field.  Configurations where
the cross-pair distances match (r1A = r2B and r1B = r2A) decouple the two
velocity equations, and the flow preserves that manifold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ModelDomainError


@dataclass(frozen=True)
class PairState3D:
    """Positions of both particles (3-vectors) and the time."""

    r1: tuple[float, float, float]
    r2: tuple[float, float, float]
    t: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "r1", tuple(float(v) for v in self.r1))
        object.__setattr__(self, "r2", tuple(float(v) for v in self.r2))
        if len(self.r1) != 3 or len(self.r2) != 3:
            raise ValueError("r1 and r2 must be 3-vectors")


@dataclass(frozen=True)
class PhaseParts:
    """Numerator and denominator whose arctangent gives the spatial phase."""

    Nval: float
    Dval: float


@dataclass(frozen=True)
class ConstraintReadings:
    """Deviations from the two readings of the decoupling constraint.

    ``mirror``: max(|r1A - r2B|, |r1B - r2A|), the mirrored pairing under
    which the velocity equations separate.  ``axial``: max(|r1A - r2B|,
    |r2A - r2B|), the alternative pairing that additionally forces particle
    2 onto the y = 0 plane.  Both are reported; neither is asserted.
    """

    mirror: float
    axial: float


def _norm_rows(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


@dataclass(frozen=True)
class SlitPair:
    """Model parameters for the two-source spherical-wave pair.

    ``slit_offset`` is the source half-separation d.  States closer than
    ``slit_exclusion`` to a source, or with a scale-aware wavefunction
    modulus below ``node_threshold``, are rejected as domain errors.
    Normalization over the finite box is estimated once by Monte Carlo
    (seeded, with a reported standard error) the first time it is needed.
    """

    wavenumber: float
    slit_offset: float
    mass: float = 1.0
    hbar: float = 1.0
    box_length: float | None = None
    slit_exclusion: float = 1e-6
    node_threshold: float = 1e-12
    norm_samples: int = 200_000
    norm_seed: int = 0

    dimension = 6
    tag = "spherical"

    def __post_init__(self) -> None:
        for name in ("wavenumber", "slit_offset", "mass", "hbar"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.box_length is None:
            object.__setattr__(self, "box_length", 40.0 / self.wavenumber)
        elif self.box_length <= 0:
            raise ValueError("box_length must be positive")

    @property
    def energy(self) -> float:
        return self.hbar ** 2 * self.wavenumber ** 2 / self.mass

    @property
    def source_a(self) -> np.ndarray:
        return np.array([0.0, self.slit_offset, 0.0])

    @property
    def source_b(self) -> np.ndarray:
        return np.array([0.0, -self.slit_offset, 0.0])

    # -- geometry ------------------------------------------------------------

    def distances_of(self, r1: np.ndarray, r2: np.ndarray):
        """Source distances (r1A, r1B, r2A, r2B) for position arrays of shape
        (..., 3); vectorised."""
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        r1a = _norm_rows(r1 - self.source_a)
        r1b = _norm_rows(r1 - self.source_b)
        r2a = _norm_rows(r2 - self.source_a)
        r2b = _norm_rows(r2 - self.source_b)
        return r1a, r1b, r2a, r2b

    def distances(self, state: PairState3D):
        return tuple(float(v) for v in self.distances_of(np.asarray(state.r1),
                                                         np.asarray(state.r2)))

    def _check_support(self, r1, r2, r1a, r1b, r2a, r2b) -> None:
        if np.any(np.asarray(r1)[..., 0] < -1e-12) or np.any(np.asarray(r2)[..., 0] < -1e-12):
            raise ModelDomainError("the model is supported on the x >= 0 half-space")
        smallest = min(np.min(r1a), np.min(r1b), np.min(r2a), np.min(r2b))
        if smallest < self.slit_exclusion:
            raise ModelDomainError(
                f"configuration within {self.slit_exclusion} of a source point")

    # -- wavefunction and phase ----------------------------------------------

    def _bracket(self, r1a, r1b, r2a, r2b):
        """Spatial part of the wavefunction before normalization."""
        k = self.wavenumber
        return (np.exp(1j * k * (r1a + r2b)) / (r1a * r2b)
                + np.exp(1j * k * (r1b + r2a)) / (r1b * r2a))

    def psi_values(self, r1, r2, t):
        """Wavefunction on arrays of positions of shape (..., 3)."""
        r1a, r1b, r2a, r2b = self.distances_of(r1, r2)
        self._check_support(r1, r2, r1a, r1b, r2a, r2b)
        clock = np.exp(-1j * self.energy * np.asarray(t) / self.hbar)
        return self._bracket(r1a, r1b, r2a, r2b) * clock / math.sqrt(self.norm)

    def psi(self, state: PairState3D) -> complex:
        return complex(self.psi_values(np.asarray(state.r1), np.asarray(state.r2), state.t))

    def node_measure(self, state: PairState3D) -> float:
        """Scale-aware modulus |bracket| (r1A r2B + r1B r2A) / 2; the raw
        modulus decays with distance, so nodes are flagged relative to the
        local single-term scale."""
        r1a, r1b, r2a, r2b = self.distances(state)
        return float(abs(self._bracket(r1a, r1b, r2a, r2b))
                     * (r1a * r2b + r1b * r2a) / 2.0)

    def _phase_parts(self, r1a, r1b, r2a, r2b):
        k = self.wavenumber
        q = r1a * r2b
        rr = r1b * r2a
        alpha = r1a + r2b
        beta = r1b + r2a
        nval = rr * np.sin(k * alpha) + q * np.sin(k * beta)
        dval = rr * np.cos(k * alpha) + q * np.cos(k * beta)
        return nval, dval

    def phase_parts(self, state: PairState3D) -> PhaseParts:
        nval, dval = self._phase_parts(*self.distances(state))
        return PhaseParts(Nval=float(nval), Dval=float(dval))

    def phase_from_distances(self, r1a, r1b, r2a, r2b, t=0.0):
        """Phase as a function of the four source distances (vectorised).

        Uses atan2, so it is defined wherever the wavefunction is nonzero,
        including where the denominator alone vanishes; values are principal
        per call, to be unwrapped by continuity along sampled paths.
        """
        nval, dval = self._phase_parts(r1a, r1b, r2a, r2b)
        if np.any(np.hypot(nval, dval) == 0.0):
            raise ModelDomainError("phase undefined at a node of the wavefunction")
        return self.hbar * np.arctan2(nval, dval) - self.energy * np.asarray(t)

    def phase(self, state: PairState3D) -> float:
        self._require_evaluable(state)
        return float(self.phase_from_distances(*self.distances(state), t=state.t))

    def _require_evaluable(self, state: PairState3D) -> None:
        r1 = np.asarray(state.r1)
        r2 = np.asarray(state.r2)
        r1a, r1b, r2a, r2b = self.distances_of(r1, r2)
        self._check_support(r1, r2, r1a, r1b, r2a, r2b)
        if self.node_measure(state) < self.node_threshold:
            raise ModelDomainError("state lies on a node of the wavefunction")

    # -- phase derivatives and velocities --------------------------------------

    @staticmethod
    def _partial(k, hbar, nval, dval, cross, partner, own_sum, other_sum):
        """d(phase)/d(distance) for one of the four source distances.

        ``cross`` is the product of the two distances in the *other* term,
        ``partner`` the distance sharing this term, ``own_sum``/``other_sum``
        the phase arguments of the two terms.  Written once so that the
        exchange and reflection symmetries of the model are exact in
        floating point (every partial is this function under an argument
        permutation).
        """
        pn = k * cross * np.cos(k * own_sum) + partner * np.sin(k * other_sum)
        pd = -k * cross * np.sin(k * own_sum) + partner * np.cos(k * other_sum)
        return hbar * (pn * dval - nval * pd) / (nval * nval + dval * dval)

    def _distance_derivatives(self, r1a, r1b, r2a, r2b):
        k = self.wavenumber
        q = r1a * r2b
        rr = r1b * r2a
        alpha = r1a + r2b
        beta = r1b + r2a
        nval = rr * np.sin(k * alpha) + q * np.sin(k * beta)
        dval = rr * np.cos(k * alpha) + q * np.cos(k * beta)
        if np.any(nval * nval + dval * dval == 0.0):
            raise ModelDomainError("phase gradient undefined at a node")
        g1a = self._partial(k, self.hbar, nval, dval, rr, r2b, alpha, beta)
        g1b = self._partial(k, self.hbar, nval, dval, q, r2a, beta, alpha)
        g2a = self._partial(k, self.hbar, nval, dval, q, r1b, beta, alpha)
        g2b = self._partial(k, self.hbar, nval, dval, rr, r1a, alpha, beta)
        return g1a, g1b, g2a, g2b

    def distance_derivatives(self, state: PairState3D) -> tuple[float, float, float, float]:
        """Partial derivatives of the phase with respect to (r1A, r1B, r2A,
        r2B); each matches finite differences of :meth:`phase_from_distances`."""
        self._require_evaluable(state)
        return tuple(float(g) for g in self._distance_derivatives(*self.distances(state)))

    def _velocity_arrays(self, r1, r2):
        r1a, r1b, r2a, r2b = self.distances_of(r1, r2)
        self._check_support(r1, r2, r1a, r1b, r2a, r2b)
        scale = np.abs(self._bracket(r1a, r1b, r2a, r2b)) * (r1a * r2b + r1b * r2a) / 2.0
        if np.any(scale < self.node_threshold):
            raise ModelDomainError("velocity undefined at a node of the wavefunction")
        g1a, g1b, g2a, g2b = self._distance_derivatives(r1a, r1b, r2a, r2b)
        u = lambda r, src, d: (r - src) / d[..., None]
        v1 = (g1a[..., None] * u(r1, self.source_a, r1a)
              + g1b[..., None] * u(r1, self.source_b, r1b)) / self.mass
        v2 = (g2a[..., None] * u(r2, self.source_a, r2a)
              + g2b[..., None] * u(r2, self.source_b, r2b)) / self.mass
        return v1, v2

    def velocities(self, state: PairState3D) -> tuple[np.ndarray, np.ndarray]:
        """Guidance velocities (v1, v2) as 3-vectors, assembled by the chain
        rule through the four source distances."""
        v1, v2 = self._velocity_arrays(np.asarray(state.r1, dtype=float),
                                       np.asarray(state.r2, dtype=float))
        return v1, v2

    def rhs(self, t, y):
        """Field for the integrator on the flat configuration [r1, r2]."""
        y = np.asarray(y, dtype=float)
        v1, v2 = self._velocity_arrays(y[:3], y[3:])
        return np.concatenate([v1, v2])

    def batch_rhs(self, t, y):
        """Field for a stacked ensemble: y is (n, 6) flattened C-order."""
        pts = np.asarray(y, dtype=float).reshape(-1, 6)
        v1, v2 = self._velocity_arrays(pts[:, :3], pts[:, 3:])
        return np.concatenate([v1, v2], axis=1).ravel()

    # -- decoupling constraint -------------------------------------------------

    def constraint_deviations(self, state: PairState3D) -> ConstraintReadings:
        r1a, r1b, r2a, r2b = self.distances(state)
        return ConstraintReadings(mirror=max(abs(r1a - r2b), abs(r1b - r2a)),
                                  axial=max(abs(r1a - r2b), abs(r2a - r2b)))

    def max_constraint_deviations(self, trajectory) -> ConstraintReadings:
        """Worst-case deviations from both constraint readings over all
        samples of a trajectory."""
        pts = trajectory.states.reshape(len(trajectory), 2, 3)
        r1a, r1b, r2a, r2b = self.distances_of(pts[:, 0], pts[:, 1])
        mirror = np.maximum(np.abs(r1a - r2b), np.abs(r1b - r2a))
        axial = np.maximum(np.abs(r1a - r2b), np.abs(r2a - r2b))
        return ConstraintReadings(mirror=float(np.max(mirror)), axial=float(np.max(axial)))

    def mirror_state(self, state: PairState3D) -> PairState3D:
        """Image of a state under the symmetry: reflect both y coordinates
        and interchange the particles."""
        x1, y1, z1 = state.r1
        x2, y2, z2 = state.r2
        return PairState3D(r1=(x2, -y2, z2), r2=(x1, -y1, z1), t=state.t)

    # -- normalization and ensemble support -------------------------------------

    @cached_property
    def _norm_estimate(self) -> tuple[float, float]:
        """Monte Carlo estimate of the box integral of the unnormalized
        density, excluding the singular source balls; returns (value, se)."""
        rng = np.random.Generator(np.random.Philox(self.norm_seed))
        box = np.array(self.sampling_box())
        volume = float(np.prod(box[:, 1] - box[:, 0]))
        total = 0.0
        total_sq = 0.0
        n = 0
        chunk = 50_000
        while n < self.norm_samples:
            m = min(chunk, self.norm_samples - n)
            pts = rng.uniform(box[:, 0], box[:, 1], size=(m, 6))
            r1a, r1b, r2a, r2b = self.distances_of(pts[:, :3], pts[:, 3:])
            ok = np.minimum(np.minimum(r1a, r1b), np.minimum(r2a, r2b)) > self.slit_exclusion
            vals = np.zeros(m)
            vals[ok] = np.abs(self._bracket(r1a[ok], r1b[ok], r2a[ok], r2b[ok])) ** 2
            total += float(np.sum(vals))
            total_sq += float(np.sum(vals * vals))
            n += m
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0)
        return volume * mean, volume * math.sqrt(var / n)

    @property
    def norm(self) -> float:
        return self._norm_estimate[0]

    @property
    def norm_standard_error(self) -> float:
        return self._norm_estimate[1]

    def sampling_box(self) -> list[tuple[float, float]]:
        """Per-coordinate bounds: x in [0, L], y and z in [-L/2, L/2] for
        each particle."""
        L = self.box_length
        per_particle = [(0.0, L), (-L / 2.0, L / 2.0), (-L / 2.0, L / 2.0)]
        return per_particle * 2

    def density_batch(self, points: np.ndarray) -> np.ndarray:
        """Unnormalized density at an (n, 6) array of configurations; points
        inside the source exclusion balls score zero.  Used by the rejection
        sampler, where the normalization constant cancels."""
        pts = np.asarray(points, dtype=float)
        r1a, r1b, r2a, r2b = self.distances_of(pts[:, :3], pts[:, 3:])
        ok = np.minimum(np.minimum(r1a, r1b), np.minimum(r2a, r2b)) > self.slit_exclusion
        out = np.zeros(len(pts))
        out[ok] = np.abs(self._bracket(r1a[ok], r1b[ok], r2a[ok], r2b[ok])) ** 2
        return out

    def density_bound(self, probe_points: int = 20_000, safety: float = 1.5,
                      seed: int = 1) -> float:
        """Envelope for rejection sampling, estimated from a seeded probe of
        the box and inflated by ``safety``.

        The true supremum diverges near the sources, so a uniform-proposal
        envelope is necessarily an estimate; the probe max governs the bulk
        of the density and the safety factor covers the probe gap.
        """
        rng = np.random.Generator(np.random.Philox(seed))
        box = np.array(self.sampling_box())
        pts = rng.uniform(box[:, 0], box[:, 1], size=(probe_points, 6))
        return safety * float(np.max(self.density_batch(pts)))

    def density(self, state: PairState3D) -> float:
        """Normalized density (triggers the Monte Carlo normalization on
        first use)."""
        return float(abs(self.psi(state)) ** 2)

    def state_vector(self, state: PairState3D) -> np.ndarray:
        return np.array([*state.r1, *state.r2], dtype=float)

    def state_from_vector(self, y, t: float = 0.0) -> PairState3D:
        y = np.asarray(y, dtype=float)
        return PairState3D(r1=tuple(y[:3]), r2=tuple(y[3:6]), t=t)
