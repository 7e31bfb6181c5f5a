"""Two particles in one dimension entangled through counter-propagating
relative plane waves.

The wavefunction is a superposition of e^{+i theta} and e^{-i theta} with
real amplitudes ``a`` and ``b``, where theta = p (x1 - x2) / hbar, evolving
with total kinetic energy E = p^2 / m and box-normalized on [0, L]^2.  The
guidance field depends on the separation x1 - x2 only, the centre of mass is
frozen, and the separation obeys a closed conserved relation that doubles as
an exactness oracle for the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad

from .errors import DegenerateParametersError, ModelDomainError
from .numerics import RootScanReport, Trajectory, bracketed_root, scan_roots

# Relative density below this is treated as a node of the wavefunction.
NODE_DENSITY_FLOOR = 1e-24


@dataclass(frozen=True)
class PairState1D:
    """Instantaneous configuration of the pair: positions and time."""

    x1: float
    x2: float
    t: float = 0.0

    @property
    def separation(self) -> float:
        return self.x1 - self.x2


@dataclass(frozen=True)
class PhaseValue:
    """Phase S of the wavefunction together with its branch index.

    ``S`` equals hbar * arctan(c tan theta) - E t + eta * pi * hbar, with the
    integer ``eta`` chosen so S is continuous in theta across branch cells.
    """

    S: float
    eta: int


@dataclass(frozen=True)
class UniquenessReport:
    """Root structure of the separation constraint at a fixed time, beside
    the two candidate sufficiency conditions for a unique root."""

    monotone_condition: bool        # 4ab < a^2 + b^2
    amplitude_ratio_condition: bool  # b < a/3
    conditions_agree: bool
    scan: RootScanReport


@dataclass(frozen=True)
class PlaneWavePair:
    """Model parameters plus every closed-form quantity derived from them.

    Instances are immutable; all evaluations are pure functions of the state,
    so a single model object may be shared freely across threads.
    """

    a: float
    b: float
    momentum: float = 1.0
    mass: float = 1.0
    hbar: float = 1.0
    box_length: float | None = None

    dimension = 2
    tag = "planewave"

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0:
            raise ValueError("amplitudes a and b must be nonnegative")
        if self.a + self.b <= 0:
            raise ValueError("amplitudes a and b must not both vanish")
        for name in ("momentum", "mass", "hbar"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.box_length is None:
            object.__setattr__(self, "box_length", 20.0 * self.hbar / self.momentum)
        elif self.box_length <= 0:
            raise ValueError("box_length must be positive")

    # -- derived parameters -------------------------------------------------

    @property
    def contrast(self) -> float:
        """(a - b) / (a + b), the amplitude contrast in [-1, 1]."""
        return (self.a - self.b) / (self.a + self.b)

    @property
    def energy(self) -> float:
        return self.momentum ** 2 / self.mass

    @property
    def speed(self) -> float:
        """p / m, the velocity scale of the relative motion."""
        return self.momentum / self.mass

    @cached_property
    def norm(self) -> float:
        """Normalization constant: integral of the unnormalized density over
        the box, computed by quadrature so the density integrates to one."""
        L = self.box_length
        val, _ = quad(lambda d: (L - abs(d)) * self._density_shape(d),
                      -L, L, points=[0.0], limit=400, epsabs=1e-13, epsrel=1e-13)
        return float(val)

    def _density_shape(self, delta):
        """Unnormalized |psi|^2 as a function of the separation."""
        th = self.momentum * np.asarray(delta, dtype=float) / self.hbar
        a, b = self.a, self.b
        return (a * a + b * b + 2 * a * b * np.cos(2 * th)) / (a + b) ** 2

    # -- wavefunction, density, phase ---------------------------------------

    def theta(self, state: PairState1D) -> float:
        return self.momentum * state.separation / self.hbar

    def psi_values(self, x1, x2, t):
        """Wavefunction on arrays of positions and times (broadcasting)."""
        th = self.momentum * (np.asarray(x1) - np.asarray(x2)) / self.hbar
        bracket = self.a * np.exp(1j * th) + self.b * np.exp(-1j * th)
        clock = np.exp(-1j * self.energy * np.asarray(t) / self.hbar)
        return bracket * clock / (math.sqrt(self.norm) * (self.a + self.b))

    def psi(self, state: PairState1D) -> complex:
        return complex(self.psi_values(state.x1, state.x2, state.t))

    def density_values(self, x1, x2, t=0.0):
        """|psi|^2; time independent and a function of x1 - x2 only."""
        return np.abs(self.psi_values(x1, x2, t)) ** 2

    def density(self, state: PairState1D) -> float:
        return float(self.density_values(state.x1, state.x2, state.t))

    def density_single_angle_values(self, x1, x2):
        """Variant of the density with cos(theta) in place of cos(2 theta)
        in the interference term; retained verbatim so the two closed forms
        can be compared (see the density-discrepancy analysis)."""
        th = self.momentum * (np.asarray(x1) - np.asarray(x2)) / self.hbar
        a, b = self.a, self.b
        return (a * a + b * b + 2 * a * b * np.cos(th)) / (self.norm * (a + b) ** 2)

    def density_single_angle(self, state: PairState1D) -> float:
        return float(self.density_single_angle_values(state.x1, state.x2))

    def phase(self, state: PairState1D) -> PhaseValue:
        """Continuous phase of the wavefunction at ``state``.

        The arctangent is evaluated inside the branch cell containing theta
        and the integer multiple of pi restoring continuity is reported as
        ``eta``.  Undefined at nodes (a = b with cos theta = 0).
        """
        th = self.theta(state)
        c = self.contrast
        n = math.floor(th / math.pi + 0.5)
        th_cell = th - n * math.pi
        if c == 0.0 and abs(math.cos(th)) < 1e-12:
            raise ModelDomainError("phase undefined at a node of the wavefunction")
        eta = n if c >= 0 else -n
        s = self.hbar * (math.atan2(c * math.sin(th_cell), math.cos(th_cell))
                         + eta * math.pi) - self.energy * state.t
        return PhaseValue(S=s, eta=eta)

    # -- guidance velocities -------------------------------------------------

    def velocity_of_separation(self, delta):
        """Velocity of particle 1 as a function of x1 - x2 (vectorised).

        Uses the form c / (cos^2 theta + c^2 sin^2 theta), which is finite at
        cos theta = 0 where the tangent-based expression has a removable
        singularity.  Particle 2 moves with the opposite velocity.
        """
        th = self.momentum * np.asarray(delta, dtype=float) / self.hbar
        c = self.contrast
        denom = np.cos(th) ** 2 + (c * np.sin(th)) ** 2
        if np.any(denom < NODE_DENSITY_FLOOR):
            raise ModelDomainError("velocity undefined at a node of the wavefunction")
        return self.speed * c / denom

    def velocities(self, state: PairState1D) -> tuple[float, float]:
        """Guidance velocities (v1, v2); v2 is exactly -v1."""
        v1 = float(self.velocity_of_separation(state.separation))
        return v1, -v1

    def rhs(self, t, y):
        """Field for the integrator on the flat configuration [x1, x2]."""
        v1 = self.velocity_of_separation(y[0] - y[1])
        return np.array([v1, -v1])

    def batch_rhs(self, t, y):
        """Field for a stacked ensemble: y is (n, 2) flattened C-order."""
        pairs = np.asarray(y).reshape(-1, 2)
        v1 = self.velocity_of_separation(pairs[:, 0] - pairs[:, 1])
        return np.column_stack([v1, -v1]).ravel()

    # -- conserved quantities ------------------------------------------------

    def _require_nondegenerate(self) -> None:
        if self.a == self.b:
            raise DegenerateParametersError(
                "the separation relation divides by a^2 - b^2; it requires a != b")

    def trajectory_invariant(self, delta):
        """Left-hand side of the conserved separation relation.

        Integrating d(x1 - x2)/dt = 2 v1 in closed form gives
        ((a^2+b^2)/(a^2-b^2)) * delta + (hbar/p)(ab/(a^2-b^2)) sin(2 p delta / hbar)
        = 2 v t + beta, so this expression minus 2 v t is constant along any
        exact trajectory.
        """
        self._require_nondegenerate()
        a, b = self.a, self.b
        lin = (a * a + b * b) / (a * a - b * b)
        amp = (self.hbar / self.momentum) * a * b / (a * a - b * b)
        d = np.asarray(delta, dtype=float)
        return lin * d + amp * np.sin(2.0 * self.momentum * d / self.hbar)

    def constraint_lhs(self, delta):
        """Separation-constraint expression scanned by the uniqueness
        analyzer: identical to :meth:`trajectory_invariant` except that the
        linear coefficient is halved.  This is the variant whose slope is
        positive everywhere exactly when 4ab < a^2 + b^2; only the unhalved
        form is conserved by the flow (the claims report measures both).
        """
        self._require_nondegenerate()
        a, b = self.a, self.b
        lin = 0.5 * (a * a + b * b) / (a * a - b * b)
        amp = (self.hbar / self.momentum) * a * b / (a * a - b * b)
        d = np.asarray(delta, dtype=float)
        return lin * d + amp * np.sin(2.0 * self.momentum * d / self.hbar)

    def beta_for(self, state: PairState1D) -> float:
        """Integration constant fixed by one point of a trajectory."""
        return float(self.trajectory_invariant(state.separation)
                     - 2.0 * self.speed * state.t)

    def implicit_residual(self, state: PairState1D, beta: float) -> float:
        """Residual of the conserved separation relation; stays at its
        initial value (zero, when beta comes from the initial state) along
        any exact trajectory."""
        return float(self.trajectory_invariant(state.separation)
                     - 2.0 * self.speed * state.t - beta)

    def residual_drift(self, trajectory: Trajectory, beta: float | None = None) -> float:
        """Max |residual| over the samples of a trajectory, with beta fixed
        from its initial sample unless given."""
        deltas = trajectory.states[:, 0] - trajectory.states[:, 1]
        values = self.trajectory_invariant(deltas) - 2.0 * self.speed * trajectory.times
        if beta is None:
            beta = float(values[0])
        return float(np.max(np.abs(values - beta)))

    def cm_drift(self, trajectory: Trajectory) -> float:
        """Max |(x1 + x2) - (x1 + x2)_initial| over the trajectory samples.

        The centre of mass is exactly frozen by the flow (v1 + v2 = 0), so
        this stays below integration tolerance.
        """
        sums = trajectory.states[:, 0] + trajectory.states[:, 1]
        return float(np.max(np.abs(sums - sums[0])))

    def zero_separation_time(self, state: PairState1D) -> float:
        """Time at which the trajectory through ``state`` has x1 = x2.

        Follows from the conserved relation; depends on the separation only,
        not on the centre of mass.
        """
        return state.t - float(self.trajectory_invariant(state.separation)) / (2.0 * self.speed)

    def inverse_flow(self, delta, elapsed: float):
        """Separation(s) a time ``elapsed`` earlier on the same trajectory.

        Solves the conserved relation for the earlier separation; the
        left-hand side is strictly monotone for a != b, so the solution is
        unique.  Vectorised Newton with a bracket-clipped fallback.  With
        a == b the field vanishes and the flow is the identity.
        """
        if self.a == self.b:
            return (np.asarray(delta, dtype=float).copy() if np.ndim(delta)
                    else float(delta))
        d = np.atleast_1d(np.asarray(delta, dtype=float))
        target = np.asarray(self.trajectory_invariant(d)) - 2.0 * self.speed * elapsed
        a, b = self.a, self.b
        lin = (a * a + b * b) / (a * a - b * b)
        amp = (self.hbar / self.momentum) * a * b / (a * a - b * b)
        w = 2.0 * self.momentum / self.hbar
        edge_a = (target - abs(amp)) / lin
        edge_b = (target + abs(amp)) / lin
        lo = np.minimum(edge_a, edge_b)   # lin < 0 when a < b
        hi = np.maximum(edge_a, edge_b)
        x = target / lin
        for _ in range(100):
            f = lin * x + amp * np.sin(w * x) - target
            if np.max(np.abs(f)) < 1e-12:
                break
            fp = lin + amp * w * np.cos(w * x)
            x = np.clip(x - f / fp, lo, hi)
        f = lin * x + amp * np.sin(w * x) - target
        bad = np.nonzero(np.abs(f) > 1e-10)[0]
        for i in bad:  # rare: fall back to bisection on the rigorous bracket
            x[i] = bracketed_root(lambda z: lin * z + amp * math.sin(w * z) - target[i],
                                  lo[i] - 1e-12, hi[i] + 1e-12)
        return x if np.ndim(delta) else float(x[0])

    def uniqueness_analysis(self, t: float = 0.0, t0: float = 0.0,
                            interval: tuple[float, float] | None = None,
                            grid: int = 100_000) -> UniquenessReport:
        """Scan the separation constraint at time ``t`` for roots and report
        the two candidate uniqueness conditions side by side.

        The scanned equation is constraint_lhs(delta) = 2 v (t - t0).  The
        monotone condition 4ab < a^2 + b^2 is exactly the positivity of its
        slope; b < a/3 is the looser amplitude-ratio condition.  The two
        disagree on part of parameter space, which the report exposes rather
        than resolves.
        """
        self._require_nondegenerate()
        if interval is None:
            half_width = 4.0 * math.pi * self.hbar / self.momentum
            interval = (-half_width, half_width)
        offset = 2.0 * self.speed * (t - t0)
        scan = scan_roots(lambda d: self.constraint_lhs(d) - offset,
                          interval[0], interval[1], grid=grid)
        a, b = self.a, self.b
        monotone_condition = 4 * a * b < a * a + b * b
        ratio_condition = b < a / 3
        return UniquenessReport(monotone_condition=monotone_condition,
                                amplitude_ratio_condition=ratio_condition,
                                conditions_agree=monotone_condition == ratio_condition,
                                scan=scan)

    # -- ensemble support ----------------------------------------------------

    def sampling_box(self) -> list[tuple[float, float]]:
        """Per-coordinate bounds of the normalization box."""
        return [(0.0, self.box_length)] * 2

    def density_bound(self) -> float:
        """Exact upper bound of the density over the box (attained where the
        interference term is maximal)."""
        return 1.0 / self.norm

    def density_batch(self, points: np.ndarray) -> np.ndarray:
        """Density at an (n, 2) array of configurations, at time zero."""
        return self.density_values(points[:, 0], points[:, 1], 0.0)

    def state_vector(self, state: PairState1D) -> np.ndarray:
        return np.array([state.x1, state.x2], dtype=float)

    def state_from_vector(self, y, t: float = 0.0) -> PairState1D:
        return PairState1D(x1=float(y[0]), x2=float(y[1]), t=t)
