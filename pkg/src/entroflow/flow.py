"""Unit-speed entropy-gradient flow in intrinsic time.

The dynamics is dA/dtau = g_inv . lam / sigma, the unique unit-speed flow
along the entropy gradient; intrinsic time tau is arclength in the
Fisher-Rao metric, so dS/dtau = sigma along the trajectory.  Integration
uses classical fixed-step RK4 with residual-triggered step halving: the
unit-speed residual |g v v - 1| is the natural error signal for this
constrained flow and keeps the integrator auditable.

Equilibrium is a sigma-threshold stop, not a fixed point of the ODE: the
field has unit metric norm everywhere, so the flow reaches the entropy
maximum in finite tau and would overshoot (the direction lam/sigma is
discontinuous across the maximum).  When a step would cross the threshold
the step length is bisected so the final state lands just above it, which
makes terminal-tau comparisons meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AtEquilibriumError,
    DomainError,
    InfeasibleMeanError,
    MonotonicityError,
    NoConvergenceError,
    SingularModelError,
    StepCollapseError,
    TooFewSamplesError,
)
from .geometry import ManifoldPoint, SIGMA_MIN, StateManifold, as_manifold, unit_velocity

__all__ = [
    "TrajectorySample",
    "Trajectory",
    "velocity_field",
    "integrate",
    "entropy_production_check",
    "EntropyProductionReport",
    "clock_invert",
    "write_trajectory_csv",
]

#: A step is halved whenever the post-step unit-speed residual exceeds this.
SPEED_RESIDUAL_TOL = 1e-8

_RECOVERABLE_AWAY = (
    InfeasibleMeanError,
    NoConvergenceError,
    SingularModelError,
    DomainError,
)
_RECOVERABLE = (AtEquilibriumError,) + _RECOVERABLE_AWAY


@dataclass(frozen=True)
class TrajectorySample:
    """One recorded state of the flow.

    ``speed`` is g_{ab} v^a v^b evaluated at the sample; for coupled
    systems the subsystem-2 state and forces are carried alongside.
    """

    tau: float
    A: np.ndarray
    lam: np.ndarray
    S: float
    sigma: float
    speed: float
    A_prime: np.ndarray | None = None
    lam_prime: np.ndarray | None = None
    conservation_residual: float | None = None


@dataclass(frozen=True)
class Trajectory:
    """Ordered samples of an intrinsic-time trajectory."""

    samples: tuple[TrajectorySample, ...]
    terminal_status: str  # equilibrium-reached | tau-budget-exhausted | error

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def terminal(self) -> TrajectorySample:
        return self.samples[-1]

    @property
    def n_dim(self) -> int:
        return self.samples[0].A.shape[0]

    @property
    def is_coupled(self) -> bool:
        return self.samples[0].A_prime is not None

    def taus(self) -> np.ndarray:
        return np.array([s.tau for s in self.samples])

    def states(self) -> np.ndarray:
        return np.array([s.A for s in self.samples])


def velocity_field(system, A, *, sigma_min: float = SIGMA_MIN) -> np.ndarray:
    """Flow velocity g_inv . lam / sigma at A; unit metric norm by construction.

    Raises AtEquilibriumError when sigma(A) < sigma_min.
    """
    return unit_velocity(as_manifold(system).point(A), sigma_min=sigma_min)


def _speed(pt: ManifoldPoint) -> float:
    v = pt.metric.raise_form(pt.force) / pt.sigma
    return pt.metric.squared_norm_of_vector(v)


def _make_sample(manifold: StateManifold, tau: float, pt: ManifoldPoint) -> TrajectorySample:
    speed = _speed(pt) if pt.sigma > 0.0 else float("nan")
    return TrajectorySample(
        tau=tau,
        A=pt.A,
        lam=manifold.sample_lambda(pt),
        S=pt.S,
        sigma=pt.sigma,
        speed=speed,
        **manifold.sample_extras(pt),
    )


def _rk4_step(manifold: StateManifold, A: np.ndarray, pt: ManifoldPoint, h: float) -> np.ndarray:
    k1 = unit_velocity(pt)
    p2 = manifold.point(A + 0.5 * h * k1, warm=pt.aux)
    k2 = unit_velocity(p2)
    p3 = manifold.point(A + 0.5 * h * k2, warm=p2.aux)
    k3 = unit_velocity(p3)
    p4 = manifold.point(A + h * k3, warm=p3.aux)
    k4 = unit_velocity(p4)
    return A + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _bisect_to_threshold(
    manifold: StateManifold,
    A: np.ndarray,
    pt: ManifoldPoint,
    v_here: np.ndarray,
    h: float,
    sigma_eq: float,
) -> tuple[float, ManifoldPoint]:
    """Shrink the final step so the landing sigma lies in [sigma_eq, 2 sigma_eq].

    Precondition: sigma(A) >= sigma_eq while the full step of length h
    crosses the entropy maximum (sigma below threshold, direction reversed,
    or evaluation failure past the maximum).  The landing point is on the
    near side: reversed trial directions shrink the bracket.
    """
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        try:
            A_mid = _rk4_step(manifold, A, pt, mid * h)
            p_mid = manifold.point(A_mid, warm=pt.aux)
            chord = math.sqrt(
                max(pt.metric.squared_norm_of_vector(A_mid - A), 0.0)
            )
            # A trial whose chord collapses had stages across the maximum;
            # its endpoint is not on the flow and must not be accepted even
            # if its sigma happens to land inside the window.
            past = (
                abs(chord / (mid * h) - 1.0) > 0.01
                or p_mid.sigma < sigma_eq
                or float(unit_velocity(p_mid) @ v_here) < 0.0
            )
        except _RECOVERABLE:
            hi = mid
            continue
        if past:
            hi = mid
        elif p_mid.sigma <= 2.0 * sigma_eq:
            return mid * h, p_mid
        else:
            lo = mid
        if hi - lo < 1e-14:
            break
    raise StepCollapseError("could not bracket the equilibrium threshold")


def integrate(
    system,
    A0,
    *,
    tau_max: float,
    h: float = 1e-3,
    sigma_eq: float = 1e-8,
    record_every: int = 1,
    max_halvings: int = 20,
) -> Trajectory:
    """Integrate the unit-speed entropy-gradient flow from A0.

    Classical RK4 with fixed base step ``h``; a step is halved (at most
    ``max_halvings`` times) whenever a solver error occurs inside the
    stencil or the post-step unit-speed residual exceeds SPEED_RESIDUAL_TOL.
    Terminates with status ``equilibrium-reached`` when sigma drops below
    ``sigma_eq`` (landing within a factor 2 of the threshold via bisection)
    or ``tau-budget-exhausted`` at ``tau_max``.  Every recorded sample
    carries recomputed lam, S and sigma; successive solver calls are
    warm-started from the previous step.
    """
    if tau_max <= 0.0:
        raise ValueError("tau_max must be > 0")
    if h <= 0.0:
        raise ValueError("h must be > 0")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")

    manifold = as_manifold(system)
    A = manifold.check_feasible(A0).copy()
    pt = manifold.point(A)
    if pt.sigma < sigma_eq:
        raise AtEquilibriumError(
            f"initial state is already at equilibrium (sigma = {pt.sigma:.3e})"
        )

    samples = [_make_sample(manifold, 0.0, pt)]
    tau = 0.0
    steps = 0
    last_recorded_tau = 0.0
    status = None

    while status is None:
        remaining = tau_max - tau
        if remaining <= 1e-12 * max(1.0, tau_max):
            status = "tau-budget-exhausted"
            break
        h_try = min(h, remaining)
        v_here = unit_velocity(pt)
        for _ in range(max_halvings + 1):
            # A step "crosses" equilibrium when the landing sigma falls
            # below threshold, the flow direction reverses (the gradient
            # flips sign across the maximum), the entropy drops, or the
            # step's metric chord collapses relative to h (a step across
            # the maximum and back cancels its stages and barely moves,
            # which none of the pointwise tests can see).
            try:
                A_new = _rk4_step(manifold, A, pt, h_try)
                pt_new = manifold.point(A_new, warm=pt.aux)
                chord = math.sqrt(
                    max(pt.metric.squared_norm_of_vector(A_new - A), 0.0)
                )
                crossed = (
                    pt_new.sigma < sigma_eq
                    or float(unit_velocity(pt_new) @ v_here) < 0.0
                    or pt_new.S < pt.S - 1e-12
                    or abs(chord / h_try - 1.0) > 0.01
                )
            except AtEquilibriumError:
                crossed = True
            except _RECOVERABLE_AWAY:
                h_try *= 0.5
                continue
            if crossed:
                try:
                    dtau, pt_fin = _bisect_to_threshold(
                        manifold, A, pt, v_here, h_try, sigma_eq
                    )
                except StepCollapseError:
                    h_try *= 0.5
                    continue
                if tau + dtau > tau:
                    tau += dtau
                    samples.append(_make_sample(manifold, tau, pt_fin))
                    last_recorded_tau = tau
                status = "equilibrium-reached"
                break
            if abs(_speed(pt_new) - 1.0) > SPEED_RESIDUAL_TOL:
                h_try *= 0.5
                continue
            A, pt = A_new, pt_new
            tau += h_try
            steps += 1
            if steps % record_every == 0:
                samples.append(_make_sample(manifold, tau, pt))
                last_recorded_tau = tau
            break
        else:
            partial = Trajectory(samples=tuple(samples), terminal_status="error")
            raise StepCollapseError(
                f"step collapsed after {max_halvings} halvings at tau = {tau:.6g}",
                trajectory=partial,
            )

    if status == "tau-budget-exhausted" and last_recorded_tau < tau:
        samples.append(_make_sample(manifold, tau, pt))
    return Trajectory(samples=tuple(samples), terminal_status=status)


def nonuniform_first_derivative(
    f_prev: float, f_mid: float, f_next: float, h_minus: float, h_plus: float
) -> float:
    """Three-point first derivative at the middle node of an unequal stencil.

    Second-order accurate; reduces to the classical centered difference for
    equal spacing and is exact for quadratics.
    """
    denom = h_minus * h_plus * (h_minus + h_plus)
    return (
        -(h_plus**2) * f_prev
        + (h_plus**2 - h_minus**2) * f_mid
        + h_minus**2 * f_next
    ) / denom


@dataclass(frozen=True)
class EntropyProductionReport:
    """Worst-case deviation between dS/dtau and the recorded sigma."""

    max_residual: float
    argmax_tau: float
    residuals: tuple[float, ...]


def entropy_production_check(traj: Trajectory) -> EntropyProductionReport:
    """Compare centered-difference dS/dtau against sigma at interior samples.

    For default step sizes the maximum residual stays below 1e-4, which is
    the numerical expression of sigma being the entropy production rate.
    """
    if len(traj) < 3:
        raise TooFewSamplesError(
            f"need at least 3 samples, trajectory has {len(traj)}"
        )
    residuals = []
    taus = []
    for k in range(1, len(traj) - 1):
        prev_s, mid, next_s = traj.samples[k - 1], traj.samples[k], traj.samples[k + 1]
        ds = nonuniform_first_derivative(
            prev_s.S, mid.S, next_s.S, mid.tau - prev_s.tau, next_s.tau - mid.tau
        )
        residuals.append(abs(ds - mid.sigma))
        taus.append(mid.tau)
    worst = int(np.argmax(residuals))
    return EntropyProductionReport(
        max_residual=float(residuals[worst]),
        argmax_tau=float(taus[worst]),
        residuals=tuple(residuals),
    )


def clock_invert(traj: Trajectory, alpha: int, value: float) -> float:
    """Read intrinsic time off a strictly monotone state component.

    A component that changes monotonically along the trajectory acts as an
    internal clock: inverting A^alpha(tau) by monotone (linear) interpolation
    recovers tau.  Raises MonotonicityError if the component is not strictly
    monotone over the recorded samples.
    """
    xs = np.array([s.A[alpha] for s in traj.samples])
    taus = traj.taus()
    diffs = np.diff(xs)
    if np.all(diffs > 0.0):
        lo, hi = xs[0], xs[-1]
    elif np.all(diffs < 0.0):
        xs, taus = xs[::-1], taus[::-1]
        lo, hi = xs[0], xs[-1]
    else:
        raise MonotonicityError(
            f"component {alpha} is not strictly monotone along the trajectory"
        )
    if not lo <= value <= hi:
        raise ValueError(f"value {value} outside the recorded range [{lo}, {hi}]")
    return float(np.interp(value, xs, taus))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, dest) -> None:
    """Write one row per recorded sample at 17 significant digits.

    Single systems use the column layout
    ``tau,A_1..A_n,lambda_1..lambda_n,S,sigma,speed``; coupled systems use
    ``tau,A_1..A_n,Aprime_1..Aprime_n,lambda_1..lambda_n,
    lambdaprime_1..lambdaprime_n,S_T,sigma,conservation_residual``.
    """
    n = traj.n_dim
    idx = range(1, n + 1)
    if traj.is_coupled:
        header = (
            ["tau"]
            + [f"A_{i}" for i in idx]
            + [f"Aprime_{i}" for i in idx]
            + [f"lambda_{i}" for i in idx]
            + [f"lambdaprime_{i}" for i in idx]
            + ["S_T", "sigma", "conservation_residual"]
        )
    else:
        header = (
            ["tau"]
            + [f"A_{i}" for i in idx]
            + [f"lambda_{i}" for i in idx]
            + ["S", "sigma", "speed"]
        )

    def rows():
        yield ",".join(header)
        for s in traj.samples:
            if traj.is_coupled:
                cells = (
                    [s.tau]
                    + list(s.A)
                    + list(s.A_prime)
                    + list(s.lam)
                    + list(s.lam_prime)
                    + [s.S, s.sigma, s.conservation_residual]
                )
            else:
                cells = [s.tau] + list(s.A) + list(s.lam) + [s.S, s.sigma, s.speed]
            yield ",".join(_fmt(c) for c in cells)

    text = "\n".join(rows()) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", newline="") as fh:
            fh.write(text)
