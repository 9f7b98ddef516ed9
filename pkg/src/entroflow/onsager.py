"""Transport coefficients of the intrinsic dynamics.

Mapping intrinsic time to an external clock through a caller-supplied rate
dtau/dt turns the flow law into a flux/force relation dA/dt = L . lam with

    L = (dtau/dt) (1/sigma) g_inv.

L inherits the symmetry of the metric, so the reciprocal relations hold by
construction, with no appeal to microscopic reversibility, and the relation
is exact along the whole trajectory rather than only near equilibrium.  The
coefficients are state-dependent: they vary along the trajectory.  For a
coupled system the forces are lam - lam' and g is the composite metric, so
the same formulas apply unchanged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import AtEquilibriumError, IllConditionedError
from .flow import Trajectory, nonuniform_first_derivative
from .geometry import SIGMA_MIN, as_manifold

__all__ = [
    "OnsagerReport",
    "onsager_matrix",
    "empirical_onsager",
    "empirical_onsager_pooled",
    "empirical_report",
    "report_as_dict",
    "write_onsager_json",
]

#: Default number of samples in the regression window.  The dynamics does
#: not single out a window over which L may be treated as constant; five
#: samples is an artifact choice and is flagged in the report.
DEFAULT_WINDOW = 5

CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class OnsagerReport:
    """Analytic transport matrix at a state, optionally with an empirical fit.

    ``asymmetry`` is max |L - L^T|; it is exactly zero for the analytic
    matrix, which is built from the symmetrized g_inv.  ``window`` holds the
    [first, last] sample indices used for the empirical regression.
    """

    L: np.ndarray
    clock_rate: float
    asymmetry: float
    empirical_L: np.ndarray | None = None
    window: tuple[int, int] | None = None


def onsager_matrix(system, A, clock_rate: float = 1.0) -> OnsagerReport:
    """L = clock_rate * g_inv / sigma at the state A.

    ``clock_rate`` is dtau/dt, a free rescaling knob (the dynamics fixes the
    trajectory, not the pace of external time).  L diverges as sigma -> 0,
    reported as AtEquilibriumError rather than infinities.
    """
    if clock_rate <= 0.0:
        raise ValueError("clock_rate must be > 0")
    pt = as_manifold(system).point(A)
    if pt.sigma < SIGMA_MIN:
        raise AtEquilibriumError(
            f"sigma = {pt.sigma:.3e}: transport coefficients diverge at equilibrium"
        )
    L = clock_rate * pt.metric.g_inv / pt.sigma
    return OnsagerReport(
        L=L, clock_rate=clock_rate, asymmetry=float(np.max(np.abs(L - L.T)))
    )


def _forces(traj: Trajectory) -> np.ndarray:
    if traj.is_coupled:
        return np.array([s.lam - s.lam_prime for s in traj.samples])
    return np.array([s.lam for s in traj.samples])


def _window_bounds(traj: Trajectory, center: int | None, window: int) -> tuple[int, int]:
    n_dim = traj.n_dim
    if window < n_dim + 2:
        raise ValueError(f"window must span at least n_dim + 2 = {n_dim + 2} samples")
    if center is None:
        center = len(traj) // 2
    first = center - window // 2
    last = first + window - 1
    # interior samples only: the fluxes need both neighbours
    if first < 1 or last > len(traj) - 2:
        raise ValueError(
            f"window [{first}, {last}] does not fit inside the trajectory interior"
        )
    return first, last


def _window_rows(
    traj: Trajectory, clock_rate: float, first: int, last: int
) -> tuple[np.ndarray, np.ndarray]:
    """Force and flux rows for interior samples [first, last]."""
    forces = _forces(traj)[first : last + 1]
    taus = traj.taus()
    states = traj.states()
    fluxes = np.empty_like(forces)
    for row, k in enumerate(range(first, last + 1)):
        h_minus = taus[k] - taus[k - 1]
        h_plus = taus[k + 1] - taus[k]
        for j in range(traj.n_dim):
            fluxes[row, j] = clock_rate * nonuniform_first_derivative(
                states[k - 1, j], states[k, j], states[k + 1, j], h_minus, h_plus
            )
    return forces, fluxes


def _fit(forces: np.ndarray, fluxes: np.ndarray, scale: float) -> np.ndarray:
    """Solve fluxes ~ forces . L^T, guarding against degenerate forces.

    Conditioning is measured against ``scale`` (the largest force row norm
    seen along the trajectory): sqrt(window) * scale over the smallest
    singular value of the windowed force matrix.  This flags both
    near-collinear force windows and equilibrium tails (forces ~ 0).
    """
    smallest = float(np.min(np.linalg.svd(forces, compute_uv=False)))
    reference = scale * math.sqrt(forces.shape[0])
    condition = np.inf if smallest == 0.0 else reference / smallest
    if condition > CONDITION_LIMIT:
        raise IllConditionedError(
            f"force matrix condition {condition:.3e} exceeds {CONDITION_LIMIT:.1e} "
            "within the window"
        )
    solution, *_ = np.linalg.lstsq(forces, fluxes, rcond=None)
    return solution.T


def empirical_onsager(
    traj: Trajectory,
    clock_rate: float = 1.0,
    *,
    center: int | None = None,
    window: int = DEFAULT_WINDOW,
) -> np.ndarray:
    """Least-squares fit of fluxes against forces over a sample window.

    Fluxes are centered differences of A in tau scaled by ``clock_rate``;
    forces are the recorded lam (lam - lam' for coupled trajectories).  The
    fit assumes L is approximately constant across the window, so compare
    the result against the analytic L at the window center.

    Note that the force one-form of this dynamics decays parallel to
    itself (d lam / d tau = -lam / sigma), so a single trajectory only ever
    probes one force direction: for n_dim >= 2 the windowed force matrix is
    rank one and this raises IllConditionedError.  Pool windows from
    trajectories with different initial force directions instead
    (``empirical_onsager_pooled``).
    """
    if clock_rate <= 0.0:
        raise ValueError("clock_rate must be > 0")
    first, last = _window_bounds(traj, center, window)
    forces, fluxes = _window_rows(traj, clock_rate, first, last)
    scale = float(np.max(np.linalg.norm(_forces(traj), axis=1)))
    return _fit(forces, fluxes, scale)


def empirical_onsager_pooled(
    windows: list[tuple[Trajectory, int]],
    clock_rate: float = 1.0,
    *,
    window: int = DEFAULT_WINDOW,
) -> np.ndarray:
    """Fit one transport matrix to windows pooled from several trajectories.

    ``windows`` lists (trajectory, center-sample-index) pairs.  Each
    trajectory contributes one window of flux/force rows; the pooled rows
    span as many force directions as there are distinct trajectories.  The
    caller is responsible for choosing window centers at states where the
    analytic L is (approximately) the same, e.g. matched sigma near a
    common equilibrium.
    """
    if clock_rate <= 0.0:
        raise ValueError("clock_rate must be > 0")
    if not windows:
        raise ValueError("at least one (trajectory, center) pair is required")
    all_forces = []
    all_fluxes = []
    scale = 0.0
    for traj, center in windows:
        first, last = _window_bounds(traj, center, window)
        forces, fluxes = _window_rows(traj, clock_rate, first, last)
        all_forces.append(forces)
        all_fluxes.append(fluxes)
        scale = max(scale, float(np.max(np.linalg.norm(_forces(traj), axis=1))))
    return _fit(np.vstack(all_forces), np.vstack(all_fluxes), scale)


def empirical_report(
    system,
    traj: Trajectory,
    clock_rate: float = 1.0,
    *,
    center: int | None = None,
    window: int = DEFAULT_WINDOW,
) -> OnsagerReport:
    """Analytic L at the window center combined with the empirical fit."""
    first, last = _window_bounds(traj, center, window)
    mid = (first + last) // 2
    analytic = onsager_matrix(system, traj.samples[mid].A, clock_rate)
    fitted = empirical_onsager(traj, clock_rate, center=center, window=window)
    return OnsagerReport(
        L=analytic.L,
        clock_rate=clock_rate,
        asymmetry=analytic.asymmetry,
        empirical_L=fitted,
        window=(first, last),
    )


def report_as_dict(report: OnsagerReport) -> dict:
    return {
        "L": [[float(x) for x in row] for row in report.L],
        "asymmetry": float(report.asymmetry),
        "empirical_L": None
        if report.empirical_L is None
        else [[float(x) for x in row] for row in report.empirical_L],
        "window": None if report.window is None else list(report.window),
    }


def write_onsager_json(report: OnsagerReport, dest) -> None:
    text = json.dumps(report_as_dict(report), indent=2, sort_keys=True) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w") as fh:
            fh.write(text)
