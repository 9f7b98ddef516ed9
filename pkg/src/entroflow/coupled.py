"""Two subsystems exchanging conserved quantities.

The total entropy is additive, S_T(A) = S(A) + S'(A_T - A), with the
conservation constraint eliminated by substitution: the reduced state A is
subsystem 1's share and A' = A_T - A is subsystem 2's.  Both Hessians then
enter the composite metric with a plus sign (the chain rule cancels the
cross-term sign), g_T(A) = g(A) + g'(A_T - A), and the constrained flow is

    dA/dtau = g_T_inv . (lam - lam') / sigma_T,

which relaxes until the conjugate forces lam and lam' are equalized.

The artifact trusts the declared state variables: whether (E, N) is enough
to describe a given physical exchange is the modeller's call, not a
detectable condition.  The feasible set is the intersection {A feasible in
subsystem 1 and A_T - A feasible in subsystem 2}; its boundary raises.
"""

from __future__ import annotations

import numpy as np

from . import flow as _flow
from .family import ExponentialFamily, as_vector
from .geometry import (
    FamilyManifold,
    ManifoldPoint,
    MetricTensor,
    SIGMA_MIN,
    StateManifold,
    metric as _metric,
)

__all__ = [
    "CompositeSystem",
    "composite_entropy",
    "composite_metric",
    "coupled_velocity",
    "integrate_coupled",
]


class CompositeSystem(StateManifold):
    """Two families plus conserved totals, viewed as one reduced manifold.

    Pairing is positional: statistic alpha of subsystem 1 exchanges against
    statistic alpha of subsystem 2, enforced by a label check.
    """

    def __init__(self, sys1: ExponentialFamily, sys2: ExponentialFamily, A_total):
        if sys1.n_dim != sys2.n_dim:
            raise ValueError(
                f"subsystem dimensions differ: {sys1.n_dim} vs {sys2.n_dim}"
            )
        if sys1.labels != sys2.labels:
            raise ValueError(
                "subsystem statistics are not compatible: "
                f"{sys1.labels} vs {sys2.labels}"
            )
        self.sys1 = sys1
        self.sys2 = sys2
        self.A_total = as_vector(A_total, sys1.n_dim, "A_total")
        if not np.all(np.isfinite(self.A_total)):
            raise ValueError("A_total must be finite")
        self._m1 = FamilyManifold(sys1)
        self._m2 = FamilyManifold(sys2)

    @property
    def dim(self) -> int:
        return self.sys1.n_dim

    @property
    def labels(self) -> tuple[str, ...]:
        return self.sys1.labels

    def check_feasible(self, A) -> np.ndarray:
        A = as_vector(A, self.dim, "A")
        self.sys1.check_feasible(A)
        self.sys2.check_feasible(self.A_total - A)
        return A

    def point(self, A, warm: tuple | None = None) -> ManifoldPoint:
        A = as_vector(A, self.dim, "A")
        w1, w2 = warm if warm else (None, None)
        p1 = self._m1.point(A, warm=w1)
        p2 = self._m2.point(self.A_total - A, warm=w2)
        force = p1.force - p2.force
        met = MetricTensor.from_matrix(p1.metric.g + p2.metric.g)
        return ManifoldPoint(
            A=A,
            force=force,
            S=p1.S + p2.S,
            metric=met,
            sigma=met.norm_of_form(force),
            aux=(p1.aux, p2.aux),
        )

    def entropy(self, A) -> float:
        A = as_vector(A, self.dim, "A")
        return self._m1.entropy(A) + self._m2.entropy(self.A_total - A)

    def metric_matrix(self, A, warm: tuple | None = None) -> np.ndarray:
        A = as_vector(A, self.dim, "A")
        w1, w2 = warm if warm else (None, None)
        g1 = self._m1.metric_matrix(A, warm=w1)
        g2 = self._m2.metric_matrix(self.A_total - A, warm=w2)
        return g1 + g2

    # trajectory samples carry the subsystem split

    def sample_lambda(self, pt: ManifoldPoint) -> np.ndarray:
        return pt.aux[0][0]

    def sample_extras(self, pt: ManifoldPoint) -> dict:
        a_prime = self.A_total - pt.A
        residual = float(np.max(np.abs(pt.A + a_prime - self.A_total)))
        return {
            "A_prime": a_prime,
            "lam_prime": pt.aux[1][0],
            "conservation_residual": residual,
        }


def composite_entropy(cs: CompositeSystem, A) -> float:
    """S_T(A) = S(A) + S'(A_T - A)."""
    cs.check_feasible(A)
    return cs.entropy(A)


def composite_metric(cs: CompositeSystem, A) -> MetricTensor:
    """g(A) + g'(A_T - A): both subsystem Hessians enter with a plus sign."""
    return _metric(cs, A)


def coupled_velocity(cs: CompositeSystem, A, *, sigma_min: float = SIGMA_MIN) -> np.ndarray:
    """dA/dtau = g_T_inv . (lam - lam') / sigma_T for the reduced state.

    Raises AtEquilibriumError when the conjugate forces are equal within
    sigma_min: that is the end state of the constrained relaxation.
    """
    return _flow.velocity_field(cs, A, sigma_min=sigma_min)


def integrate_coupled(cs: CompositeSystem, A0, **options) -> _flow.Trajectory:
    """Integrate the conservation-constrained flow; see ``flow.integrate``.

    Samples additionally record A', lam' and the conservation residual
    max|A + A' - A_T| (identically zero by construction; kept as a
    regression guard).
    """
    return _flow.integrate(cs, A0, **options)
