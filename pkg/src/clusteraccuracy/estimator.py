"""Closed-form normalized data accuracy of the cluster-average estimator.

Every awake node shrinks its noisy observation by a constraint factor
(beta) before the cluster head (CH) averages them, and the accuracy of
that average against the true event value has a closed form in the
pairwise correlations. With K(.) the correlation kernel, NC the non-CH
node set, and m the cluster size:

    D_A = (2/m) * [beta_i * sum_{i in NC} K(d_event,i) + beta_ch * K(d_event,ch)]
        - (1/m^2) * [beta_i^2 * sum_{i != j in NC} K(d_i,j)
                     + (m - 1) * beta_i
                     + 2 * beta_ch * beta_i * sum_{i in NC} K(d_ch,i)
                     + t_ch]

Two variants differ only in the CH constant t_ch:

* ``noise-consistent`` (default): t_ch = beta_ch. This matches the second
  moment of the simulated shrinkage estimator, so Monte Carlo runs agree
  with it within sampling error.
* ``as-printed``: t_ch = beta_ch**2, the published grouping of the closed
  form. The two variants differ by exactly (beta_ch - beta_ch^2) / m^2.

Values can be negative (the estimator can be worse than predicting zero)
and are never clamped; 1 is attained only by a noiseless cluster whose
nodes all coincide with the event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationModel, kernel
from .errors import InvalidArgumentError
from .topology import Topology

VARIANT_AS_PRINTED = "as-printed"
VARIANT_NOISE_CONSISTENT = "noise-consistent"
VARIANTS = (VARIANT_AS_PRINTED, VARIANT_NOISE_CONSISTENT)
DEFAULT_VARIANT = VARIANT_NOISE_CONSISTENT

TERM_NAMES = ("gain_nodes", "gain_ch", "cross_nodes", "self_nodes", "cross_ch", "self_ch")


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise InvalidArgumentError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant


@dataclass(frozen=True)
class NoiseProfile:
    """Variances of the field and of every noise source, plus the encoding power.

    sigma_s2 is the common variance of the field at the event and at every
    node (homogeneous field). sigma_n2 and sigma_nt2 are the per-node
    observation and transmission noise variances; sigma_nch2 is the CH's
    observation noise (the CH does not transmit, so it has no transmission
    term). ``power`` is the uncoded-transmission power constraint.
    """

    sigma_s2: float = 1.0
    sigma_n2: float = 0.0
    sigma_nt2: float = 0.0
    sigma_nch2: float = 0.0
    power: float = 1.0

    def __post_init__(self):
        for name in ("sigma_s2", "sigma_n2", "sigma_nt2", "sigma_nch2", "power"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.sigma_s2 > 0:
            raise InvalidArgumentError(f"sigma_s2 must be positive, got {self.sigma_s2}")
        if self.sigma_n2 < 0 or self.sigma_nt2 < 0 or self.sigma_nch2 < 0:
            raise InvalidArgumentError("noise variances must be nonnegative")
        if not self.power > 0:
            raise InvalidArgumentError(f"power must be positive, got {self.power}")

    @classmethod
    def from_betas(cls, beta_i: float, beta_ch: float, sigma_s2: float = 1.0, power: float = 1.0) -> "NoiseProfile":
        """Noise profile realizing given constraint factors.

        The total node noise implied by beta_i is split evenly between the
        observation and transmission terms; only the sum matters to the
        estimator, so the split is a reporting convention.
        """
        if not 0 < beta_i <= 1 or not 0 < beta_ch <= 1:
            raise InvalidArgumentError(f"constraint factors must lie in (0, 1], got {beta_i}, {beta_ch}")
        total_node = sigma_s2 * (1.0 / beta_i - 1.0)
        return cls(
            sigma_s2=sigma_s2,
            sigma_n2=total_node / 2.0,
            sigma_nt2=total_node / 2.0,
            sigma_nch2=sigma_s2 * (1.0 / beta_ch - 1.0),
            power=power,
        )


@dataclass(frozen=True)
class BetaFactors:
    """Shrinkage factors applied to node and CH observations."""

    beta_i: float
    beta_ch: float

    def __post_init__(self):
        object.__setattr__(self, "beta_i", float(self.beta_i))
        object.__setattr__(self, "beta_ch", float(self.beta_ch))
        if not 0 < self.beta_i <= 1 or not 0 < self.beta_ch <= 1:
            raise InvalidArgumentError(
                f"constraint factors must lie in (0, 1], got beta_i={self.beta_i}, beta_ch={self.beta_ch}"
            )

    @classmethod
    def from_profile(cls, profile: NoiseProfile) -> "BetaFactors":
        return cls(beta_i=beta_node(profile), beta_ch=beta_ch(profile))

    @classmethod
    def common(cls, beta: float) -> "BetaFactors":
        return cls(beta_i=beta, beta_ch=beta)


def beta_node(profile: NoiseProfile) -> float:
    """Node shrinkage: signal variance over signal plus both noise variances."""
    return profile.sigma_s2 / (profile.sigma_s2 + profile.sigma_n2 + profile.sigma_nt2)


def beta_ch(profile: NoiseProfile) -> float:
    """CH shrinkage: no transmission term, only observation noise."""
    return profile.sigma_s2 / (profile.sigma_s2 + profile.sigma_nch2)


def alpha(profile: NoiseProfile) -> float:
    """Power scaling applied to node observations before transmission.

    Cancels exactly out of the shrinkage estimate, so the closed form
    never needs it; the simulation chain applies and removes it to stay
    faithful to the transmission pipeline.
    """
    return math.sqrt(profile.power / (profile.sigma_s2 + profile.sigma_n2 + profile.sigma_nt2))


@dataclass(frozen=True)
class AccuracyValue:
    """Closed-form accuracy, tagged with the variant that produced it."""

    value: float
    variant: str
    m: int


def _kernel_sums(topology: Topology, model: CorrelationModel) -> tuple[float, float, float, float]:
    """(sum_i K(d_event,i), K(d_event,ch), sum_{i!=j} K(d_ij), sum_i K(d_ch,i)).

    Sums run over the non-CH node set; the double sum counts ordered pairs.
    """
    k_event = kernel(topology.event_distances, model)
    nc = topology.non_ch_indices
    sum_event = float(np.sum(k_event[nc]))
    k_event_ch = float(k_event[topology.ch])
    k_pair = kernel(topology.distance_matrix, model)
    sub = k_pair[np.ix_(nc, nc)]
    sum_pairs = float(np.sum(sub) - np.trace(sub))
    sum_ch = float(np.sum(k_pair[topology.ch, nc]))
    return sum_event, k_event_ch, sum_pairs, sum_ch


def accuracy_terms(
    topology: Topology,
    model: CorrelationModel,
    betas: BetaFactors,
    variant: str = DEFAULT_VARIANT,
) -> dict[str, float]:
    """Signed decomposition of the closed form; the terms sum to its value.

    gain_nodes / gain_ch are the correlation payoff of listening to nodes
    and CH; cross_nodes / cross_ch are the redundancy penalties between
    observers; self_nodes / self_ch are each observer's own second-moment
    cost.
    """
    check_variant(variant)
    m = topology.m
    sum_event, k_event_ch, sum_pairs, sum_ch = _kernel_sums(topology, model)
    bi, bch = betas.beta_i, betas.beta_ch
    t_ch = bch * bch if variant == VARIANT_AS_PRINTED else bch
    return {
        "gain_nodes": (2.0 / m) * bi * sum_event,
        "gain_ch": (2.0 / m) * bch * k_event_ch,
        "cross_nodes": -(bi * bi * sum_pairs) / (m * m),
        "self_nodes": -((m - 1) * bi) / (m * m),
        "cross_ch": -(2.0 * bch * bi * sum_ch) / (m * m),
        "self_ch": -t_ch / (m * m),
    }


def accuracy_closed_form(
    topology: Topology,
    model: CorrelationModel,
    betas: BetaFactors,
    variant: str = DEFAULT_VARIANT,
) -> AccuracyValue:
    """Normalized data accuracy of the cluster-average estimator."""
    terms = accuracy_terms(topology, model, betas, variant)
    return AccuracyValue(value=math.fsum(terms.values()), variant=variant, m=topology.m)
