"""Experiment drivers: parameter sweeps, minimal clusters, calibration.

Each sweep builds topologies with the generators, evaluates the closed
form (optionally alongside the Monte Carlo oracle) and returns a
SweepResult whose rows carry every quantity needed to recompute them in
isolation. Randomized drivers derive one substream per (configuration,
repeat) from the master seed, so reruns are reproducible row by row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .correlation import CorrelationModel
from .errors import CalibrationInfeasibleError, InvalidArgumentError
from .estimator import (
    DEFAULT_VARIANT,
    VARIANT_AS_PRINTED,
    BetaFactors,
    NoiseProfile,
    accuracy_closed_form,
    check_variant,
    _kernel_sums,
)
from .montecarlo import mc_accuracy
from .streams import derive_key
from .topology import Position, Rect, Topology, make_circle, make_grid, make_random, order_by_event_distance

ORDERINGS = ("nearest-first", "farthest-first", "random")


@dataclass(frozen=True)
class SweepResult:
    """Ordered result rows of one experiment."""

    kind: str
    columns: tuple[str, ...]
    rows: tuple[dict, ...]
    master_seed: int | None = None

    def column(self, name: str) -> list:
        return [row[name] for row in self.rows]


@dataclass(frozen=True)
class MinimalClusterReport:
    """Smallest cluster prefix matching the full cluster's accuracy."""

    full_m: int
    full_accuracy: float
    minimal_p: int
    minimal_accuracy: float
    epsilon: float
    ordering: str


def _resolve_betas(betas: BetaFactors | None, profile: NoiseProfile | None) -> tuple[BetaFactors, NoiseProfile | None]:
    """Exactly one of betas / profile drives a run; derive the other lazily."""
    if betas is None and profile is None:
        raise InvalidArgumentError("either constraint factors or a noise profile is required")
    if betas is not None and profile is not None:
        raise InvalidArgumentError("ambiguous beta source: pass constraint factors or a noise profile, not both")
    if betas is None:
        return BetaFactors.from_profile(profile), profile
    return betas, None


def _mc_fields(topology, model, profile, betas, trials, row_seed):
    if not trials:
        return {"mc_mean": None, "mc_se": None, "jitter": None}
    prof = profile if profile is not None else NoiseProfile.from_betas(betas.beta_i, betas.beta_ch)
    est = mc_accuracy(topology, model, prof, trials, row_seed)
    return {"mc_mean": est.mean_accuracy, "mc_se": est.std_error, "jitter": est.jitter}


def _row(independent: dict, topology, model, betas, variant, mc: dict) -> dict:
    row = dict(independent)
    row.update(
        {
            "m": topology.m,
            "theta1": model.theta1,
            "theta2": model.theta2,
            "beta_i": betas.beta_i,
            "beta_ch": betas.beta_ch,
            "variant": variant,
            "d_a": accuracy_closed_form(topology, model, betas, variant).value,
        }
    )
    row.update(mc)
    return row


def circle_radius_sweep(
    m: int,
    radii: Sequence[float],
    models: Sequence[CorrelationModel],
    betas: BetaFactors | None = None,
    variant: str = DEFAULT_VARIANT,
    profile: NoiseProfile | None = None,
    trials: int | None = None,
    master_seed: int = 0,
) -> SweepResult:
    """Accuracy of an m-node circle as its radius grows."""
    check_variant(variant)
    radii = [float(r) for r in radii]
    if not radii or any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise InvalidArgumentError("radii must be positive and strictly ascending")
    betas, profile = _resolve_betas(betas, profile)
    rows = []
    for radius in radii:
        topo = make_circle(m, radius)
        for model in models:
            mc = _mc_fields(topo, model, profile, betas, trials, derive_key(master_seed, len(rows)))
            rows.append(_row({"radius": radius}, topo, model, betas, variant, mc))
    return SweepResult(
        kind="circle-radius",
        columns=("radius", "m", "theta1", "theta2", "beta_i", "beta_ch", "variant", "d_a", "mc_mean", "mc_se"),
        rows=tuple(rows),
        master_seed=master_seed if trials else None,
    )


def node_count_sweep(
    ms: Sequence[int],
    radius: float,
    models: Sequence[CorrelationModel],
    betas: BetaFactors | None = None,
    variant: str = DEFAULT_VARIANT,
    profile: NoiseProfile | None = None,
    trials: int | None = None,
    master_seed: int = 0,
) -> SweepResult:
    """Accuracy on a fixed-radius circle as nodes are added."""
    check_variant(variant)
    ms = [int(v) for v in ms]
    if not ms or any(v < 2 for v in ms) or any(b <= a for a, b in zip(ms, ms[1:])):
        raise InvalidArgumentError("node counts must be >= 2 and strictly ascending")
    betas, profile = _resolve_betas(betas, profile)
    rows = []
    for m in ms:
        topo = make_circle(m, radius)
        for model in models:
            mc = _mc_fields(topo, model, profile, betas, trials, derive_key(master_seed, len(rows)))
            rows.append(_row({"m": m}, topo, model, betas, variant, mc))
    return SweepResult(
        kind="node-count",
        columns=("m", "theta1", "theta2", "beta_i", "beta_ch", "variant", "d_a", "mc_mean", "mc_se"),
        rows=tuple(rows),
        master_seed=master_seed if trials else None,
    )


def grid_density_sweep(
    spacing: float,
    region: Rect,
    event: Position,
    ch_corner: Position,
    models: Sequence[CorrelationModel],
    betas: BetaFactors | None = None,
    variant: str = DEFAULT_VARIANT,
    increment: int = 4,
    profile: NoiseProfile | None = None,
    trials: int | None = None,
    master_seed: int = 0,
) -> SweepResult:
    """Grow a grid cluster from the far corners inward, reporting node density.

    Starts at m=4 and adds ``increment`` nodes per step, always taking the
    nodes farthest from the event first (the CH stays pinned), until the
    whole lattice is awake. The independent variable is m per unit area.
    """
    check_variant(variant)
    if int(increment) < 1:
        raise InvalidArgumentError("increment must be >= 1")
    betas, profile = _resolve_betas(betas, profile)
    full = make_grid(spacing, region, event, ch_corner)
    order = order_by_event_distance(full, "farthest-first")
    start = min(4, full.m)
    ms = sorted(set(range(start, full.m, int(increment))) | {full.m})
    area = full.region.area
    rows = []
    for m in ms:
        topo = full.subset(order[:m])
        for model in models:
            mc = _mc_fields(topo, model, profile, betas, trials, derive_key(master_seed, len(rows)))
            rows.append(_row({"density": m / area}, topo, model, betas, variant, mc))
    return SweepResult(
        kind="grid-density",
        columns=("density", "m", "theta1", "theta2", "beta_i", "beta_ch", "variant", "d_a", "mc_mean", "mc_se"),
        rows=tuple(rows),
        master_seed=master_seed if trials else None,
    )


def random_topology_average(
    m_values: Sequence[int],
    region: Rect,
    event: Position,
    ch,
    models: Sequence[CorrelationModel],
    betas: BetaFactors | None = None,
    variant: str = DEFAULT_VARIANT,
    runs: int = 100,
    master_seed: int = 0,
    profile: NoiseProfile | None = None,
) -> SweepResult:
    """Mean closed-form accuracy over repeated random deployments.

    Deployment r for cluster size m uses the substream key derived from
    (master_seed, m, r); node positions are redrawn every run.
    """
    check_variant(variant)
    if int(runs) < 1:
        raise InvalidArgumentError("runs must be >= 1")
    m_values = [int(v) for v in m_values]
    if not m_values or any(v < 1 for v in m_values):
        raise InvalidArgumentError("m_values must be positive")
    betas, _ = _resolve_betas(betas, profile)
    rows = []
    for m in m_values:
        values = {id(model): [] for model in models}
        for r in range(int(runs)):
            topo = make_random(m, region, event, ch, seed=derive_key(master_seed, m, r))
            for model in models:
                values[id(model)].append(accuracy_closed_form(topo, model, betas, variant).value)
        for model in models:
            vals = np.array(values[id(model)])
            rows.append(
                {
                    "m": m,
                    "theta1": model.theta1,
                    "theta2": model.theta2,
                    "beta_i": betas.beta_i,
                    "beta_ch": betas.beta_ch,
                    "variant": variant,
                    "d_a": float(np.mean(vals)),
                    "d_a_std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                    "runs": int(runs),
                }
            )
    return SweepResult(
        kind="random-average",
        columns=("m", "theta1", "theta2", "beta_i", "beta_ch", "variant", "d_a", "d_a_std", "runs"),
        rows=tuple(rows),
        master_seed=master_seed,
    )


def find_minimal_cluster(
    topology: Topology,
    model: CorrelationModel,
    betas: BetaFactors,
    epsilon: float,
    ordering: str = "nearest-first",
    variant: str = DEFAULT_VARIANT,
    ordering_seed: int = 0,
) -> MinimalClusterReport:
    """Smallest cluster prefix within epsilon of the full cluster's accuracy.

    Non-CH nodes are ranked by the ordering policy (the CH is always
    first), then prefixes of growing size are evaluated until one reaches
    full accuracy minus epsilon. nearest-first tends to minimize the
    prefix; farthest-first reproduces the growth narrative of the grid
    experiment; ``random`` uses a seeded shuffle.
    """
    check_variant(variant)
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    if ordering not in ORDERINGS:
        raise InvalidArgumentError(f"ordering must be one of {ORDERINGS}, got {ordering!r}")
    if ordering == "random":
        others = [i for i in range(topology.m) if i != topology.ch]
        rng = np.random.default_rng(ordering_seed)
        rng.shuffle(others)
        order = [topology.ch] + others
    else:
        order = order_by_event_distance(topology, ordering)
    full_accuracy = accuracy_closed_form(topology, model, betas, variant).value
    target = full_accuracy - epsilon
    for p in range(1, topology.m + 1):
        acc = accuracy_closed_form(topology.subset(order[:p]), model, betas, variant).value
        if acc >= target:
            return MinimalClusterReport(
                full_m=topology.m,
                full_accuracy=full_accuracy,
                minimal_p=p,
                minimal_accuracy=acc,
                epsilon=float(epsilon),
                ordering=ordering,
            )
    raise AssertionError("unreachable: the full prefix always meets the target")


def calibrate_beta(
    target_accuracy: float,
    topology: Topology,
    model: CorrelationModel,
    variant: str = DEFAULT_VARIANT,
) -> float:
    """Common constraint factor beta_i = beta_ch reproducing a target accuracy.

    With one shared beta the closed form collapses to a quadratic
    A*beta - B*beta^2 with A, B >= 0 on sane geometries, so the smaller
    root of B*beta^2 - A*beta + target is the answer when it lies in
    (0, 1]. A bisection pass guards against quadratic cancellation.
    """
    check_variant(variant)
    m = topology.m
    sum_event, k_event_ch, sum_pairs, sum_ch = _kernel_sums(topology, model)
    a_lin = (2.0 / m) * (sum_event + k_event_ch) - (m - 1) / m**2
    b_quad = (sum_pairs + 2.0 * sum_ch) / m**2
    if variant == VARIANT_AS_PRINTED:
        b_quad += 1.0 / m**2
    else:
        a_lin -= 1.0 / m**2

    def value(beta: float) -> float:
        return a_lin * beta - b_quad * beta * beta

    beta = None
    if b_quad <= 0:
        if a_lin > 0 and 0 < target_accuracy / a_lin <= 1.0:
            beta = target_accuracy / a_lin
    else:
        disc = a_lin * a_lin - 4.0 * b_quad * target_accuracy
        if disc >= 0:
            root = (a_lin - math.sqrt(disc)) / (2.0 * b_quad)
            if 0 < root <= 1.0 + 1e-12:
                beta = min(root, 1.0)
    if beta is None:
        raise CalibrationInfeasibleError(
            f"no constraint factor in (0, 1] attains accuracy {target_accuracy:g} on this geometry"
        )
    # Bisection fallback on the increasing branch if cancellation hurt the root.
    if abs(value(beta) - target_accuracy) > 1e-9 * max(1.0, abs(target_accuracy)):
        lo, hi = 0.0, min(1.0, a_lin / (2.0 * b_quad)) if b_quad > 0 else 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if value(mid) < target_accuracy:
                lo = mid
            else:
                hi = mid
        beta = 0.5 * (lo + hi)
        if abs(value(beta) - target_accuracy) > 1e-8:
            raise CalibrationInfeasibleError(
                f"calibration did not converge for target {target_accuracy:g}"
            )
    return float(beta)
