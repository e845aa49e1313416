"""Monte Carlo oracle for the observation / transmission / fusion chain.

Simulates, per trial: a joint draw of the field at the event and at every
node, each non-CH node's noisy observation, its transmission to the CH
over an additive white Gaussian noise channel, power scaling and its exact
removal by the shrinkage decoder, the CH's own (transmission-free)
observation, and the final cluster average. Accuracy is one minus the
normalized mean squared error of that average against the true event
value, with the field variance taken as known rather than estimated (it
is an input, and using it halves the oracle's variance).

Trial t draws from the counter-based substream keyed by (master_seed, t).
Each trial consumes exactly 3*m standard normals in a fixed layout

    [0, m+1)      field at [event, node_1, ..., node_m]
    [m+1, 2m)     observation noise, non-CH nodes in node order
    [2m, 3m-1)    transmission noise, non-CH nodes in node order
    [3m-1]        CH observation noise

independent of which noise variances are zero, so results are a pure
function of (geometry, model, profile, trials, master_seed). The trial
sum is accumulated with exact (compensated) summation, making the mean
independent of batching or evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import streams
from .correlation import CorrelationModel, CholeskyFactor, cholesky, covariance_matrix
from .errors import InvalidArgumentError
from .estimator import NoiseProfile, alpha, beta_ch, beta_node
from .topology import Topology

_BATCH = 1 << 14

# Tolerance for the internal check that the power scaling cancels out of
# the decoded estimates; both sides differ only by floating rounding.
_ALPHA_CANCEL_RTOL = 1e-12


@dataclass(frozen=True)
class FieldSample:
    """One joint draw of the field: event value plus per-node values."""

    s: float
    node_values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.node_values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "node_values", vals)
        object.__setattr__(self, "s", float(self.s))


@dataclass(frozen=True)
class ChainObservation:
    """Every intermediate quantity of one simulated trial.

    Arrays indexed over non-CH nodes in node order: x (noisy
    observations), y (after channel noise), z (after power scaling),
    s_hat_nodes (decoded estimates). x_ch / s_hat_ch are the CH's own
    observation and estimate; s_hat is the fused cluster average.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    x_ch: float
    s_hat_nodes: np.ndarray
    s_hat_ch: float
    s_hat: float


@dataclass(frozen=True)
class McEstimate:
    """Empirical accuracy with its standard error and provenance."""

    mean_accuracy: float
    std_error: float
    trials: int
    master_seed: int
    jitter: float = 0.0


def sample_field(
    topology: Topology,
    model: CorrelationModel,
    sigma_s2: float,
    rng: streams.Substream,
    factor: CholeskyFactor | None = None,
) -> FieldSample:
    """Draw the field jointly at the event and all nodes.

    Consumes m+1 normals from ``rng``. The covariance factor can be passed
    in to avoid refactoring in a loop; it must match (topology, model,
    sigma_s2).
    """
    if factor is None:
        factor = cholesky(covariance_matrix(topology, model, sigma_s2))
    g = rng.normals(topology.m + 1)
    vals = factor.lower @ g
    return FieldSample(s=vals[0], node_values=vals[1:])


def _chain_batch(
    s_nodes: np.ndarray,
    g_obs: np.ndarray,
    g_tx: np.ndarray,
    g_ch: np.ndarray,
    profile: NoiseProfile,
    ch_index: int,
    nc: np.ndarray,
):
    """Vectorized chain over a batch axis; returns per-stage arrays.

    ``s_nodes`` has shape (batch, m); noise inputs are standard normals of
    shapes (batch, m-1), (batch, m-1), (batch,).
    """
    bi = beta_node(profile)
    bch = beta_ch(profile)
    a = alpha(profile)
    x = s_nodes[..., nc] + math.sqrt(profile.sigma_n2) * g_obs
    y = x + math.sqrt(profile.sigma_nt2) * g_tx
    z = a * y
    s_hat_nodes = (bi / a) * z
    direct = bi * y
    if not np.allclose(s_hat_nodes, direct, rtol=_ALPHA_CANCEL_RTOL, atol=0.0):
        raise RuntimeError("power scaling failed to cancel out of the decoded estimates")
    x_ch = s_nodes[..., ch_index] + math.sqrt(profile.sigma_nch2) * g_ch
    s_hat_ch = bch * x_ch
    m = s_nodes.shape[-1]
    s_hat = (np.sum(s_hat_nodes, axis=-1) + s_hat_ch) / m
    return x, y, z, x_ch, s_hat_nodes, s_hat_ch, s_hat


def simulate_chain(
    sample: FieldSample,
    profile: NoiseProfile,
    topology: Topology,
    rng: streams.Substream,
) -> ChainObservation:
    """Run one trial's chain on a field sample, drawing fresh noise.

    Consumes 2(m-1)+1 normals from ``rng`` (observation noise, then
    transmission noise, then CH noise), even when variances are zero.
    """
    m = topology.m
    if sample.node_values.shape != (m,):
        raise InvalidArgumentError(
            f"field sample has {sample.node_values.shape[0]} node values for an m={m} topology"
        )
    nc = topology.non_ch_indices
    g_obs = rng.normals(m - 1)
    g_tx = rng.normals(m - 1)
    g_ch = rng.normals(1)[0]
    x, y, z, x_ch, s_hat_nodes, s_hat_ch, s_hat = _chain_batch(
        sample.node_values[None, :], g_obs[None, :], g_tx[None, :], np.array([g_ch]),
        profile, topology.ch, nc,
    )
    return ChainObservation(
        x=x[0], y=y[0], z=z[0],
        x_ch=float(x_ch[0]),
        s_hat_nodes=s_hat_nodes[0],
        s_hat_ch=float(s_hat_ch[0]),
        s_hat=float(s_hat[0]),
    )


def mc_accuracy(
    topology: Topology,
    model: CorrelationModel,
    profile: NoiseProfile,
    trials: int,
    master_seed: int,
    batch_size: int = _BATCH,
) -> McEstimate:
    """Estimate accuracy over independently seeded trials.

    Per trial t: draw the field and noises from substream (master_seed, t),
    run the chain, record the squared error of the fused estimate. The
    report is the mean of the per-trial statistic 1 - err/sigma_s2 and the
    sample standard error of that statistic.
    """
    if trials < 2:
        raise InvalidArgumentError(f"trials must be >= 2, got {trials}")
    if batch_size < 1:
        raise InvalidArgumentError("batch_size must be >= 1")
    m = topology.m
    nc = topology.non_ch_indices
    factor = cholesky(covariance_matrix(topology, model, profile.sigma_s2))
    lower_t = np.ascontiguousarray(factor.lower.T)
    draws = 3 * m
    base = streams.mix64(int(master_seed) & 0xFFFFFFFFFFFFFFFF)
    err = np.empty(trials, dtype=float)
    for lo in range(0, trials, batch_size):
        hi = min(lo + batch_size, trials)
        t_idx = np.arange(lo, hi, dtype=np.uint64)
        keys = streams.mix64(base ^ streams.mix64(t_idx))
        g = streams.to_normal(streams.block_values(keys, draws))
        field = g[:, : m + 1] @ lower_t
        s = field[:, 0]
        s_nodes = field[:, 1:]
        g_obs = g[:, m + 1 : 2 * m]
        g_tx = g[:, 2 * m : 3 * m - 1]
        g_ch = g[:, 3 * m - 1]
        *_, s_hat = _chain_batch(s_nodes, g_obs, g_tx, g_ch, profile, topology.ch, nc)
        err[lo:hi] = (s - s_hat) ** 2
    mean_acc = 1.0 - math.fsum(err) / trials / profile.sigma_s2
    per_trial = 1.0 - err / profile.sigma_s2
    se = float(np.std(per_trial, ddof=1)) / math.sqrt(trials)
    return McEstimate(
        mean_accuracy=mean_acc,
        std_error=se,
        trials=int(trials),
        master_seed=int(master_seed),
        jitter=factor.jitter,
    )


def trial_substream(master_seed: int, trial: int) -> streams.Substream:
    """The substream that ``mc_accuracy`` uses for one trial.

    Composing ``sample_field`` then ``simulate_chain`` on this stream
    reproduces the batched trial exactly; tests rely on that equivalence.
    """
    return streams.Substream(streams.derive_key(master_seed, trial))
