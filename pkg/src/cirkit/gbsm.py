"""Geometry-inspired stochastic channel generator.

Draws log-normal large-scale parameters, synthesizes a cluster delay line
(exponential delay drawing with a proportionality factor, exponential power
decay, log-normal per-cluster shadowing, optional user-fixed clusters and a
LOS component), rescales delays so the realized RMS delay spread matches the
drawn target exactly, and renders band-limited CIRs on the sounder's sample
grid.

All randomness flows from caller-provided seeds through numpy's PCG64
generator; identical inputs give bit-identical outputs regardless of
internal parallelism.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __about__
from .analysis import DEFAULT_MARGIN_DB, ChannelParameters, PowerDelayProfile, estimate_noise_floor, normalize_pdp
from .errors import ValidationError
from .sounder import ChannelImpulseResponse, average_pdp

DEFAULT_R_TAU = 2.3
DEFAULT_SHADOWING_DB = 3.0
KERNEL_HALF_WIDTH = 8

ENFORCEMENT_EXACT = "exact"
ENFORCEMENT_SINGLE_CLUSTER = "skipped-single-cluster"
ENFORCEMENT_RELAXED_FIXED = "relaxed-fixed-delays"


@dataclass(frozen=True)
class ScenarioConfig:
    """Generator configuration for one propagation scenario.

    ``ds_sigma_log10`` is the standard deviation of log10(DS/1s);
    ``kf_sigma_db`` the standard deviation of the K-factor in dB (normal in
    dB is log-normal in linear). ``fixed_clusters`` holds user-pinned
    (delay_s, relative_power_linear) pairs for known real-world scatterers.
    """

    label: str
    ds_median_s: float
    ds_sigma_log10: float
    kf_median_db: float | None
    kf_sigma_db: float
    num_clusters: int
    delay_proportionality_r_tau: float
    per_cluster_shadowing_db: float
    los: bool
    fixed_clusters: tuple[tuple[float, float], ...]
    sample_rate_hz: float
    cir_length_taps: int

    def __post_init__(self):
        object.__setattr__(
            self,
            "fixed_clusters",
            tuple((float(d), float(p)) for d, p in self.fixed_clusters),
        )
        if self.ds_median_s <= 0:
            raise ValidationError("ds_median_s must be > 0")
        if self.ds_sigma_log10 < 0 or self.kf_sigma_db < 0:
            raise ValidationError("spread parameters must be >= 0")
        if self.num_clusters < 1:
            raise ValidationError("num_clusters must be >= 1")
        if self.delay_proportionality_r_tau <= 1.0:
            raise ValidationError("delay proportionality factor r_tau must be > 1")
        if self.per_cluster_shadowing_db < 0:
            raise ValidationError("per_cluster_shadowing_db must be >= 0")
        if self.sample_rate_hz <= 0 or not math.isfinite(self.sample_rate_hz):
            raise ValidationError("sample_rate_hz must be finite and positive")
        if self.cir_length_taps < 1:
            raise ValidationError("cir_length_taps must be >= 1")
        if self.los and self.kf_median_db is None:
            raise ValidationError("LOS scenario requires kf_median_db")
        if not self.los and self.kf_median_db is not None:
            raise ValidationError("NLOS scenario must not carry kf_median_db")
        if self.num_clusters < len(self.fixed_clusters):
            raise ValidationError("num_clusters smaller than the number of fixed clusters")
        span = self.cir_length_taps / self.sample_rate_hz
        for delay, power in self.fixed_clusters:
            if delay < 0 or delay >= span:
                raise ValidationError(
                    f"fixed cluster delay {delay} s not representable in {span} s CIR span"
                )
            if power <= 0:
                raise ValidationError("fixed cluster power must be > 0")


def _table_preset(label: str, ds_ns: float, kf_db: float | None, clusters: int) -> ScenarioConfig:
    return ScenarioConfig(
        label=label,
        ds_median_s=ds_ns * 1e-9,
        ds_sigma_log10=0.0,
        kf_median_db=kf_db,
        kf_sigma_db=0.0,
        num_clusters=clusters,
        delay_proportionality_r_tau=DEFAULT_R_TAU,
        per_cluster_shadowing_db=DEFAULT_SHADOWING_DB,
        los=kf_db is not None,
        fixed_clusters=(),
        sample_rate_hz=25.6e6,
        cir_length_taps=353,
    )


# measured-campaign presets; spreads are zero because each comes from
# single-point extraction (one measurement gives no distribution)
PRESETS: dict[str, ScenarioConfig] = {
    "urban-los": _table_preset("urban-los", 45.0, 13.0, 15),
    "urban-nlos": _table_preset("urban-nlos", 125.0, None, 19),
    "campus-los": _table_preset("campus-los", 50.0, 21.0, 17),
    "campus-nlos": _table_preset("campus-nlos", 175.0, None, 22),
}


@dataclass(frozen=True)
class Cluster:
    delay_s: float
    power_linear: float
    fixed: bool


@dataclass(frozen=True)
class ClusterSet:
    """Discrete scatterer set: (delay, power) clusters plus a LOS component.

    Total power (clusters plus LOS) is 1. ``ds_enforcement`` records whether
    the delay-spread rescaling ran exactly, was skipped for a single-cluster
    set, or was relaxed because fixed-cluster delays were preserved.
    """

    clusters: tuple[Cluster, ...]
    los_power_linear: float
    ds_enforcement: str = ENFORCEMENT_EXACT

    def __post_init__(self):
        if not self.clusters:
            raise ValidationError("cluster set must contain at least one cluster")
        if self.los_power_linear < 0:
            raise ValidationError("LOS power must be >= 0")
        for c in self.clusters:
            if c.delay_s < 0 or c.power_linear <= 0:
                raise ValidationError("clusters need delay >= 0 and power > 0")
        total = sum(c.power_linear for c in self.clusters) + self.los_power_linear
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"cluster set power sums to {total}, expected 1")

    @property
    def delays(self) -> np.ndarray:
        return np.array([c.delay_s for c in self.clusters])

    @property
    def powers(self) -> np.ndarray:
        return np.array([c.power_linear for c in self.clusters])

    def rms_delay_spread(self) -> float:
        """Exact RMS delay spread of the discrete set including the LOS term."""
        delays = np.append(self.delays, 0.0)
        powers = np.append(self.powers, self.los_power_linear)
        total = powers.sum()
        m1 = float(np.sum(powers * delays) / total)
        m2 = float(np.sum(powers * delays**2) / total)
        return math.sqrt(max(m2 - m1 * m1, 0.0))


def subseed(root_seed: int, *path: int) -> np.random.SeedSequence:
    """Deterministic child seed for (root seed, index path).

    Makes snapshot generation order-independent: stream i depends only on
    the root seed and its own indices, never on scheduling.
    """
    if root_seed < 0 or any(p < 0 for p in path):
        raise ValidationError("seeds and seed path entries must be non-negative")
    return np.random.SeedSequence([int(root_seed), *[int(p) for p in path]])


def config_from_parameters(params: ChannelParameters, defaults: ScenarioConfig) -> ScenarioConfig:
    """Fill a scenario config from extracted channel parameters.

    Copies ``defaults`` and overrides the delay spread median, K-factor
    median (LOS flag follows K-factor presence) and cluster count.
    """
    if params.cluster_count == 0:
        raise ValidationError("cluster_count is 0; nothing to simulate")
    return replace(
        defaults,
        ds_median_s=params.rms_delay_spread_s,
        kf_median_db=params.k_factor_db,
        num_clusters=params.cluster_count,
        los=params.k_factor_db is not None,
    )


def draw_large_scale(config: ScenarioConfig, rng_seed) -> tuple[float, float | None]:
    """Draw one (delay spread, K-factor) realization.

    DS is log-normal around its median; the K-factor is normal in dB around
    its median (equivalently log-normal in linear). NLOS configs always
    yield an absent K-factor.
    """
    rng = np.random.default_rng(rng_seed)
    ds = 10.0 ** (math.log10(config.ds_median_s) + config.ds_sigma_log10 * rng.standard_normal())
    kf = None
    if config.los:
        kf = config.kf_median_db + config.kf_sigma_db * rng.standard_normal()
    return float(ds), kf


def _weighted_sigma(delays: np.ndarray, powers: np.ndarray) -> float:
    total = powers.sum()
    m1 = float(np.sum(powers * delays) / total)
    m2 = float(np.sum(powers * delays**2) / total)
    return math.sqrt(max(m2 - m1 * m1, 0.0))


def _preserve_fixed_scale(
    delays: np.ndarray, powers: np.ndarray, scale_mask: np.ndarray, ds_target: float
) -> float:
    """Scale factor for the scalable delays so the set's sigma hits the target.

    sigma^2 is a quadratic in the scale factor, so this solves it in closed
    form; when the target is below the minimum achievable sigma the vertex
    (closest achievable) is returned.
    """
    w = powers / powers.sum()
    m1s = float(np.sum(w[scale_mask] * delays[scale_mask]))
    m2s = float(np.sum(w[scale_mask] * delays[scale_mask] ** 2))
    m1f = float(np.sum(w[~scale_mask] * delays[~scale_mask]))
    m2f = float(np.sum(w[~scale_mask] * delays[~scale_mask] ** 2))
    a = m2s - m1s * m1s
    b = -2.0 * m1s * m1f
    c = m2f - m1f * m1f - ds_target * ds_target
    if a <= 0.0:
        return 1.0
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return -b / (2.0 * a)
    return max((-b + math.sqrt(disc)) / (2.0 * a), 0.0)


def generate_clusters(
    ds_s: float,
    kf_db: float | None,
    config: ScenarioConfig,
    rng_seed,
    preserve_fixed_delays: bool = False,
) -> ClusterSet:
    """Synthesize one cluster delay line with the requested delay spread.

    Stochastic delays are drawn exponentially with proportionality factor
    r_tau, sorted and shifted to start at 0; powers decay exponentially in
    delay with log-normal per-cluster shadowing. Fixed clusters enter
    verbatim. For LOS scenarios the scattered power is scaled to 1/(K+1)
    and a LOS component of power K/(K+1) sits at delay 0. Finally all
    delays (stochastic only, when ``preserve_fixed_delays``) are rescaled by
    one factor so the exact RMS delay spread of the discrete set equals
    ``ds_s``.
    """
    if ds_s <= 0:
        raise ValidationError("ds_s must be > 0")
    n_fixed = len(config.fixed_clusters)
    n_stoch = config.num_clusters - n_fixed
    if n_stoch < 0:
        raise ValidationError("num_clusters smaller than the number of fixed clusters")

    rng = np.random.default_rng(rng_seed)
    r_tau = config.delay_proportionality_r_tau
    if n_stoch > 0:
        u = rng.random(n_stoch)  # 1-u is uniform on (0, 1]
        raw = -r_tau * ds_s * np.log1p(-u)
        raw.sort()
        stoch_delays = raw - raw[0]
        shadowing = rng.normal(0.0, config.per_cluster_shadowing_db, n_stoch)
        stoch_weights = np.exp(-stoch_delays * (r_tau - 1.0) / (r_tau * ds_s)) * 10.0 ** (
            -shadowing / 10.0
        )
    else:
        stoch_delays = np.empty(0)
        stoch_weights = np.empty(0)

    delays = np.concatenate([stoch_delays, [d for d, _ in config.fixed_clusters]])
    weights = np.concatenate([stoch_weights, [p for _, p in config.fixed_clusters]])
    fixed_mask = np.zeros(delays.size, dtype=bool)
    fixed_mask[n_stoch:] = True
    order = np.argsort(delays, kind="stable")
    delays, weights, fixed_mask = delays[order], weights[order], fixed_mask[order]

    if kf_db is not None:
        k_linear = 10.0 ** (kf_db / 10.0)
        los_power = k_linear / (k_linear + 1.0)
    else:
        los_power = 0.0
    powers = weights / weights.sum() * (1.0 - los_power)

    all_delays = np.append(delays, 0.0)
    all_powers = np.append(powers, los_power)
    enforcement = ENFORCEMENT_EXACT
    if config.num_clusters == 1:
        enforcement = ENFORCEMENT_SINGLE_CLUSTER
    else:
        sigma = _weighted_sigma(all_delays, all_powers)
        if sigma == 0.0:
            raise ValidationError("degenerate cluster set (all delays equal); cannot scale")
        if preserve_fixed_delays and n_fixed > 0:
            scale_mask = np.append(~fixed_mask, False)
            alpha = _preserve_fixed_scale(all_delays, all_powers, scale_mask, ds_s)
            delays = np.where(fixed_mask, delays, delays * alpha)
            enforcement = ENFORCEMENT_RELAXED_FIXED
        else:
            delays = delays * (ds_s / sigma)

    clusters = tuple(
        Cluster(float(d), float(p), bool(f)) for d, p, f in zip(delays, powers, fixed_mask)
    )
    return ClusterSet(clusters, float(los_power), enforcement)


def _kernel(offsets: np.ndarray) -> np.ndarray:
    """Unit-energy windowed-sinc interpolation kernel at the given offsets."""
    window = 0.5 * (1.0 + np.cos(np.pi * offsets / KERNEL_HALF_WIDTH))
    taps = np.sinc(offsets) * window
    return taps / math.sqrt(float(np.sum(taps**2)))


def synthesize_cir(
    clusters: ClusterSet,
    config: ScenarioConfig,
    rng_seed,
    timestamp_index: int = 0,
) -> ChannelImpulseResponse:
    """Render one CIR realization of a cluster set on the sample grid.

    Each cluster contributes sqrt(power) with an independent uniform phase
    (the LOS phase is fixed at 0), placed at its fractional delay with a
    windowed-sinc kernel of half-width 8 taps. Kernel truncation and
    boundary clipping keep the total tap energy within about +-0.5 dB of 1
    when clusters sit a few bins apart; clusters sharing bins additionally
    interfere realization-by-realization (their phase-averaged power still
    adds exactly, which is what the PDP sees).
    """
    fs = config.sample_rate_hz
    n_taps = config.cir_length_taps
    span = n_taps / fs
    max_delay = float(np.max(clusters.delays))
    if max_delay >= span:
        raise ValidationError(
            f"cluster delay {max_delay} s overflows the {span} s CIR span"
        )
    rng = np.random.default_rng(rng_seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, len(clusters.clusters))
    taps = np.zeros(n_taps, dtype=np.complex128)

    def place(amplitude: complex, delay_s: float) -> None:
        pos = delay_s * fs
        lo = math.ceil(pos - KERNEL_HALF_WIDTH)
        hi = math.floor(pos + KERNEL_HALF_WIDTH)
        idx = np.arange(lo, hi + 1)
        kern = _kernel(idx - pos)
        valid = (idx >= 0) & (idx < n_taps)
        taps[idx[valid]] += amplitude * kern[valid]

    for cluster, phase in zip(clusters.clusters, phases):
        place(math.sqrt(cluster.power_linear) * np.exp(1j * phase), cluster.delay_s)
    if clusters.los_power_linear > 0.0:
        place(math.sqrt(clusters.los_power_linear), 0.0)
    return ChannelImpulseResponse(taps, 1.0 / fs, timestamp_index=timestamp_index)


def simulate_pdp(config: ScenarioConfig, rng_seed: int, n_realizations: int) -> PowerDelayProfile:
    """Simulate a normalized PDP: one cluster-set draw, many phase realizations.

    Cluster positions stay fixed across realizations; only the per-cluster
    phases are redrawn, mirroring consecutive snapshots of a static channel.
    Deterministic per seed.
    """
    if n_realizations < 1:
        raise ValidationError("n_realizations must be >= 1")
    ds, kf = draw_large_scale(config, subseed(rng_seed, 0))
    clusters = generate_clusters(ds, kf, config, subseed(rng_seed, 1))
    cirs = [
        synthesize_cir(clusters, config, subseed(rng_seed, 2, i), timestamp_index=i)
        for i in range(n_realizations)
    ]
    pdp = average_pdp(cirs)
    floor = estimate_noise_floor(pdp) if len(pdp) >= 16 else 0.0
    return normalize_pdp(pdp.with_noise_floor(floor), DEFAULT_MARGIN_DB)


def _snapshot_taps(config: ScenarioConfig, rng_seed: int, index: int) -> np.ndarray:
    ds, kf = draw_large_scale(config, subseed(rng_seed, index, 0))
    clusters = generate_clusters(ds, kf, config, subseed(rng_seed, index, 1))
    cir = synthesize_cir(clusters, config, subseed(rng_seed, index, 2), timestamp_index=index)
    return cir.taps


def generate_dataset(
    config: ScenarioConfig,
    count: int,
    rng_seed: int,
    path=None,
    workers: int = 1,
):
    """Generate ``count`` independent channel snapshots, optionally writing them.

    Every snapshot draws fresh large-scale parameters, clusters and phases
    from a seed derived from (root seed, snapshot index), so the output is
    identical no matter how many workers run. Returns the in-memory dataset;
    writes the container file when ``path`` is given.
    """
    from . import io as cirkit_io  # deferred: io needs this module's types

    if count < 1:
        raise ValidationError("count must be >= 1")
    if workers < 1:
        raise ValidationError("workers must be >= 1")
    if workers == 1:
        snapshots = [_snapshot_taps(config, rng_seed, i) for i in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            snapshots = list(
                pool.map(lambda i: _snapshot_taps(config, rng_seed, i), range(count))
            )
    blob = cirkit_io.config_to_text(
        config,
        comments=(f"seed={rng_seed}", f"generator_version={__about__.__version__}"),
    )
    dataset = cirkit_io.Dataset(
        snapshots=np.vstack(snapshots),
        sample_rate_hz=config.sample_rate_hz,
        config_text=blob,
    )
    if path is not None:
        cirkit_io.write_dataset(path, dataset)
    return dataset
