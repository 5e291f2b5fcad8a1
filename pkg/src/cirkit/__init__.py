"""cirkit: channel sounding, PDP analysis and cluster-based channel simulation.

The pipeline runs measurement-side (sound a channel with a tiled prime-length
Zadoff-Chu waveform, estimate impulse responses, average them into a power
delay profile, extract delay spread / K-factor / cluster count) and
simulation-side (configure a stochastic cluster-delay-line generator from the
extracted parameters and emit CIR datasets plus measured-vs-simulated
comparisons).
"""

from .__about__ import __version__
from .analysis import (
    ChannelParameters,
    ComparisonReport,
    PowerDelayProfile,
    compare_pdps,
    count_clusters,
    estimate_noise_floor,
    extract_parameters,
    k_factor,
    mean_excess_delay,
    normalize_pdp,
    rms_delay_spread,
    second_moment,
    threshold_pdp,
)
from .channel_apply import SyntheticChannel, add_awgn, apply_channel
from .errors import (
    BadMagicError,
    BadVersionError,
    CorruptFileError,
    EmptyProfileError,
    FileFormatError,
    InternalConsistencyError,
    MissingSidecarError,
    SizeMismatchError,
    ValidationError,
)
from .gbsm import (
    PRESETS,
    Cluster,
    ClusterSet,
    ScenarioConfig,
    config_from_parameters,
    draw_large_scale,
    generate_clusters,
    generate_dataset,
    simulate_pdp,
    synthesize_cir,
)
from .io import (
    Dataset,
    read_config,
    read_dataset,
    read_iq,
    read_pdp_csv,
    write_config,
    write_dataset,
    write_iq,
    write_pdp_csv,
    write_report,
)
from .signal import IqSignal, circular_cross_correlate, dft, idft, is_prime, zadoff_chu
from .sounder import (
    ChannelImpulseResponse,
    SoundingWaveform,
    average_pdp,
    build_sounding_signal,
    estimate_cirs,
    mitigate_artifacts,
    synchronize,
    zadoff_chu_waveform,
)

__all__ = [
    "__version__",
    "BadMagicError",
    "BadVersionError",
    "ChannelImpulseResponse",
    "ChannelParameters",
    "Cluster",
    "ClusterSet",
    "ComparisonReport",
    "CorruptFileError",
    "Dataset",
    "EmptyProfileError",
    "FileFormatError",
    "InternalConsistencyError",
    "IqSignal",
    "MissingSidecarError",
    "PRESETS",
    "PowerDelayProfile",
    "ScenarioConfig",
    "SizeMismatchError",
    "SoundingWaveform",
    "SyntheticChannel",
    "ValidationError",
    "add_awgn",
    "apply_channel",
    "average_pdp",
    "build_sounding_signal",
    "circular_cross_correlate",
    "compare_pdps",
    "config_from_parameters",
    "count_clusters",
    "dft",
    "draw_large_scale",
    "estimate_cirs",
    "estimate_noise_floor",
    "extract_parameters",
    "generate_clusters",
    "generate_dataset",
    "idft",
    "is_prime",
    "k_factor",
    "mean_excess_delay",
    "mitigate_artifacts",
    "normalize_pdp",
    "read_config",
    "read_dataset",
    "read_iq",
    "read_pdp_csv",
    "rms_delay_spread",
    "second_moment",
    "simulate_pdp",
    "synchronize",
    "synthesize_cir",
    "threshold_pdp",
    "write_config",
    "write_dataset",
    "write_iq",
    "write_pdp_csv",
    "write_report",
    "zadoff_chu",
    "zadoff_chu_waveform",
]
