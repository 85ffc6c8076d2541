"""OAM-mode MIMO channel simulator.

Stochastic (geometry-based) channel generation, deterministic CTF synthesis
from multipath components, SAGE parameter extraction and channel statistics
for links between two uniform circular arrays carrying OAM modes.
"""

from .core import (
    SPEED_OF_LIGHT,
    Ctf,
    FrequencyGrid,
    MpcParams,
    OamModeSet,
    RngStream,
    make_frequency_grid,
    mode_index_map,
    rng_stream,
)
from .estimation import SageConfig, SageEstimate, sage_e_step, sage_estimate, sage_initialize, sage_m_step
from .generator import (
    GeneratedChannel,
    GenerationDraws,
    ScenarioParams,
    azimuth_scaling_factor,
    couple_rays,
    elevation_scaling_factor,
    generate_azimuths,
    generate_channel,
    generate_delays,
    generate_elevations,
    generate_powers,
)
from .geometry import (
    ArrayGeometry,
    direction_vector,
    oam_mode_gain,
    rotate_direction,
    rotation_matrix,
    steering_gain,
    uca_mode_gain,
    uca_positions,
)
from .propagation import (
    TABLE_FITS,
    NullDepthError,
    PathLossFit,
    ShadowingModel,
    bessel_j,
    path_loss_db,
    sample_shadowing_db,
    theoretical_field,
)
from .statistics import (
    CorrelationMatrix,
    SpreadReport,
    angular_psd,
    capacity_bits,
    delay_psd,
    empirical_cdf,
    mode_correlation,
    rms_angle_spreads,
    rms_delay_spread,
)
from .synthesis import LinkConfig, mpc_ctf, synthesize_ctf

__version__ = "0.1.0"
