"""Link-level simulator for an OTFS ISAC system with sub-Nyquist receivers."""

__version__ = "0.1.0"

from .config import SystemConfig, ResolutionReport, validate, select_params, resolutions
from .otfs import TimeSignal, isfft, sfft, heisenberg, wigner, vec, unvec, modulate, demodulate
from .channel import Path, ChannelSpec, AgingModel, apply_dd_operator, apply_channel, apply_time_channel, gen_rician, age_channel
from .subnyq import AliasPlan, alias_frequency, downsample, build_alias_plan, unfold
from .pilot import SpreadCode, zadoff_chu, make_pilot_grid, spread, assemble_block, build_preamble, papr, papr_bound
from .radar import TargetEstimate, DetectionResult, matched_surface, estimate_coefficient, sic_estimate, resolve_ambiguity, detect
from .comm import SyncResult, EffectiveChannel, interpolate_full_rate, estimate_timing, estimate_cfo, synchronize, estimate_coefficients, build_effective_channel, mmse_detect, cancel_interference, iterative_decode
from .harness import Scenario, ResultTable, run, ber, rmse_range, rmse_velocity, empirical_sinr
