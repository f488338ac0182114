"""Run configuration: INI-style ``key = value`` text with ``[section]`` headers."""

import configparser
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel
from .errors import ConfigError, MubqkdError
from .optics import rotator
from .timetag import ClockModel

OUTPUT_DIR_ENV = "MUBQKD_OUTPUT_DIR"
BASIS_MODES = ("corrected", "conventional")

_SOURCE_KEYS = {"pair_rate": float, "target_fidelity": float, "target_concurrence": float}
_DRIFT_KEYS = {
    "drift_fidelity_amplitude": "fidelity_amplitude",
    "drift_concurrence_amplitude": "concurrence_amplitude",
    "drift_scrambler_deg": "scrambler_amplitude_deg",
    "drift_period_hours": "period_hours",
    "drift_phase_hours": "phase_hours",
}
_CHANNEL_KEYS = {
    "alice_transmission": float,
    "bob_transmission": float,
    "free_space_length": float,
    "depolarization": float,
    "transmission_fluctuation": float,
    "scrambler": str,
}
_NOISE_KEYS = {
    "background_singles_rate_per_detector": float,
    "filter_fwhm": float,
    "daylight_factor": float,
    "dark_count_rate": float,
}
_DETECTOR_KEYS = {"efficiency": float, "jitter_sigma": float, "dead_time": float}


def parse_scrambler(text):
    """Scrambling unitary from ``identity``, ``rotator:<deg>``, ``haar:<seed>`` or ``waveplates:<q1>,<h>,<q2>``."""
    kind, _, arg = text.strip().partition(":")
    try:
        if kind == "identity":
            return np.eye(2, dtype=complex)
        if kind == "rotator":
            return rotator(np.radians(float(arg)))
        if kind == "haar":
            return channel.random_scrambler(int(arg))
        if kind == "waveplates":
            q1, h, q2 = (float(x) for x in arg.split(","))
            return channel.waveplate_stack(q1, h, q2)
    except ValueError as exc:
        raise ConfigError(f"bad scrambler {text!r}: {exc}") from None
    raise ConfigError(f"unknown scrambler kind {kind!r}; use identity, rotator:<deg>, haar:<seed> or waveplates:<q1>,<h>,<q2>")


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "night-clear-10nm"
    hour: float = 22.0
    acquisition_seconds: float = 10.0
    samples: int = 30
    basis_modes: tuple = BASIS_MODES
    seed: int = 20230915
    output_dir: str = "mubqkd-output"
    workers: int = 1
    security_threshold: float = 11.0

    day_start: float = 8.0
    day_end: float = 18.0
    slot_hours: float = 2.0
    day_preset: str = "day-sunny-10nm"
    night_preset: str = "night-clear-10nm"

    window_ps: int = 1000
    bin_ps: int = 100
    search_range_ps: int = 1_000_000
    optimize_window: bool = False
    qber_limit: float = 11.0
    window_grid: tuple = (250, 500, 750, 1000, 1500, 2000, 3000, 4000)

    tomography_seconds: float = 1.0

    clock_offset_ps: int = 250_000
    clock_drift_ps_per_s: float = 0.0
    pps_discipline: bool = True

    # per-model overrides applied on top of the preset, raw strings parsed on use
    source: dict = field(default_factory=dict)
    channel: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    detector: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("hour", "day_start", "day_end"):
            v = getattr(self, name)
            if not 0 <= v < 24 and not (name == "day_end" and v == 24):
                raise ConfigError(f"{name} must lie in [0, 24), got {v}")
        if not self.day_start < self.day_end:
            raise ConfigError("day_start must precede day_end")
        if not 0 < self.slot_hours <= 24:
            raise ConfigError("slot_hours must lie in (0, 24]")
        if not self.acquisition_seconds > 0:
            raise ConfigError("acquisition_seconds must be positive")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not self.basis_modes or any(m not in BASIS_MODES for m in self.basis_modes):
            raise ConfigError(f"basis_modes must be drawn from {BASIS_MODES}")
        for name in ("scenario", "day_preset", "night_preset"):
            if getattr(self, name) not in channel.PRESETS:
                raise ConfigError(f"unknown preset {getattr(self, name)!r} for {name}; choose from {', '.join(channel.PRESETS)}")
        if self.window_ps <= 0 or self.bin_ps <= 0 or self.search_range_ps <= 0:
            raise ConfigError("window, bin and search range must be positive")
        if not self.window_grid:
            raise ConfigError("window_grid must not be empty")
        if not self.tomography_seconds > 0:
            raise ConfigError("tomography seconds must be positive")
        _check_keys("source", self.source, set(_SOURCE_KEYS) | set(_DRIFT_KEYS))
        _check_keys("channel", self.channel, set(_CHANNEL_KEYS))
        _check_keys("noise", self.noise, set(_NOISE_KEYS))
        _check_keys("detector", self.detector, set(_DETECTOR_KEYS))
        # surface bad override values now rather than mid-run
        self.models(self.scenario)

    def slot_hours_list(self):
        return [float(h) for h in np.arange(0, 24, self.slot_hours)]

    def is_day(self, hour):
        return self.day_start <= hour < self.day_end

    def resolved_output_dir(self):
        return os.environ.get(OUTPUT_DIR_ENV) or self.output_dir

    def clock(self):
        return ClockModel(int(self.clock_offset_ps), float(self.clock_drift_ps_per_s), bool(self.pps_discipline))

    def models(self, preset):
        """Preset models with this config's overrides applied."""
        try:
            source, chan, noise, det = channel.scenario_preset(preset)
            src_over = _typed(self.source, _SOURCE_KEYS)
            drift_over = {_DRIFT_KEYS[k]: float(v) for k, v in self.source.items() if k in _DRIFT_KEYS}
            if drift_over:
                src_over["drift"] = channel.Drift(**drift_over)
            source = replace(source, **src_over)
            ch_over = _typed(self.channel, _CHANNEL_KEYS)
            if "scrambler" in ch_over:
                ch_over["bob_unitary"] = parse_scrambler(ch_over.pop("scrambler"))
            chan = replace(chan, **ch_over)
            noise = replace(noise, **_typed(self.noise, _NOISE_KEYS))
            det = replace(det, **_typed(self.detector, _DETECTOR_KEYS))
        except ConfigError:
            raise
        except (MubqkdError, ValueError, TypeError) as exc:
            raise ConfigError(f"invalid model parameters: {exc}") from None
        return source, chan, noise, det


def _check_keys(section, values, allowed):
    unknown = set(values) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def _typed(values, schema):
    out = {}
    for k, v in values.items():
        if k not in schema:
            continue
        try:
            out[k] = schema[k](v)
        except ValueError:
            raise ConfigError(f"bad value for {k}: {v!r}") from None
    return out


_RUN_FIELDS = {
    "run": ("scenario", "hour", "acquisition_seconds", "samples", "basis_modes", "seed", "output_dir", "workers", "security_threshold"),
    "schedule": ("day_start", "day_end", "slot_hours", "day_preset", "night_preset"),
    "timing": ("window_ps", "bin_ps", "search_range_ps", "optimize_window", "qber_limit", "window_grid"),
    "tomography": ("tomography_seconds",),
    "clock": ("clock_offset_ps", "clock_drift_ps_per_s", "pps_discipline"),
}
_MODEL_SECTIONS = ("source", "channel", "noise", "detector")


def _convert(name, raw):
    default = RunConfig.__dataclass_fields__[name].default
    try:
        if isinstance(default, bool):
            low = raw.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "yes", "1", "on")
        if isinstance(default, int):
            try:
                return int(raw)
            except ValueError:
                v = float(raw)
                if not v.is_integer():
                    raise
                return int(v)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [x.strip() for x in raw.split(",") if x.strip()]
            return tuple(int(x) for x in items) if name == "window_grid" else tuple(items)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    kwargs = {}
    for section in parser.sections():
        if section in _MODEL_SECTIONS:
            kwargs[section] = dict(parser[section])
            continue
        if section not in _RUN_FIELDS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser[section].items():
            if key not in _RUN_FIELDS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            kwargs[key] = _convert(key, raw)
    return RunConfig(**kwargs)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def default_config_text():
    d = RunConfig()
    src, ch, noise, det = channel.scenario_preset(d.scenario)
    return f"""\
# mubqkd run configuration
#
# Values below are the built-in defaults. Physical model parameters come from
# the named scenario preset; keys in [source], [channel], [noise] and
# [detector] override the preset for every session.

[run]
scenario = {d.scenario}          # night-clear-10nm, day-sunny-10nm, day-rain-3nm, night-rain-10nm, custom
hour = {d.hour:g}                          # clock hour of a single `run` session (drift phase, labels)
acquisition_seconds = {d.acquisition_seconds:g}           # protocol acquisition time T per sample
samples = {d.samples}                       # samples per session (assumed cadence within a 2 h slot)
basis_modes = {", ".join(d.basis_modes)}
seed = {d.seed}
output_dir = {d.output_dir}          # overridden by ${OUTPUT_DIR_ENV} when set
workers = {d.workers}                        # parallel sessions in `daily`
security_threshold = {d.security_threshold:g}          # QBER percent below which a sample counts as secure

[schedule]
day_start = {d.day_start:g}
day_end = {d.day_end:g}
slot_hours = {d.slot_hours:g}
day_preset = {d.day_preset}
night_preset = {d.night_preset}

[timing]
window_ps = {d.window_ps}                  # coincidence window (closed, +-window/2)
bin_ps = {d.bin_ps}                      # cross-correlation bin
search_range_ps = {d.search_range_ps}          # delay search range +-
optimize_window = {str(d.optimize_window).lower()}
qber_limit = {d.qber_limit:g}
window_grid = {", ".join(str(w) for w in d.window_grid)}

[tomography]
tomography_seconds = {d.tomography_seconds:g}          # per projection, at the detected pair rate

[clock]
clock_offset_ps = {d.clock_offset_ps}         # Bob minus Alice timestamp offset
clock_drift_ps_per_s = {d.clock_drift_ps_per_s:g}
pps_discipline = {str(d.pps_discipline).lower()}

[source]
# pair_rate = {src.pair_rate:g}
# target_fidelity = {src.target_fidelity:g}
# target_concurrence = {src.target_concurrence:g}
# drift_fidelity_amplitude = 0
# drift_concurrence_amplitude = 0
# drift_scrambler_deg = 0
# drift_period_hours = 24
# drift_phase_hours = 0

[channel]
# alice_transmission = {ch.alice_transmission:g}
# bob_transmission = {ch.bob_transmission:g}          # preset-dependent
# free_space_length = {ch.free_space_length:g}
# depolarization = {ch.depolarization:g}
# transmission_fluctuation = {ch.transmission_fluctuation:g}
# scrambler = identity                  # identity | rotator:<deg> | haar:<seed> | waveplates:<q1>,<h>,<q2>

[noise]
# background_singles_rate_per_detector = {noise.background_singles_rate_per_detector:g}   # at 10 nm, daylight factor 1
# filter_fwhm = {noise.filter_fwhm:g}
# daylight_factor = {noise.daylight_factor:g}
# dark_count_rate = {noise.dark_count_rate:g}

[detector]
# efficiency = {det.efficiency:g}
# jitter_sigma = {det.jitter_sigma:g}                # ps, an assumption
# dead_time = {det.dead_time:g}                 # ps
"""

