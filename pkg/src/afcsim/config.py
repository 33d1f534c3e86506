"""Experiment configuration: a single nested JSON file drives a full run.

Sections mirror the model types (source, memory, analyzers, detectors,
coincidence, duty cycle, desk-scale sampling).  Unknown keys anywhere are
hard errors with the offending JSON path, so a typo cannot silently
mis-calibrate a run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from afcsim.analyzer import CoincidenceConfig, DetectorConfig, UmziConfig
from afcsim.memory import (
    CHANNEL_OFFSETS_GHZ,
    AfcChannel,
    MemoryBank,
    wavelength_for_offset,
)
from afcsim.source import PumpConfig, SourceModel

__all__ = [
    "ConfigError",
    "DutyCycle",
    "Filters",
    "DeskScale",
    "ExperimentConfig",
    "load_config",
    "reference_calibration_config",
]


class ConfigError(ValueError):
    """Configuration file is invalid; message carries the JSON path."""


@dataclass(frozen=True)
class DutyCycle:
    prepare_ms: float = 200.0
    wait_ms: float = 20.0
    measure_ms: float = 280.0
    period_ms: float = 500.0

    def __post_init__(self):
        total = self.prepare_ms + self.wait_ms + self.measure_ms
        if abs(total - self.period_ms) > 1e-9:
            raise ConfigError(
                f"duty_cycle: prepare+wait+measure = {total} ms must equal period "
                f"{self.period_ms} ms"
            )

    @property
    def measure_fraction(self) -> float:
        return self.measure_ms / self.period_ms


@dataclass(frozen=True)
class Filters:
    """Per-side selection bandwidths; the recalled signal is limited by the
    4 GHz memory passband regardless of its grating."""

    signal_bandwidth_ghz: float = 4.0
    idler_bandwidth_ghz: float = 6.2

    def __post_init__(self):
        if self.signal_bandwidth_ghz <= 0 or self.idler_bandwidth_ghz <= 0:
            raise ConfigError("filters: bandwidths must be positive")
        if self.idler_bandwidth_ghz < self.signal_bandwidth_ghz:
            raise ConfigError("filters: idler bandwidth must cover the signal band")


@dataclass(frozen=True)
class DeskScale:
    """Sampling-scale knobs for desk-size runs.

    ``efficiency_boost`` multiplies the signal-chain survival (and the
    memory noise rate, preserving noise-to-signal) so that far fewer clock
    cycles reproduce the count totals of the long physical acquisitions;
    all loss-independent statistics (g2, E, S, V) are unaffected.  The boost
    is recorded in every run report.
    """

    efficiency_boost: float = 100.0
    chsh_cycles_per_setting: int = 10_000_000
    fringe_points: int = 13
    fringe_cycles_per_point: int = 2_000_000
    tomography_cycles_per_setting: int = 5_000_000
    g2_cycles: int = 6_000_000
    mc_trials: int = 100

    def __post_init__(self):
        if self.efficiency_boost < 1.0:
            raise ConfigError("desk_scale: efficiency_boost must be >= 1")
        for name in (
            "chsh_cycles_per_setting",
            "fringe_cycles_per_point",
            "tomography_cycles_per_setting",
            "g2_cycles",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"desk_scale: {name} must be positive")
        if self.fringe_points < 5:
            raise ConfigError("desk_scale: fringe fits need at least 5 points")
        if self.mc_trials < 2:
            raise ConfigError("desk_scale: mc_trials must be >= 2")


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceModel
    bank: MemoryBank
    idler_analyzer: UmziConfig
    signal_analyzer: UmziConfig
    detectors: DetectorConfig
    coincidence: CoincidenceConfig
    duty_cycle: DutyCycle = field(default_factory=DutyCycle)
    filters: Filters = field(default_factory=Filters)
    desk_scale: DeskScale = field(default_factory=DeskScale)
    seed: int = 0
    run_duration_s: float = 60.0

    def __post_init__(self):
        for side in (self.idler_analyzer, self.signal_analyzer):
            side.check_matches_source(self.source.pump.pulse_interval_ns)
        if self.run_duration_s <= 0:
            raise ConfigError("run_duration_s must be positive")

    @property
    def clock_period_ns(self) -> float:
        return self.source.pump.period_ns


def _take(section: dict, path: str, known: dict):
    """Pop known keys with defaults; reject unknown ones."""
    extra = set(section) - set(known)
    if extra:
        raise ConfigError(f"{path}: unknown key(s) {sorted(extra)}")
    return {k: section.get(k, v) for k, v in known.items() if k in section or v is not ...}


def _require(section: dict, path: str, key: str):
    if key not in section:
        raise ConfigError(f"{path}: missing required key '{key}'")
    return section[key]


def _build_pump(data: dict) -> PumpConfig:
    kwargs = _take(
        data,
        "source.pump",
        {
            "period_ns": 16.0,
            "pulse_interval_ns": 1.25,
            "pulse_width_fwhm_ps": 300.0,
            "extinction_ratio_db": 25.0,
            "intensity_imbalance": 1.0,
            "phase_jitter_sigma_rad": 0.0,
        },
    )
    try:
        return PumpConfig(**kwargs)
    except ValueError as err:
        raise ConfigError(f"source.pump: {err}") from err


def _build_source(data: dict) -> SourceModel:
    kwargs = _take(
        data,
        "source",
        {
            "pump": {},
            "pair_emission_probability_per_cycle": 0.05,
            "white_noise_fraction": 0.0,
            "signal_center_wavelength_nm": 1531.93,
            "idler_center_wavelength_nm": 1549.37,
            "pair_bandwidth_ghz": 100.0,
        },
    )
    pump = _build_pump(kwargs.pop("pump", {}))
    try:
        return SourceModel(pump=pump, **kwargs)
    except ValueError as err:
        raise ConfigError(f"source: {err}") from err


def _build_bank(data: dict, reference_nm: float) -> MemoryBank:
    kwargs = _take(
        data,
        "memory",
        {
            "channel_spacing_ghz": 15.0,
            "transmission_efficiency": 0.26,
            "noise_rate_hz": 0.0,
            "teeth_spacing_mhz": 6.58,
            "channel_bandwidth_ghz": 4.0,
            "channels": ...,
        },
    )
    channel_specs = _require(data, "memory", "channels")
    if len(channel_specs) != 5:
        raise ConfigError("memory.channels: exactly five channels required")
    channels = []
    for i, (spec, off) in enumerate(zip(channel_specs, CHANNEL_OFFSETS_GHZ)):
        ch_kwargs = _take(
            spec,
            f"memory.channels[{i}]",
            {"d1": ..., "finesse": 2.0, "d0": 1.7},
        )
        try:
            channels.append(
                AfcChannel(
                    center_wavelength_nm=wavelength_for_offset(off, reference_nm),
                    teeth_spacing_mhz=kwargs["teeth_spacing_mhz"],
                    bandwidth_ghz=kwargs["channel_bandwidth_ghz"],
                    d1=_require(spec, f"memory.channels[{i}]", "d1"),
                    finesse=ch_kwargs.get("finesse", 2.0),
                    d0=ch_kwargs.get("d0", 1.7),
                )
            )
        except ValueError as err:
            raise ConfigError(f"memory.channels[{i}]: {err}") from err
    try:
        return MemoryBank(
            channels=tuple(channels),
            channel_spacing_ghz=kwargs["channel_spacing_ghz"],
            transmission_efficiency=kwargs["transmission_efficiency"],
            noise_rate_hz=kwargs["noise_rate_hz"],
            reference_wavelength_nm=reference_nm,
        )
    except ValueError as err:
        raise ConfigError(f"memory: {err}") from err


def _build_umzi(data: dict, path: str) -> UmziConfig:
    kwargs = _take(data, path, {"arm_delay_ns": 1.25, "splitting_ratio": 0.5})
    try:
        return UmziConfig(**kwargs)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}") from err


def _simple(data: dict, path: str, cls, defaults: dict):
    kwargs = _take(data, path, defaults)
    try:
        return cls(**kwargs)
    except (ValueError, ConfigError) as err:
        raise ConfigError(f"{path}: {err}") from err


def config_from_dict(raw: dict) -> ExperimentConfig:
    top_known = {
        "source": {},
        "memory": ...,
        "analyzers": {},
        "detectors": {},
        "coincidence": {},
        "duty_cycle": {},
        "filters": {},
        "desk_scale": {},
        "seed": 0,
        "run_duration_s": 60.0,
    }
    top = _take(raw, "<root>", top_known)
    source = _build_source(top.get("source", {}))
    bank = _build_bank(_require(raw, "<root>", "memory"), source.signal_center_wavelength_nm)
    analyzers = top.get("analyzers", {})
    extra = set(analyzers) - {"idler", "signal"}
    if extra:
        raise ConfigError(f"analyzers: unknown key(s) {sorted(extra)}")
    idler = _build_umzi(analyzers.get("idler", {}), "analyzers.idler")
    signal = _build_umzi(analyzers.get("signal", {}), "analyzers.signal")
    detectors = _simple(
        top.get("detectors", {}),
        "detectors",
        DetectorConfig,
        {"efficiency": 0.70, "dark_count_rate_hz": 10.0, "jitter_sigma_ps": 40.0},
    )
    coincidence = _simple(
        top.get("coincidence", {}),
        "coincidence",
        CoincidenceConfig,
        {"window_ps": 600.0, "histogram_bin_ps": 100.0},
    )
    duty = _simple(
        top.get("duty_cycle", {}),
        "duty_cycle",
        DutyCycle,
        {"prepare_ms": 200.0, "wait_ms": 20.0, "measure_ms": 280.0, "period_ms": 500.0},
    )
    filters = _simple(
        top.get("filters", {}),
        "filters",
        Filters,
        {"signal_bandwidth_ghz": 4.0, "idler_bandwidth_ghz": 6.2},
    )
    desk = _simple(
        top.get("desk_scale", {}),
        "desk_scale",
        DeskScale,
        {
            "efficiency_boost": 100.0,
            "chsh_cycles_per_setting": 10_000_000,
            "fringe_points": 13,
            "fringe_cycles_per_point": 2_000_000,
            "tomography_cycles_per_setting": 5_000_000,
            "g2_cycles": 6_000_000,
            "mc_trials": 100,
        },
    )
    try:
        return ExperimentConfig(
            source=source,
            bank=bank,
            idler_analyzer=idler,
            signal_analyzer=signal,
            detectors=detectors,
            coincidence=coincidence,
            duty_cycle=duty,
            filters=filters,
            desk_scale=desk,
            seed=int(top.get("seed", 0)),
            run_duration_s=float(top.get("run_duration_s", 60.0)),
        )
    except ValueError as err:
        raise ConfigError(str(err)) from err


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON ({err})") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return config_from_dict(raw)


def reference_calibration_config() -> ExperimentConfig:
    """The shipped calibrated configuration (channel-1 anchored defaults)."""
    path = resources.files("afcsim").joinpath("data", "reference_calibration.json")
    return load_config(str(path))
