"""Runtime configuration: one table of knobs, env overrides, range checks.

Every knob has a documented range and shows up as a CLI flag and an
MMGP_* environment variable; a doc test keeps flags, env names, and this
table in sync.  Validation happens once, at startup.
"""

import os
from dataclasses import dataclass

from .errors import InvalidInputError
from .overlay import OverlayConfig
from .transfer import TransferConfig


@dataclass(frozen=True)
class ConfigField:
    name: str
    type: type
    default: object
    lo: float = None
    hi: float = None
    help: str = ""

    @property
    def env_var(self) -> str:
        return "MMGP_" + self.name.upper()

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")


CONFIG_FIELDS = (
    # codec
    ConfigField("gop_size", int, 2, 1, 255, "frames per temporal group"),
    ConfigField("levels", int, 3, 1, 12, "wavelet decomposition depth"),
    ConfigField("qstep", float, 8.0, 2.0 ** -20, 2.0 ** 20,
                "quantizer step for lossy mode"),
    # transfer
    ConfigField("mss", int, 1400, 16, 65000, "max DATA payload bytes"),
    ConfigField("ack_interval_ms", float, 10.0, 0.1, 60000.0,
                "cumulative-ACK cadence and sender pacing tick"),
    ConfigField("rate_increase", float, 1.125, 1.0, 16.0,
                "rate multiplier per NAK-free interval"),
    ConfigField("rate_decrease", float, 0.875, 0.01, 1.0,
                "rate multiplier per NAK event"),
    ConfigField("rate_floor", float, 1.0, 1.0, 1e6,
                "minimum packets per interval"),
    ConfigField("rate_ceiling", float, 4096.0, 1.0, 1e9,
                "maximum packets per interval"),
    ConfigField("initial_rate", float, 16.0, 1.0, 1e9,
                "starting packets per interval"),
    ConfigField("handshake_retries", int, 5, 1, 100,
                "handshake attempts before connect-failed"),
    ConfigField("handshake_timeout_ms", float, 40.0, 1.0, 60000.0,
                "wait between handshake attempts"),
    ConfigField("recovery_intervals", int, 4, 1, 1000,
                "stalled intervals before a full re-queue sweep"),
    ConfigField("dead_timeout_ms", float, 30000.0, 10.0, 3600000.0,
                "peer silence before a transfer aborts"),
    # overlay
    ConfigField("max_hops", int, 8, 1, 64, "query forwarding budget"),
    ConfigField("ping_subset", int, 3, 1, 64,
                "peers pinged per maintenance tick"),
    ConfigField("purge_threshold", int, 3, 1, 64,
                "consecutive missed pings before purge"),
    ConfigField("ad_ttl_ms", float, 60000.0, 10.0, 86400000.0,
                "advertisement lifetime"),
    ConfigField("maintenance_interval_ms", float, 1000.0, 1.0, 3600000.0,
                "super-node maintenance tick period"),
    ConfigField("publish_timeout_ms", float, 500.0, 1.0, 60000.0,
                "wait per publish attempt"),
    ConfigField("publish_retries", int, 3, 1, 100,
                "publish attempts before discovery-timeout"),
    ConfigField("query_timeout_ms", float, 2000.0, 1.0, 600000.0,
                "wait before a query resolves not-found"),
    ConfigField("psk", str, "mmgp-default-psk", None, None,
                "pre-shared key for the transfer handshake"),
)

_BY_NAME = {f.name: f for f in CONFIG_FIELDS}


class Config:
    """Effective settings assembled from defaults, environment, overrides."""

    def __init__(self, overrides: dict = None, env: dict = None):
        env = os.environ if env is None else env
        overrides = overrides or {}
        for spec in CONFIG_FIELDS:
            value = spec.default
            if spec.env_var in env:
                value = self._parse(spec, env[spec.env_var])
            if overrides.get(spec.name) is not None:
                value = overrides[spec.name]
            self._check(spec, value)
            setattr(self, spec.name, value)

    @staticmethod
    def _parse(spec: ConfigField, text: str):
        try:
            return spec.type(text)
        except ValueError as exc:
            raise InvalidInputError(
                f"{spec.env_var}: cannot parse {text!r} as {spec.type.__name__}"
            ) from exc

    @staticmethod
    def _check(spec: ConfigField, value):
        if spec.type is str:
            if not value:
                raise InvalidInputError(f"{spec.name} must be non-empty")
            return
        if not isinstance(value, (int, float)):
            raise InvalidInputError(f"{spec.name} must be numeric")
        if spec.lo is not None and not spec.lo <= value <= spec.hi:
            raise InvalidInputError(
                f"{spec.name}={value} outside [{spec.lo}, {spec.hi}]")

    def overlay_config(self) -> OverlayConfig:
        return OverlayConfig(
            max_hops=self.max_hops,
            ping_subset=self.ping_subset,
            purge_threshold=self.purge_threshold,
            ad_ttl_us=int(self.ad_ttl_ms * 1000),
            maintenance_interval_us=int(self.maintenance_interval_ms * 1000),
            publish_timeout_us=int(self.publish_timeout_ms * 1000),
            publish_retries=self.publish_retries,
            query_timeout_us=int(self.query_timeout_ms * 1000))

    def transfer_config(self) -> TransferConfig:
        return TransferConfig(
            mss=self.mss,
            ack_interval_us=int(self.ack_interval_ms * 1000),
            rate_increase=self.rate_increase,
            rate_decrease=self.rate_decrease,
            rate_floor=self.rate_floor,
            rate_ceiling=self.rate_ceiling,
            initial_rate=self.initial_rate,
            psk=self.psk,
            handshake_timeout_us=int(self.handshake_timeout_ms * 1000),
            handshake_retries=self.handshake_retries,
            recovery_intervals=self.recovery_intervals,
            dead_timeout_us=int(self.dead_timeout_ms * 1000))
