"""Run configuration: a JSON document with a fixed schema.

Every section is validated before any computation starts; unknown keys and
out-of-range values raise :class:`ConfigError`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .physics import DeviceParams, IntensitySet, Observables
from .turbulence import ChannelParams, JointPdtc

MODELS = ("simplified", "integration", "observable")
DOMAIN_KINDS = ("full", "boundary", "joint", "square")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    eta_at: float = 0.0
    eta_bt: float = 0.0

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class SweepSpec:
    distances_km: tuple[float, ...]
    attenuation_db_per_km: float = 0.2
    sigma_a: float = 0.0
    sigma_b: float = 0.0

    def transmittance(self, distance_km: float) -> float:
        """Per-arm transmittance; both arms span ``distance_km``."""
        return 10.0 ** (-self.attenuation_db_per_km * distance_km / 10.0)

    def loss_db(self, distance_km: float) -> float:
        """Total loss of the two arms."""
        return 2.0 * self.attenuation_db_per_km * distance_km

    def joint(self, distance_km: float) -> JointPdtc:
        eta = self.transmittance(distance_km)
        return JointPdtc(ChannelParams(eta, self.sigma_a), ChannelParams(eta, self.sigma_b))


@dataclass(frozen=True)
class McSpec:
    n: int = 1_000_000
    seed: int = 1


@dataclass(frozen=True)
class RunConfig:
    device: DeviceParams
    alice: IntensitySet
    bob: IntensitySet
    channels: JointPdtc | None = None
    sweep: SweepSpec | None = None
    resolution: int = 192
    eta_min: float = 1e-4
    models: tuple[str, ...] = MODELS
    domains: tuple[DomainSpec, ...] = (DomainSpec("full"),)
    mc: McSpec = field(default_factory=McSpec)
    observables: Observables | None = None


def _section(raw, name: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object")
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(raw)
    if missing:
        raise ConfigError(f"{name}: missing keys {sorted(missing)}")
    return raw


def _number(raw: dict, key: str, where: str, default=None) -> float:
    val = raw.get(key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"{where}.{key}: expected a finite number")
    return float(val)


def _build(cls, where: str, **kwargs):
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _device(raw) -> DeviceParams:
    sec = _section(raw, "device", {"y0", "eta_d", "e_d", "f_e"}, {"y0", "eta_d", "e_d", "f_e"})
    return _build(DeviceParams, "device", **{k: _number(sec, k, "device") for k in sec})


def _intensity(raw, where: str) -> IntensitySet:
    keys = {"s", "p_s", "mu", "nu", "omega"}
    sec = _section(raw, where, keys, keys - {"omega"})
    return _build(IntensitySet, where, **{k: _number(sec, k, where) for k in sec})


def _channel(raw, where: str) -> ChannelParams:
    sec = _section(raw, where, {"eta0", "sigma"}, {"eta0", "sigma"})
    return _build(ChannelParams, where, eta0=_number(sec, "eta0", where), sigma=_number(sec, "sigma", where))


def _channels(raw) -> tuple[JointPdtc | None, SweepSpec | None]:
    sec = _section(raw, "channels", {"alice", "bob", "sweep"})
    if "sweep" in sec:
        if "alice" in sec or "bob" in sec:
            raise ConfigError("channels: give either alice/bob or sweep, not both")
        sw = _section(sec["sweep"], "channels.sweep",
                      {"distances_km", "attenuation_db_per_km", "sigma_a", "sigma_b"}, {"distances_km"})
        dist = sw["distances_km"]
        if not isinstance(dist, list) or not dist:
            raise ConfigError("channels.sweep.distances_km: expected a non-empty list")
        values = []
        for d in dist:
            if isinstance(d, bool) or not isinstance(d, (int, float)) or not (math.isfinite(d) and d >= 0):
                raise ConfigError("channels.sweep.distances_km: entries must be finite and >= 0")
            values.append(float(d))
        spec = SweepSpec(
            tuple(sorted(set(values))),
            _number(sw, "attenuation_db_per_km", "channels.sweep", 0.2),
            _number(sw, "sigma_a", "channels.sweep", 0.0),
            _number(sw, "sigma_b", "channels.sweep", 0.0),
        )
        if spec.attenuation_db_per_km < 0 or spec.sigma_a < 0 or spec.sigma_b < 0:
            raise ConfigError("channels.sweep: attenuation and sigmas must be >= 0")
        return None, spec
    if set(sec) != {"alice", "bob"}:
        raise ConfigError("channels: need both alice and bob")
    return JointPdtc(_channel(sec["alice"], "channels.alice"), _channel(sec["bob"], "channels.bob")), None


def _domains(raw) -> tuple[DomainSpec, ...]:
    items = raw if isinstance(raw, list) else [raw]
    out = []
    for item in items:
        if isinstance(item, str):
            if item not in DOMAIN_KINDS or item == "square":
                raise ConfigError(f"domain: unknown kind {item!r}")
            out.append(DomainSpec(item))
            continue
        sec = _section(item, "domain", {"square"}, {"square"})
        sq = _section(sec["square"], "domain.square", {"eta_at", "eta_bt"}, {"eta_at", "eta_bt"})
        a, b = _number(sq, "eta_at", "domain.square"), _number(sq, "eta_bt", "domain.square")
        if not (0 <= a < 1 and 0 <= b < 1):
            raise ConfigError("domain.square: thresholds must lie in [0, 1)")
        out.append(DomainSpec("square", a, b))
    if not out:
        raise ConfigError("domain: expected at least one entry")
    return tuple(out)


def _observables(raw) -> Observables:
    import numpy as np

    sec = _section(raw, "observables", {"qx", "tx", "qz", "tz"}, {"qx", "tx", "qz", "tz"})
    try:
        qx = np.array(sec["qx"], dtype=float)
        tx = np.array(sec["tx"], dtype=float)
        qz = float(sec["qz"])
        tz = float(sec["tz"])
    except (TypeError, ValueError):
        raise ConfigError("observables: entries must be numbers") from None
    if qx.shape != (3, 3) or tx.shape != (3, 3):
        raise ConfigError("observables: qx and tx must be 3x3")
    obs = Observables(qx, tx, np.asarray(qz), np.asarray(tz))
    try:
        obs.check()
    except ValueError as exc:
        raise ConfigError(f"observables: {exc}") from None
    return obs


def parse_config(raw: dict) -> RunConfig:
    top = _section(raw, "config",
                   {"device", "intensities", "channels", "grid", "models", "domain", "mc", "observables"},
                   {"device", "intensities"})
    device = _device(top["device"])
    ints = _section(top["intensities"], "intensities", {"alice", "bob"}, {"alice"})
    alice = _intensity(ints["alice"], "intensities.alice")
    bob = _intensity(ints["bob"], "intensities.bob") if "bob" in ints else alice

    kwargs = {}
    if "channels" in top:
        kwargs["channels"], kwargs["sweep"] = _channels(top["channels"])
    if "grid" in top:
        g = _section(top["grid"], "grid", {"resolution", "eta_min"})
        res = g.get("resolution", 192)
        if isinstance(res, bool) or not isinstance(res, int) or res < 64:
            raise ConfigError("grid.resolution: expected an integer >= 64")
        eta_min = _number(g, "eta_min", "grid", 1e-4)
        if not (0 < eta_min < 1):
            raise ConfigError("grid.eta_min: must lie in (0, 1)")
        kwargs["resolution"], kwargs["eta_min"] = res, eta_min
    if "models" in top:
        models = top["models"]
        if not isinstance(models, list) or not models or any(m not in MODELS for m in models):
            raise ConfigError(f"models: expected a non-empty subset of {list(MODELS)}")
        kwargs["models"] = tuple(m for m in MODELS if m in models)
    if "domain" in top:
        kwargs["domains"] = _domains(top["domain"])
    if "mc" in top:
        mc = _section(top["mc"], "mc", {"n", "seed"})
        n, seed = mc.get("n", 1_000_000), mc.get("seed", 1)
        if isinstance(n, bool) or not isinstance(n, int) or n < 100:
            raise ConfigError("mc.n: expected an integer >= 100")
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("mc.seed: expected a non-negative integer")
        kwargs["mc"] = McSpec(n, seed)
    if "observables" in top:
        kwargs["observables"] = _observables(top["observables"])
    return RunConfig(device=device, alice=alice, bob=bob, **kwargs)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(raw)
