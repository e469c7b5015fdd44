"""Command-line front end: ``mdiprts {rate-map,thresholds,sweep,validate}``.

Every command reads one JSON config and writes CSV files whose bytes depend
only on that config.  Exit codes: 0 success, 1 computation failure (or a
failed validation check), 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path


from .config import ConfigError, DomainSpec, RunConfig, load_config
from .domains import BoundaryDomain, FullDomain, SquareDomain, region_probability
from .errors import PrtsError
from .keyrate import (
    GridSpec,
    RateMap,
    model_integration,
    model_observable,
    model_simplified,
    rate_from_observables,
    rate_map,
)
from .physics import true_single_photon
from .thresholds import ThresholdSet, build_joint_domain, find_thresholds
from .turbulence import JointPdtc
from . import validation as mc

SCHEMA = "# schema=1"
ORACLE_POINTS = ((0.1, 0.1), (0.5, 0.05))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


class _Context:
    """Lazily computed shared artifacts for one run."""

    def __init__(self, cfg: RunConfig, say):
        self.cfg = cfg
        self.say = say
        self._map = None
        self._ts = None

    @property
    def rate_map(self) -> RateMap:
        if self._map is None:
            cfg = self.cfg
            self.say(f"computing {cfg.resolution}x{cfg.resolution} rate map")
            self._map = rate_map(cfg.device, cfg.alice, cfg.bob, GridSpec(cfg.resolution, cfg.eta_min))
        return self._map

    @property
    def thresholds(self) -> ThresholdSet:
        if self._ts is None:
            self._ts = find_thresholds(self.rate_map)
        return self._ts

    def domain(self, spec: DomainSpec):
        if spec.kind == "full":
            return FullDomain()
        if spec.kind == "boundary":
            return BoundaryDomain(self.rate_map)
        if spec.kind == "joint":
            return build_joint_domain(self.thresholds)
        return SquareDomain(spec.eta_at, spec.eta_bt)

    def model(self, name: str, joint: JointPdtc, spec: DomainSpec) -> float:
        cfg = self.cfg
        dom = self.domain(spec)
        if name == "simplified":
            return model_simplified(joint, dom, cfg.device, cfg.alice, cfg.bob)
        if name == "integration":
            # the clamped map already vanishes outside the boundary domain
            restrict = None if spec.kind in ("full", "boundary") else dom
            return model_integration(joint, cfg.device, cfg.alice, cfg.bob, rate_map=self.rate_map, domain=restrict)
        return model_observable(joint, dom, cfg.device, cfg.alice, cfg.bob)


def cmd_rate_map(ctx: _Context, out: Path) -> int:
    m = ctx.rate_map
    rows = ((a, b, m.values[i, j]) for i, a in enumerate(m.grid_a) for j, b in enumerate(m.grid_b))
    write_csv(out / "rate_map.csv", ["eta_a", "eta_b", "rate"], rows)
    ctx.say(f"wrote {out / 'rate_map.csv'}")
    return 0


def cmd_thresholds(ctx: _Context, out: Path) -> int:
    ts = ctx.thresholds
    write_csv(out / "boundary.csv", ["eta_a", "eta_b"], ts.boundary.tolist())
    write_csv(out / "thresholds.csv", ["eta_a_critical", "eta_b_critical", "x_min", "x_max"], [ts.as_row()])
    ctx.say(
        f"eta_a_critical={ts.eta_a_critical:.6g} eta_b_critical={ts.eta_b_critical:.6g} "
        f"x_min={ts.x_min:.6g} x_max={ts.x_max:.6g}"
    )
    return 0


def cmd_sweep(ctx: _Context, out: Path) -> int:
    cfg = ctx.cfg
    if cfg.sweep is None:
        raise ConfigError("sweep needs channels.sweep")
    rows = []
    for d in cfg.sweep.distances_km:
        joint = cfg.sweep.joint(d)
        for name in cfg.models:
            for spec in cfg.domains:
                rows.append((d, cfg.sweep.loss_db(d), name, spec.label, ctx.model(name, joint, spec)))
        ctx.say(f"distance {d:g} km done")
    write_csv(out / "sweep.csv", ["distance_km", "loss_db", "model", "domain", "rate"], rows)
    ctx.say(f"wrote {out / 'sweep.csv'}")
    return 0


def _check(lines: list, name: str, est: mc.McEstimate, ref: float) -> bool:
    z = est.z_score(ref)
    ok = bool(z <= 3.0)
    lines.append(f"{'PASS' if ok else 'FAIL'} {name}: mc={est.value:.6e} ref={ref:.6e} z={z:.2f}")
    return ok


def _validation_channel(cfg: RunConfig) -> JointPdtc | None:
    if cfg.channels is not None:
        return cfg.channels
    if cfg.sweep is not None:
        return cfg.sweep.joint(cfg.sweep.distances_km[len(cfg.sweep.distances_km) // 2])
    return None


def cmd_validate(ctx: _Context, out: Path) -> int:
    cfg = ctx.cfg
    n, seed = cfg.mc.n, cfg.mc.seed
    lines = [f"seed={seed} n={n}"]
    ok = True

    if cfg.observables is not None:
        r = rate_from_observables(cfg.device, cfg.alice, cfg.bob, cfg.observables)
        lines.append(f"PASS configured observables are consistent: rate={r:.6e}")

    # device physics is checked at fixed transmittance pairs with ample counts
    for k, (ea, eb) in enumerate(ORACLE_POINTS):
        sims = mc.mc_observables(cfg.device, cfg.alice, cfg.bob, ea, eb, n, seed + k)
        ref = mc.analytic_lookup(cfg.device, cfg.alice, cfg.bob, ea, eb)
        for key in sorted(sims):
            basis, i, j, kind = key
            ok &= _check(lines, f"{kind}{basis}[{i}][{j}] at ({ea:g}, {eb:g})", sims[key], ref[key])
        y_mc, e_mc = mc.mc_single_photon(cfg.device, ea, eb, n, seed + 100 + k)
        y11, e11 = true_single_photon(cfg.device, ea, eb)
        ok &= _check(lines, f"Y11 at ({ea:g}, {eb:g})", y_mc, y11)
        ok &= _check(lines, f"e11 at ({ea:g}, {eb:g})", e_mc, e11)

    joint = _validation_channel(cfg)
    if joint is not None and not (joint.alice.is_static and joint.bob.is_static):
        for spec in cfg.domains:
            dom = ctx.domain(spec)
            p = region_probability(joint, dom)
            est = mc.mc_region_probability(joint, dom, n, seed + 200)
            ok &= _check(lines, f"P({spec.label})", est, p)
            if "observable" in cfg.models:
                r = model_observable(joint, dom, cfg.device, cfg.alice, cfg.bob)
                est = mc.mc_observable_model(joint, dom, cfg.device, cfg.alice, cfg.bob, n, seed + 300)
                ok &= _check(lines, f"observable({spec.label})", est, r)

    lines.append("ALL PASS" if ok else "SOME CHECKS FAILED")
    text = "\n".join(lines) + "\n"
    (out / "validate.txt").write_text(text)
    ctx.say(text.rstrip("\n"), always=True)
    return 0 if ok else 1


COMMANDS = {
    "rate-map": cmd_rate_map,
    "thresholds": cmd_thresholds,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdiprts", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--quiet", action="store_true", help="suppress progress messages")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    def say(msg: str, always: bool = False) -> None:
        if always or not args.quiet:
            print(msg, file=sys.stdout if always else sys.stderr)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](_Context(cfg, say), out)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    except (PrtsError, ArithmeticError, ValueError, OSError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
