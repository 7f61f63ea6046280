"""Experiment configuration and runners behind the command line.

A run is described by an :class:`ExperimentConfig`, which can be read from
an INI-style file with flat sections and then overridden field by field.
Runners return the artefact text (CSV or report) so they can be used without
the command line.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analytic import (
    AnalyticInputs,
    handover_prob_dsm_lower_bound,
    handover_prob_ssm_cor1,
    handover_prob_ssm_thm2,
    lambda1_density,
    nonserving_density,
)
from .montecarlo import (
    SimConfig,
    estimate_handover_curve,
    estimate_handover_curve_moving_ue,
    estimate_nonserving_density,
)
from .quadrature import QuadratureSpec
from .speed_models import SpeedDistribution, from_config

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PRESETS",
    "load_config",
    "parse_quantity",
    "run_handover_experiment",
    "run_density_experiment",
    "run_validation",
    "HANDOVER_HEADER",
    "DENSITY_HEADER",
]

HANDOVER_HEADER = ["t_s", "scenario", "engine", "value", "ci_low", "ci_high", "n_trials", "seed"]
DENSITY_HEADER = ["t_s", "u_x_m", "engine", "density_per_m2", "se"]

LAMBDA_UNITS = {"per_m2": 1.0, "per_km2": 1e-6}
SPEED_UNITS = ("m_s", "km_h")
# Relative gap the two same-speed forms must be certified to, whatever
# quadrature settings are under test.
IDENTITY_CHECK_REL = 1e-6


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _fmt(x) -> str:
    return f"{x:.12e}"


def parse_quantity(text, default_unit: str, units) -> tuple[float, str]:
    """Split ``"45km_h"`` into ``(45.0, "km_h")``; bare numbers take ``default_unit``."""
    text = str(text).strip()
    for unit in sorted(units, key=len, reverse=True):
        if text.endswith(unit):
            number = text[: -len(unit)].strip()
            break
    else:
        number, unit = text, default_unit
    try:
        return float(number), unit
    except ValueError:
        raise ConfigError(f"cannot parse quantity {text!r} (units: {', '.join(units)})") from None


@dataclass
class ExperimentConfig:
    """Every knob of a run, in the units the user wrote them in."""

    scenario: str = "ssm"
    lambda0: float = 1.0
    lambda0_unit: str = "per_km2"
    speed: float = 45.0
    speed_unit: str = "km_h"
    dsm_law: str = "rayleigh_mean"
    t_start: float = 0.0
    t_stop: float = 100.0
    t_step: float = 10.0
    t_list: list | None = None
    engine: str = "both"
    n_trials: int = 100_000
    master_seed: int = 2020
    workers: int = 1
    z: float = 3.0
    rel_tol: float = 1e-7
    abs_tol: float = 1e-10
    max_subdivisions: int = 200
    tail_mass_epsilon: float = 1e-12
    u_star: float = 500.0
    density_times: list = field(default_factory=lambda: [10.0, 20.0, 40.0, 100.0])
    ux_max: float = 3000.0
    ux_step: float = 10.0
    bin_width: float = 10.0
    height: float = 0.0
    output: str | None = None

    def validate(self):
        if self.scenario not in ("ssm", "dsm", "both"):
            raise ConfigError(f"scenario: expected ssm, dsm or both, got {self.scenario!r}")
        if self.engine not in ("analytic", "montecarlo", "both"):
            raise ConfigError(f"engine: expected analytic, montecarlo or both, got {self.engine!r}")
        if self.lambda0_unit not in LAMBDA_UNITS:
            raise ConfigError(f"lambda0_unit: expected one of {sorted(LAMBDA_UNITS)}, got {self.lambda0_unit!r}")
        if not self.lambda0 > 0:
            raise ConfigError(f"lambda0: must be > 0, got {self.lambda0}")
        if self.speed_unit not in SPEED_UNITS:
            raise ConfigError(f"speed_unit: expected one of {SPEED_UNITS}, got {self.speed_unit!r}")
        if not self.speed >= 0:
            raise ConfigError(f"speed: must be >= 0, got {self.speed}")
        if self.dsm_law not in ("rayleigh_mean", "uniform_mean"):
            raise ConfigError(f"dsm_law: expected rayleigh_mean or uniform_mean, got {self.dsm_law!r}")
        if self.n_trials < 1:
            raise ConfigError(f"n_trials: must be >= 1, got {self.n_trials}")
        if self.workers < 1:
            raise ConfigError(f"workers: must be >= 1, got {self.workers}")
        grid = self.t_grid
        if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise ConfigError("t grid: must be non-empty, strictly ascending and >= 0")
        try:
            self.quadrature
        except ValueError as exc:
            raise ConfigError(f"quadrature: {exc}") from None
        if not self.u_star > 0:
            raise ConfigError(f"u_star: must be > 0, got {self.u_star}")
        if not (self.bin_width > 0 and self.ux_step > 0 and self.ux_max > 0):
            raise ConfigError("density grid: bin_width, ux_step and ux_max must be > 0")
        return self

    @property
    def lambda0_per_m2(self) -> float:
        return self.lambda0 * LAMBDA_UNITS[self.lambda0_unit]

    @property
    def speed_m_s(self) -> float:
        return self.speed / 3.6 if self.speed_unit == "km_h" else self.speed

    @property
    def t_grid(self) -> np.ndarray:
        if self.t_list is not None:
            return np.asarray(self.t_list, dtype=float)
        n = int(math.floor((self.t_stop - self.t_start) / self.t_step + 1e-9)) + 1
        return self.t_start + self.t_step * np.arange(max(n, 0))

    @property
    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(self.rel_tol, self.abs_tol, self.max_subdivisions, self.tail_mass_epsilon)

    def speed_law(self, scenario: str) -> SpeedDistribution:
        if scenario == "ssm":
            return from_config("degenerate", self.speed, self.speed_unit)
        return from_config(self.dsm_law, self.speed, self.speed_unit)

    @property
    def scenarios(self) -> list[str]:
        return ["ssm", "dsm"] if self.scenario == "both" else [self.scenario]

    def sim_config(self, scenario: str, t_max: float) -> SimConfig:
        return SimConfig(
            self.lambda0_per_m2, self.speed_law(scenario), max(t_max, 1e-9),
            master_seed=self.master_seed, workers=self.workers, z=self.z,
        )

    def echo(self) -> list[str]:
        """Comment lines recording the fully resolved configuration."""
        lines = [f"# drone_handover {__version__}"]
        for f in dataclasses.fields(self):
            lines.append(f"# {f.name} = {getattr(self, f.name)!r}")
        lines.append(f"# resolved lambda0_per_m2 = {self.lambda0_per_m2!r}")
        lines.append(f"# resolved speed_m_s = {self.speed_m_s!r}")
        lines.append(f"# resolved t_grid_s = {[float(x) for x in self.t_grid]!r}")
        return lines


PRESETS = {
    "fig1": dict(
        scenario="dsm", dsm_law="rayleigh_mean", lambda0=1.0, lambda0_unit="per_km2",
        speed=45.0, speed_unit="km_h", u_star=500.0, density_times=[10.0, 20.0, 40.0, 100.0],
        ux_max=3000.0, ux_step=10.0, bin_width=10.0, engine="both",
    ),
    "fig2": dict(
        scenario="both", dsm_law="rayleigh_mean", lambda0=1.0, lambda0_unit="per_km2",
        speed=45.0, speed_unit="km_h", t_start=0.0, t_stop=100.0, t_step=5.0, t_list=None,
        engine="both",
    ),
}

# Config-file layout: section -> keys, each mapped onto an ExperimentConfig field.
SECTIONS = {
    "network": ["scenario", "lambda0", "lambda0_unit", "height"],
    "speed": ["speed", "speed_unit", "dsm_law"],
    "time": ["t_start", "t_stop", "t_step", "t_list"],
    "run": ["engine", "n_trials", "master_seed", "workers", "z", "output"],
    "quadrature": ["rel_tol", "abs_tol", "max_subdivisions", "tail_mass_epsilon"],
    "density": ["u_star", "density_times", "ux_max", "ux_step", "bin_width"],
}


def _coerce(name: str, raw):
    ftype = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}[name]
    if raw is None:
        return None
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if name in ("t_list", "density_times"):
            if isinstance(raw, str):
                return [float(x) for x in raw.replace(",", " ").split()]
            return [float(x) for x in raw]
        if name == "lambda0" and isinstance(raw, str):
            return parse_quantity(raw, "", LAMBDA_UNITS)
        if name == "speed" and isinstance(raw, str):
            return parse_quantity(raw, "", SPEED_UNITS)
        if "int" in str(ftype):
            return int(raw)
        if "float" in str(ftype):
            return float(raw)
        return raw
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise ConfigError(f"{name}: {exc}") from None
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None


def apply_overrides(cfg: ExperimentConfig, values: dict) -> ExperimentConfig:
    """Set fields from raw (string or typed) values; ``None`` values are skipped."""
    if values.get("t_list") is None and any(values.get(k) is not None for k in ("t_start", "t_stop", "t_step")):
        # An explicit range replaces any inherited list of times.
        cfg.t_list = None
    for name, raw in values.items():
        if raw is None:
            continue
        value = _coerce(name, raw)
        if name in ("lambda0", "speed") and isinstance(value, tuple):
            number, unit = value
            setattr(cfg, name, number)
            if unit:
                setattr(cfg, f"{name}_unit", unit)
        else:
            setattr(cfg, name, value)
    return cfg


def load_config(path=None, preset: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from defaults, an optional preset, a file, then overrides."""
    cfg = ExperimentConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        apply_overrides(cfg, PRESETS[preset])
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in SECTIONS[section]:
                    raise ConfigError(f"{path}: unknown key {key!r} in section [{section}]")
                try:
                    apply_overrides(cfg, {key: raw})
                except ConfigError as exc:
                    raise ConfigError(f"{path} [{section}] {exc}") from None
    if overrides:
        apply_overrides(cfg, overrides)
    return cfg.validate()


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


def _write_csv(header, rows, echo) -> str:
    buf = io.StringIO()
    for line in echo:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _analytic_value(cfg: ExperimentConfig, scenario: str, t: float) -> float:
    quad = cfg.quadrature
    if scenario == "ssm":
        return handover_prob_ssm_thm2(cfg.lambda0_per_m2, cfg.speed_m_s, t, quad)
    return handover_prob_dsm_lower_bound(AnalyticInputs(cfg.lambda0_per_m2, t, cfg.speed_law("dsm"), quad))


def run_handover_experiment(cfg: ExperimentConfig) -> str:
    """Handover probability curves as CSV text."""
    grid = cfg.t_grid
    rows = []
    for scenario in cfg.scenarios:
        if cfg.engine in ("analytic", "both"):
            for t in grid:
                rows.append([_fmt(t), scenario, "analytic", _fmt(_analytic_value(cfg, scenario, float(t))),
                             "", "", "", ""])
        if cfg.engine in ("montecarlo", "both"):
            curve = estimate_handover_curve(cfg.sim_config(scenario, float(grid[-1])), grid, cfg.n_trials)
            for t, p, lo, hi in zip(grid, curve.estimates, curve.ci_low, curve.ci_high):
                rows.append([_fmt(t), scenario, "montecarlo", _fmt(p), _fmt(lo), _fmt(hi),
                             str(cfg.n_trials), str(cfg.master_seed)])
    return _write_csv(HANDOVER_HEADER, rows, cfg.echo())


def run_density_experiment(cfg: ExperimentConfig) -> str:
    """Non-serving drone density profiles as CSV text."""
    law = cfg.speed_law(cfg.scenarios[-1])
    lam = cfg.lambda0_per_m2
    n_points = int(math.floor(cfg.ux_max / cfg.ux_step + 1e-9)) + 1
    ux = cfg.ux_step * np.arange(n_points)
    rows = []
    for t in cfg.density_times:
        if not t > 0:
            raise ConfigError(f"density_times: every time must be > 0, got {t}")
        if cfg.engine in ("analytic", "both"):
            dens = nonserving_density(t, ux, cfg.u_star, AnalyticInputs(lam, t, law, cfg.quadrature))
            rows += [[_fmt(t), _fmt(u), "analytic", _fmt(d), ""] for u, d in zip(ux, np.atleast_1d(dens))]
        if cfg.engine in ("montecarlo", "both"):
            sim = SimConfig(lam, law, t, master_seed=cfg.master_seed, workers=cfg.workers, z=cfg.z)
            prof = estimate_nonserving_density(sim, t, cfg.u_star, cfg.n_trials, cfg.bin_width, cfg.ux_max)
            rows += [
                [_fmt(t), _fmt(c), "montecarlo", _fmt(d), _fmt(se)]
                for c, d, se in zip(prof.bin_centers, prof.densities, prof.standard_errors)
            ]
    return _write_csv(DENSITY_HEADER, rows, cfg.echo())


def run_validation(cfg: ExperimentConfig) -> tuple[bool, str]:
    """Run the built-in cross-checks; returns ``(all_passed, report_text)``."""
    lam = cfg.lambda0_per_m2
    v = cfg.speed_m_s
    quad = cfg.quadrature
    grid = cfg.t_grid[cfg.t_grid > 0]
    if grid.size == 0:
        raise ConfigError("t grid: validation needs at least one positive time")
    lines = [*cfg.echo(), ""]
    results = []

    def record(name, ok, detail):
        results.append(ok)
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}")
        lines.extend(f"    {d}" for d in detail)

    # Lens form vs exclusion-zone form of the same-speed probability.
    detail, ok = [], True
    for t in grid[:: max(1, len(grid) // 3)]:
        a, err_a = handover_prob_ssm_thm2(lam, v, t, quad, return_error=True)
        b, err_b = handover_prob_ssm_cor1(lam, v, t, quad, return_error=True)
        # Agreement must be certified: the gap plus both error estimates.
        rel = (abs(a - b) + err_a + err_b) / max(a, 1e-300)
        ok &= rel <= IDENTITY_CHECK_REL
        detail.append(f"t={t:g} s lens={a:.12g} exclusion_zone={b:.12g} "
                      f"certified_rel_gap={rel:.3e} (limit {IDENTITY_CHECK_REL:g})")
    record("same-speed lens form equals exclusion-zone form", ok, detail)

    ssm = cfg.sim_config("ssm", float(grid[-1]))
    aerial = estimate_handover_curve(ssm, grid, cfg.n_trials)
    detail, ok = [], True
    for t, p, se in zip(grid, aerial.estimates, aerial.standard_errors):
        a = handover_prob_ssm_thm2(lam, v, t, quad)
        lim = max(3 * se, 0.005)
        ok &= abs(a - p) <= lim
        detail.append(f"t={t:g} s analytic={a:.6f} mc={p:.6f} se={se:.2e} |diff|={abs(a - p):.2e} limit={lim:.2e}")
    record("same-speed analytic vs Monte Carlo", ok, detail)

    moving = estimate_handover_curve_moving_ue(ssm, grid, cfg.n_trials)
    detail, ok = [], True
    for t, p, q, s1, s2 in zip(grid, aerial.estimates, moving.estimates, aerial.standard_errors,
                               moving.standard_errors):
        se = math.hypot(s1, s2)
        ok &= abs(p - q) <= 3 * se + 1e-15
        detail.append(f"t={t:g} s aerial={p:.6f} moving_ue={q:.6f} combined_se={se:.2e} |diff|={abs(p - q):.2e}")
    record("moving drones vs moving user (duality)", ok, detail)

    dsm_law = cfg.speed_law("dsm")
    dsm = estimate_handover_curve(cfg.sim_config("dsm", float(grid[-1])), grid, cfg.n_trials)
    detail, ok = [], True
    picks = sorted({0, len(grid) // 2, len(grid) - 1})
    for i in picks:
        t = float(grid[i])
        bound = handover_prob_dsm_lower_bound(AnalyticInputs(lam, t, dsm_law, quad))
        p, se = dsm.estimates[i], dsm.standard_errors[i]
        ok &= bound <= p + 3 * se
        detail.append(f"t={t:g} s bound={bound:.6f} mc={p:.6f} se={se:.2e}")
    record(f"different-speed lower bound ({dsm_law.describe()})", ok, detail)

    t_mid = float(grid[len(grid) // 2])
    inputs = AnalyticInputs(lam, t_mid, dsm_law, quad)
    ux = np.linspace(0.0, 6 * cfg.u_star, 61)
    lam_ns = nonserving_density(t_mid, ux, cfg.u_star, inputs)
    lam_1 = lambda1_density(t_mid, ux, cfg.u_star, inputs)
    worst = float(np.max(np.abs(lam_ns + lam_1 - lam)) / lam)
    record("density split sums to lambda0", worst <= 1e-12,
           [f"t={t_mid:g} s u_star={cfg.u_star:g} m max relative deviation={worst:.3e} over {ux.size} radii"])

    far = nonserving_density(1e6, ux, cfg.u_star, AnalyticInputs(lam, 1e6, dsm_law, quad))
    dev = float(np.max(np.abs(far - lam)) / lam)
    record("homogenisation at large t", dev < 1e-3, [f"t=1e6 s max |lambda - lambda0|/lambda0={dev:.3e}"])

    passed = all(results)
    lines.append("")
    lines.append(f"{sum(results)}/{len(results)} checks passed")
    return passed, "\n".join(lines) + "\n"
