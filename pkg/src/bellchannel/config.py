"""Run configuration: an INI-style file read with :mod:`configparser`.

Grammar: ``[section]`` headers followed by ``key = value`` lines; ``#`` or
``;`` start comments; numbers are decimal (``1e-6`` allowed); booleans are
``true``/``false``; lists are comma separated. Every key is optional and
falls back to the defaults documented in the README.

Sections and keys::

    [run]        seed, threads
    [detectors]  mode (pnr | onoff), eta, noise, and optional per-detector
                 overrides eta_ta, noise_ta, eta_ra, ... eta_rb, noise_rb
    [pdtc]       kind (dirac | lognormal | empirical), eta_a, eta_b,
                 theta_bar, sigma, correlated, samples_path
    [source]     kind (bell | pdc), phi, tanh_chi
    [sweep]      parameter, start, stop, points, scale (linear | log)
    [probe]      eta_c, mean_counts, alpha_sq, alpha_a_sq, alpha_b_sq, shots, max_order
    [oracle]     bell_tuples, pdc_tuples, n_max, perturbation
    [fig2] .. [fig5]  grid and curve overrides (see :mod:`figures`)
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .channel import Dirac, Empirical, LogNormal, Pdtc, load_samples
from .detectors import DetectorBank, DetectorMode, DetectorParams
from .estimation import ProbeConfig

__all__ = ["RunConfig", "load_config", "ConfigError"]

EXPERIMENTS = ("fig2", "fig3", "fig4", "fig5", "oracle-check", "estimate", "sweep")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                     interpolation=None)


@dataclass
class RunConfig:
    """Parsed configuration plus run-level settings from the command line."""

    parser: configparser.ConfigParser = field(default_factory=_parser)
    experiment: str = "fig2"
    out: Path = Path("out")
    seed: int = 0
    threads: int = 1
    base_dir: Path = Path(".")

    # typed accessors ---------------------------------------------------

    def get_float(self, section: str, key: str, default: float) -> float:
        try:
            return self.parser.getfloat(section, key, fallback=default)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None

    def get_int(self, section: str, key: str, default: int) -> int:
        try:
            return self.parser.getint(section, key, fallback=default)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None

    def get_bool(self, section: str, key: str, default: bool) -> bool:
        try:
            return self.parser.getboolean(section, key, fallback=default)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None

    def get_str(self, section: str, key: str, default: str) -> str:
        return self.parser.get(section, key, fallback=default).strip()

    def get_floats(self, section: str, key: str, default) -> list[float]:
        raw = self.parser.get(section, key, fallback=None)
        if raw is None:
            return list(default)
        try:
            return [float(x) for x in raw.split(",") if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None

    # domain objects ----------------------------------------------------

    def detectors(self, default_eta: float = 0.25, default_noise: float = 1e-6,
                  default_mode: str = "pnr") -> DetectorBank:
        sec = "detectors"
        eta = self.get_float(sec, "eta", default_eta)
        noise = self.get_float(sec, "noise", default_noise)
        mode = DetectorMode.parse(self.get_str(sec, "mode", default_mode))
        dets = [DetectorParams(self.get_float(sec, f"eta_{n}", eta),
                               self.get_float(sec, f"noise_{n}", noise))
                for n in ("ta", "ra", "tb", "rb")]
        return DetectorBank(*dets, mode=mode)

    def pdtc(self) -> Pdtc:
        sec = "pdtc"
        kind = self.get_str(sec, "kind", "lognormal").lower()
        if kind == "dirac":
            return Dirac(self.get_float(sec, "eta_a", 1.0), self.get_float(sec, "eta_b", 1.0))
        if kind == "lognormal":
            return LogNormal(self.get_float(sec, "theta_bar", 7.7), self.get_float(sec, "sigma", 1.0),
                             self.get_bool(sec, "correlated", True))
        if kind == "empirical":
            path = self.get_str(sec, "samples_path", "")
            if not path:
                raise ConfigError("[pdtc] samples_path is required for kind = empirical")
            path = Path(path)
            if not path.is_absolute():
                path = self.base_dir / path
            try:
                return load_samples(path)
            except OSError as exc:
                raise ConfigError(f"{path}: {exc.strerror or exc}") from None
        raise ConfigError(f"[pdtc] kind must be dirac, lognormal or empirical, not {kind!r}")

    def probe(self, default_alpha_sq: float | None = None) -> ProbeConfig:
        sec = "probe"
        alpha = self.get_float(sec, "alpha_sq", default_alpha_sq if default_alpha_sq is not None else 1e5)
        return ProbeConfig(self.get_float(sec, "alpha_a_sq", alpha), self.get_float(sec, "alpha_b_sq", alpha),
                           self.get_float(sec, "eta_c", 0.25), self.get_int(sec, "shots", 1_000_000),
                           self.seed)

    @property
    def phi(self) -> float:
        return self.get_float("source", "phi", math.pi)


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    """Read ``path`` (or start empty) and apply keyword overrides such as ``seed``."""
    parser = _parser()
    base = Path(".")
    if path is not None:
        path = Path(path)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror or exc}") from None
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.parent
    cfg = RunConfig(parser=parser, base_dir=base)
    cfg.seed = cfg.get_int("run", "seed", 0)
    cfg.threads = cfg.get_int("run", "threads", 1)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}")
    if cfg.threads < 1:
        raise ConfigError("threads must be at least 1")
    return cfg
