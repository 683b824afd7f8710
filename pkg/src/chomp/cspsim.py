"""Monte Carlo diagnosis of chewing-side preference (CSP) under classifier error."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

REFERENCE_DURATIONS = (1.0, 5.0, 15.0)
REFERENCE_MINIMAL = {0.60: 15.0, 0.65: 5.0, 0.70: 1.0}  # minutes to CSP detection at e = 4.6 %
WINDOWS_PER_MINUTE = 59  # 2 s windows at 1 s stride over 60 s
HIST_BINS = 50


@dataclass(frozen=True)
class SimConfig:
    mus: tuple[float, ...] = (0.60, 0.65, 0.70)
    sigma: float = 0.05
    error_rate: float = 0.046
    durations: tuple[float, ...] = REFERENCE_DURATIONS
    n_draws: int = 10_000
    windows_per_minute: int = WINDOWS_PER_MINUTE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mus", tuple(float(m) for m in self.mus))
        object.__setattr__(self, "durations", tuple(float(d) for d in self.durations))
        if not 0.0 <= self.error_rate <= 0.5:
            raise ConfigError("error_rate must lie in [0, 0.5]")
        if self.sigma < 0 or self.n_draws < 1 or self.windows_per_minute < 1:
            raise ConfigError("sigma >= 0, n_draws >= 1 and windows_per_minute >= 1 are required")
        if any(not 0.0 <= m <= 1.0 for m in self.mus):
            raise ConfigError("every mu must lie in [0, 1]")
        if any(d <= 0 for d in self.durations):
            raise ConfigError("durations must be positive")


def n_windows(cfg: SimConfig, duration_min: float) -> int:
    return max(1, int(round(cfg.windows_per_minute * duration_min)))


def simulate_meal(cfg: SimConfig, mu: float, duration_min: float, rng, size: int | None = None):
    """Observed fraction of windows classified Left for one (or ``size``) simulated meals."""
    if duration_min <= 0:
        raise ConfigError("duration must be positive")
    n = n_windows(cfg, duration_min)
    p = np.clip(rng.normal(mu, cfg.sigma, size), 0.0, 1.0)
    # a window reads Left if it is Left and kept, or Right and flipped
    q = p * (1 - cfg.error_rate) + (1 - p) * cfg.error_rate
    return rng.binomial(n, q) / n


@dataclass(frozen=True)
class SimCell:
    mu: float
    duration: float
    mean: float
    ci_low: float
    ci_high: float
    excludes_50: bool
    hist_counts: tuple[int, ...]

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "duration_min": self.duration,
            "mean": self.mean,
            "ci90": [self.ci_low, self.ci_high],
            "excludes_50": self.excludes_50,
            "hist_counts": list(self.hist_counts),
        }


@dataclass(frozen=True)
class SimReport:
    config: SimConfig
    cells: tuple[SimCell, ...]
    hist_edges: tuple[float, ...] = field(default=tuple(np.linspace(0.0, 1.0, HIST_BINS + 1)))

    def cell(self, mu: float, duration: float) -> SimCell:
        for c in self.cells:
            if np.isclose(c.mu, mu) and np.isclose(c.duration, duration):
                return c
        raise KeyError((mu, duration))

    def as_dict(self) -> dict:
        c = self.config
        return {
            "config": {"mus": list(c.mus), "sigma": c.sigma, "error_rate": c.error_rate,
                       "durations": list(c.durations), "n_draws": c.n_draws,
                       "windows_per_minute": c.windows_per_minute, "seed": c.seed},
            "hist_edges": [float(e) for e in self.hist_edges],
            "cells": [x.as_dict() for x in self.cells],
        }


def _excludes_half(mu: float, lo: float, hi: float) -> bool:
    if mu > 0.5:
        return lo > 0.5
    if mu < 0.5:
        return hi < 0.5
    return False


def monte_carlo(cfg: SimConfig) -> SimReport:
    """N meals per (mu, duration); each cell has its own seeded stream, so cells are order-independent."""
    edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
    cells = []
    for i, mu in enumerate(cfg.mus):
        for j, d in enumerate(cfg.durations):
            rng = np.random.default_rng([cfg.seed, i, j])
            obs = simulate_meal(cfg, mu, d, rng, cfg.n_draws)
            lo, hi = np.percentile(obs, [5, 95])
            counts, _ = np.histogram(obs, bins=edges)
            cells.append(SimCell(mu, d, float(obs.mean()), float(lo), float(hi),
                                 bool(_excludes_half(mu, lo, hi)), tuple(int(v) for v in counts)))
    return SimReport(cfg, tuple(cells), tuple(float(e) for e in edges))


@dataclass(frozen=True)
class Diagnosis:
    verdicts: dict  # (mu, duration) -> bool
    minimal_duration: dict  # mu -> minutes or None
    notes: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "verdicts": [{"mu": m, "duration_min": d, "csp_detected": v} for (m, d), v in self.verdicts.items()],
            "minimal_duration": {f"{m:.2f}": v for m, v in self.minimal_duration.items()},
            "notes": list(self.notes),
        }


def diagnose(report: SimReport) -> Diagnosis:
    """CSP detected iff the 90 % interval excludes 50 %; reports the shortest such duration per mu."""
    verdicts = {(c.mu, c.duration): c.excludes_50 for c in report.cells}
    minimal = {}
    for mu in report.config.mus:
        hits = sorted(d for (m, d), v in verdicts.items() if m == mu and v)
        minimal[mu] = hits[0] if hits else None
    notes = []
    cfg = report.config
    if np.isclose(cfg.error_rate, 0.046):
        for mu, expected in REFERENCE_MINIMAL.items():
            if any(np.isclose(mu, m) for m in cfg.mus):
                got = minimal[next(m for m in cfg.mus if np.isclose(m, mu))]
                if got != expected:
                    notes.append(
                        f"deviation: mu={mu:.2f} first excludes 50% at {got} min, reference {expected} min "
                        f"(per-window unit, {cfg.windows_per_minute} windows/min)"
                    )
    if tuple(cfg.durations) != REFERENCE_DURATIONS:
        notes.append(f"durations {list(cfg.durations)} differ from the reference grid {list(REFERENCE_DURATIONS)}")
    return Diagnosis(verdicts, minimal, tuple(notes))
