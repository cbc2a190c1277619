"""Two-phase batch sampling with hardness-proportional weights.

Weights follow p(i) proportional to gamma + lambda * (1 - s_i) over retained
samples: gamma > 0 keeps every retained sample reachable, lambda turns up the
emphasis on hard (low-score) ones. Before the phase switch step every batch
is uniform over retained samples; from the switch step on the adaptive
weights apply. Real/generated mixing is a separate per-slot coin with
probability alpha of picking the generated stratum, so changing the weights
never changes the mixing ratio.

Every random decision is a pure function of (seed, step, slot, channel)
through a splitmix64-style hash chain: no sampler state, so any step of a
plan can be regenerated independently and two runs with one seed agree
bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import ConfigError, EmptyStratum, MissingScore, OutOfRange
from .manifest import cohort_checksum
from .records import SampleRecord, Source


class Phase(str, enum.Enum):
    UNIFORM = "uniform"
    ADAPTIVE = "adaptive"


class StrataMode(str, enum.Enum):
    GLOBAL = "global"
    PER_SOURCE = "per_source"


STRATUM_ALL = "all"

_MASK = (1 << 64) - 1
_PHI = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK
    return z ^ (z >> 31)


def unit_uniform(seed: int, step: int, slot: int, channel: int) -> float:
    """Counter-based U[0,1): a pure function of its four words.

    Channel 0 carries the real/generated coin, channel 1 the within-stratum
    pick; further channels are free for future decisions.
    """
    h = _mix((seed + _PHI) & _MASK)
    for word in (step, slot, channel):
        h = _mix(((h ^ word) + _PHI) & _MASK)
    return (h >> 11) * 2.0**-53


def unit_uniforms(seed: int, step: int, n_slots: int, channel: int) -> np.ndarray:
    """Vector of unit_uniform over slots 0..n_slots-1, bit-identical to the
    scalar path."""
    h = np.full(n_slots, _mix((seed + _PHI) & _MASK), dtype=np.uint64)
    phi = np.uint64(_PHI)
    mix_a = np.uint64(_MIX_A)
    mix_b = np.uint64(_MIX_B)
    for word in (
        np.uint64(step & _MASK),
        np.arange(n_slots, dtype=np.uint64),
        np.uint64(channel),
    ):
        z = (h ^ word) + phi
        z = (z ^ (z >> np.uint64(30))) * mix_a
        z = (z ^ (z >> np.uint64(27))) * mix_b
        h = z ^ (z >> np.uint64(31))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class SamplerConfig:
    gamma: float = 0.1
    lam: float = 1.0
    alpha: float = 0.5
    seed: int = 0
    total_steps: int = 1000
    phase_switch_step: int | None = None  # None -> total_steps // 2
    batch_size: int = 64
    strata_mode: StrataMode = StrataMode.PER_SOURCE

    def __post_init__(self) -> None:
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be > 0, got {self.gamma}")
        if not (self.lam >= 0 and np.isfinite(self.lam)):
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0,1], got {self.alpha}")
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.phase_switch_step is None:
            object.__setattr__(self, "phase_switch_step", self.total_steps // 2)
        if not 0 <= self.phase_switch_step <= self.total_steps:
            raise ConfigError(
                f"phase_switch_step {self.phase_switch_step} outside "
                f"[0, {self.total_steps}]"
            )
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")

    @property
    def switch_step(self) -> int:
        assert self.phase_switch_step is not None
        return self.phase_switch_step


@dataclass(frozen=True)
class StratumWeights:
    """Sorted ids with aligned weights; filtered entries carry exactly 0.

    The draw CDF covers retained entries only, so a zero-weight id can never
    come out of a pick regardless of float rounding.
    """

    name: str
    ids: tuple[str, ...]
    weights: np.ndarray
    retained_ids: tuple[str, ...] = field(init=False)
    _cdf: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)
        retained = np.flatnonzero(weights != 0.0)
        object.__setattr__(
            self, "retained_ids", tuple(self.ids[i] for i in retained)
        )
        cdf = np.cumsum(weights[retained])
        if cdf.size:
            cdf[-1] = 1.0  # kill the ~1e-16 cumsum gap so u < 1 always lands
        cdf.flags.writeable = False
        object.__setattr__(self, "_cdf", cdf)

    @property
    def n_retained(self) -> int:
        return len(self.retained_ids)

    def pick_many(self, us: np.ndarray) -> list[str]:
        if not self.retained_ids:
            raise EmptyStratum(self.name)
        idx = np.searchsorted(self._cdf, us, side="right")
        return [self.retained_ids[k] for k in idx]


@dataclass(frozen=True)
class WeightTable:
    phase: Phase
    cohort_checksum: str
    config: SamplerConfig
    strata: dict[str, StratumWeights]

    def weight_of(self, sample_id: str) -> float:
        for stratum in self.strata.values():
            try:
                return float(stratum.weights[stratum.ids.index(sample_id)])
            except ValueError:
                continue
        raise KeyError(sample_id)


def _stratum_active(name: str, cfg: SamplerConfig) -> bool:
    if cfg.strata_mode is StrataMode.GLOBAL:
        return True
    if name == Source.GENERATED.value:
        return cfg.alpha > 0.0
    return cfg.alpha < 1.0


def compute_weights(
    samples: list[SampleRecord], cfg: SamplerConfig, phase: Phase
) -> WeightTable:
    """Build the per-stratum weight table for one phase.

    UNIFORM ignores scores; ADAPTIVE requires a score on every retained
    sample. A stratum the mixing coin can actually select must have at least
    one retained sample.
    """
    if cfg.strata_mode is StrataMode.PER_SOURCE:
        groups = {s.value: [] for s in Source}
        for rec in samples:
            groups[rec.source.value].append(rec)
    else:
        groups = {STRATUM_ALL: list(samples)}

    strata = {}
    for name, members in groups.items():
        members = sorted(members, key=lambda r: r.id)
        ids = tuple(r.id for r in members)
        weights = np.zeros(len(members))
        retained = [(k, r) for k, r in enumerate(members) if r.retained]
        if not retained:
            if _stratum_active(name, cfg):
                raise EmptyStratum(name)
            strata[name] = StratumWeights(name=name, ids=ids, weights=weights)
            continue
        if phase is Phase.UNIFORM:
            raw = np.ones(len(retained))
        else:
            scores = []
            for _, rec in retained:
                if rec.score is None:
                    raise MissingScore(rec.id)
                if not 0.0 <= rec.score <= 1.0:
                    raise OutOfRange(f"score {rec.score} for {rec.id} outside [0,1]")
                scores.append(rec.score)
            raw = cfg.gamma + cfg.lam * (1.0 - np.asarray(scores))
        weights[[k for k, _ in retained]] = raw / raw.sum()
        strata[name] = StratumWeights(name=name, ids=ids, weights=weights)
    return WeightTable(
        phase=phase,
        cohort_checksum=cohort_checksum(samples),
        config=cfg,
        strata=strata,
    )


def phase_schedule(step: int, cfg: SamplerConfig) -> Phase:
    """The switch step itself is the first adaptive step."""
    return Phase.UNIFORM if step < cfg.switch_step else Phase.ADAPTIVE


def draw_batch(table: WeightTable, cfg: SamplerConfig, step: int) -> list[str]:
    """One batch of ids for `step`, a pure function of (seed, step)."""
    n = cfg.batch_size
    picks = unit_uniforms(cfg.seed, step, n, channel=1)
    if cfg.strata_mode is StrataMode.GLOBAL:
        stratum = table.strata.get(STRATUM_ALL)
        if stratum is None:
            raise ConfigError("table was not built in GLOBAL mode")
        return stratum.pick_many(picks)

    flips = unit_uniforms(cfg.seed, step, n, channel=0)
    generated = flips < cfg.alpha
    out: list[str | None] = [None] * n
    for name, mask in (
        (Source.GENERATED.value, generated),
        (Source.REAL.value, ~generated),
    ):
        slots = np.flatnonzero(mask)
        if slots.size == 0:
            continue
        stratum = table.strata.get(name)
        if stratum is None:
            raise EmptyStratum(name)
        for slot, sample_id in zip(slots, stratum.pick_many(picks[slots])):
            out[slot] = sample_id
    return out  # type: ignore[return-value]


@dataclass(frozen=True)
class PlanBatch:
    step: int
    ids: tuple[str, ...]


@dataclass(frozen=True)
class RefreshMarker:
    """Tells the consumer to reload weight tables before the next batch."""

    step: int


def emit_epoch_plan(
    cfg: SamplerConfig,
    tables: dict[Phase, WeightTable],
    steps: range,
) -> Iterator[PlanBatch | RefreshMarker]:
    """Stream batches for `steps`, marking the uniform-to-adaptive hand-off.

    The marker appears immediately before the switch-step batch, and only
    when the range actually crosses the switch; with the switch pinned to
    total_steps the stream is marker-free and permanently uniform.
    """
    if len(steps) == 0:
        return
    needed = {phase_schedule(s, cfg) for s in (steps.start, steps.stop - 1)}
    for phase in needed:
        if phase not in tables:
            raise ConfigError(f"no weight table for phase {phase.value}")
        if tables[phase].phase is not phase:
            raise ConfigError(
                f"table under key {phase.value} says {tables[phase].phase.value}"
            )
    for step in steps:
        if step == cfg.switch_step and step != steps.start:
            yield RefreshMarker(step)
        table = tables[phase_schedule(step, cfg)]
        yield PlanBatch(step=step, ids=tuple(draw_batch(table, cfg, step)))
