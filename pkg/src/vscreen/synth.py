"""Seeded synthetic screening libraries with planted scorer signal.

Oriented scores are drawn from a correlated Gaussian: for inactives
``z = L @ e`` with ``L L^T`` the scorer noise correlation, and actives add
``signal_strength`` to each scorer's oriented value.  With
``complementary`` set, each active instead carries the shift in exactly one
of the signal-bearing scorers (assigned in turn after a seeded shuffle), so
no single scorer sees every active.  Raw values are then
placed on a scorer-specific location/scale (negated for lower-is-better
scorers) so the built-in filter thresholds see plausible magnitudes.
Synthetic only: nothing here models real docking score distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .data import DEFAULT_SCORERS, Direction, ScorerSpec, ScreenDataset
from .errors import ArgumentError, ConfigError
from .metrics import RankedLibrary, enrichment_factor
from .rng import Stream

# (location, scale) of raw scores for the canonical scorers
DEFAULT_SCALES: dict[str, tuple[float, float]] = {
    "autodock": (-7.0, 1.5),
    "diffdock": (-1.0, 1.5),
    "gnina_ad": (0.3, 0.25),
    "gnina_dd": (0.3, 0.25),
    "nmdn_ad": (0.0, 600.0),
    "nmdn_dd": (0.0, 600.0),
}


@dataclass
class SyntheticSpec:
    n_actives: int
    n_inactives: int
    signal_strength: Mapping[str, float] = field(default_factory=dict)
    noise_correlation: float | Sequence[Sequence[float]] = 0.0
    missing_rate: float = 0.0
    seed: int = 0
    target_id: str = "SYN"
    scorers: Sequence[ScorerSpec] = DEFAULT_SCORERS
    scales: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    complementary: bool = False

    def correlation_matrix(self) -> np.ndarray:
        k = len(self.scorers)
        if np.isscalar(self.noise_correlation):
            rho = float(self.noise_correlation)
            if not (0.0 <= rho < 1.0):
                raise ArgumentError(f"noise_correlation must be in [0, 1), got {rho}")
            c = np.full((k, k), rho)
            np.fill_diagonal(c, 1.0)
            return c
        c = np.asarray(self.noise_correlation, dtype=np.float64)
        if c.shape != (k, k) or not np.allclose(c, c.T) or not np.allclose(np.diag(c), 1.0):
            raise ArgumentError("noise_correlation must be a symmetric unit-diagonal matrix")
        if np.linalg.eigvalsh(c).min() < -1e-12:
            raise ArgumentError("noise_correlation matrix is not positive semi-definite")
        return c

    def validate(self) -> None:
        if self.n_actives < 0 or self.n_inactives < 0:
            raise ArgumentError("counts must be non-negative")
        if not self.scorers:
            raise ArgumentError("at least one scorer is required")
        if not (0.0 <= self.missing_rate < 1.0):
            raise ArgumentError("missing_rate must be in [0, 1)")
        ids = {s.scorer_id for s in self.scorers}
        unknown = set(self.signal_strength) - ids
        if unknown:
            raise ArgumentError(f"signal for unknown scorer(s) {sorted(unknown)}")
        if any(v < 0 for v in self.signal_strength.values()):
            raise ArgumentError("signal_strength must be >= 0")
        self.correlation_matrix()


def _sqrt_psd(c: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(c)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def generate_synthetic(spec: SyntheticSpec) -> ScreenDataset:
    """Draw a labeled library; identical specs give bit-identical datasets."""
    spec.validate()
    k = len(spec.scorers)
    n = spec.n_actives + spec.n_inactives
    root = Stream(spec.seed, f"synth:{spec.target_id}")

    # library order is shuffled so id tie-breaking carries no label information
    labels = np.zeros(n, dtype=np.int8)
    labels[: spec.n_actives] = 1
    labels = labels[root.spawn("order").permutation(n)]

    chol = _sqrt_psd(spec.correlation_matrix())
    noise = root.spawn("noise").normal(n * k).reshape(n, k) @ chol.T
    shift = np.array([spec.signal_strength.get(s.scorer_id, 0.0) for s in spec.scorers])
    if spec.complementary:
        carriers = np.flatnonzero(shift)
        active_idx = np.flatnonzero(labels)
        turn = root.spawn("carrier").permutation(active_idx.size) % max(carriers.size, 1)
        planted = np.zeros((n, k))
        if carriers.size:
            planted[active_idx, carriers[turn]] = shift[carriers[turn]]
        oriented = noise + planted
    else:
        oriented = noise + labels[:, None] * shift

    if spec.missing_rate > 0:
        u = root.spawn("missing").uniform(n * k).reshape(n, k)
        drop = u < spec.missing_rate
        # at least one score per ligand: keep the cell with the largest draw
        all_gone = drop.all(axis=1)
        drop[all_gone, np.argmax(u[all_gone], axis=1)] = False
        oriented = np.where(drop, np.nan, oriented)

    scales = {**DEFAULT_SCALES, **spec.scales}
    scores = {}
    for j, s in enumerate(spec.scorers):
        loc, scale = scales.get(s.scorer_id, (0.0, 1.0))
        col = oriented[:, j] * scale
        scores[s.scorer_id] = loc - col if s.direction is Direction.LOWER else loc + col

    width = max(6, len(str(n)))
    ids = [f"{spec.target_id}_L{i:0{width}d}" for i in range(n)]
    return ScreenDataset(spec.target_id, ids, labels, scores, spec.scorers)


def synthetic_spec_from_dict(doc: Mapping, defaults: Mapping | None = None) -> SyntheticSpec:
    d = {**(defaults or {}), **doc}
    try:
        return SyntheticSpec(
            n_actives=int(d["n_actives"]),
            n_inactives=int(d["n_inactives"]),
            signal_strength={str(k): float(v) for k, v in (d.get("signal_strength") or {}).items()},
            noise_correlation=d.get("noise_correlation", 0.0),
            missing_rate=float(d.get("missing_rate", 0.0)),
            seed=int(d.get("seed", 0)),
            target_id=str(d.get("target_id", "SYN")),
            scales={str(k): tuple(v) for k, v in (d.get("scales") or {}).items()},
            complementary=bool(d.get("complementary", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad synthetic spec: {exc!r}") from None


def load_synthetic_specs(path: str | Path) -> list[SyntheticSpec]:
    """Read a synth config: either one spec or ``targets: [...]`` plus defaults.

    Each target without an explicit seed gets ``base seed + position``.
    """
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"synth spec file not found: {path}") from None
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{path}: expected a mapping")
    if "targets" not in doc:
        return [synthetic_spec_from_dict(doc)]
    defaults = {k: v for k, v in doc.items() if k != "targets"}
    base = int(defaults.get("seed", 0))
    specs = []
    for i, t in enumerate(doc["targets"]):
        t = dict(t)
        t.setdefault("seed", base + i)
        t.setdefault("target_id", f"T{i + 1:02d}")
        specs.append(synthetic_spec_from_dict(t, defaults))
    return specs


def random_baseline(n_total: int, n_actives: int, x_pct: float, trials: int,
                    seed: int) -> tuple[float, float]:
    """Mean and standard deviation of EF@x% under uniformly random rankings."""
    if trials < 1:
        raise ArgumentError("trials must be >= 1")
    if not (0 < n_actives <= n_total):
        raise ArgumentError("need 0 < n_actives <= n_total")
    stream = Stream(seed, "random-baseline")
    base = np.zeros(n_total, dtype=np.int8)
    base[:n_actives] = 1
    ids = tuple(str(i) for i in range(n_total))
    values = []
    for _ in range(trials):
        labels = base[stream.permutation(n_total)]
        values.append(enrichment_factor(RankedLibrary(ids, labels, n_total, n_actives), x_pct))
    arr = np.asarray(values)
    return float(arr.mean()), float(arr.std())
