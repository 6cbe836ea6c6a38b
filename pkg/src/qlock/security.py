"""Key-space arithmetic and Monte Carlo false-accept / false-reject rates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from qlock import rng as rngmod
from qlock.dark import PairSplitting
from qlock.hamiltonian import ModelParams
from qlock.protocol import (
    DetectorModel,
    LockInstance,
    ProtocolConfig,
    analytic_false_reject,
    verify,
)

ADVERSARIES = ("random-password", "one-pair-off", "random-guess")
GUESS_TARGET = 1e-8


def _check_even(n_atoms: int) -> None:
    if n_atoms < 2 or n_atoms % 2:
        raise ValueError(f"need an even number of atoms >= 2, got {n_atoms}")


def matchings_count(n_atoms: int) -> int:
    """(n-1)!! = 1 * 3 * ... * (n-1), in exact integers."""
    _check_even(n_atoms)
    return math.prod(range(1, n_atoms, 2))


def guess_probability(n_atoms: int) -> float:
    return 1.0 / matchings_count(n_atoms)


def guess_fraction(n_atoms: int) -> Fraction:
    return Fraction(1, matchings_count(n_atoms))


def key_length_for_target(p_target: float) -> int:
    """Smallest even n whose single-guess success probability is at most p_target."""
    if not 0 < p_target < 1:
        raise ValueError("p_target must lie in (0, 1)")
    n = 2
    # count * p >= 1, with slack for p given as a rounded float such as 1/3
    while matchings_count(n) * p_target < 1 - 1e-12:
        n += 2
    return n


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    stderr: float
    hits: int
    trials: int

    def to_json(self) -> dict:
        return {"rate": self.rate, "stderr": self.stderr, "hits": self.hits, "trials": self.trials}


def _estimate(hits: int, trials: int) -> RateEstimate:
    p = hits / trials
    return RateEstimate(p, math.sqrt(p * (1 - p) / trials), hits, trials)


def adversary_password(key: PairSplitting, adversary: str, gen: np.random.Generator) -> PairSplitting:
    n = key.n_atoms
    if adversary == "random-guess":
        return PairSplitting.random(n, gen)
    if adversary == "random-password":
        if n < 4:
            raise ValueError("with two atoms every password equals the key")
        while True:
            guess = PairSplitting.random(n, gen)
            if guess != key:
                return guess
    if adversary == "one-pair-off":
        if n < 4:
            raise ValueError("one-pair-off needs at least two pairs")
        i, j = gen.choice(len(key.pairs), size=2, replace=False)
        (a, b), (c, d) = key.pairs[i], key.pairs[j]
        swapped = ((a, c), (b, d)) if gen.random() < 0.5 else ((a, d), (b, c))
        rest = [p for k, p in enumerate(key.pairs) if k not in (i, j)]
        return PairSplitting(n, tuple(rest) + swapped)
    raise ValueError(f"unknown adversary {adversary!r}; expected one of {ADVERSARIES}")


def _run_trials(
    n_atoms: int,
    det: DetectorModel,
    n_trials: int,
    seed: int,
    adversary: str | None,
    mode: str,
    threads: int,
    config: ProtocolConfig | None,
    params: ModelParams | None,
) -> int:
    """Number of accepted verifications; ``adversary=None`` means the key itself."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    _check_even(n_atoms)
    params = params or ModelParams.default(n_atoms)

    def block(item) -> int:
        _, start, stop = item
        accepted = 0
        for i in range(start, stop):
            gen = rngmod.stream(seed, "trial", i)
            key = PairSplitting.random(n_atoms, gen)
            password = key if adversary is None else adversary_password(key, adversary, gen)
            lock = LockInstance(key, params)
            result = verify(lock, password, det, mode, rngmod.derive_seed(seed, "verify", i), config)
            accepted += result.accepted
        return accepted

    return sum(rngmod.ordered_map(block, rngmod.blocks(n_trials), threads))


def false_accept_rate(
    n_atoms: int,
    det: DetectorModel | None = None,
    n_trials: int = 10_000,
    seed: int = 0,
    adversary: str = "random-password",
    mode: str = "abstract",
    threads: int = 1,
    config: ProtocolConfig | None = None,
    params: ModelParams | None = None,
) -> RateEstimate:
    """Fraction of adversary passwords accepted, over fresh random locks."""
    det = det or DetectorModel()
    hits = _run_trials(n_atoms, det, n_trials, seed, adversary, mode, threads, config, params)
    return _estimate(hits, n_trials)


def false_reject_rate(
    n_atoms: int,
    det: DetectorModel | None = None,
    n_trials: int = 10_000,
    seed: int = 0,
    mode: str = "abstract",
    threads: int = 1,
    config: ProtocolConfig | None = None,
    params: ModelParams | None = None,
) -> RateEstimate:
    """Fraction of correct passwords rejected."""
    det = det or DetectorModel()
    accepted = _run_trials(n_atoms, det, n_trials, seed, None, mode, threads, config, params)
    return _estimate(n_trials - accepted, n_trials)


@dataclass(frozen=True)
class GridPoint:
    eta1: float
    eta2: float
    p_loss: float
    epsilon: float

    def detector(self) -> DetectorModel:
        return DetectorModel(self.eta1, self.eta2, self.p_loss, self.epsilon)


def detector_grid(
    eta1: Iterable[float], eta2: Iterable[float], p_loss: Iterable[float], epsilon: Iterable[float]
) -> list[GridPoint]:
    points = [GridPoint(*map(float, v)) for v in itertools.product(eta1, eta2, p_loss, epsilon)]
    for p in points:
        p.detector()  # validates ranges
    return points


@dataclass
class SecurityReport:
    n_atoms: int
    adversary: str
    trials: int
    seed: int
    mode: str
    rows: list[dict] = field(default_factory=list)

    @property
    def matchings_count(self) -> int:
        return matchings_count(self.n_atoms)

    @property
    def guess_probability(self) -> float:
        return guess_probability(self.n_atoms)

    def to_json(self) -> dict:
        return {
            "n_atoms": self.n_atoms,
            "matchings_count": self.matchings_count,
            "guess_probability": self.guess_probability,
            "target": GUESS_TARGET,
            "meets_target": self.guess_probability <= GUESS_TARGET,
            "minimal_n_for_target": key_length_for_target(GUESS_TARGET),
            "adversary": self.adversary,
            "mode": self.mode,
            "trials": self.trials,
            "seed": self.seed,
            "grid": self.rows,
        }


CSV_COLUMNS = ("eta1", "eta2", "p_loss", "epsilon", "n", "far", "far_stderr", "frr", "frr_stderr", "trials", "seed")


def analyze(
    n_atoms: int,
    grid: Sequence[GridPoint],
    n_trials: int,
    seed: int,
    adversary: str = "random-password",
    mode: str = "abstract",
    threads: int = 1,
    config: ProtocolConfig | None = None,
    params: ModelParams | None = None,
) -> SecurityReport:
    """FAR and FRR at every grid point, all sharing the same trial seeds."""
    report = SecurityReport(n_atoms, adversary, n_trials, seed, mode)
    for point in grid:
        det = point.detector()
        far = false_accept_rate(n_atoms, det, n_trials, seed, adversary, mode, threads, config, params)
        frr = false_reject_rate(n_atoms, det, n_trials, seed, mode, threads, config, params)
        report.rows.append(
            {
                "eta1": point.eta1,
                "eta2": point.eta2,
                "p_loss": point.p_loss,
                "epsilon": point.epsilon,
                "n": n_atoms,
                "far": far.rate,
                "far_stderr": far.stderr,
                "frr": frr.rate,
                "frr_stderr": frr.stderr,
                "frr_analytic": analytic_false_reject(n_atoms, det, config),
                "trials": n_trials,
                "seed": seed,
            }
        )
    return report
