"""Singlet preparation by a Stark jump.

Two atoms share one photon, ``|1>_p|00>_a``.  While a Stark potential is on,
the target atom runs at ``omega + ds`` with coupling ``g + dg``; after a random
hold the potential is switched off and the parameters snap back.  Whatever
now overlaps the dark singlet of the unshifted couplings never radiates, the
rest eventually does and is caught by the detector.  "No photon detected"
therefore selects the singlet, with probability |<singlet, 0|psi(hold)>|^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from qlock import rng as rngmod
from qlock.dark import PairSplitting, singlet_pair, splitting_state
from qlock.hamiltonian import ModelParams, Propagator, build_hamiltonian
from qlock.state import BasisState, Space, StateVector

PREP_SPACE = Space(2, 1, 1)
HOLD_PERIODS = 20.0


class PreparationError(RuntimeError):
    """A pair could not be prepared within the attempt budget."""


@dataclass(frozen=True)
class StarkJumpSpec:
    target_atom: int = 0
    ds: float = 0.0
    dg: float = 0.0
    hold_time_max: float | None = None
    distribution: str = "uniform"

    def __post_init__(self):
        if not (math.isfinite(self.ds) and math.isfinite(self.dg)):
            raise ValueError("Stark shifts must be finite")
        if self.hold_time_max is not None and not self.hold_time_max > 0:
            raise ValueError("hold_time_max must be positive")
        if self.distribution != "uniform":
            raise ValueError(f"unsupported hold-time distribution {self.distribution!r}")

    def t_max(self, params: ModelParams) -> float:
        if self.hold_time_max is not None:
            return self.hold_time_max
        return default_hold_time_max(params)

    def to_json(self) -> dict:
        return {
            "target_atom": self.target_atom,
            "ds": self.ds,
            "dg": self.dg,
            "hold_time_max": self.hold_time_max,
            "distribution": self.distribution,
        }


def default_hold_time_max(params: ModelParams) -> float:
    gbar = float(np.mean(params.couplings()))
    if gbar <= 0:
        raise ValueError("mean coupling is zero; give hold_time_max explicitly")
    return HOLD_PERIODS * math.pi / gbar


def shifted_params(params: ModelParams, spec: StarkJumpSpec) -> ModelParams:
    i = spec.target_atom
    if not 0 <= i < params.n_atoms:
        raise IndexError(f"target atom {i} out of range")
    atom = params.atoms[i]
    g = params.couplings()[i] + spec.dg
    return params.replace_atom(
        i,
        delta=atom.delta + spec.ds,
        g_override=g if (spec.dg != 0 or atom.g_override is not None) else None,
    )


@dataclass(frozen=True)
class PrepOutcome:
    singlet_probability: float
    post_state: StateVector | None
    hold_time: float
    zero_photon_probability: float


class _PrepModel:
    """Spectral data for one (params, spec): singlet overlap as a function of hold time."""

    def __init__(self, params: ModelParams, spec: StarkJumpSpec):
        if params.n_atoms != 2:
            raise ValueError(f"preparation acts on exactly two atoms, got {params.n_atoms}")
        self.params = params
        self.spec = spec
        self.t_max = spec.t_max(params)
        g = params.couplings()
        self.singlet = singlet_pair(0, 1, g)
        self.target = self.singlet.embed(Space(2, 1, 1, (0, 1))).amplitudes
        H = build_hamiltonian(shifted_params(params, spec), PREP_SPACE)
        self.prop = Propagator(H)
        self.psi0 = StateVector.basis(PREP_SPACE, BasisState(1, (0, 0))).amplitudes
        # A target that is itself stationary keeps a constant overlap (zero when no jump is made).
        Ht = H @ self.target
        E = np.vdot(self.target, Ht)
        self.stationary = bool(np.linalg.norm(Ht - E * self.target) <= 1e-12 * max(1.0, abs(E)))

    def probability(self, times) -> np.ndarray:
        if self.stationary:
            p0 = np.abs(np.vdot(self.target, self.psi0)) ** 2
            return np.full(np.shape(times), p0)
        return np.abs(self.prop.overlaps(self.target, self.psi0, times)) ** 2

    def state(self, t: float) -> np.ndarray:
        return self.prop.amplitudes(self.psi0, t)


def prep_trajectory(params: ModelParams, spec: StarkJumpSpec, dt: float) -> PrepOutcome:
    model = _PrepModel(params, spec)
    amps = model.state(dt)
    p = float(model.probability(np.array([dt]))[0])
    zero_photon = float(np.sum(np.abs(amps[PREP_SPACE.photons == 0]) ** 2))
    return PrepOutcome(p, model.singlet if p > 0 else None, dt, zero_photon)


class YieldEstimate(NamedTuple):
    value: float
    stderr: float
    n: int
    method: str


def _gauss_legendre(f, a: float, b: float, panels: int, order: int = 32) -> float:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return float(np.dot(weights, f(nodes)))


def prep_yield(
    params: ModelParams,
    spec: StarkJumpSpec,
    method: str = "quadrature",
    n_samples: int = 20000,
    panels: int | None = None,
    seed: int = 0,
    threads: int = 1,
) -> YieldEstimate:
    """Mean singlet probability over the hold-time distribution.

    ``quadrature`` uses composite Gauss-Legendre (error estimate from a
    half-resolution rerun); ``monte_carlo`` draws hold times from fixed seeded
    blocks and reports the sample standard error.
    """
    model = _PrepModel(params, spec)
    T = model.t_max
    if method == "quadrature":
        if panels is None:
            span = float(np.ptp(model.prop.energies)) if model.prop.energies.size > 1 else 0.0
            panels = max(16, int(math.ceil(span * T / (2 * math.pi))) * 4)
        fine = _gauss_legendre(model.probability, 0.0, T, panels) / T
        coarse = _gauss_legendre(model.probability, 0.0, T, max(1, panels // 2)) / T
        return YieldEstimate(fine, abs(fine - coarse), panels * 32, "quadrature")
    if method == "monte_carlo":
        if n_samples < 1:
            raise ValueError("n_samples must be positive")

        def block(item):
            b, start, stop = item
            u = rngmod.stream(seed, "prep-yield", b).random(stop - start)
            p = model.probability(u * T)
            return float(p.sum()), float((p * p).sum())

        parts = rngmod.ordered_map(block, rngmod.blocks(n_samples), threads)
        s1 = math.fsum(p[0] for p in parts)
        s2 = math.fsum(p[1] for p in parts)
        mean = s1 / n_samples
        var = max(s2 / n_samples - mean * mean, 0.0)
        stderr = math.sqrt(var / (n_samples - 1)) if n_samples > 1 else float("inf")
        return YieldEstimate(mean, stderr, n_samples, "monte_carlo")
    raise ValueError(f"unknown method {method!r}")


def time_averaged_yield(params: ModelParams, spec: StarkJumpSpec, t_max: float | None = None) -> float:
    """Closed-form average of the singlet probability over [0, T]."""
    model = _PrepModel(params, spec)
    T = model.t_max if t_max is None else t_max
    if model.stationary:
        return float(model.probability(0.0))
    P = model.prop
    c = (P.vectors.conj().T @ model.target).conj() * P.coefficients(model.psi0)
    dE = P.energies[:, None] - P.energies[None, :]
    x = dE * T
    with np.errstate(invalid="ignore", divide="ignore"):
        kernel = np.where(np.abs(x) < 1e-12, 1.0, (1 - np.exp(-1j * x)) / (1j * x))
    return float(np.real(c.conj() @ (kernel.conj() @ c)))  # sum_kl c_k c_l* <e^{-i(E_k-E_l)t}>


@dataclass(frozen=True)
class PairPrepLog:
    pair: tuple[int, int]
    attempts: int
    yield_estimate: float

    def to_json(self) -> dict:
        return {"pair": list(self.pair), "attempts": self.attempts}


def _attempts_until_success(model: _PrepModel, gen: np.random.Generator, max_attempts: int) -> int:
    done = 0
    chunk = 4096
    while done < max_attempts:
        k = min(chunk, max_attempts - done)
        hold = gen.random(k) * model.t_max
        hit = np.nonzero(gen.random(k) < model.probability(hold))[0]
        if hit.size:
            return done + int(hit[0]) + 1
        done += k
    raise PreparationError(f"no singlet after {max_attempts} attempts")


def prepare_splitting(
    params: ModelParams,
    K: PairSplitting,
    spec: StarkJumpSpec | Mapping[tuple[int, int], StarkJumpSpec],
    seed: int,
    max_attempts: int = 1_000_000,
) -> tuple[StateVector, list[PairPrepLog]]:
    """Prepare every pair of ``K`` in turn by repeated S jumps.

    Each attempt draws a hold time and succeeds with that trajectory's singlet
    probability.  The jump's ``target_atom`` is the position inside the pair
    (0 for the first atom of the pair, 1 for the second).
    """
    if not K.complete:
        raise ValueError("preparation needs a complete splitting")
    log = []
    for k, pair in enumerate(K.pairs):
        pair_spec = spec if isinstance(spec, StarkJumpSpec) else spec[pair]
        model = _PrepModel(params.subset(pair), pair_spec)
        y = prep_yield(params.subset(pair), pair_spec).value
        if y <= 0:
            raise PreparationError(f"pair {pair} has zero singlet yield; it would never be prepared")
        attempts = _attempts_until_success(model, rngmod.stream(seed, "prep-pair", k), max_attempts)
        log.append(PairPrepLog(pair, attempts, y))
    return splitting_state(K, params.couplings()), log


def sweep(
    params: ModelParams,
    ds_values: Sequence[float],
    dg_values: Sequence[float],
    t_max: float | None,
    n_samples: int,
    seed: int,
    threads: int = 1,
) -> list[dict]:
    """Monte Carlo yield over a (ds, dg) grid; one row per grid point."""
    rows = []
    for ds in ds_values:
        for dg in dg_values:
            spec = StarkJumpSpec(0, float(ds), float(dg), t_max)
            est = prep_yield(params, spec, "monte_carlo", n_samples=n_samples, seed=seed, threads=threads)
            rows.append(
                {
                    "ds": float(ds),
                    "dg": float(dg),
                    "T_max": spec.t_max(params),
                    "yield": est.value,
                    "stderr": est.stderr,
                    "n_samples": n_samples,
                    "seed": seed,
                }
            )
    return rows
