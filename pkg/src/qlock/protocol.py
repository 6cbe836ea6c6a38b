"""Password verification: move pairs from the main to the control cavity and listen.

Each password pair is carried out of the main cavity and into the control
cavity.  A pair that is a singlet of the key stays dark throughout; a pair
that tears two singlets apart leaves bright components behind, which radiate
and can click D1 (main) or D2 (control).  Once in the control cavity the pair
is subjected to S jumps: an excited pair eventually clicks D2, a ground pair
never does.  A pair passes iff nothing clicked while it moved and the S-jump
check clicked.

Two simulation modes share one driver:

``abstract``
    Bookkeeping of which atoms are still singlet partners, with the
    Bernoulli(1/2) emission rule for each broken singlet.
``exact``
    The atomic state vector is carried along; the coupling schedule of the
    moving atoms is swept and the emission probability is the bright weight of
    the state against the instantaneous collective lowering operator.

Every random choice goes through a *chooser*.  Sampling uses a fixed block of
uniforms per pair (so runs with different detector settings share random
numbers); enumeration replays the pair step along every branch of the event
tree and yields exact outcome probabilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from qlock import rng as rngmod
from qlock.dark import DARK_TOL, RANK_RTOL, PairSplitting, collective_lowering, is_dark, splitting_state
from qlock.hamiltonian import ModelParams
from qlock.state import Space, StateVector

LOCATIONS = ("main", "transit", "control")
DETECTORS = ("D1", "D2", "lost")
MODES = ("abstract", "exact")
SLOTS_PER_PAIR = 32
EXACT_MAX_ATOMS = 10
PRUNE = 1e-14

# uniform slots inside a pair's block
_ASYNC, _ASYNC_LOC, _ASYNC_ROUTE = 0, 1, 2
_ATOM_BASE, _ATOM_STRIDE = 4, 6
_EXIT, _EXIT_ROUTE, _ENTRY, _ENTRY_ROUTE, _CONFIG = 4, 5, 6, 7, 8
_SJUMP = 16


class ProtocolError(ValueError):
    """Password does not fit the lock, or the requested operation is impossible."""


def _unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class DetectorModel:
    eta1: float = 1.0
    eta2: float = 1.0
    p_transit_loss: float = 0.0
    asynchrony_epsilon: float = 0.0

    def __post_init__(self):
        for name in ("eta1", "eta2", "p_transit_loss", "asynchrony_epsilon"):
            object.__setattr__(self, name, _unit(name, getattr(self, name)))

    @property
    def ideal(self) -> bool:
        return (self.eta1, self.eta2, self.p_transit_loss, self.asynchrony_epsilon) == (1.0, 1.0, 0.0, 0.0)

    def to_json(self) -> dict:
        return {
            "eta1": self.eta1,
            "eta2": self.eta2,
            "p_transit_loss": self.p_transit_loss,
            "asynchrony_epsilon": self.asynchrony_epsilon,
        }


@dataclass(frozen=True)
class ProtocolConfig:
    """Free protocol parameters; see the decisions ledger for the defaults."""

    location_split: tuple[float, float, float] = (0.4, 0.2, 0.4)
    max_switchings: int = 16
    switch_bright_fraction: float = 1.0
    early_exit: bool = True
    n_steps: int = 32

    def __post_init__(self):
        split = tuple(float(q) for q in self.location_split)
        if len(split) != 3 or min(split) < 0 or abs(sum(split) - 1) > 1e-12:
            raise ValueError(f"location_split must be three non-negative weights summing to 1, got {split}")
        object.__setattr__(self, "location_split", split)
        if self.max_switchings < 1:
            raise ValueError("max_switchings must be at least 1")
        _unit("switch_bright_fraction", self.switch_bright_fraction)
        if self.n_steps < 2:
            raise ValueError("n_steps must be at least 2")

    def to_json(self) -> dict:
        return {
            "location_split": list(self.location_split),
            "max_switchings": self.max_switchings,
            "switch_bright_fraction": self.switch_bright_fraction,
            "early_exit": self.early_exit,
            "n_steps": self.n_steps,
        }


@dataclass(frozen=True)
class Emission:
    location: str
    detector: str

    def to_json(self) -> dict:
        return {"location": self.location, "detector": self.detector}


@dataclass(frozen=True)
class PairTrialEvent:
    pair: tuple[int, int]
    match: bool
    emissions: tuple[Emission, ...] = ()
    s_jump_click: bool = False

    @property
    def movement_click(self) -> bool:
        return any(e.detector != "lost" for e in self.emissions)

    @property
    def passed(self) -> bool:
        return self.s_jump_click and not self.movement_click

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "match": self.match,
            "emissions": [e.to_json() for e in self.emissions],
            "s_jump_click": self.s_jump_click,
        }


@dataclass(frozen=True)
class VerifyResult:
    decision: str
    mode: str
    seed: int
    events: tuple[PairTrialEvent, ...]
    rejecting_pair: int | None = None

    @property
    def accepted(self) -> bool:
        return self.decision == "accept"

    def to_json(self) -> dict:
        return {
            "decision": self.decision,
            "mode": self.mode,
            "seed": self.seed,
            "events": [e.to_json() for e in self.events],
            "rejecting_pair": self.rejecting_pair,
        }


@dataclass
class LockInstance:
    key: PairSplitting
    main: ModelParams
    control: ModelParams | None = None
    _state: StateVector | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.key.complete:
            raise ProtocolError("the secret key must pair every atom")
        if self.control is None:
            self.control = self.main
        for name, p in (("main", self.main), ("control", self.control)):
            if p.n_atoms != self.key.n_atoms:
                raise ProtocolError(f"{name} cavity has {p.n_atoms} atoms, key has {self.key.n_atoms}")
            if np.any(p.couplings() <= 0):
                raise ProtocolError(f"{name} cavity has an atom with zero coupling")

    @property
    def n_atoms(self) -> int:
        return self.key.n_atoms

    @property
    def state(self) -> StateVector:
        if self._state is None:
            self._state = splitting_state(self.key, self.main.couplings())
        return self._state

    def locations(self) -> tuple[str, ...]:
        return ("main",) * self.n_atoms


def forge_lock(
    n_atoms: int,
    params: ModelParams | None = None,
    seed: int = 0,
    control: ModelParams | None = None,
    certify: bool | None = None,
) -> tuple[PairSplitting, LockInstance]:
    """Draw a uniformly random key and build the lock in its dark working state."""
    if n_atoms < 2 or n_atoms % 2:
        raise ProtocolError(f"a lock needs an even number of atoms >= 2, got {n_atoms}")
    params = params or ModelParams.default(n_atoms)
    if params.n_atoms != n_atoms:
        raise ProtocolError(f"params describe {params.n_atoms} atoms, expected {n_atoms}")
    key = PairSplitting.random(n_atoms, rngmod.stream(seed, "key"))
    lock = LockInstance(key, params, control)
    if certify is None:
        certify = n_atoms <= 12
    if certify:
        check = is_dark(lock.state, params.couplings(), DARK_TOL)
        if not check.dark:
            raise ProtocolError(f"forged state is not dark (residual {check.residual:.2e})")
    return key, lock


# ---------------------------------------------------------------- choosers


class UniformChooser:
    """Inverse-CDF draws from one fixed uniform per slot."""

    def __init__(self, u: np.ndarray):
        self.u = u

    def pick(self, slot: int, probs: Sequence[float]) -> int:
        u = self.u[slot]
        acc = 0.0
        last = 0
        for i, p in enumerate(probs):
            if p <= 0:
                continue
            acc += p
            last = i
            if u < acc:
                return i
        return last


class _Replay:
    """Follows a prescribed branch path, then the first live branch, recording alternatives."""

    def __init__(self, path: list[int], prune: float):
        self.path = path
        self.prune = prune
        self.taken: list[int] = []
        self.options: list[list[int]] = []
        self.prob = 1.0

    def pick(self, slot: int, probs: Sequence[float]) -> int:
        live = [i for i, p in enumerate(probs) if p > self.prune]
        k = len(self.taken)
        i = self.path[k] if k < len(self.path) else live[0]
        self.taken.append(i)
        self.options.append(live)
        self.prob *= float(probs[i])
        return i


def enumerate_branches(step: Callable, prune: float = 0.0) -> list[tuple[float, object]]:
    """Every (probability, result) leaf of ``step(chooser)``.

    Branches whose probability is at most ``prune`` are skipped, so the leaf
    probabilities add up to one minus the pruned mass.
    """
    stack: list[list[int]] = [[]]
    leaves = []
    while stack:
        path = stack.pop()
        ch = _Replay(path, prune)
        result = step(ch)
        leaves.append((ch.prob, result))
        for j in range(len(path), len(ch.taken)):
            for other in ch.options[j]:
                if other != ch.taken[j]:
                    stack.append(ch.taken[:j] + [other])
    return leaves


def _route(ch, slot: int, location: str, det: DetectorModel) -> Emission:
    """Detection outcome for a photon emitted at ``location``."""
    if location == "transit":
        return Emission(location, "lost")
    eta = det.eta1 if location == "main" else det.eta2
    p_det = (1 - det.p_transit_loss) * eta
    hit = ch.pick(slot, [p_det, 1 - p_det]) == 0
    return Emission(location, ("D1" if location == "main" else "D2") if hit else "lost")


def _s_jump(ch, excited: bool, det: DetectorModel, config: ProtocolConfig) -> bool:
    if not excited:
        return False
    q = config.switch_bright_fraction * det.eta2
    p_click = 1 - (1 - q) ** config.max_switchings
    return ch.pick(_SJUMP, [p_click, 1 - p_click]) == 0


# ---------------------------------------------------------------- abstract mode


@dataclass(frozen=True)
class AbstractState:
    """Who is still singlet-paired, who is excited alone, and where everyone sits."""

    partners: tuple[tuple[int, int], ...]
    excited: frozenset
    locations: tuple[str, ...]
    charged: frozenset = frozenset()  # control-cavity pairs still holding an excitation

    @classmethod
    def from_lock(cls, lock: LockInstance) -> "AbstractState":
        return cls(lock.key.pairs, frozenset(), lock.locations())

    def partner(self, atom: int) -> int | None:
        for i, j in self.partners:
            if atom == i:
                return j
            if atom == j:
                return i
        return None


def move_pair_abstract(
    world: AbstractState, pair: tuple[int, int], det: DetectorModel, ch, config: ProtocolConfig
) -> tuple[AbstractState, tuple[Emission, ...]]:
    """Carry ``pair`` from main to control under the singlet-bookkeeping model."""
    a, b = pair
    split = config.location_split
    partners = dict()
    for i, j in world.partners:
        partners[i], partners[j] = j, i
    excited = set(world.excited)
    emissions = []
    carrying = False
    if partners.get(a) == b:
        del partners[a], partners[b]
        eps = det.asynchrony_epsilon
        if ch.pick(_ASYNC, [eps, 1 - eps]) == 0:
            loc = LOCATIONS[ch.pick(_ASYNC_LOC, split)]
            emissions.append(_route(ch, _ASYNC_ROUTE, loc, det))
        else:
            carrying = True
    else:
        for k, atom in enumerate(pair):
            base = _ATOM_BASE + _ATOM_STRIDE * k
            if atom in partners:
                stay = partners.pop(atom)
                del partners[stay]
                if ch.pick(base, [0.5, 0.5]) == 0:
                    moving_origin = ch.pick(base + 1, [0.5, 0.5]) == 0
                    loc = LOCATIONS[ch.pick(base + 2, split)] if moving_origin else "main"
                    emissions.append(_route(ch, base + 3, loc, det))
                else:
                    # the excitation stays behind and will radiate when its atom moves
                    excited.add(stay)
            elif atom in excited:
                excited.discard(atom)
                loc = LOCATIONS[ch.pick(base + 2, split)]
                emissions.append(_route(ch, base + 3, loc, det))
    pairs = tuple(sorted((i, j) for i, j in partners.items() if i < j))
    locations = list(world.locations)
    locations[a] = locations[b] = "control"
    charged = world.charged | {pair} if carrying else world.charged
    return AbstractState(pairs, frozenset(excited), tuple(locations), charged), tuple(emissions)


def s_jump_check(world, pair: tuple[int, int], det: DetectorModel, rng, config: ProtocolConfig | None = None) -> bool:
    """Repeated S jumps on a control-cavity pair; True when D2 clicks within the cap.

    ``rng`` is a numpy Generator or a chooser.  Works on either mode's state.
    """
    config = config or ProtocolConfig()
    a, b = pair
    if world.locations[a] != "control" or world.locations[b] != "control":
        raise ProtocolError(f"pair {pair} is not in the control cavity")
    ch = UniformChooser(np.full(SLOTS_PER_PAIR, rng.random())) if isinstance(rng, np.random.Generator) else rng
    if isinstance(world, AbstractState):
        excited = tuple(sorted(pair)) in world.charged
    else:
        excited = world.pair_excitation(pair) > 1 - 1e-12
    return _s_jump(ch, excited, det, config)


def _abstract_step(world: AbstractState, pair, key: PairSplitting, det, config, ch):
    world, emissions = move_pair_abstract(world, pair, det, ch, config)
    event = PairTrialEvent(pair, key.partner(pair[0]) == pair[1], emissions)
    if event.movement_click and config.early_exit:
        return world, event
    key_pair = tuple(sorted(pair))
    click = _s_jump(ch, key_pair in world.charged, det, config)
    world = replace(world, charged=world.charged - {key_pair})
    return world, replace(event, s_jump_click=click)


# ---------------------------------------------------------------- exact mode


@dataclass(frozen=True)
class ExactState:
    """Atomic state vector in a fixed-excitation sector, plus atom locations."""

    n_atoms: int
    m: int
    amplitudes: np.ndarray
    locations: tuple[str, ...]

    @classmethod
    def from_lock(cls, lock: LockInstance) -> "ExactState":
        psi = lock.state
        return cls(lock.n_atoms, psi.space.sector, psi.amplitudes.copy(), lock.locations())

    @property
    def space(self) -> Space:
        return Space(self.n_atoms, 0, self.m)

    def vector(self) -> StateVector:
        return StateVector(self.space, self.amplitudes)

    def config_probabilities(self, pair: tuple[int, int]) -> np.ndarray:
        """Probabilities of the pair's bits being 00, 01, 10, 11."""
        sp = self.space
        wa, wb = sp.bit_weight(pair[0]), sp.bit_weight(pair[1])
        idx = ((sp.codes & wa) != 0) * 2 + ((sp.codes & wb) != 0)
        return np.bincount(idx, weights=np.abs(self.amplitudes) ** 2, minlength=4)

    def pair_excitation(self, pair: tuple[int, int]) -> float:
        return float(self.config_probabilities(pair)[1:].sum())


@dataclass(frozen=True)
class ExactMove:
    emission_probability: float
    exit_hazard: np.ndarray
    entry_hazard: np.ndarray
    post_state: ExactState


class _ExactEngine:
    """Lowering matrices per sector and memoised hazard sweeps for one lock."""

    def __init__(self, lock: LockInstance, det: DetectorModel, config: ProtocolConfig):
        if lock.n_atoms > EXACT_MAX_ATOMS:
            raise ProtocolError(f"exact mode supports at most {EXACT_MAX_ATOMS} atoms, got {lock.n_atoms}")
        self.n = lock.n_atoms
        self.g_main = lock.main.couplings()
        self.g_ctrl = lock.control.couplings()
        self.det = det
        self.config = config
        self._per_atom: dict[int, np.ndarray] = {}
        self._memo: dict = {}
        tau = np.linspace(0.0, 1.0, config.n_steps + 1)
        # fraction of each moving atom's coupling that is still in the cavity being left
        sync = 1 - tau
        self.profiles = {
            False: (sync, sync),
            True: (np.clip(1 - 2 * tau, 0, 1), np.clip(2 - 2 * tau, 0, 1)),  # second atom waits for the first
        }

    def lowering(self, m: int) -> np.ndarray:
        """(N, d_{m-1}, d_m) stack of single-atom lowering matrices."""
        if m not in self._per_atom:
            space = Space(self.n, 0, m)
            mats = []
            for i in range(self.n):
                e = np.zeros(self.n)
                e[i] = 1.0
                mats.append(collective_lowering(e, space)[0])
            self._per_atom[m] = np.array(mats)
        return self._per_atom[m]

    def schedule(self, phase: str, world: ExactState, pair, asynchronous: bool = False) -> np.ndarray:
        """(n_steps+1, N) couplings of every atom to the cavity that is being left or entered."""
        a, b = pair
        s_a, s_b = self.profiles[asynchronous]
        steps = self.config.n_steps + 1
        C = np.zeros((steps, self.n))
        cavity = "main" if phase == "exit" else "control"
        g = self.g_main if phase == "exit" else self.g_ctrl
        for i, where in enumerate(world.locations):
            if where == cavity and i not in pair:
                C[:, i] = g[i]
        if phase == "exit":
            C[:, a] = g[a] * s_a
            C[:, b] = g[b] * s_b
        else:
            C[:, a] = g[a] * (1 - s_a)
            C[:, b] = g[b] * (1 - s_b)
        return C

    def sweep(self, C: np.ndarray, m: int, psi: np.ndarray):
        """Bright weight of psi along the schedule, plus the data needed at the peak."""
        key = (C.tobytes(), m, psi.tobytes())
        if key in self._memo:
            return self._memo[key]
        if m == 0:
            out = (np.zeros(len(C)), None, None)
        else:
            M = np.einsum("kn,nxy->kxy", C, self.lowering(m))
            _, s, vh = np.linalg.svd(M, full_matrices=False)
            smax = s.max(axis=1, keepdims=True)
            live = s > RANK_RTOL * np.where(smax > 0, smax, 1.0)
            proj = np.einsum("kry,y->kr", vh, psi)
            hazard = np.sum(np.abs(proj) ** 2 * live, axis=1)
            k = int(np.argmax(hazard))
            out = (np.clip(hazard, 0.0, 1.0), M[k], vh[k][live[k]])
        self._memo[key] = out
        return out

    def phase(self, ch, world: ExactState, pair, phase: str, asynchronous: bool) -> tuple[ExactState, Emission | None, np.ndarray]:
        C = self.schedule(phase, world, pair, asynchronous)
        hazard, M, bright = self.sweep(C, world.m, world.amplitudes)
        p = float(hazard.max())
        slot, route_slot, location = (
            (_EXIT, _EXIT_ROUTE, "main") if phase == "exit" else (_ENTRY, _ENTRY_ROUTE, "control")
        )
        if p <= 0 or ch.pick(slot, [p, 1 - p]) == 1:
            psi = world.amplitudes
            if p > 0:
                psi = psi - bright.conj().T @ (bright @ psi)
                psi = psi / np.linalg.norm(psi)
            return replace(world, amplitudes=psi), None, hazard
        psi = M @ world.amplitudes
        psi = psi / np.linalg.norm(psi)
        emission = _route(ch, route_slot, location, self.det)
        return replace(world, m=world.m - 1, amplitudes=psi.astype(np.complex128)), emission, hazard

    def move(self, ch, world: ExactState, pair, asynchronous: bool | None = None):
        if asynchronous is None:
            eps = self.det.asynchrony_epsilon
            asynchronous = ch.pick(_ASYNC, [eps, 1 - eps]) == 0
        world, e_exit, h_exit = self.phase(ch, world, pair, "exit", asynchronous)
        locations = list(world.locations)
        locations[pair[0]] = locations[pair[1]] = "transit"
        world = replace(world, locations=tuple(locations))
        world, e_entry, h_entry = self.phase(ch, world, pair, "entry", asynchronous)
        locations[pair[0]] = locations[pair[1]] = "control"
        world = replace(world, locations=tuple(locations))
        emissions = tuple(e for e in (e_exit, e_entry) if e is not None)
        return world, emissions, h_exit, h_entry

    def s_jump(self, ch, world: ExactState, pair) -> tuple[ExactState, bool]:
        """Measure the pair's configuration, drain it to ground, click if it held energy."""
        probs = world.config_probabilities(pair)
        outcome = ch.pick(_CONFIG, list(probs))
        sp = world.space
        wa, wb = sp.bit_weight(pair[0]), sp.bit_weight(pair[1])
        bits = ((sp.codes & wa) != 0) * 2 + ((sp.codes & wb) != 0)
        keep = bits == outcome
        drained = bin(outcome).count("1")
        new_space = Space(self.n, 0, world.m - drained)
        psi = np.zeros(new_space.dim, dtype=np.complex128)
        codes = sp.codes[keep] & ~(wa | wb)
        psi[new_space.lookup(codes)] = world.amplitudes[keep]
        psi /= np.linalg.norm(psi)
        click = _s_jump(ch, drained > 0, self.det, self.config)
        return ExactState(self.n, new_space.sector, psi, world.locations), click


def move_pair_exact(
    lock: LockInstance,
    world: ExactState,
    pair: tuple[int, int],
    det: DetectorModel | None = None,
    config: ProtocolConfig | None = None,
) -> ExactMove:
    """Emission probability of one pair move and the synchronous state conditioned on silence.

    With asynchrony probability eps the pair moves one atom after the other;
    the returned probability mixes both schedules.
    """
    det = det or DetectorModel()
    engine = _ExactEngine(lock, det, config or ProtocolConfig())
    silent = UniformChooser(np.ones(SLOTS_PER_PAIR))  # u = 1 always takes the no-emission branch
    probs = {}
    for asynchronous in (False, True):
        post, _, h_exit, h_entry = engine.move(silent, world, tuple(pair), asynchronous)
        probs[asynchronous] = 1 - (1 - h_exit.max()) * (1 - h_entry.max())
        if not asynchronous:
            result = (h_exit, h_entry, post)
    eps = det.asynchrony_epsilon
    p = (1 - eps) * probs[False] + eps * probs[True]
    return ExactMove(float(p), *result)


def _exact_step(engine: _ExactEngine, world: ExactState, pair, key: PairSplitting, config, ch):
    world, emissions, _, _ = engine.move(ch, world, pair)
    event = PairTrialEvent(pair, key.partner(pair[0]) == pair[1], emissions)
    if event.movement_click and config.early_exit:
        return world, event
    world, click = engine.s_jump(ch, world, pair)
    return world, replace(event, s_jump_click=click)


# ---------------------------------------------------------------- driver


def _pair_order(lock: LockInstance, password: PairSplitting, order) -> list[tuple[int, int]]:
    if password.n_atoms != lock.n_atoms or not password.complete:
        raise ProtocolError(f"password must pair all {lock.n_atoms} atoms of the lock")
    if order is None:
        return list(password.pairs)
    pairs = [tuple(sorted(map(int, p))) for p in order]
    if sorted(pairs) != list(password.pairs):
        raise ProtocolError("pair order does not list the password's pairs")
    return pairs


def _stepper(lock, det, mode, config) -> tuple[object, Callable]:
    if mode == "abstract":
        return AbstractState.from_lock(lock), lambda w, pair, ch: _abstract_step(w, pair, lock.key, det, config, ch)
    if mode == "exact":
        engine = _ExactEngine(lock, det, config)
        return ExactState.from_lock(lock), lambda w, pair, ch: _exact_step(engine, w, pair, lock.key, config, ch)
    raise ProtocolError(f"unknown mode {mode!r}; expected one of {MODES}")


def verify(
    lock: LockInstance,
    password: PairSplitting,
    det: DetectorModel | None = None,
    mode: str = "abstract",
    seed: int = 0,
    config: ProtocolConfig | None = None,
    order: Sequence[Sequence[int]] | None = None,
) -> VerifyResult:
    """Run the protocol once.  Deterministic in (lock, password, det, mode, seed, config)."""
    det = det or DetectorModel()
    config = config or ProtocolConfig()
    pairs = _pair_order(lock, password, order)
    world, step = _stepper(lock, det, mode, config)
    uniforms = rngmod.stream(seed, "verify").random((len(pairs), SLOTS_PER_PAIR))
    events = []
    rejecting = None
    for k, pair in enumerate(pairs):
        world, event = step(world, pair, UniformChooser(uniforms[k]))
        events.append(event)
        if not event.passed and rejecting is None:
            rejecting = k
            if config.early_exit:
                break
    decision = "accept" if rejecting is None else "reject"
    return VerifyResult(decision, mode, int(seed), tuple(events), rejecting)


@dataclass(frozen=True)
class OutcomeProbabilities:
    accept: float
    reject: float

    @property
    def pruned(self) -> float:
        return max(0.0, 1.0 - self.accept - self.reject)


def outcome_probabilities(
    lock: LockInstance,
    password: PairSplitting,
    det: DetectorModel | None = None,
    mode: str = "abstract",
    config: ProtocolConfig | None = None,
    order: Sequence[Sequence[int]] | None = None,
    prune: float | None = None,
) -> OutcomeProbabilities:
    """Exact accept/reject probabilities by walking the whole event tree."""
    det = det or DetectorModel()
    config = replace(config or ProtocolConfig(), early_exit=True)
    pairs = _pair_order(lock, password, order)
    world, step = _stepper(lock, det, mode, config)
    if prune is None:
        prune = 0.0 if mode == "abstract" else PRUNE

    def walk(w, k: int, weight: float) -> tuple[float, float]:
        if k == len(pairs):
            return weight, 0.0
        acc = rej = 0.0
        for p, (w2, event) in enumerate_branches(lambda ch: step(w, pairs[k], ch), prune):
            if event.passed:
                a, r = walk(w2, k + 1, weight * p)
                acc, rej = acc + a, rej + r
            else:
                rej += weight * p
        return acc, rej

    acc, rej = walk(world, 0, 1.0)
    return OutcomeProbabilities(acc, rej)


def acceptance_probability(lock, password, det=None, mode="abstract", config=None, order=None) -> float:
    return outcome_probabilities(lock, password, det, mode, config, order).accept


def password_file_order(data: dict) -> list[tuple[int, int]]:
    """Pairs in the order they appear in a password JSON document."""
    return [tuple(sorted((int(i), int(j)))) for i, j in data["pairs"]]


def unrecoverable_probability(det: DetectorModel, config: ProtocolConfig | None = None) -> float:
    """Chance that an asynchrony emission from a correct pair ends its trial.

    The emitting pair has lost its excitation, so the S-jump check cannot
    click whether or not the photon was seen: the trial is always lost.
    """
    return 1.0


def analytic_false_reject(n_atoms: int, det: DetectorModel, config: ProtocolConfig | None = None) -> float:
    """1 - P(every correct pair survives movement and clicks in the S-jump check)."""
    config = config or ProtocolConfig()
    eps = det.asynchrony_epsilon
    q = config.switch_bright_fraction * det.eta2
    p_click = 1 - (1 - q) ** config.max_switchings
    per_pair = (1 - eps * unrecoverable_probability(det, config)) * p_click
    return 1 - per_pair ** (n_atoms // 2)
