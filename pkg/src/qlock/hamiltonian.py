"""Tavis-Cummings Hamiltonian with per-atom Stark detunings, and unitary evolution.

Units: hbar = 1, energies and frequencies share the unit of ``omega``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from qlock.state import Space, SpaceError, StateVector, excitation_number, lowering_map

__all__ = [
    "AtomConfig",
    "CavityParams",
    "ModelParams",
    "Propagator",
    "RWAWarning",
    "build_hamiltonian",
    "coupling_strength",
    "evolve",
    "excitation_number",
    "excitation_operator",
    "tc_matrix",
]

RWA_RATIO = 0.1


class RWAWarning(UserWarning):
    """Coupling is not small compared to omega, so the rotating-wave model is questionable."""


@dataclass(frozen=True)
class CavityParams:
    omega: float = 1.0
    L: float = 1.0
    V: float = 1.0
    d_a: float = 1.0

    def __post_init__(self):
        for name in ("omega", "L", "V", "d_a"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class AtomConfig:
    x: float
    delta: float = 0.0
    g_override: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.delta):
            raise ValueError("delta must be finite")
        if self.g_override is not None and not (math.isfinite(self.g_override) and self.g_override >= 0):
            raise ValueError("g_override must be a finite non-negative number")


@dataclass(frozen=True)
class ModelParams:
    cavity: CavityParams = field(default_factory=CavityParams)
    atoms: tuple[AtomConfig, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not self.atoms:
            raise ValueError("ModelParams needs at least one atom")
        for atom in self.atoms:
            if atom.g_override is None and not 0 <= atom.x <= self.cavity.L:
                raise ValueError(f"atom position {atom.x} outside [0, L]")

    @classmethod
    def default(cls, n_atoms: int, cavity: CavityParams | None = None) -> "ModelParams":
        """Atoms evenly spaced on (0, L), endpoints excluded."""
        cavity = cavity or CavityParams()
        xs = [(i + 1) * cavity.L / (n_atoms + 1) for i in range(n_atoms)]
        return cls(cavity, tuple(AtomConfig(x) for x in xs))

    @classmethod
    def from_couplings(cls, g: Sequence[float], omega: float = 1.0, delta: Sequence[float] | None = None) -> "ModelParams":
        delta = [0.0] * len(g) if delta is None else list(delta)
        atoms = tuple(AtomConfig(0.5, d, float(gi)) for gi, d in zip(g, delta))
        return cls(CavityParams(omega=omega), atoms)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def omega(self) -> float:
        return self.cavity.omega

    @functools.cached_property
    def _couplings(self) -> np.ndarray:
        return np.array([coupling_strength(self, i) for i in range(self.n_atoms)])

    def couplings(self) -> np.ndarray:
        return self._couplings.copy()

    def detunings(self) -> np.ndarray:
        return np.array([a.delta for a in self.atoms])

    def subset(self, indices: Sequence[int]) -> "ModelParams":
        return replace(self, atoms=tuple(self.atoms[i] for i in indices))

    def replace_atom(self, index: int, **changes) -> "ModelParams":
        atoms = list(self.atoms)
        atoms[index] = replace(atoms[index], **changes)
        return replace(self, atoms=tuple(atoms))

    def check_rwa(self) -> bool:
        g = self.couplings()
        ok = bool(g.max(initial=0.0) < RWA_RATIO * self.omega)
        if not ok:
            warnings.warn(
                f"max coupling {g.max():.3g} >= {RWA_RATIO} * omega; weak-coupling regime violated",
                RWAWarning,
                stacklevel=2,
            )
        return ok

    def to_json(self) -> dict:
        c = self.cavity
        return {
            "omega": c.omega,
            "L": c.L,
            "V": c.V,
            "d_a": c.d_a,
            "atoms": [{"x": a.x, "delta": a.delta, "g_override": a.g_override} for a in self.atoms],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ModelParams":
        cavity = CavityParams(float(data["omega"]), float(data["L"]), float(data["V"]), float(data["d_a"]))
        atoms = []
        for a in data["atoms"]:
            g = a.get("g_override")
            atoms.append(AtomConfig(float(a["x"]), float(a.get("delta", 0.0)), None if g is None else float(g)))
        return cls(cavity, tuple(atoms))


def coupling_strength(params: ModelParams, atom_index: int) -> float:
    """g_i = sqrt(omega / V) * d_a * sin(pi x_i / L), unless overridden."""
    if not 0 <= atom_index < params.n_atoms:
        raise IndexError(f"atom index {atom_index} out of range")
    atom = params.atoms[atom_index]
    if atom.g_override is not None:
        return float(atom.g_override)
    c = params.cavity
    g = math.sqrt(c.omega / c.V) * c.d_a * math.sin(math.pi * atom.x / c.L)
    # sin(pi) is 1.2e-16, not 0
    return max(g, 0.0) if abs(g) > 1e-15 else 0.0


def tc_matrix(omega: float, g: np.ndarray, delta: np.ndarray, space: Space) -> np.ndarray:
    """Dense TC Hamiltonian over ``space``; ``g`` and ``delta`` are indexed by atom label."""
    if space.labels and max(space.labels) >= len(g):
        raise SpaceError("coupling array does not cover every atom label")
    dim = space.dim
    H = np.zeros((dim, dim), dtype=np.complex128)
    diag = omega * space.photons.astype(float)
    photons = space.photons
    for label in space.labels:
        w = space.bit_weight(label)
        excited = (space.codes & w) != 0
        diag = diag + excited * (omega + delta[label])
        if g[label] == 0 or not space.has_photon_register:
            continue
        # a^+ sigma_i : |n, 1_i> -> sqrt(n+1) |n+1, 0_i>
        src = np.nonzero(excited & (photons < space.photon_cutoff))[0]
        dst_codes = space.codes[src] - w + (1 << space.n_atoms)
        dst = space.lookup(dst_codes)
        ok = dst >= 0
        src, dst = src[ok], dst[ok]
        vals = g[label] * np.sqrt(photons[src] + 1.0)
        H[dst, src] += vals
        H[src, dst] += vals
    H[np.diag_indices(dim)] = diag
    return H


def build_hamiltonian(params: ModelParams, space: Space) -> np.ndarray:
    return tc_matrix(params.omega, params.couplings(), params.detunings(), space)


def excitation_operator(space: Space) -> np.ndarray:
    return np.diag(space.excitations.astype(float))


def lowering_operator(space: Space, label: int, out_space: Space | None = None) -> np.ndarray:
    out_space = out_space or space
    M = np.zeros((out_space.dim, space.dim))
    src, dst = lowering_map(space, label, out_space)
    M[dst, src] = 1.0
    return M


class Propagator:
    """exp(-iHt) by one Hermitian eigendecomposition, reusable over many times."""

    def __init__(self, H: np.ndarray):
        H = np.asarray(H)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("Hamiltonian must be a square matrix")
        # Removing the mean diagonal (a global phase) keeps eigenvector errors
        # at the scale of the couplings rather than of omega.
        self.shift = float(np.real(np.trace(H))) / max(H.shape[0], 1)
        rel, self.vectors = np.linalg.eigh(H - self.shift * np.eye(H.shape[0]))
        self.relative_energies = rel
        self.energies = rel + self.shift

    def coefficients(self, psi0: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ psi0

    def amplitudes(self, psi0: np.ndarray, t: float) -> np.ndarray:
        phases = np.exp(-1j * self.relative_energies * t) * np.exp(-1j * self.shift * t)
        return self.vectors @ (phases * self.coefficients(psi0))

    def overlaps(self, target: np.ndarray, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
        """<target| exp(-iHt) |psi0> for an array of times."""
        times = np.asarray(times, float)
        weights = (self.vectors.conj().T @ target).conj() * self.coefficients(psi0)
        rel = np.exp(-1j * np.outer(times, self.relative_energies)) @ weights
        return rel * np.exp(-1j * self.shift * times)


def evolve(H: np.ndarray, psi0: StateVector, t: float) -> StateVector:
    if H.shape != (psi0.space.dim, psi0.space.dim):
        raise SpaceError(f"Hamiltonian shape {H.shape} does not match state dimension {psi0.space.dim}")
    if t == 0:
        return psi0
    return StateVector(psi0.space, Propagator(H).amplitudes(psi0.amplitudes, t))
