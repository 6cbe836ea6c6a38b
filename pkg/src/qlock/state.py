"""Basis bookkeeping and state vectors for one cavity mode plus N two-level atoms.

Canonical ordering is photon-major, then the atomic bits read as a
big-endian integer: atom at position 0 is the most significant bit.  Every
basis state therefore has a *code* ``n * 2**N + bits`` and a space's basis is
the ascending list of the codes it contains.  A sector restricts the space to
one total excitation ``n + popcount(bits)``.

A ``photon_cutoff`` of 0 means the space carries no photon register (pure
atomic states).  Per-atom arrays (couplings, detunings) elsewhere in the
package are indexed by atom *label*, which defaults to ``range(n_atoms)``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from math import comb
from typing import NamedTuple, Sequence

import numpy as np

NORM_TOL = 1e-10


class SpaceError(ValueError):
    """Basis state or vector does not belong to the space it is used with."""


@dataclass(frozen=True)
class BasisState:
    photon_count: int
    atomic_bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "atomic_bits", tuple(int(b) for b in self.atomic_bits))
        if self.photon_count < 0:
            raise SpaceError("photon_count must be non-negative")
        if any(b not in (0, 1) for b in self.atomic_bits):
            raise SpaceError("atomic bits must be 0 or 1")

    @property
    def excitation(self) -> int:
        return self.photon_count + sum(self.atomic_bits)

    def __str__(self):
        return f"|{self.photon_count},{''.join(map(str, self.atomic_bits))}>"


def _bits_with_popcount(n_atoms: int, k: int) -> np.ndarray:
    if k < 0 or k > n_atoms:
        return np.zeros(0, dtype=np.int64)
    if n_atoms <= 22:
        allbits = np.arange(1 << n_atoms, dtype=np.int64)
        return allbits[np.bitwise_count(allbits) == k]
    out = np.empty(comb(n_atoms, k), dtype=np.int64)
    weights = [1 << (n_atoms - 1 - p) for p in range(n_atoms)]
    for idx, chosen in enumerate(itertools.combinations(range(n_atoms), k)):
        out[idx] = sum(weights[p] for p in chosen)
    out.sort()
    return out


@dataclass(frozen=True)
class Space:
    """Hilbert space descriptor: full truncated space or one excitation sector."""

    n_atoms: int
    photon_cutoff: int = 0
    sector: int | None = None
    labels: tuple[int, ...] | None = field(default=None, compare=True)

    def __post_init__(self):
        if self.n_atoms < 0 or self.photon_cutoff < 0:
            raise SpaceError("n_atoms and photon_cutoff must be non-negative")
        if self.sector is not None and not 0 <= self.sector <= self.n_atoms + self.photon_cutoff:
            raise SpaceError(f"sector {self.sector} is empty for this space")
        labels = tuple(range(self.n_atoms)) if self.labels is None else tuple(int(x) for x in self.labels)
        if len(labels) != self.n_atoms or len(set(labels)) != len(labels):
            raise SpaceError("labels must be distinct, one per atom")
        object.__setattr__(self, "labels", labels)

    @functools.cached_property
    def codes(self) -> np.ndarray:
        block = 1 << self.n_atoms
        if self.sector is None:
            codes = np.arange((self.photon_cutoff + 1) * block, dtype=np.int64)
        else:
            parts = []
            for n in range(min(self.sector, self.photon_cutoff) + 1):
                parts.append(n * block + _bits_with_popcount(self.n_atoms, self.sector - n))
            codes = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        codes.setflags(write=False)
        return codes

    @property
    def dim(self) -> int:
        return len(self.codes)

    @property
    def photons(self) -> np.ndarray:
        return self.codes >> self.n_atoms

    @property
    def bits(self) -> np.ndarray:
        return self.codes & ((1 << self.n_atoms) - 1)

    @property
    def excitations(self) -> np.ndarray:
        return self.photons + np.bitwise_count(self.bits)

    @property
    def has_photon_register(self) -> bool:
        return self.photon_cutoff > 0

    def position(self, label: int) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise SpaceError(f"atom {label} is not part of this space") from None

    def bit_weight(self, label: int) -> int:
        return 1 << (self.n_atoms - 1 - self.position(label))

    def with_sector(self, sector: int | None) -> "Space":
        return Space(self.n_atoms, self.photon_cutoff, sector, self.labels)

    def lookup(self, codes: np.ndarray) -> np.ndarray:
        """Indices of ``codes`` in this space; -1 where a code is absent."""
        codes = np.asarray(codes, dtype=np.int64)
        own = self.codes
        idx = np.searchsorted(own, codes)
        idx_c = np.minimum(idx, max(len(own) - 1, 0))
        found = (idx < len(own)) & (own[idx_c] == codes) if len(own) else np.zeros(codes.shape, bool)
        return np.where(found, idx_c, -1)

    def basis(self) -> list[BasisState]:
        return [index_to_basis(i, self) for i in range(self.dim)]


def sector_dimension(n_atoms: int, photon_cutoff: int, m: int) -> int:
    return sum(comb(n_atoms, m - k) for k in range(min(m, photon_cutoff) + 1) if 0 <= m - k <= n_atoms)


def _code(b: BasisState, space: Space) -> int:
    if len(b.atomic_bits) != space.n_atoms:
        raise SpaceError(f"expected {space.n_atoms} atomic bits, got {len(b.atomic_bits)}")
    if b.photon_count > space.photon_cutoff:
        raise SpaceError(f"photon count {b.photon_count} exceeds cutoff {space.photon_cutoff}")
    bits = 0
    for bit in b.atomic_bits:
        bits = (bits << 1) | bit
    return (b.photon_count << space.n_atoms) | bits


def basis_index(b: BasisState, space: Space) -> int:
    code = _code(b, space)
    idx = int(space.lookup(np.array([code]))[0])
    if idx < 0:
        raise SpaceError(f"{b} is not in sector {space.sector}")
    return idx


def index_to_basis(index: int, space: Space) -> BasisState:
    if not 0 <= index < space.dim:
        raise SpaceError(f"index {index} out of range for dimension {space.dim}")
    code = int(space.codes[index])
    n = code >> space.n_atoms
    bits = code & ((1 << space.n_atoms) - 1)
    return BasisState(n, tuple((bits >> (space.n_atoms - 1 - p)) & 1 for p in range(space.n_atoms)))


def lowering_map(space: Space, label: int, out_space: Space) -> tuple[np.ndarray, np.ndarray]:
    """Source/target index pairs for sigma_label (atom lowering) from ``space`` to ``out_space``.

    Only basis states with the atom excited contribute; the amplitude is 1.
    """
    w = space.bit_weight(label)
    src = np.nonzero(space.codes & w)[0]
    dst = out_space.lookup(space.codes[src] - w)
    if np.any(dst < 0):
        raise SpaceError("lowered states fall outside the output space")
    return src, dst


@dataclass(frozen=True, eq=False)
class StateVector:
    space: Space
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.space.dim,):
            raise SpaceError(f"expected {self.space.dim} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, space: Space, b: BasisState) -> "StateVector":
        amps = np.zeros(space.dim, dtype=np.complex128)
        amps[basis_index(b, space)] = 1.0
        return cls(space, amps)

    @classmethod
    def from_terms(cls, space: Space, terms: dict) -> "StateVector":
        """Build from ``{(photons, bits): amplitude}``; bits given as a string or sequence."""
        amps = np.zeros(space.dim, dtype=np.complex128)
        for (n, bits), amp in terms.items():
            if isinstance(bits, str):
                bits = [int(c) for c in bits]
            amps[basis_index(BasisState(n, tuple(bits)), space)] += amp
        return cls(space, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        nrm = self.norm()
        if nrm == 0:
            raise SpaceError("cannot normalize the zero vector")
        return StateVector(self.space, self.amplitudes / nrm)

    def amplitude(self, b: BasisState) -> complex:
        return complex(self.amplitudes[basis_index(b, self.space)])

    def embed(self, target: Space) -> "StateVector":
        """Re-express in a larger (or equal) space with the same atoms."""
        if target.labels != self.space.labels:
            raise SpaceError("embedding requires the same atom labels")
        idx = target.lookup(self.space.codes)
        keep = self.amplitudes != 0
        if np.any(idx[keep] < 0):
            raise SpaceError("state has weight outside the target space")
        amps = np.zeros(target.dim, dtype=np.complex128)
        amps[idx[keep]] = self.amplitudes[keep]
        return StateVector(target, amps)

    def reorder(self, labels: Sequence[int]) -> "StateVector":
        """Permute atom positions so that the space lists ``labels`` in order."""
        labels = tuple(labels)
        if sorted(labels) != sorted(self.space.labels):
            raise SpaceError("reorder needs a permutation of the existing labels")
        sp = self.space
        new = Space(sp.n_atoms, sp.photon_cutoff, sp.sector, labels)
        bits = sp.bits
        newbits = np.zeros_like(bits)
        for label in labels:
            newbits |= np.where(bits & sp.bit_weight(label), new.bit_weight(label), 0)
        idx = new.lookup((sp.photons << sp.n_atoms) | newbits)
        amps = np.zeros(new.dim, dtype=np.complex128)
        amps[idx] = self.amplitudes
        return StateVector(new, amps)

    def to_json(self) -> dict:
        return {
            "n_atoms": self.space.n_atoms,
            "photon_cutoff": self.space.photon_cutoff,
            "sector": self.space.sector,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json(cls, data: dict) -> "StateVector":
        space = Space(int(data["n_atoms"]), int(data["photon_cutoff"]), data.get("sector"))
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]], dtype=np.complex128)
        return cls(space, amps)

    def __repr__(self):
        nz = np.flatnonzero(np.abs(self.amplitudes) > 1e-12)
        shown = " + ".join(f"({self.amplitudes[i]:.4g}){index_to_basis(int(i), self.space)}" for i in nz[:8])
        more = " + ..." if len(nz) > 8 else ""
        return f"StateVector[{self.space.n_atoms} atoms, cutoff {self.space.photon_cutoff}, sector {self.space.sector}]: {shown}{more}"


def _full_grid(psi: StateVector) -> np.ndarray:
    sp = psi.space
    grid = np.zeros((sp.photon_cutoff + 1) << sp.n_atoms, dtype=np.complex128)
    grid[sp.codes] = psi.amplitudes
    return grid.reshape(sp.photon_cutoff + 1, 1 << sp.n_atoms)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Tensor product; atoms of ``a`` precede atoms of ``b`` in the result."""
    if set(a.space.labels) & set(b.space.labels):
        raise SpaceError("tensor factors share atom labels")
    if a.space.has_photon_register and b.space.has_photon_register:
        raise SpaceError("at most one factor may carry the photon register")
    A, B = _full_grid(a), _full_grid(b)
    if b.space.has_photon_register:
        grid = np.einsum("i,nj->nij", A[0], B)
    else:
        grid = np.einsum("ni,j->nij", A, B[0])
    cutoff = max(a.space.photon_cutoff, b.space.photon_cutoff)
    labels = a.space.labels + b.space.labels
    full = Space(len(labels), cutoff, None, labels)
    out = StateVector(full, grid.reshape(-1))
    if a.space.sector is not None and b.space.sector is not None:
        return out.embed(full.with_sector(a.space.sector + b.space.sector))
    return out


class Projection(NamedTuple):
    state: StateVector | None
    probability: float

    @property
    def empty(self) -> bool:
        return self.state is None


def project_photon_number(psi: StateVector, n: int) -> Projection:
    """Condition on finding ``n`` photons; returns the renormalised atomic state."""
    sp = psi.space
    if not 0 <= n <= sp.photon_cutoff:
        raise SpaceError(f"photon number {n} outside 0..{sp.photon_cutoff}")
    mask = sp.photons == n
    prob = float(np.sum(np.abs(psi.amplitudes[mask]) ** 2))
    if prob == 0.0:
        return Projection(None, 0.0)
    sector = None if sp.sector is None else sp.sector - n
    atoms = Space(sp.n_atoms, 0, sector, sp.labels)
    amps = np.zeros(atoms.dim, dtype=np.complex128)
    amps[atoms.lookup(sp.bits[mask])] = psi.amplitudes[mask]
    return Projection(StateVector(atoms, amps / np.sqrt(prob)), prob)


def inner_product(a: StateVector, b: StateVector) -> complex:
    if a.space != b.space:
        raise SpaceError("inner product of states from different spaces")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def excitation_number(psi: StateVector) -> float:
    probs = np.abs(psi.amplitudes) ** 2
    return float(np.dot(probs, psi.space.excitations) / probs.sum())
