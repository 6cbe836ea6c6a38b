"""Dark states of the collective lowering operator and pair-splitting singlets.

A state is dark when ``sum_i g_i sigma_i`` annihilates it: the ensemble has
no amplitude to hand an excitation to the cavity mode.  Products of pair
singlets ``g_i|0_i 1_j> - g_j|1_i 0_j>`` are the canonical dark states; the
pairing is the secret of the lock.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.linalg

from qlock.hamiltonian import ModelParams, build_hamiltonian
from qlock.state import Space, SpaceError, StateVector, lowering_map

DARK_TOL = 1e-10
RANK_RTOL = 1e-10


class SplittingError(ValueError):
    """Pairs overlap, reference unknown atoms, or do not cover the ensemble."""


@dataclass(frozen=True)
class PairSplitting:
    """A matching of atom indices into unordered pairs (0-based indices).

    Stored canonically: ``i < j`` inside a pair, pairs sorted by first index.
    """

    n_atoms: int
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple(sorted(tuple(sorted((int(i), int(j)))) for i, j in self.pairs))
        seen: set[int] = set()
        for i, j in pairs:
            if i == j:
                raise SplittingError(f"pair ({i}, {j}) repeats an atom")
            if not (0 <= i < self.n_atoms and 0 <= j < self.n_atoms):
                raise SplittingError(f"pair ({i}, {j}) outside 0..{self.n_atoms - 1}")
            if i in seen or j in seen:
                raise SplittingError(f"atom in pair ({i}, {j}) already paired")
            seen.update((i, j))
        object.__setattr__(self, "pairs", pairs)

    @property
    def complete(self) -> bool:
        return 2 * len(self.pairs) == self.n_atoms

    def partner(self, atom: int) -> int | None:
        for i, j in self.pairs:
            if atom == i:
                return j
            if atom == j:
                return i
        return None

    def partner_map(self) -> dict[int, int]:
        out = {}
        for i, j in self.pairs:
            out[i], out[j] = j, i
        return out

    def unmatched(self) -> list[int]:
        used = {a for p in self.pairs for a in p}
        return [a for a in range(self.n_atoms) if a not in used]

    @classmethod
    def random(cls, n_atoms: int, rng: np.random.Generator) -> "PairSplitting":
        """Uniform perfect matching: shuffle, then pair consecutive entries."""
        if n_atoms < 2 or n_atoms % 2:
            raise SplittingError(f"a complete splitting needs an even number of atoms >= 2, got {n_atoms}")
        order = rng.permutation(n_atoms)
        return cls(n_atoms, tuple((int(order[k]), int(order[k + 1])) for k in range(0, n_atoms, 2)))

    def to_json(self) -> dict:
        return {"n_atoms": self.n_atoms, "pairs": [list(p) for p in self.pairs]}

    @classmethod
    def from_json(cls, data: dict) -> "PairSplitting":
        return cls(int(data["n_atoms"]), tuple((int(i), int(j)) for i, j in data["pairs"]))


def collective_lowering(g: Sequence[float], space: Space) -> tuple[np.ndarray, Space]:
    """Matrix of sum_i g_i sigma_i on ``space`` and the space it maps into.

    ``g`` is indexed by atom label.  The photon register is left untouched.
    A sector-m space maps to the sector m-1 space (empty at m = 0).
    """
    g = np.asarray(g, dtype=float)
    if space.labels and max(space.labels) >= len(g):
        raise SpaceError(f"{len(g)} couplings given for atom labels {space.labels}")
    if space.sector is None:
        out = space
    elif space.sector == 0:
        return np.zeros((0, space.dim)), space
    else:
        out = space.with_sector(space.sector - 1)
    M = np.zeros((out.dim, space.dim))
    for label in space.labels:
        if g[label] == 0:
            continue
        src, dst = lowering_map(space, label, out)
        M[dst, src] += g[label]
    return M, out


def apply_lowering(psi: StateVector, g: Sequence[float]) -> np.ndarray:
    M, _ = collective_lowering(g, psi.space)
    return M @ psi.amplitudes


def apply_raising(psi: StateVector, g: Sequence[float]) -> np.ndarray:
    """sum_i g_i sigma_i^+ applied to an atomic state within the full atomic register."""
    sp = psi.space
    if sp.sector is None:
        M, _ = collective_lowering(g, sp)
        return M.T @ psi.amplitudes
    up = sp.with_sector(sp.sector + 1) if sp.sector < sp.n_atoms + sp.photon_cutoff else None
    if up is None:
        return np.zeros(0, dtype=complex)
    M, _ = collective_lowering(g, up)
    return M.T @ psi.amplitudes


class DarkCheck(NamedTuple):
    dark: bool
    residual: float


def is_dark(psi: StateVector, g: Sequence[float], tol: float = DARK_TOL) -> DarkCheck:
    residual = float(np.linalg.norm(apply_lowering(psi, g)))
    return DarkCheck(residual <= tol * max(psi.norm(), 1.0), residual)


def singlet_pair(i: int, j: int, g: Sequence[float]) -> StateVector:
    """Normalised dark singlet of atoms (i, j): g_i|0_i 1_j> - g_j|1_i 0_j>.

    Equal to the product-of-couplings weights gamma_j, -gamma_i up to scale,
    since gamma_j / gamma_i = g_i / g_j.  Labels are kept in the given order.
    """
    gi, gj = float(g[i]), float(g[j])
    if gi <= 0 or gj <= 0:
        raise SplittingError(f"singlet of ({i}, {j}) needs positive couplings, got {gi}, {gj}")
    space = Space(2, 0, 1, (i, j))
    nrm = np.hypot(gi, gj)
    # sector order: |01> then |10>
    return StateVector(space, np.array([gi / nrm, -gj / nrm]))


def splitting_state(K: PairSplitting, g: Sequence[float], include_spectators: bool = True) -> StateVector:
    """Tensor product of pair singlets; unmatched atoms in |0> when included."""
    g = np.asarray(g, dtype=float)
    if len(g) < K.n_atoms:
        raise SpaceError(f"{len(g)} couplings for {K.n_atoms} atoms")
    labels = tuple(range(K.n_atoms)) if include_spectators else tuple(sorted(a for p in K.pairs for a in p))
    space = Space(len(labels), 0, len(K.pairs), labels)
    codes = np.zeros(1, dtype=np.int64)
    amps = np.ones(1, dtype=np.complex128)
    for i, j in K.pairs:
        s = singlet_pair(i, j, g).amplitudes
        wi, wj = space.bit_weight(i), space.bit_weight(j)
        codes = np.concatenate([codes + wj, codes + wi])
        amps = np.concatenate([amps * s[0], amps * s[1]])
    out = np.zeros(space.dim, dtype=np.complex128)
    out[space.lookup(codes)] = amps
    return StateVector(space, out)


def atomic_sector(n_atoms: int, m: int) -> Space:
    return Space(n_atoms, 0, m)


def dark_basis(g: Sequence[float], n_atoms: int, m: int) -> np.ndarray:
    """Orthonormal columns spanning Ker(sigma-bar) in the m-excitation atomic sector."""
    space = atomic_sector(n_atoms, m)
    M, _ = collective_lowering(np.asarray(g, float)[:n_atoms], space)
    if M.shape[0] == 0:
        return np.eye(space.dim)
    return scipy.linalg.null_space(M, rcond=RANK_RTOL)


def dark_dimension(g: Sequence[float], n_atoms: int, m: int) -> int:
    if not 0 <= m <= n_atoms:
        raise ValueError(f"excitation {m} outside 0..{n_atoms}")
    space = atomic_sector(n_atoms, m)
    M, _ = collective_lowering(np.asarray(g, float)[:n_atoms], space)
    if M.size == 0:
        return space.dim
    s = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(s > RANK_RTOL * s.max())) if s.size and s.max() > 0 else 0
    return space.dim - rank


class EigenCheck(NamedTuple):
    eigen: bool
    eigenvalue: float
    residual: float
    dark_residual: float


def is_dark_eigenstate(psi_at: StateVector, params: ModelParams, tol: float = DARK_TOL) -> EigenCheck:
    """Check that psi_at (x) |0>_photon is an eigenvector of the TC Hamiltonian."""
    sp = psi_at.space
    if sp.has_photon_register:
        raise SpaceError("expected an atomic state without photon register")
    g = params.couplings()
    dark_res = is_dark(psi_at, g, tol).residual
    cutoff = max(sp.sector or 0, 1)
    with_photon = Space(sp.n_atoms, cutoff, sp.sector, sp.labels)
    vec = psi_at.embed(with_photon)
    Hv = build_hamiltonian(params, with_photon) @ vec.amplitudes
    E = float(np.real(np.vdot(vec.amplitudes, Hv)) / vec.norm() ** 2)
    residual = float(np.linalg.norm(Hv - E * vec.amplitudes))
    return EigenCheck(residual <= tol * max(1.0, abs(E)), E, residual, dark_res)


def perfect_matchings(items: Iterable[int]) -> Iterable[tuple[tuple[int, int], ...]]:
    """Every perfect matching of ``items``, by pairing the first item recursively."""
    items = list(items)
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for k, other in enumerate(rest):
        for tail in perfect_matchings(rest[:k] + rest[k + 1 :]):
            yield ((first, other),) + tail


def all_splittings(n_atoms: int) -> list[PairSplitting]:
    return [PairSplitting(n_atoms, m) for m in perfect_matchings(range(n_atoms))]


def bright_fraction(psi: StateVector, g: Sequence[float]) -> float:
    """Weight of psi outside Ker(sigma-bar): the part that can hand its excitation to the mode."""
    M, _ = collective_lowering(g, psi.space)
    if M.size == 0:
        return 0.0
    _, s, vh = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s.max() == 0:
        return 0.0
    proj = vh[s > RANK_RTOL * s.max()] @ psi.amplitudes
    return float(np.sum(np.abs(proj) ** 2) / psi.norm() ** 2)
