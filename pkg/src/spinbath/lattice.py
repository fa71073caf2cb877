"""Diamond lattice geometry and random substitutional spin-bath generation.

The bath model is a cubic box of diamond with a central defect (the probe
spin) at the origin.  Substitutional impurity spins are placed on randomly
chosen carbon sites at a given concentration in ppm, and each spin carries
a frozen internal state: a nuclear projection m_I in {-1, 0, +1}, one of
four distortion axes along the <111> directions, and an electron projection
s = +/-1/2 used for static local-field sums.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError

# Conventional diamond cell: fcc lattice with a two-atom basis, 8 atoms per cell.
LATTICE_CONSTANT_NM = 0.3567
ATOMS_PER_CELL = 8
# Nearest-neighbor carbon spacing a*sqrt(3)/4; also the minimum approach distance
# enforced for continuum placement.
MIN_SPIN_DISTANCE_NM = 0.154

_CELL_BASIS = np.array(
    [
        [0.00, 0.00, 0.00],
        [0.00, 0.50, 0.50],
        [0.50, 0.00, 0.50],
        [0.50, 0.50, 0.00],
        [0.25, 0.25, 0.25],
        [0.25, 0.75, 0.75],
        [0.75, 0.25, 0.75],
        [0.75, 0.75, 0.25],
    ]
)


@dataclass(frozen=True)
class PhysicalConstants:
    """Physical constants in the unit system used throughout (rad/s, nm, s, T)."""

    gamma_e: float = 1.76085963e11  # electron gyromagnetic ratio, rad s^-1 T^-1
    hbar: float = 1.054571817e-34   # J s
    mu0: float = 1.25663706212e-6   # vacuum permeability, T m A^-1
    lattice_constant_nm: float = LATTICE_CONSTANT_NM

    @property
    def dipolar_prefactor(self) -> float:
        """(mu0 / 4 pi) * gamma_e^2 * hbar, in rad s^-1 nm^3.

        Sets the secular coupling scale J0 / r^3 between two electron spins.
        """
        return self.mu0 / (4.0 * np.pi) * self.gamma_e**2 * self.hbar * 1e27

    @property
    def diamond_atomic_density(self) -> float:
        """Carbon sites per nm^3 (8 atoms per conventional cell)."""
        return ATOMS_PER_CELL / self.lattice_constant_nm**3


DEFAULT_CONSTANTS = PhysicalConstants()


def ppm_to_number_density(concentration_ppm: float,
                          constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Convert an impurity concentration in ppm of carbon sites to spins per nm^3."""
    if concentration_ppm < 0:
        raise ValueError(f"concentration must be >= 0, got {concentration_ppm}")
    return concentration_ppm * 1e-6 * constants.diamond_atomic_density


def crystal_axes() -> np.ndarray:
    """The four <111> body-diagonal unit vectors, shape (4, 3).

    Any pair of distinct axes has dot product -1/3.  Row 0 is the conventional
    quantization (bias-field) axis.
    """
    axes = np.array(
        [
            [1.0, 1.0, 1.0],
            [1.0, -1.0, -1.0],
            [-1.0, 1.0, -1.0],
            [-1.0, -1.0, 1.0],
        ]
    )
    return axes / np.sqrt(3.0)


DEFAULT_QUANTIZATION_AXIS = crystal_axes()[0]


@dataclass(frozen=True)
class BathSpin:
    """A single bath spin: position relative to the probe, and frozen state."""

    position_nm: np.ndarray
    m_i: int
    jt_axis_index: int
    s: float

    @property
    def jt_axis(self) -> np.ndarray:
        return crystal_axes()[self.jt_axis_index]


@dataclass(frozen=True)
class BathConfiguration:
    """One random bath realization around a probe spin at the origin.

    Arrays are parallel over spins and are marked read-only after
    construction; configurations can be shared freely across workers.
    """

    positions_nm: np.ndarray      # (N, 3)
    m_i: np.ndarray               # (N,) in {-1, 0, +1}
    jt_axis_index: np.ndarray     # (N,) in {0..3}
    s: np.ndarray                 # (N,) in {-0.5, +0.5}
    concentration_ppm: float
    box_half_width_nm: float
    quantization_axis: np.ndarray
    rng_seed: int

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions_nm, dtype=float))
        if pos.size == 0:
            pos = pos.reshape(0, 3)
        object.__setattr__(self, "positions_nm", pos)
        object.__setattr__(self, "m_i", np.asarray(self.m_i, dtype=np.int64))
        object.__setattr__(self, "jt_axis_index", np.asarray(self.jt_axis_index, dtype=np.int64))
        object.__setattr__(self, "s", np.asarray(self.s, dtype=float))
        axis = np.asarray(self.quantization_axis, dtype=float)
        object.__setattr__(self, "quantization_axis", axis / np.linalg.norm(axis))
        n = self.positions_nm.shape[0]
        if not (self.m_i.shape == self.jt_axis_index.shape == self.s.shape == (n,)):
            raise ValueError("spin state arrays must match the number of positions")
        for arr in (self.positions_nm, self.m_i, self.jt_axis_index, self.s,
                    self.quantization_axis):
            arr.setflags(write=False)

    @property
    def n_spins(self) -> int:
        return self.positions_nm.shape[0]

    @property
    def volume_nm3(self) -> float:
        return (2.0 * self.box_half_width_nm) ** 3

    @property
    def jt_axes(self) -> np.ndarray:
        """Unit distortion axis per spin, shape (N, 3)."""
        return crystal_axes()[self.jt_axis_index]

    def spin(self, index: int) -> BathSpin:
        return BathSpin(
            position_nm=self.positions_nm[index],
            m_i=int(self.m_i[index]),
            jt_axis_index=int(self.jt_axis_index[index]),
            s=float(self.s[index]),
        )

    def to_dict(self) -> dict:
        return {
            "seed": int(self.rng_seed),
            "concentration_ppm": float(self.concentration_ppm),
            "box_half_width_nm": float(self.box_half_width_nm),
            "quantization_axis": [float(v) for v in self.quantization_axis],
            "spins": [
                {
                    "x": float(p[0]),
                    "y": float(p[1]),
                    "z": float(p[2]),
                    "m_i": int(m),
                    "jt_axis_index": int(j),
                    "s": float(sv),
                }
                for p, m, j, sv in zip(self.positions_nm, self.m_i,
                                       self.jt_axis_index, self.s)
            ],
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: dict) -> "BathConfiguration":
        spins = data["spins"]
        pos = np.array([[sp["x"], sp["y"], sp["z"]] for sp in spins], dtype=float)
        if len(spins) == 0:
            pos = np.zeros((0, 3))
        return cls(
            positions_nm=pos,
            m_i=np.array([sp["m_i"] for sp in spins], dtype=np.int64),
            jt_axis_index=np.array([sp["jt_axis_index"] for sp in spins], dtype=np.int64),
            s=np.array([sp["s"] for sp in spins], dtype=float),
            concentration_ppm=float(data["concentration_ppm"]),
            box_half_width_nm=float(data["box_half_width_nm"]),
            quantization_axis=np.array(data["quantization_axis"], dtype=float),
            rng_seed=int(data["seed"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "BathConfiguration":
        return cls.from_dict(json.loads(text))


def box_half_width_for_target(concentration_ppm: float, target_spins: int = 500,
                              constants: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Half-width (nm) of the cube expected to contain ``target_spins`` spins."""
    if target_spins <= 0:
        raise ValueError("target_spins must be positive")
    density = ppm_to_number_density(concentration_ppm, constants)
    if density <= 0:
        raise ValueError("concentration must be positive to size a box")
    return 0.5 * (target_spins / density) ** (1.0 / 3.0)


def _draw_internal_states(rng: np.random.Generator, n: int):
    m_i = rng.integers(-1, 2, size=n)
    jt = rng.integers(0, 4, size=n)
    s = rng.choice([-0.5, 0.5], size=n)
    return m_i, jt, s


def _sample_lattice_sites(rng: np.random.Generator, n_draw: int, half_cells: int):
    """Pick ``n_draw`` distinct lattice sites in a box of 2*half_cells cells per axis.

    Sites are indexed without enumerating them (the site count can reach 1e9 at
    low concentration); the probe site at the origin is never selected.  The
    draw order makes the result deterministic for a given generator state.
    """
    m = 2 * half_cells
    n_sites = ATOMS_PER_CELL * m**3
    # flat index of cell (0,0,0) basis atom 0, with cell coords offset by +half_cells
    origin = (((half_cells * m) + half_cells) * m + half_cells) * ATOMS_PER_CELL
    chosen: list[int] = []
    seen = {origin}
    while len(chosen) < n_draw:
        batch = rng.integers(0, n_sites, size=max(64, int(1.1 * (n_draw - len(chosen)))))
        for raw in batch:
            idx = int(raw)
            if idx not in seen:
                seen.add(idx)
                chosen.append(idx)
                if len(chosen) == n_draw:
                    break
    idx = np.array(chosen, dtype=np.int64)
    basis = idx % ATOMS_PER_CELL
    cell = idx // ATOMS_PER_CELL
    k = cell % m - half_cells
    cell //= m
    j = cell % m - half_cells
    i = cell // m - half_cells
    return (np.stack([i, j, k], axis=1).astype(float) + _CELL_BASIS[basis])


def generate_bath(concentration_ppm: float, box_half_width_nm: float, seed: int,
                  mode: str = "lattice",
                  quantization_axis: np.ndarray | None = None,
                  constants: PhysicalConstants = DEFAULT_CONSTANTS) -> BathConfiguration:
    """Draw one random bath realization.

    mode="lattice" places spins on distinct diamond sites; the box is rounded
    down to a whole number of conventional cells and the recorded half-width is
    the realized one.  mode="continuum" draws uniform positions at matched
    density, rejecting approaches closer than the nearest-neighbor carbon
    spacing.  The spin count is binomial (lattice) or Poisson (continuum) with
    mean density * volume, and the whole draw is reproducible from ``seed``.
    """
    if concentration_ppm <= 0:
        raise ValueError(f"concentration must be positive, got {concentration_ppm}")
    if box_half_width_nm <= 0:
        raise ValueError(f"box half-width must be positive, got {box_half_width_nm}")
    if mode not in ("lattice", "continuum"):
        raise ValueError(f"unknown placement mode {mode!r}")
    axis = DEFAULT_QUANTIZATION_AXIS if quantization_axis is None else (
        np.asarray(quantization_axis, dtype=float))
    axis = axis / np.linalg.norm(axis)

    density = ppm_to_number_density(concentration_ppm, constants)
    rng = np.random.default_rng(seed)
    a = constants.lattice_constant_nm

    if mode == "lattice":
        half_cells = max(1, int(np.floor(box_half_width_nm / a)))
        realized_half = half_cells * a
        n_sites = ATOMS_PER_CELL * (2 * half_cells) ** 3
        expected = (n_sites - 1) * concentration_ppm * 1e-6
        _check_expected_count(expected)
        n = int(rng.binomial(n_sites - 1, concentration_ppm * 1e-6))
        positions = _sample_lattice_sites(rng, n, half_cells) * a
        half = realized_half
    else:
        half = float(box_half_width_nm)
        expected = density * (2 * half) ** 3
        _check_expected_count(expected)
        n = int(rng.poisson(expected))
        positions = rng.uniform(-half, half, size=(n, 3))
        positions = _enforce_min_distance(rng, positions, half)

    m_i, jt, s = _draw_internal_states(rng, n)
    return BathConfiguration(
        positions_nm=positions if n else np.zeros((0, 3)),
        m_i=m_i, jt_axis_index=jt, s=s,
        concentration_ppm=float(concentration_ppm),
        box_half_width_nm=float(half),
        quantization_axis=axis,
        rng_seed=int(seed),
    )


def _check_expected_count(expected: float):
    if expected < 2.0:
        raise DegenerateConfigurationError(
            f"expected spin count {expected:.2f} < 2; enlarge the box or raise "
            "the concentration")
    if expected < 10.0:
        warnings.warn(
            f"expected spin count {expected:.1f} < 10; bath statistics will be poor",
            stacklevel=3)


def _enforce_min_distance(rng: np.random.Generator, positions: np.ndarray,
                          half: float, max_rounds: int = 200) -> np.ndarray:
    """Resample continuum positions until no pair (or probe approach) is closer
    than the carbon nearest-neighbor spacing."""
    from scipy.spatial import cKDTree

    if positions.shape[0] == 0:
        return positions
    for _ in range(max_rounds):
        tree = cKDTree(positions)
        bad = set()
        for i, j in tree.query_pairs(MIN_SPIN_DISTANCE_NM):
            bad.add(j)
        close_probe = np.nonzero(np.linalg.norm(positions, axis=1)
                                 < MIN_SPIN_DISTANCE_NM)[0]
        bad.update(int(i) for i in close_probe)
        if not bad:
            return positions
        idx = sorted(bad)
        positions = positions.copy()
        positions[idx] = rng.uniform(-half, half, size=(len(idx), 3))
    raise DegenerateConfigurationError(
        "could not satisfy the minimum spin spacing; box too dense")
