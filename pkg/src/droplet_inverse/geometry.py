"""Computational domain and periodic droplet lattice.

The domain is the cube ``[pi/2, 3pi/2]^3`` sitting strictly inside the
``2pi``-periodic cell ``[0, 2pi]^3``.  Droplets ``z_j + a B`` (``B`` the unit
ball) sit at the centres of a cubic lattice of cells.  With the default
number density ``kappa = |Omega|`` every cell has volume ``a^(1-h)`` and the
droplet count scales like ``a^(h-1)``.

Two lattice fits are supported:

``"floor"``
    Cells keep their exact volume ``|Omega| a^(1-h) / kappa``.  The largest
    centred ``n x n x n`` block that fits is populated and the band between
    the block and the boundary is the remainder region.
``"tile"``
    ``n`` is rounded to the nearest integer and the cell side is set to
    ``pi / n`` so the cells tile the domain exactly (no remainder).  The cell
    volume then differs from ``|Omega| a^(1-h) / kappa`` by the rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

SIDE = math.pi
OMEGA_LO = 0.5 * math.pi
OMEGA_HI = 1.5 * math.pi
PERIOD = 2.0 * math.pi
OMEGA_VOLUME = SIDE**3
OMEGA_AREA = 6.0 * SIDE**2
DEFAULT_KAPPA = OMEGA_VOLUME

_FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class DomainSpec:
    """Axis-aligned box ``omega`` inside the periodic box ``period_cell``.

    Attributes
    ----------
    omega_lo, omega_hi : float
        Corners of the cube ``Omega`` (same value on every axis).
    period : float
        Side of the periodic cell ``[0, period]^3``.
    """

    omega_lo: float = OMEGA_LO
    omega_hi: float = OMEGA_HI
    period: float = PERIOD

    def __post_init__(self) -> None:
        if not (0.0 < self.omega_lo < self.omega_hi < self.period):
            raise ValueError("omega must lie strictly inside the period cell")
        if not math.isclose(self.side, math.pi, rel_tol=1e-14):
            raise ValueError("omega must have side pi (integer Neumann wavenumbers)")

    @property
    def side(self) -> float:
        return self.omega_hi - self.omega_lo

    @property
    def volume(self) -> float:
        return self.side**3

    @property
    def area(self) -> float:
        return 6.0 * self.side**2

    @property
    def center(self) -> np.ndarray:
        return np.full(3, 0.5 * (self.omega_lo + self.omega_hi))

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(points)
        return np.all((p >= self.omega_lo - tol) & (p <= self.omega_hi + tol), axis=1)


@dataclass(frozen=True)
class DropletCluster:
    """Droplet centres, scale parameters and the cell partition.

    Attributes
    ----------
    a : float
        Droplet radius scale.
    h : float
        Dilution exponent in ``[0, 1)``.
    centers : ndarray, shape (M, 3)
        Droplet centres ``z_j``.
    cell_side : float
        Side of each cubic cell ``Omega_j`` (cells are centred at ``z_j``).
    kappa : float
        Number-density constant in ``M = floor(kappa a^(h-1))``.
    fit : str
        Lattice fit used to build the cluster (``floor``, ``tile`` or ``custom``).
    margin : float
        Width of the remainder band between the populated block and the
        boundary on each side (zero for exact tilings).
    """

    a: float
    h: float
    centers: np.ndarray
    cell_side: float
    kappa: float = DEFAULT_KAPPA
    fit: str = "floor"
    margin: float = 0.0
    domain: DomainSpec = field(default_factory=DomainSpec)

    def __post_init__(self) -> None:
        c = np.array(self.centers, dtype=float).reshape(-1, 3)
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)
        self.validate()

    def validate(self) -> None:
        if not (self.a > 0.0):
            raise ValueError(f"radius scale a must be positive, got {self.a}")
        if not (0.0 <= self.h < 1.0):
            raise ValueError(f"dilution exponent h must lie in [0, 1), got {self.h}")
        if self.M == 0:
            return
        half = 0.5 * self.cell_side
        if not self.a < half:
            raise ValueError(
                f"droplet radius {self.a:.4g} does not fit strictly inside cells of side {self.cell_side:.4g}"
            )
        lo = self.centers - half
        hi = self.centers + half
        tol = 1e-12
        if np.any(lo < self.domain.omega_lo - tol) or np.any(hi > self.domain.omega_hi + tol):
            raise ValueError("every cell must lie inside Omega")
        if self.M > 1:
            # cells are congruent cubes centred at the droplets: disjoint iff
            # centres differ by at least one side along some axis
            close = cKDTree(self.centers).query_pairs(self.cell_side * (1.0 - 1e-9) - tol, p=np.inf)
            if close:
                raise ValueError("cells overlap")

    @property
    def M(self) -> int:
        return int(self.centers.shape[0])

    @property
    def cell_volume(self) -> float:
        return self.cell_side**3

    @property
    def droplet_volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.a**3

    def cells(self) -> list[tuple[np.ndarray, np.ndarray]]:
        half = 0.5 * self.cell_side
        return [(z - half, z + half) for z in self.centers]

    def min_separation(self) -> float:
        if self.M < 2:
            return math.inf
        d, _ = cKDTree(self.centers).query(self.centers, k=2)
        return float(d[:, 1].min())

    def remainder_boxes(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Disjoint boxes covering the remainder band (empty for exact tilings)."""
        m = self.margin
        if self.fit == "custom" or m <= 0.0:
            return []
        lo, hi = self.domain.omega_lo, self.domain.omega_hi
        ilo, ihi = lo + m, hi - m
        boxes = []
        for axis in range(3):
            for slab in ((lo, ilo), (ihi, hi)):
                blo = np.empty(3)
                bhi = np.empty(3)
                for j in range(3):
                    if j == axis:
                        blo[j], bhi[j] = slab
                    elif j < axis:
                        blo[j], bhi[j] = ilo, ihi
                    else:
                        blo[j], bhi[j] = lo, hi
                boxes.append((blo, bhi))
        return boxes

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "h": self.h,
            "kappa": self.kappa,
            "fit": self.fit,
            "cell_side": self.cell_side,
            "margin": self.margin,
            "centers": self.centers.tolist(),
            "cells": [[lo.tolist(), hi.tolist()] for lo, hi in self.cells()],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "DropletCluster":
        return cls(
            a=float(d["a"]),
            h=float(d["h"]),
            centers=np.asarray(d["centers"], dtype=float).reshape(-1, 3),
            cell_side=float(d["cell_side"]),
            kappa=float(d.get("kappa", DEFAULT_KAPPA)),
            fit=str(d.get("fit", "custom")),
            margin=float(d.get("margin", 0.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "DropletCluster":
        return cls.from_dict(json.loads(text))


def a_max(h: float, kappa: float = DEFAULT_KAPPA) -> float:
    """Largest radius scale for which the lattice holds at least one droplet."""
    if not (0.0 <= h < 1.0):
        raise ValueError(f"dilution exponent h must lie in [0, 1), got {h}")
    return kappa ** (1.0 / (1.0 - h))


def lattice_count(a: float, h: float, kappa: float = DEFAULT_KAPPA) -> float:
    """Real-valued target count ``kappa a^(h-1)``."""
    return kappa * a ** (h - 1.0)


def build_lattice(
    domain: DomainSpec | None,
    a: float,
    h: float,
    kappa: float = DEFAULT_KAPPA,
    fit: str = "floor",
) -> DropletCluster:
    """Place droplets at the centres of a cubic lattice of cells in ``Omega``."""
    domain = domain or DomainSpec()
    if not (0.0 <= h < 1.0):
        raise ValueError(f"dilution exponent h must lie in [0, 1), got {h}")
    if not a > 0.0:
        raise ValueError(f"radius scale a must be positive, got {a}")
    amax = a_max(h, kappa)
    if a > amax * (1.0 + 1e-12):
        raise ValueError(f"a = {a:.6g} exceeds a_max = {amax:.6g}: no cell fits in Omega")
    per_axis = lattice_count(a, h, kappa) ** (1.0 / 3.0)
    if fit == "floor":
        n = max(1, int(math.floor(per_axis + _FLOOR_EPS)))
        side = domain.side / per_axis
        side = min(side, domain.side)
        margin = 0.5 * (domain.side - n * side)
        margin = max(margin, 0.0)
    elif fit == "tile":
        n = max(1, int(round(per_axis)))
        side = domain.side / n
        margin = 0.0
    else:
        raise ValueError(f"unknown lattice fit {fit!r}")
    offsets = domain.omega_lo + margin + side * (np.arange(n) + 0.5)
    gx, gy, gz = np.meshgrid(offsets, offsets, offsets, indexing="ij")
    centers = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    return DropletCluster(
        a=a, h=h, centers=centers, cell_side=side, kappa=kappa, fit=fit, margin=margin, domain=domain
    )


def custom_cluster(
    centers: Sequence[Sequence[float]] | np.ndarray, a: float, h: float, cell_side: float
) -> DropletCluster:
    """Cluster with user-supplied centres (used for the few-droplet oracles)."""
    return DropletCluster(a=a, h=h, centers=np.asarray(centers, float), cell_side=cell_side, fit="custom")


def lattice_sum(cluster: DropletCluster, m: int, k: float) -> float:
    """``sum_{j != m} |z_m - z_j|^(-k)`` (``m`` is a 0-based index)."""
    if not (0 <= m < cluster.M):
        raise IndexError(f"droplet index {m} out of range for M = {cluster.M}")
    if not k > 0.0 or k == 3.0:
        raise ValueError("exponent k must be positive and different from 3")
    if cluster.M == 1:
        return 0.0
    d = np.linalg.norm(cluster.centers - cluster.centers[m], axis=1)
    d = np.delete(d, m)
    return float(np.sum(d ** (-k)))


def remainder_volume(cluster: DropletCluster) -> float:
    """Volume of ``Omega`` not covered by droplet cells."""
    if cluster.fit == "custom":
        return cluster.domain.volume - cluster.M * cluster.cell_volume
    return max(cluster.domain.volume - cluster.M * cluster.cell_volume, 0.0)
