"""Geometry and medium descriptions for the open cavity and its exterior."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import GeometryError

PLANE_TOL = 1e-9


@dataclass(frozen=True)
class Medium:
    c0: float = 343.0
    rho0: float = 1.21

    def __post_init__(self):
        if not self.c0 > 0 or not self.rho0 > 0:
            raise GeometryError(f"c0 and rho0 must be positive, got c0={self.c0}, rho0={self.rho0}")

    def wavenumber(self, freq):
        return 2 * np.pi * np.asarray(freq, dtype=float) / self.c0


@dataclass(frozen=True)
class CavitySpec:
    """Rigid-walled box occupying ``[0, l_x] x [0, l_y] x [0, l_z]``.

    The back wall is the plane ``y = 0``; the opening lies in the plane ``y = l_y``.
    """

    l_x: float
    l_y: float
    l_z: float
    n_max: int = 10
    m_max: int = 10

    def __post_init__(self):
        for name in ("l_x", "l_y", "l_z"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"cavity.{name} must be positive, got {getattr(self, name)}")
        for name in ("n_max", "m_max"):
            if int(getattr(self, name)) < 0:
                raise GeometryError(f"cavity.{name} must be >= 0, got {getattr(self, name)}")

    @property
    def cross_section(self) -> float:
        return self.l_x * self.l_z

    def contains(self, position, tol=PLANE_TOL) -> bool:
        x, y, z = position
        return (-tol <= x <= self.l_x + tol and -tol <= y <= self.l_y + tol
                and -tol <= z <= self.l_z + tol)


@dataclass(frozen=True)
class Opening:
    """Rectangular opening in the baffle plane ``y = center[1]``.

    ``width`` spans x and ``height`` spans z.
    """

    center: tuple
    width: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.width > 0 or not self.height > 0:
            raise GeometryError(f"opening width/height must be positive, got {self.width}, {self.height}")

    @property
    def plane_y(self) -> float:
        return self.center[1]

    @property
    def shorter_side(self) -> float:
        return min(self.width, self.height)

    @property
    def x_range(self):
        return self.center[0] - self.width / 2, self.center[0] + self.width / 2

    @property
    def z_range(self):
        return self.center[2] - self.height / 2, self.center[2] + self.height / 2


@dataclass(frozen=True)
class SourceLayout:
    """Primary source inside the cavity and secondary sources on the opening boundary.

    ``equivalent`` selects how the primary radiates through the opening:
    ``"plane"`` propagates the fundamental duct mode from the primary to the
    opening, ``"modal"`` integrates the full truncated modal field over the
    opening (requires ``cavity``).
    """

    primary: np.ndarray
    secondaries: np.ndarray
    opening: Opening
    q_p: complex = 1.0
    q_s: np.ndarray | None = None
    cavity: CavitySpec | None = None
    equivalent: str = "plane"

    def __post_init__(self):
        primary = np.asarray(self.primary, dtype=float).reshape(3)
        sec = np.asarray(self.secondaries, dtype=float).reshape(-1, 3)
        q_s = (np.zeros(len(sec), dtype=complex) if self.q_s is None
               else np.asarray(self.q_s, dtype=complex).reshape(len(sec)))
        object.__setattr__(self, "primary", primary)
        object.__setattr__(self, "secondaries", sec)
        object.__setattr__(self, "q_s", q_s)
        if self.equivalent not in ("plane", "modal"):
            raise GeometryError(f"equivalent must be 'plane' or 'modal', got {self.equivalent!r}")
        if self.equivalent == "modal" and self.cavity is None:
            raise GeometryError("modal equivalent source requires a cavity")
        off = np.abs(sec[:, 1] - self.opening.plane_y) > 1e-6
        if np.any(off):
            raise GeometryError(
                f"secondaries {np.flatnonzero(off).tolist()} are not on the opening plane "
                f"y={self.opening.plane_y}"
            )
        if primary[1] > self.opening.plane_y + PLANE_TOL:
            raise GeometryError("primary source must lie inside the cavity (y <= opening plane)")

    @property
    def n_secondaries(self) -> int:
        return len(self.secondaries)

    def with_strengths(self, q_p=None, q_s=None) -> "SourceLayout":
        return SourceLayout(self.primary, self.secondaries, self.opening,
                            self.q_p if q_p is None else q_p,
                            self.q_s if q_s is None else q_s,
                            self.cavity, self.equivalent)


@dataclass(frozen=True)
class EvalGrid:
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(pts) < 1:
            raise GeometryError("evaluation grid needs at least one point")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @classmethod
    def hemisphere(cls, center, radius, n_points) -> "EvalGrid":
        """Fibonacci-spiral points on the half-sphere in front of ``center`` (+y side)."""
        i = np.arange(n_points) + 0.5
        cos_t = i / n_points  # axial component, strictly inside (0, 1)
        sin_t = np.sqrt(1 - cos_t**2)
        phi = np.pi * (3 - np.sqrt(5)) * i
        pts = np.column_stack([sin_t * np.cos(phi), cos_t, sin_t * np.sin(phi)])
        return cls(np.asarray(center, dtype=float) + radius * pts)


def controllable_limit(shorter_side, medium: Medium = Medium()) -> float:
    """Highest controllable frequency ``c0 / (2 * shorter_side)`` of a boundary-controlled opening."""
    if not shorter_side > 0:
        raise GeometryError(f"shorter_side must be positive, got {shorter_side}")
    return medium.c0 / (2 * shorter_side)
