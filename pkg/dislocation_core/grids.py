# dislocation_core/grids.py
"""
Grids used by the solvers: a symmetric periodic 1-D grid for nonlocal
boundary solves and a uniform 2-D grid on the truncated half-plane.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on [-L, L) with n points, symmetric about 0."""
    L: float
    n: int

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError(f"Grid1D half-width must be positive, got {self.L}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"Grid1D size must be an even integer >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @cached_property
    def x(self) -> np.ndarray:
        # n even puts x=0 exactly at index n//2
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    @property
    def center_index(self) -> int:
        return self.n // 2

    def half_laplacian(self, values: np.ndarray) -> np.ndarray:
        """Periodic spectral (-Delta)^{1/2}: Fourier multiplier |k|."""
        return np.real(np.fft.ifft(np.abs(self.k) * np.fft.fft(values)))

    def derivative(self, values: np.ndarray) -> np.ndarray:
        """Spectral d/dx of a periodic (or decaying) sample vector."""
        return np.real(np.fft.ifft(1j * self.k * np.fft.fft(values)))


@dataclass(frozen=True)
class Grid2D:
    """Uniform grid on [-Lx, Lx] x [0, Ly]; axis 0 is x, axis 1 is y, row j=0 is the interface."""
    Lx: float
    Ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValueError(f"Grid2D extents must be positive, got Lx={self.Lx}, Ly={self.Ly}")
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"Grid2D needs at least 3 points per axis, got {self.nx}x{self.ny}")

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(-self.Lx, self.Lx, self.nx)

    @cached_property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, self.Ly, self.ny)

    @property
    def hx(self) -> float:
        return 2.0 * self.Lx / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.Ly / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def resolves(self, eps: float) -> bool:
        limit = eps / 8 * (1 + 1e-12)
        return self.hx <= limit and self.hy <= limit

    def trapezoid_weights(self) -> tuple[np.ndarray, np.ndarray]:
        wx = np.full(self.nx, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny, self.hy)
        wy[[0, -1]] *= 0.5
        return wx, wy

    def refined(self) -> "Grid2D":
        """Grid with half the spacing in both directions."""
        return Grid2D(self.Lx, self.Ly, 2 * self.nx - 1, 2 * self.ny - 1)

    def to_dict(self) -> dict:
        return {"Lx": self.Lx, "Ly": self.Ly, "nx": self.nx, "ny": self.ny}
