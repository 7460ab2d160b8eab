"""Seeded families of grid functions used by sweeps and certifications."""

from __future__ import annotations

import numpy as np

from .grid import Grid, GridFunction

FAMILIES = ("sine", "bump", "poly", "concentration")


def unit_coords(grid: Grid) -> np.ndarray:
    """Coordinates mapped to ``[0, 1]`` per axis."""
    lo = np.array([a for a, _ in grid.extents]).reshape((-1,) + (1,) * grid.dim)
    hi = np.array([b for _, b in grid.extents]).reshape((-1,) + (1,) * grid.dim)
    return (grid.coords - lo) / (hi - lo)


def cutoff(grid: Grid) -> np.ndarray:
    xi = unit_coords(grid)
    return np.prod(4.0 * xi * (1.0 - xi), axis=0)


def default_bump(grid: Grid) -> GridFunction:
    """Nonnegative product of half sines, zero on the boundary."""
    xi = unit_coords(grid)
    return grid.function(np.prod(np.sin(np.pi * xi), axis=0))


def sine_modes(grid: Grid, rng: np.random.Generator, max_mode: int = 4) -> np.ndarray:
    xi = unit_coords(grid)
    out = np.zeros(grid.shape)
    nterms = int(rng.integers(1, 6))
    for _ in range(nterms):
        m = rng.integers(1, max_mode + 1, size=grid.dim)
        term = np.prod([np.sin(np.pi * m[d] * xi[d]) for d in range(grid.dim)], axis=0)
        out += rng.normal() / float(np.sum(m**2)) * term
    return out


def bumps(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    xi = unit_coords(grid)
    out = np.zeros(grid.shape)
    for _ in range(int(rng.integers(1, 4))):
        c = rng.uniform(0.15, 0.85, size=grid.dim).reshape((-1,) + (1,) * grid.dim)
        width = rng.uniform(0.08, 0.4)
        out += rng.normal() * np.exp(-np.sum((xi - c) ** 2, axis=0) / (2 * width**2))
    return out * cutoff(grid)


def boundary_poly(grid: Grid, rng: np.random.Generator, degree: int = 3) -> np.ndarray:
    xi = unit_coords(grid)
    poly = np.full(grid.shape, rng.normal())
    for d in range(grid.dim):
        for k in range(1, degree + 1):
            poly = poly + rng.normal() / k * (xi[d] - 0.5) ** k
    return poly * cutoff(grid)


def concentration(grid: Grid, k: float) -> np.ndarray:
    """Bump of width ``~1/k`` peaked at the node nearest the origin."""
    x0 = np.array([grid.axes[d][i] for d, i in enumerate(grid.nearest_node([0.0] * grid.dim))])
    dist2 = np.sum((grid.coords - x0.reshape((-1,) + (1,) * grid.dim)) ** 2, axis=0)
    return np.exp(-(k**2) * dist2) * cutoff(grid) / max(float(cutoff(grid)[grid.nearest_node(x0)]), 1e-300)


def random_function(
    grid: Grid,
    rng: np.random.Generator,
    families=("sine", "bump", "poly"),
    log_amplitude=(-1.0, 1.0),
    nonnegative: bool = False,
) -> GridFunction:
    """Draw one function from a random family, rescaled to a random sup-norm."""
    fam = families[int(rng.integers(len(families)))]
    if fam == "sine":
        vals = sine_modes(grid, rng)
    elif fam == "bump":
        vals = bumps(grid, rng)
    elif fam == "poly":
        vals = boundary_poly(grid, rng)
    elif fam == "concentration":
        vals = concentration(grid, float(rng.uniform(1.0, 30.0)))
    else:
        raise ValueError(f"unknown family {fam!r}")
    if nonnegative:
        vals = np.abs(vals)
    peak = float(np.max(np.abs(vals)))
    if peak == 0.0:
        vals = cutoff(grid)
        peak = float(np.max(vals))
    amp = 10.0 ** rng.uniform(*log_amplitude)
    return grid.function(vals * (amp / peak))


def concentration_family(grid: Grid, ks=(1, 2, 4, 8, 16, 32, 64), amplitude: float = 1.0):
    for k in ks:
        yield k, grid.function(amplitude * concentration(grid, float(k)))
