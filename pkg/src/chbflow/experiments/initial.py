"""Seeded initial phase fields."""

import math

import numpy as np


def rand_field(n, seed):
    """One uniform [0, 1) deviate per node, row-major, from a seeded 64-bit generator."""
    return np.random.default_rng(np.uint64(seed)).random((n, n))


def coarsening_phi(grid, seed):
    return -0.5 - 0.001 * (2.0 * rand_field(grid.n, seed) - 1.0)


def layers_phi(grid, epsilon):
    """Light layer between two heavy ones, with a ``cos x`` interface perturbation."""
    x, y = grid.coords()
    w = 0.5 + 0.1 * np.cos(x)
    s = math.sqrt(2.0) * epsilon
    c = 0.5 * math.pi
    return np.tanh((y - (c - w)) / s) * np.tanh((y - (c + w)) / s)


def initial_phi(cfg, grid):
    if cfg.init == "random":
        return coarsening_phi(grid, cfg.seed)
    if cfg.init == "layers":
        return layers_phi(grid, cfg.epsilon)
    if cfg.init == "exact":
        x, y = grid.coords()
        return np.cos(x) * np.sin(y)
    raise ValueError(f"unknown initial condition {cfg.init!r}")
