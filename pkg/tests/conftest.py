import functools

import numpy as np
import pytest

import latticeweyl as lw


@functools.lru_cache(maxsize=None)
def harmonic_symbol():
    return lw.builtin_symbol("lattice_laplacian_plus_quadratic", {"c": 1.0, "d": 1})


@functools.lru_cache(maxsize=None)
def torus(m=64):
    return lw.TorusGrid(1, m)


@functools.lru_cache(maxsize=None)
def harmonic_spec(eps, halfwidth=3.0, m=64):
    """Cached eigendecomposition of the flagship operator."""
    box = lw.LatticeBox(1, eps, halfwidth)
    op = lw.build_operator(harmonic_symbol(), 0.5, box, eps, torus(m))
    return lw.eigendecompose(op)


@pytest.fixture(scope="session")
def harmonic():
    return harmonic_symbol()


@pytest.fixture(scope="session")
def grid64():
    return torus(64)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(42)
