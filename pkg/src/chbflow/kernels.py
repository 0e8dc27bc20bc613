"""Kernel backend selection.

The compiled extension is used when it imports; set ``CHBFLOW_KERNELS=python``
to force the numpy fallback. ``load(name)`` returns a specific backend module,
which the benchmark and the cross-backend tests use.
"""

import importlib
import logging
import os

log = logging.getLogger(__name__)

_NAMES = {"cython": "chbflow._kernels", "python": "chbflow._kernels_py"}


def load(name):
    return importlib.import_module(_NAMES[name])


def _select():
    want = os.environ.get("CHBFLOW_KERNELS", "auto").lower()
    if want == "python":
        return load("python")
    try:
        return load("cython")
    except ImportError:
        if want == "cython":
            raise
        log.debug("compiled kernels unavailable, using numpy fallback")
        return load("python")


backend = _select()
BACKEND = backend.BACKEND

phase_modes = backend.phase_modes
brinkman_modes = backend.brinkman_modes
grad_sq_sum = backend.grad_sq_sum
sq_sum = backend.sq_sum
strain_sq_sum = backend.strain_sq_sum
cubic_stab = backend.cubic_stab
double_well_sum = backend.double_well_sum
flux_products = backend.flux_products
