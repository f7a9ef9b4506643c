"""Kernel backend selection.

The compiled extension is preferred; the pure-numpy fallback is used when
the extension was not built or when VBMA_PURE_PYTHON is set (any non-empty
value). Both expose the same two entry points:

    tn_moments(mu, var, lower, upper) -> (mean, variance, log_mass, entropy)
    pln_newton(y, eta, tau, m, s, max_iter, grad_tol) -> iteration counts
"""

import os

from . import pure

if os.environ.get("VBMA_PURE_PYTHON"):
    backend = pure
else:
    try:
        from . import _core as backend
    except ImportError:
        backend = pure

BACKEND_NAME = backend.BACKEND_NAME
tn_moments = backend.tn_moments
pln_newton = backend.pln_newton


def get_backend(name: str):
    """Return a specific backend module by name ('pure' or 'compiled');
    used by the equivalence tests and the kernel benchmark."""
    if name == "pure":
        return pure
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
