"""Pick the tableau kernel backend at import time.

The compiled module is preferred; set ``GRAPHSTATE_FORGE_BACKEND=numpy`` to
force the fallback (useful for benchmarking and for platforms without a C
compiler).
"""

import importlib
import os

_NAMES = {"cython": "graphstate_forge._tableau_cy", "numpy": "graphstate_forge._tableau_py"}


def load(name: str | None = None):
    """Return the kernel module for ``name`` ("cython", "numpy" or None=auto)."""
    if name is not None:
        return importlib.import_module(_NAMES[name])
    choice = os.environ.get("GRAPHSTATE_FORGE_BACKEND", "").strip().lower()
    if choice in _NAMES:
        return importlib.import_module(_NAMES[choice])
    try:
        return importlib.import_module(_NAMES["cython"])
    except ImportError:
        return importlib.import_module(_NAMES["numpy"])


def available() -> list[str]:
    out = []
    for key, mod in _NAMES.items():
        try:
            importlib.import_module(mod)
        except ImportError:
            continue
        out.append(key)
    return out


kernels = load()
