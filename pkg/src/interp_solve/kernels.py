"""Backend selection for the 2-D inner loops.

The compiled extension is used when it was built; set
``INTERP_SOLVE_PURE=1`` to force the pure-Python implementation.
"""

import os

from . import _pykernels

pure = _pykernels

if os.environ.get("INTERP_SOLVE_PURE", "") not in ("", "0"):
    backend = _pykernels
else:
    try:
        from . import _ckernels as backend
    except ImportError:  # extension not built
        backend = _pykernels

compiled = None
try:
    from . import _ckernels as compiled
except ImportError:
    pass

BACKEND_NAME = "compiled" if backend.COMPILED else "python"

LINEAR = _pykernels.LINEAR
POLAR = _pykernels.POLAR
FORSAKEN = _pykernels.FORSAKEN
GDA = _pykernels.GDA
EG = _pykernels.EG
CEGPLUS = _pykernels.CEGPLUS


def use(name: str) -> None:
    """Switch the active backend at runtime (``"python"`` or ``"compiled"``)."""
    global backend, BACKEND_NAME
    if name == "python":
        backend = _pykernels
    elif name == "compiled":
        if compiled is None:
            raise ImportError("the compiled kernel extension is not available")
        backend = compiled
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND_NAME = name
