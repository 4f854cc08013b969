"""Physics inner-loop kernels: compiled extension with pure-Python fallback.

The backend is chosen once at import.  Set ``BEARING_PURSUIT_PURE_PY=1``
to force the fallback (used by the parity tests and the benchmark).
Both backends are written to produce bit-identical results.
"""

import os

if os.environ.get("BEARING_PURSUIT_PURE_PY") == "1":
    from ._simcore_py import step_agents
    BACKEND = "python"
else:
    try:
        from ._simcore import step_agents  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # extension not built; stay usable from source
        from ._simcore_py import step_agents  # type: ignore[no-redef]
        BACKEND = "python"

__all__ = ["step_agents", "BACKEND"]
