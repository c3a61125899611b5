"""Hot numerical loops: compiled core with a pure-numpy fallback.

The particle propagation, fingerprint scoring and resampling inner loops
dominate tracker runtime.  They are implemented twice with identical
float semantics (same per-element operation order, all reductions kept
on the numpy side): once in Cython (``_core``) and once in numpy
(``_core_py``).  The compiled module is selected at import when present;
set ``TWINS_PURE_PY=1`` to force the fallback.  ``benchmarks/`` holds a
script comparing the two.
"""

import os

from . import _core_py

BACKEND = "python"
_impl = _core_py

if os.environ.get("TWINS_PURE_PY", "") != "1":
    try:
        from . import _core as _core_c

        _impl = _core_c
        BACKEND = "compiled"
    except ImportError:
        pass

predict_particles = _impl.predict_particles
weight_particles = _impl.weight_particles
resample_indices = _impl.resample_indices

__all__ = ["BACKEND", "predict_particles", "weight_particles", "resample_indices"]
