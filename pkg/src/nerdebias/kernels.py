"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy fallback.
``use_backend`` switches at runtime (tests and the benchmark compare both).
"""

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels

_active = _BACKENDS.get("cython", _pykernels)


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def use_backend(name):
    """Select ``'cython'`` or ``'python'``; returns the previous backend name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    previous = backend_name()
    _active = _BACKENDS[name]
    return previous


def crf_log_partition(emissions, trans, start, stop):
    return _active.crf_log_partition(emissions, trans, start, stop)


def crf_forward_backward(emissions, trans, start, stop):
    return _active.crf_forward_backward(emissions, trans, start, stop)


def viterbi(emissions, trans, start, stop):
    return _active.viterbi(emissions, trans, start, stop)


def scatter_add_rows(target, index, values):
    return _active.scatter_add_rows(target, index, values)
