"""Selection between the numba-compiled kernels and the pure-numpy fallback.

The default is the numba path when numba imports cleanly, the numpy fallback
otherwise.  Set ``NONNORMAL_BACKEND=numpy`` (or ``numba``) to pin the choice;
an explicit request that cannot be satisfied is an error rather than a silent
downgrade.  ``use_backend``/``backend`` override the choice at runtime, e.g.
to replay a recorded run on the backend that produced it.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

ENV_VAR = "NONNORMAL_BACKEND"
BACKENDS = ("numba", "numpy")

_override: str | None = None
_modules: dict = {}


def _load(name: str):
    if name not in _modules:
        if name == "numpy":
            from . import _kernels_np as mod
        else:
            from . import _kernels_nb as mod
        _modules[name] = mod
    return _modules[name]


def _numba_importable() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def available() -> tuple[str, ...]:
    """Backends usable in this environment, preferred first."""
    return ("numba", "numpy") if _numba_importable() else ("numpy",)


def active_name() -> str:
    """Name of the backend the next kernel call will use."""
    if _override is not None:
        return _override
    env = os.environ.get(ENV_VAR, "").strip().lower()
    if env:
        if env not in BACKENDS:
            raise ValueError(
                f"{ENV_VAR} must be one of {BACKENDS}, got {env!r}")
        return env
    return "numba" if _numba_importable() else "numpy"


def kernels():
    """Kernel module (forward_seq, bptt_seq_ce, bptt_seq_mse) for the active backend."""
    name = active_name()
    try:
        return _load(name)
    except ImportError as exc:
        raise RuntimeError(f"backend {name!r} is unavailable: {exc}") from exc


def use_backend(name: str | None) -> None:
    """Pin the backend for this process; None restores env/default selection."""
    global _override
    if name is not None and name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}, expected one of {BACKENDS}")
    _override = name


@contextmanager
def backend(name: str):
    """Temporarily pin the backend."""
    previous = _override
    use_backend(name)
    try:
        yield
    finally:
        use_backend(previous)
