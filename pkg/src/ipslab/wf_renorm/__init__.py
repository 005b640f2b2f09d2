"""Wright-Fisher diffusions, log-Laplace operators and renormalization."""

from .catalytic import *  # noqa: F401,F403
from .catalytic import __all__ as _cat_all
from .core import *  # noqa: F401,F403
from .core import __all__ as _core_all

__all__ = list(_core_all) + list(_cat_all)
