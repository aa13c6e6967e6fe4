"""District heating network simulation toolkit."""

try:
    from ._dhnet import *  # noqa: F401,F403  (installed package layout)
    from ._dhnet import __doc__  # noqa: F401
except ImportError:  # in-tree builds put _dhnet next to this package
    from _dhnet import *  # noqa: F401,F403
