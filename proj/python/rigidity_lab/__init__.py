try:
    from ._core import *  # noqa: F401,F403
    from ._core import __doc__  # noqa: F401
except ImportError:  # build-tree layout keeps _core next to the package dir
    from _core import *  # noqa: F401,F403
