"""Monotone probabilistic schemes and the probabilistic max-plus method for
finite-horizon HJB equations with switching and continuum controls.

The heavy lifting lives in the compiled extension `_hjb`; this package
re-exports its surface. Installed wheels carry the extension inside the
package; development builds put it on sys.path directly.
"""

try:
    from ._hjb import *  # noqa: F401,F403
    from ._hjb import __version__  # noqa: F401
except ImportError:  # pragma: no cover - development layout
    from _hjb import *  # noqa: F401,F403
    from _hjb import __version__  # noqa: F401
