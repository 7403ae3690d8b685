# SPDX-License-Identifier: MIT
"""Makes the package importable straight from a CMake build tree.

Installed runs (pip wheel) need none of this; `import ctrc` just works.
For build-tree runs, point CTRC_BUILD_DIR at the CMake build directory
(default: <repo>/build) holding the compiled `_core` extension.
"""

import os
import pathlib
import sys

_ROOT = pathlib.Path(__file__).resolve().parents[2]
_BUILD = pathlib.Path(os.environ.get("CTRC_BUILD_DIR", _ROOT / "build"))

try:
    import ctrc  # noqa: F401
except ImportError:
    sys.path.insert(0, str(_ROOT / "python"))
    sys.path.insert(0, str(_BUILD))
