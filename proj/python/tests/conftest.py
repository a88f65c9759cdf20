import importlib.util
import os
import sys
from pathlib import Path

# Load the package from a build tree instead of any installed copy.
_pkg = os.environ.get("OBJTIER_PACKAGE_DIR")
if _pkg:
    _dir = Path(_pkg)
    _ext = next(_dir.glob("_objtier*.so"))
    _spec = importlib.util.spec_from_file_location("objtier._objtier", _ext)
    _native = importlib.util.module_from_spec(_spec)
    _spec.loader.exec_module(_native)
    sys.modules["objtier._objtier"] = _native

    _spec = importlib.util.spec_from_file_location(
        "objtier", _dir / "__init__.py", submodule_search_locations=[str(_dir)]
    )
    _module = importlib.util.module_from_spec(_spec)
    sys.modules["objtier"] = _module
    _spec.loader.exec_module(_module)
