import os
from pathlib import Path

import qslin

# ctest points QSLIN_STAGE at the build-tree package; an installed copy would shadow it.
_stage = os.environ.get("QSLIN_STAGE")
if _stage and Path(qslin.__file__).resolve().parent != Path(_stage).resolve():
    raise RuntimeError(
        f"imported qslin from {qslin.__file__}, expected the build tree at {_stage}; "
        "uninstall the installed package or run pytest directly"
    )
