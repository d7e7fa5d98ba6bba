import os
import shutil
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def cli():
    path = os.environ.get("EPSIM_CLI_PATH") or shutil.which("epsim")
    if not path or not Path(path).exists():
        pytest.skip("epsim executable not found; set EPSIM_CLI_PATH")
    return path
