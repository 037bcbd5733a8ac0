import time

import pytest

from griddistill import cli


@pytest.fixture(scope="session")
def base_run(tmp_path_factory):
    """One full default pipeline at the default root seed; several
    acceptance criteria read from it."""
    out = tmp_path_factory.mktemp("pipeline") / "base"
    start = time.monotonic()
    rc = cli.main(["--seed", "42", "--out", str(out), "run-all"])
    elapsed = time.monotonic() - start
    assert rc == 0
    return {"out": out, "elapsed": elapsed}
