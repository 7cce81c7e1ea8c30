import pytest

import flowmoods


@pytest.fixture(scope="session")
def snapshot(tmp_path_factory):
    directory = tmp_path_factory.mktemp("snapshot")
    version = flowmoods.build_snapshot(str(directory))
    return directory, version


@pytest.fixture(scope="session")
def stack(snapshot):
    directory, _ = snapshot
    return flowmoods.Stack.load(str(directory))
