import pathlib

import pytest

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def repo_root() -> pathlib.Path:
    return REPO_ROOT


@pytest.fixture(scope="session")
def course_dir() -> pathlib.Path:
    return REPO_ROOT / "course"


@pytest.fixture(scope="session")
def snapshots_dir() -> pathlib.Path:
    return REPO_ROOT / "snapshots"


@pytest.fixture(scope="session")
def fixtures_dir() -> pathlib.Path:
    return REPO_ROOT / "fixtures"


@pytest.fixture(scope="session")
def task_pack(course_dir):
    from stepwise import model

    return model.load_task_pack(course_dir)


@pytest.fixture(scope="session")
def tasks_by_id(task_pack):
    from stepwise import model

    return model.task_index(task_pack)
