#!/usr/bin/env python3
"""Regenerate the shipped replay fixtures under fixtures/.

Runs the pipeline in record mode against the deterministic fake tutor for
every snapshot in snapshots/, plus the extra attempts the service and
playground tests replay (regeneration flows). Re-running is idempotent up
to the recordedAt metadata inside the fixture files.
"""

import shutil
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from stepwise import evaluation, model  # noqa: E402
from stepwise.model import StudentSnapshot  # noqa: E402
from support.recording import record_snapshot  # noqa: E402

# flows that need more than the attempt-0 recording
EXTRA_ATTEMPTS = {
    "intro-hello/empty": (0, 1, 2),
    "games-month/wrong-range": (0, 1),
}

# session flows recorded for the service and playground tests
SESSION_FLOWS = [
    ("intro-hello", "", (0, 1)),
]


def main() -> int:
    fixtures = ROOT / "fixtures"
    if fixtures.exists():
        shutil.rmtree(fixtures)
    fixtures.mkdir()

    pack = model.load_task_pack(ROOT / "course")
    report = model.validate_task_pack(pack)
    if not report.ok:
        for issue in report.issues:
            print(f"task pack error: {issue.task_id}: {issue.message}")
        return 2
    tasks = model.task_index(pack)

    recorded = 0
    for snapshot_id, snapshot in evaluation.load_snapshots(ROOT / "snapshots"):
        task = tasks[snapshot.task_id]
        attempts = EXTRA_ATTEMPTS.get(snapshot_id, (0,))
        outcomes = record_snapshot(task, snapshot, fixtures, attempts=attempts)
        for attempt, outcome in zip(attempts, outcomes):
            status = "hint" if outcome.ok else outcome.no_hint_reason
            print(f"{snapshot_id} (attempt {attempt}): {status}")
            recorded += 1

    for task_id, code, attempts in SESSION_FLOWS:
        snapshot = StudentSnapshot(task_id=task_id, code=code)
        record_snapshot(tasks[task_id], snapshot, fixtures, attempts=attempts)
        print(f"session flow {task_id!r} (attempts {attempts}): recorded")

    files = len(list(fixtures.rglob("*.json")))
    print(f"\n{recorded} pipeline runs recorded, {files} fixture files")
    return 0


if __name__ == "__main__":
    sys.exit(main())
