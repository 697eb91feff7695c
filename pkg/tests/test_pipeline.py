"""Full three-stage pipeline behavior against recorded fixtures."""

import pytest

from stepwise import pipeline, prompts, syntax as syn
from stepwise.gateway import FixtureMiss, MODE_REPLAY, ProviderConfig, save_fixtures
from stepwise.gateway import FixtureEntry
from stepwise.model import StudentSnapshot, SubgoalKind
from support.recording import record_snapshot


@pytest.fixture()
def month_task(tasks_by_id):
    return tasks_by_id["games-month"]


@pytest.fixture()
def guess_task(tasks_by_id):
    return tasks_by_id["games-guess"]


def mid_snapshot(snapshots_dir) -> StudentSnapshot:
    code = (snapshots_dir / "games-month" / "wrong-range.kt").read_text()
    return StudentSnapshot(task_id="games-month", code=code)


class TestGenerateHint:
    def test_replay_run_emits_valid_bundle(self, month_task, snapshots_dir, tmp_path):
        snapshot = mid_snapshot(snapshots_dir)
        record_snapshot(month_task, snapshot, tmp_path)
        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        outcome = pipeline.generate_hint(month_task, snapshot, config)
        assert outcome.ok, outcome.diagnostics
        bundle = outcome.bundle
        assert pipeline.check_bundle_invariants(bundle) == []
        assert len(bundle.text_hint.text.split(".")) <= 4
        assert all(s.kind is SubgoalKind.CODE
                   for s in bundle.subgoal_plan.subgoals)
        assert "m in 1..12" in bundle.code_hint.after

    def test_stage_order_in_diagnostics(self, month_task, snapshots_dir, tmp_path):
        snapshot = mid_snapshot(snapshots_dir)
        record_snapshot(month_task, snapshot, tmp_path)
        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        outcome = pipeline.generate_hint(month_task, snapshot, config)
        stages = [detail for event, detail in outcome.diagnostics if event == "stage"]
        assert stages == ["Subgoals", "CodeHint", "TextHint"]
        heuristics = [d for e, d in outcome.diagnostics if e == "heuristic"]
        assert len(heuristics) == 1

    def test_solved_snapshot_already_converged(self, guess_task, tmp_path):
        snapshot = StudentSnapshot(task_id="games-guess",
                                   code=guess_task.model_solution)
        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        outcome = pipeline.generate_hint(guess_task, snapshot, config)
        assert not outcome.ok
        assert outcome.no_hint_reason == pipeline.NO_HINT_ALREADY_CONVERGED

    def test_syntax_error_snapshot(self, month_task, tmp_path):
        snapshot = StudentSnapshot(task_id="games-month", code="fun main( {")
        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        outcome = pipeline.generate_hint(month_task, snapshot, config)
        assert outcome.no_hint_reason == pipeline.NO_HINT_SYNTAX_ERROR
        assert any(event == "syntax-error" for event, _ in outcome.diagnostics)

    def test_replay_determinism(self, month_task, snapshots_dir, tmp_path):
        snapshot = mid_snapshot(snapshots_dir)
        record_snapshot(month_task, snapshot, tmp_path)
        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        first = pipeline.generate_hint(month_task, snapshot, config)
        second = pipeline.generate_hint(month_task, snapshot, config)
        assert first.bundle.code_hint == second.bundle.code_hint
        assert first.bundle.text_hint == second.bundle.text_hint
        assert first.bundle.subgoal_plan == second.bundle.subgoal_plan
        assert first.bundle.hint_id != second.bundle.hint_id


class TestMalformedHandling:
    def test_one_reask_then_provider_format(self, month_task, snapshots_dir, tmp_path):
        snapshot = mid_snapshot(snapshots_dir)
        student = syn.parse(snapshot.code)
        first = prompts.build_subgoal_prompt(month_task, student, "Kotlin")
        retry = prompts.with_format_reminder(first)
        entries = {}
        for req in (first, retry):
            entries[req.fingerprint] = FixtureEntry(
                req.fingerprint, req.stage, req.rendered_text,
                "I refuse to number my answers.", "2026-01-01T00:00:00+00:00")
        save_fixtures(entries, tmp_path)
        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        outcome = pipeline.generate_hint(month_task, snapshot, config)
        assert outcome.no_hint_reason == pipeline.NO_HINT_PROVIDER_FORMAT
        reasks = [d for e, d in outcome.diagnostics if e == "re-ask"]
        assert len(reasks) == 1

    def test_malformed_then_valid_recovers(self, month_task, snapshots_dir, tmp_path):
        from stepwise.gateway import MODE_RECORD
        from support.fake_tutor import FakeTutor

        snapshot = mid_snapshot(snapshots_dir)
        inner = FakeTutor().for_snapshot(month_task, snapshot)
        state = {"subgoal_calls": 0}

        def flaky(req):
            if req.stage == prompts.STAGE_SUBGOALS:
                state["subgoal_calls"] += 1
                if state["subgoal_calls"] == 1:
                    return "I refuse to number my answers."
            return inner(req)

        record = ProviderConfig(mode=MODE_RECORD, fixture_path=tmp_path,
                                transport=flaky)
        recorded = pipeline.generate_hint(month_task, snapshot, record)
        assert recorded.ok

        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        outcome = pipeline.generate_hint(month_task, snapshot, config)
        assert outcome.ok
        reasks = [d for e, d in outcome.diagnostics if e == "re-ask"]
        assert len(reasks) == 1


class TestRegenerate:
    def test_distinct_fingerprints_per_attempt(self, month_task, snapshots_dir,
                                               tmp_path):
        snapshot = mid_snapshot(snapshots_dir)
        record_snapshot(month_task, snapshot, tmp_path, attempts=(0, 1))
        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        first = pipeline.generate_hint(month_task, snapshot, config)
        second = pipeline.regenerate_hint(month_task, snapshot, config)
        assert first.ok and second.ok
        fp_first = [d for e, d in first.diagnostics if e == "prompt"]
        fp_second = [d for e, d in second.diagnostics if e == "prompt"]
        assert set(fp_first).isdisjoint(fp_second)

    def test_regenerate_without_fixtures_is_fixture_miss(self, month_task,
                                                         snapshots_dir, tmp_path):
        snapshot = mid_snapshot(snapshots_dir)
        record_snapshot(month_task, snapshot, tmp_path, attempts=(0,))
        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        with pytest.raises(FixtureMiss):
            pipeline.regenerate_hint(month_task, snapshot, config)

    def test_regenerated_text_differs(self, month_task, snapshots_dir, tmp_path):
        snapshot = mid_snapshot(snapshots_dir)
        record_snapshot(month_task, snapshot, tmp_path, attempts=(0, 1))
        config = ProviderConfig(mode=MODE_REPLAY, fixture_path=tmp_path)
        first = pipeline.generate_hint(month_task, snapshot, config)
        second = pipeline.regenerate_hint(month_task, snapshot, config)
        assert first.bundle.text_hint.text != second.bundle.text_hint.text
