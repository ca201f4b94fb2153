import pytest

from core.errors import AllRecordsFailed, EmptySelection
from core.prompting import assemble_prompt
from core.schema import TaskKind
from core.scoring import COMPONENTS
from llm.embeddings import lexical_embedder
from llm.gateway import request_hash
from llm.replay import ReplayGateway, build_fixture
from qa_pipeline.core.runner import EvalSettings, evaluate_record, evaluate_suite

MODEL = "test-model"
SETTINGS = EvalSettings(progress=False, concurrency=3, embedder_name="lexical", seed=7)


def _run(records, registry, fixtures):
    return evaluate_suite(records, ReplayGateway(fixtures, MODEL), lexical_embedder, registry, SETTINGS)


def _key(rec):
    prompt = assemble_prompt(rec)
    return request_hash(MODEL, prompt.system, prompt.user, 0.0)


def test_echo_scores_perfectly(records, registry):
    report = _run(records, registry, build_fixture(records, MODEL, registry, style="echo"))
    assert report.mean_accuracy == 1.0
    assert report.mean_similarity == 1.0
    assert report.model_name == MODEL
    assert [r.record_id for r in report.record_results] == sorted(r.id for r in records)
    assert report.component_means == {c: 1.0 for c in COMPONENTS}
    assert {t: s.count for t, s in report.task_breakdown.items()} == {t.value: 6 for t in TaskKind}
    assert report.manifest.records_scored == 24 and report.manifest.records_failed == 0
    assert all(r.extras.cell_tags == [] and r.extras.values == [] for r in report.record_results)


def test_degraded_fixture_scores_lower(temperature_records, registry):
    echo = _run(temperature_records, registry,
                build_fixture(temperature_records, MODEL, registry, style="echo"))
    degraded = _run(temperature_records, registry,
                    build_fixture(temperature_records, MODEL, registry, style="degraded", seed=7))
    assert echo.mean_accuracy - degraded.mean_accuracy >= 0.15
    assert degraded.mean_similarity < echo.mean_similarity
    assert degraded.component_means["units"] < 1.0


def test_degraded_fixture_is_seeded(temperature_records, registry):
    a = build_fixture(temperature_records, MODEL, registry, style="degraded", seed=3)
    assert a == build_fixture(temperature_records, MODEL, registry, style="degraded", seed=3)
    changed = sum(1 for r in temperature_records if a[_key(r)] != r.assistant)
    assert changed == round(0.6 * len(temperature_records))


def test_unknown_fixture_style(records, registry):
    with pytest.raises(ValueError):
        build_fixture(records, MODEL, registry, style="sarcastic")


def test_partial_failures(records, registry):
    fixtures = build_fixture(records, MODEL, registry, style="echo")
    dropped = {r.id for r in records[:3]}
    for rec in records[:3]:
        del fixtures[_key(rec)]
    report = _run(records, registry, fixtures)
    failed = [r for r in report.record_results if not r.ok]
    assert {r.record_id for r in failed} == dropped
    assert all("protocol" in r.error and r.record_id in r.error for r in failed)
    assert all(r.accuracy is None and r.similarity is None for r in failed)
    assert report.manifest.records_failed == 3
    assert report.manifest.records_scored == 21
    assert report.mean_accuracy == 1.0


def test_all_records_failed(records, registry):
    with pytest.raises(AllRecordsFailed) as err:
        _run(records, registry, {})
    assert err.value.failures == 24


def test_nothing_to_evaluate(registry):
    with pytest.raises(EmptySelection):
        _run([], registry, {})


def test_extras_reported(records, registry):
    rec = records[0]
    gw = ReplayGateway({_key(rec): rec.assistant + " Nearby R999C999 reaches 12345.67."}, MODEL)
    result = evaluate_record(rec, gw, lexical_embedder, registry)
    assert result.extras.cell_tags == ["R999C999"]
    assert result.extras.values == ["12345.67"]
    assert result.accuracy.cell == 0.5
    assert 0.0 < result.similarity < 1.0


def test_empty_response(records, registry):
    rec = records[0]
    result = evaluate_record(rec, ReplayGateway({_key(rec): ""}, MODEL), lexical_embedder, registry)
    assert result.ok
    assert result.similarity == 0.0
    assert result.accuracy.overall == 0.0


def test_report_is_deterministic(records, registry):
    fixtures = build_fixture(records, MODEL, registry, style="degraded", seed=1)
    first = _run(records, registry, fixtures).model_dump_json()
    assert _run(records, registry, fixtures).model_dump_json() == first


def test_budget_warnings(records, registry):
    fixtures = build_fixture(records, MODEL, registry, style="echo", budget_tokens=10)
    settings = EvalSettings(progress=False, budget_tokens=10)
    report = evaluate_suite(records, ReplayGateway(fixtures, MODEL), lexical_embedder, registry, settings)
    assert len(report.manifest.budget_warnings) == len(records)
    assert report.mean_accuracy == 1.0
