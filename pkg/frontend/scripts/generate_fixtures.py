"""Record service payloads and the CLI report series for one scripted run.

The dashboard tests replay these fixtures through the UI state store
and check that the rendered timeline matches the CLI's series exactly.
Regenerate after changing the service, the solver defaults, or the
scripted scenario:

    python3 scripts/generate_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from click.testing import CliRunner
from fastapi.testclient import TestClient

from announce_planner.cli import main as cli_main
from announce_planner.model import DEFAULTS
from announce_planner.service import create_app

CONFIG_NAME = "small"
CONFIG = dict(t_min=2, t_max=13, **DEFAULTS)
POLICY = "qmdp"
INITIAL_COMPLETION = 8
SEED = 3

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def generate_cli_series(tmp: Path) -> dict:
    runner = CliRunner()
    config_path = tmp / "config.json"
    config_path.write_text(json.dumps(CONFIG))
    trace_path = tmp / "trace_qmdp.json"
    result = runner.invoke(cli_main, [
        "scenario", "--config", str(config_path), "--policy", POLICY,
        "--initial-completion", str(INITIAL_COMPLETION), "--seed", str(SEED),
        "--out", str(trace_path),
    ])
    assert result.exit_code == 0, result.output
    report = runner.invoke(cli_main, ["report", "--in", str(tmp), "--format", "json"])
    assert report.exit_code == 0, report.output
    series = json.loads(report.output)["scenarios"][0]
    trace = json.loads(trace_path.read_text())
    return {"series": series, "trace": trace}


def record_service_replay(trace: dict) -> dict:
    recorded = {"steps": []}
    with TestClient(create_app()) as client:

        def post(path: str, payload: dict) -> tuple[dict, dict]:
            response = client.post(path, json=payload)
            assert response.status_code == 200, response.text
            return payload, response.json()

        create_request, create_response = post(
            "/sessions", {"policy": POLICY, "config_name": CONFIG_NAME})
        session_id = create_response["id"]
        view = client.get(f"/sessions/{session_id}")
        recorded["create"] = {"request": create_request, "response": create_response}
        recorded["initial_view"] = view.json()
        for step in trace["steps"]:
            completed = step["t"] >= step["true_completion"]
            observe_request, observe_response = post(
                f"/sessions/{session_id}/observe",
                {"estimate": step["observation"], "completed": completed})
            assert observe_response["recommendation"] == step["announcement"], (
                f"service diverged from the scenario trace at week {step['t']}")
            announce_request, announce_response = post(
                f"/sessions/{session_id}/announce",
                {"announce": observe_response["recommendation"]})
            recorded["steps"].append({
                "observe_request": observe_request,
                "observe_response": observe_response,
                "announce_request": announce_request,
                "announce_response": announce_response,
            })
    recorded["session_id"] = session_id
    return recorded


def main() -> None:
    import tempfile

    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        bundle = generate_cli_series(Path(tmp))
    replay = record_service_replay(bundle["trace"])
    (FIXTURES / "cli_series.json").write_text(
        json.dumps(bundle["series"], indent=2, sort_keys=True) + "\n")
    (FIXTURES / "service_replay.json").write_text(
        json.dumps(replay, indent=2, sort_keys=True) + "\n")
    print(f"wrote {FIXTURES / 'cli_series.json'}")
    print(f"wrote {FIXTURES / 'service_replay.json'} ({len(replay['steps'])} weeks)")


if __name__ == "__main__":
    main()
