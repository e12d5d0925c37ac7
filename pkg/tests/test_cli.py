import json
import shutil

import pytest

from energyde.cli import main
from energyde.connector.node import NodeServer, load_node_config
from energyde.connector.node import NodeState


@pytest.fixture()
def workdir(fixture_dir, tmp_path):
    work = tmp_path / "work"
    shutil.copytree(fixture_dir, work)
    return work


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExitCodes:
    def test_unknown_subcommand_usage_error(self, capsys):
        code, _, _ = run_cli(capsys, "frobnicate")
        assert code == 2

    def test_missing_required_argument(self, capsys):
        code, _, _ = run_cli(capsys, "validate", "--graph", "x.nt")
        assert code == 2

    def test_missing_file_config_error(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "query",
                               "--graph", str(tmp_path / "none.nt"),
                               "--query", str(tmp_path / "none.rq"))
        assert code == 2
        assert "error:" in err

    def test_nonconforming_graph_domain_failure(self, capsys, workdir):
        code, out, _ = run_cli(
            capsys, "validate",
            "--graph", str(workdir / "graphs" / "capacity_defective.nt"),
            "--shapes", str(workdir / "shapes" / "capacity.yaml"))
        assert code == 1
        assert json.loads(out)["conforms"] is False

    def test_conforming_graph_succeeds(self, capsys, workdir):
        code, out, _ = run_cli(
            capsys, "validate",
            "--graph", str(workdir / "graphs" / "tso.nt"),
            "--shapes", str(workdir / "shapes" / "capacity.yaml"))
        assert code == 0
        assert json.loads(out)["conforms"] is True


class TestQuery:
    def test_local_query_json_output(self, capsys, workdir):
        code, out, _ = run_cli(
            capsys, "query",
            "--graph", str(workdir / "graphs" / "reference.nt"),
            "--query", str(workdir / "queries" / "sq2.rq"))
        assert code == 0
        doc = json.loads(out)
        assert doc["head"]["vars"] == ["productionType"]
        assert len(doc["results"]["bindings"]) == 1

    def test_output_deterministic(self, capsys, workdir):
        args = ("query", "--graph", str(workdir / "graphs" / "tso.nt"),
                "--query", str(workdir / "queries" / "sq1.rq"))
        _, first, _ = run_cli(capsys, *args)
        _, second, _ = run_cli(capsys, *args)
        assert first == second


class TestRdfize:
    def test_mapping_applied(self, capsys, workdir, tmp_path):
        out_path = tmp_path / "out.nt"
        code, out, _ = run_cli(
            capsys, "rdfize",
            "--mapping", str(workdir / "mappings" / "capacity.yaml"),
            "--output", str(out_path))
        assert code == 0
        assert json.loads(out)["record_errors"] == 0
        assert out_path.read_text().count("\n") == json.loads(out)["triples"]


class TestPipeline:
    def test_run_reports_stages(self, capsys, workdir):
        code, out, _ = run_cli(capsys, "pipeline", "run",
                               "--config", str(workdir / "pipeline.yaml"))
        assert code == 0
        report = json.loads(out)
        assert report["loaded"] is True


class TestFixtures:
    def test_generate_deterministic(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "fixtures", "generate",
                               "--seed", "3", "--out", str(tmp_path / "fx"))
        assert code == 0
        assert json.loads(out)["seed"] == 3
        assert (tmp_path / "fx" / "scenario.yaml").exists()


class TestFederate:
    @pytest.fixture()
    def live_catalog(self, workdir):
        servers = []
        endpoints = {}
        for name in ("tso", "wiki"):
            config = load_node_config(workdir / "nodes" / f"{name}.yaml")
            server = NodeServer(NodeState.from_config(config)).start()
            servers.append(server)
            endpoints[name] = server.endpoint
        text = (workdir / "catalog.yaml").read_text()
        for name, endpoint in endpoints.items():
            text = text.replace(f"127.0.0.1:{39471 if name == 'tso' else 39474}",
                                endpoint)
        catalog_path = workdir / "catalog_live.yaml"
        catalog_path.write_text(text)
        yield catalog_path
        for server in servers:
            server.stop()

    def test_plan_inspector(self, capsys, workdir):
        code, out, _ = run_cli(
            capsys, "federate", "--plan",
            "--catalog", str(workdir / "catalog.yaml"),
            "--query", str(workdir / "queries" / "federated.rq"))
        assert code == 0
        plan = json.loads(out)
        assert sorted(sq["patterns"] for sq in plan["subqueries"]) == [1, 5]
        assert plan["joins"][0]["vars"] == ["productionType"]

    def test_federated_execution_over_wire(self, capsys, live_catalog, workdir):
        code, out, _ = run_cli(
            capsys, "federate",
            "--catalog", str(live_catalog),
            "--query", str(workdir / "queries" / "federated.rq"))
        assert code == 0
        bindings = json.loads(out)["results"]["bindings"]
        assert len(bindings) == 1
        assert bindings[0]["productionType"]["value"] == \
            "http://w3id.org/energy/WindPower"

    def test_unreachable_source_domain_failure(self, capsys, workdir):
        code, _, err = run_cli(
            capsys, "federate",
            "--catalog", str(workdir / "catalog.yaml"),
            "--query", str(workdir / "queries" / "federated.rq"))
        assert code == 1
        assert "error:" in err


class TestProvenance:
    def test_show_after_scenario(self, capsys, workdir, tmp_path):
        code, out, _ = run_cli(
            capsys, "scenario", "run",
            "--script", str(workdir / "scenario.yaml"),
            "--nodes", str(workdir / "nodes.yaml"),
            "--transcript", str(tmp_path / "t.jsonl"))
        assert code == 0
        lines = [json.loads(l) for l in out.strip().splitlines()]
        assert {e["rq"] for e in lines} >= {f"RQ-{i}" for i in range(1, 9)}
        log = next((workdir / "logs").glob("*.jsonl"))
        code, out, _ = run_cli(capsys, "provenance", "show",
                               "--log", str(log))
        assert code == 0
        records = [json.loads(l) for l in out.strip().splitlines()]
        assert [r["id"] for r in records] == list(range(1, len(records) + 1))
