"""CLI behavior: exit codes, config handling, reports, and stdout output."""

import json
from pathlib import Path

import pytest

from groundfuse.cli import main

FIXTURES = Path(__file__).parent / "fixtures"
MATCH = FIXTURES / "match"
RETRIEVAL = FIXTURES / "retrieval"


def match_args(out, extra=()):
    return ["match",
            "--pairs", str(MATCH / "pairs.jsonl"),
            "--images", str(MATCH / "manifest.jsonl"),
            "--backend-embed", f"fixture:{MATCH / 'store'}",
            "--backend-detect", f"fixture:{MATCH / 'store'}",
            "--out", str(out), *extra]


def retrieve_args(out, extra=()):
    return ["retrieve",
            "--queries", str(RETRIEVAL / "queries.jsonl"),
            "--images", str(RETRIEVAL / "manifest.jsonl"),
            "--backend-embed", f"fixture:{RETRIEVAL / 'store'}",
            "--backend-detect", f"fixture:{RETRIEVAL / 'store'}",
            "--backend-llm", f"fixture:{RETRIEVAL / 'store'}",
            "--out", str(out), *extra]


class TestDecomposeCommand:
    def test_rule_only_triplet_json(self, capsys):
        rc = main(["decompose", "--caption", "A man is holding a sign",
                   "--policy", "rule_only"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["source"] == "rule_based"
        assert [e["phrase"] for e in out["entities"]] == ["man", "sign"]
        assert out["relations"] == [
            {"subject": "man", "predicate": "holding", "object": "sign"}]

    def test_missing_caption_is_usage_error(self, capsys):
        assert main(["decompose", "--policy", "rule_only"]) == 64

    def test_llm_policy_without_backend_is_config_error(self, capsys):
        rc = main(["decompose", "--caption", "anything", "--policy", "llm_only"])
        assert rc == 78

    def test_unparseable_caption_exits_2(self, capsys):
        rc = main(["decompose", "--caption", "Sunset over mountains, golden and vast",
                   "--policy", "rule_only"])
        assert rc == 2


class TestConfigHandling:
    def test_config_file_supplies_backends(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "backend_embed": f"fixture:{MATCH / 'store'}",
            "backend_detect": f"fixture:{MATCH / 'store'}",
            "workers": 2,
            "out": str(tmp_path / "report.json"),
        }))
        rc = main(["match", "--pairs", str(MATCH / "pairs.jsonl"),
                   "--images", str(MATCH / "manifest.jsonl"), "--config", str(cfg)])
        assert rc == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["aggregates"]["succeeded"] == 6

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"box_threshold": 0.9}))
        out = tmp_path / "report.json"
        rc = main(match_args(out, ["--config", str(cfg), "--box-threshold", "0.35"]))
        assert rc == 0
        assert json.loads(out.read_text())["config"]["box_threshold"] == 0.35

    def test_bad_workers_is_config_error(self, tmp_path):
        assert main(match_args(tmp_path / "r.json", ["--workers", "0"])) == 78

    def test_missing_fixture_dir_is_config_error(self, tmp_path):
        rc = main(["match", "--pairs", str(MATCH / "pairs.jsonl"),
                   "--images", str(MATCH / "manifest.jsonl"),
                   "--backend-embed", "fixture:/does/not/exist",
                   "--backend-detect", f"fixture:{MATCH / 'store'}",
                   "--out", str(tmp_path / "r.json")])
        assert rc == 78

    def test_bad_policy_in_config_file(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"policy": "psychic"}))
        assert main(match_args(tmp_path / "r.json", ["--config", str(cfg)])) == 78


class TestMatchCommand:
    def test_full_run_report_and_table(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        assert main(match_args(out)) == 0
        report = json.loads(out.read_text())
        assert report["aggregates"]["succeeded"] == 6
        assert report["aggregates"]["flipped"] == 2
        stdout = capsys.readouterr().out
        assert "Sub" in stdout and "Total" in stdout and "fused" in stdout

    def test_empty_pairs_file(self, tmp_path, capsys):
        pairs = tmp_path / "pairs.jsonl"
        pairs.write_text("")
        rc = main(["match", "--pairs", str(pairs),
                   "--images", str(MATCH / "manifest.jsonl"),
                   "--backend-embed", f"fixture:{MATCH / 'store'}",
                   "--backend-detect", f"fixture:{MATCH / 'store'}",
                   "--out", str(tmp_path / "r.json")])
        assert rc == 1
        assert "no records" in capsys.readouterr().err

    def test_unreadable_image_fails_record_not_run(self, tmp_path):
        manifest_rows = [json.loads(line) for line in
                         (MATCH / "manifest.jsonl").read_text().splitlines()]
        first_id = json.loads((MATCH / "pairs.jsonl").read_text().splitlines()[0])[
            "positive_image_id"]
        rows = []
        for row in manifest_rows:
            if row["image_id"] == first_id:
                rows.append({"image_id": first_id, "path": "images/missing.png"})
            else:
                rows.append({"image_id": row["image_id"],
                             "path": str(MATCH / row["path"])})
        bad_manifest = tmp_path / "manifest.jsonl"
        bad_manifest.write_text("".join(json.dumps(r) + "\n" for r in rows))
        out = tmp_path / "report.json"
        rc = main(["match", "--pairs", str(MATCH / "pairs.jsonl"),
                   "--images", str(bad_manifest),
                   "--backend-embed", f"fixture:{MATCH / 'store'}",
                   "--backend-detect", f"fixture:{MATCH / 'store'}",
                   "--out", str(out)])
        assert rc == 0  # other records still succeed
        report = json.loads(out.read_text())
        assert report["aggregates"]["failed"] == 1
        assert report["aggregates"]["succeeded"] == 5
        failed = [r for r in report["records"] if r["error"]]
        assert len(failed) == 1 and failed[0]["index"] == 0

    def test_missing_out_is_usage_error(self):
        args = match_args("ignored")
        args.remove("--out")
        args.remove("ignored")
        assert main(args) == 64

    def test_malformed_pairs_line_recorded(self, tmp_path):
        pairs = tmp_path / "pairs.jsonl"
        good = (MATCH / "pairs.jsonl").read_text().splitlines()[0]
        pairs.write_text(good + "\n{broken json\n")
        out = tmp_path / "report.json"
        rc = main(["match", "--pairs", str(pairs),
                   "--images", str(MATCH / "manifest.jsonl"),
                   "--backend-embed", f"fixture:{MATCH / 'store'}",
                   "--backend-detect", f"fixture:{MATCH / 'store'}",
                   "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        assert len(report["load_errors"]) == 1
        assert report["aggregates"]["succeeded"] == 1


class TestRetrieveCommand:
    def test_full_run(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        assert main(retrieve_args(out)) == 0
        report = json.loads(out.read_text())
        assert report["aggregates"]["recall"]["before"]["1"] == 20.0
        assert report["aggregates"]["recall"]["after"]["1"] == 80.0
        stdout = capsys.readouterr().out
        assert "R@1" in stdout and "after" in stdout

    def test_topk_zero_is_usage_error(self, tmp_path):
        assert main(retrieve_args(tmp_path / "r.json", ["--topk", "0"])) == 64

    def test_bad_recall_ks_is_usage_error(self, tmp_path):
        assert main(retrieve_args(tmp_path / "r.json", ["--recall-ks", "1,zebra"])) == 64

    def test_gold_missing_from_manifest_rejects_query(self, tmp_path):
        queries = tmp_path / "queries.jsonl"
        original = (RETRIEVAL / "queries.jsonl").read_text().splitlines()
        rogue = json.dumps({"caption": "A pilot is flying a kite",
                            "gold_image_id": "f" * 64})
        queries.write_text(original[0] + "\n" + rogue + "\n")
        out = tmp_path / "report.json"
        rc = main(["retrieve", "--queries", str(queries),
                   "--images", str(RETRIEVAL / "manifest.jsonl"),
                   "--backend-embed", f"fixture:{RETRIEVAL / 'store'}",
                   "--backend-detect", f"fixture:{RETRIEVAL / 'store'}",
                   "--backend-llm", f"fixture:{RETRIEVAL / 'store'}",
                   "--out", str(out)])
        assert rc == 0
        report = json.loads(out.read_text())
        rejected = [q for q in report["queries"] if q["error"]]
        assert len(rejected) == 1
        assert "not in the corpus manifest" in rejected[0]["error"]


class TestScorePairCommand:
    def test_prints_pair_score_json(self, capsys):
        manifest = {row["image_id"]: row["path"] for row in
                    map(json.loads, (MATCH / "manifest.jsonl").read_text().splitlines())}
        pairs = [json.loads(line) for line in (MATCH / "pairs.jsonl").read_text().splitlines()]
        triplet = pairs[2]  # the fully grounded record
        image_path = MATCH / manifest[triplet["positive_image_id"]]
        rc = main(["score-pair", "--caption", triplet["caption"],
                   "--image", str(image_path),
                   "--backend-embed", f"fixture:{MATCH / 'store'}",
                   "--backend-detect", f"fixture:{MATCH / 'store'}"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert list(out) == ["caption", "image_id", "base_similarity",
                             "fused_similarity", "entities", "relation_score", "config"]
        assert len(out["entities"]) == 2

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0
