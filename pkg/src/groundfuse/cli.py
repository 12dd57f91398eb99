"""Batch command-line front end.

Subcommands: decompose, score-pair, match, retrieve. Backends are given as
``fixture:<dir>`` or ``http:<base-url>`` specs; a JSON config file can hold
any option, with command-line flags winning. Exit codes are a contract:
0 success, 1 no usable records, 2 decomposition failure, 64 usage error,
78 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path

from . import reporting
from .backends import ProviderConfig, ProviderKind, build_detector, build_embedder, build_llm
from .decompose import DecompositionPolicy, decompose
from .errors import ConfigError, DecompositionFailed, GroundfuseError
from .evaluation import (
    MatchOutcome,
    RetrievalOutcome,
    baseline_topk,
    gold_rank,
    load_corpus_manifest,
    load_image_checked,
    load_match_records,
    load_retrieval_queries,
    matching_accuracy,
    recall_at_k,
    rerank,
)
from .fusion import FusionConfig, MissingEntityPolicy, Providers, RelationMask, WeightMode, score_pair
from .prompts import PromptTemplates

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NO_RECORDS = 1
EXIT_DECOMPOSITION = 2
EXIT_USAGE = 64
EXIT_CONFIG = 78

PROGRESS_EVERY = 5


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


@dataclass
class RunConfig:
    backend_embed: str | None = None
    backend_detect: str | None = None
    backend_llm: str | None = None
    box_threshold: float = 0.35
    timeout_ms: int = 10_000
    retry_budget: int = 2
    policy: str = "rule_first"
    workers: int = 1
    out: str | None = None
    prompts: str | None = None
    fusion: FusionConfig = FusionConfig()

    def to_dict(self) -> dict:
        # Echoes only result-affecting settings: worker count and output path
        # must not change report bytes.
        return {
            "backend_embed": self.backend_embed,
            "backend_detect": self.backend_detect,
            "backend_llm": self.backend_llm,
            "box_threshold": self.box_threshold,
            "timeout_ms": self.timeout_ms,
            "retry_budget": self.retry_budget,
            "policy": self.policy,
            "fusion": self.fusion.to_dict(),
        }


def _fusion_from_dict(data: dict) -> FusionConfig:
    try:
        return FusionConfig(
            normalize_embeddings=bool(data.get("normalize_embeddings", True)),
            missing_entity_policy=MissingEntityPolicy(data.get("missing_entity_policy", "skip")),
            weight_mode=WeightMode(data.get("weight_mode", "raw_cosine")),
            relation_mask=RelationMask(data.get("relation_mask", "combined_boxes")),
        )
    except ValueError as exc:
        raise ConfigError(f"bad fusion config: {exc}") from exc


def load_run_config(args) -> RunConfig:
    """Merge defaults, config file, and flags (flags win)."""
    file_data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            file_data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(file_data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")

    def pick(flag_name: str, key: str, default):
        flag = getattr(args, flag_name, None)
        if flag is not None:
            return flag
        return file_data.get(key, default)

    cfg = RunConfig(
        backend_embed=pick("backend_embed", "backend_embed", None),
        backend_detect=pick("backend_detect", "backend_detect", None),
        backend_llm=pick("backend_llm", "backend_llm", None),
        box_threshold=float(pick("box_threshold", "box_threshold", 0.35)),
        timeout_ms=int(pick("timeout_ms", "timeout_ms", 10_000)),
        retry_budget=int(pick("retry_budget", "retry_budget", 2)),
        policy=str(pick("policy", "policy", "rule_first")),
        workers=int(pick("workers", "workers", 1)),
        out=pick("out", "out", None),
        prompts=pick("prompts", "prompts", None),
        fusion=_fusion_from_dict(file_data.get("fusion", {})),
    )
    if cfg.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {cfg.workers}")
    try:
        DecompositionPolicy(cfg.policy)
    except ValueError as exc:
        raise ConfigError(f"unknown policy {cfg.policy!r}") from exc
    return cfg


def _provider_config(cfg: RunConfig, spec: str, role: str) -> ProviderConfig:
    try:
        pc = ProviderConfig.parse(spec, box_threshold=cfg.box_threshold,
                                  timeout_ms=cfg.timeout_ms, retry_budget=cfg.retry_budget)
    except ValueError as exc:
        raise ConfigError(f"bad {role} backend spec: {exc}") from exc
    if pc.kind is ProviderKind.FIXTURE and not Path(pc.location).is_dir():
        raise ConfigError(f"{role} fixture directory does not exist: {pc.location}")
    return pc


def _build_providers(cfg: RunConfig, need_detector: bool = True) -> Providers:
    if not cfg.backend_embed:
        raise ConfigError("an embedding backend is required (--backend-embed)")
    embedder = build_embedder(_provider_config(cfg, cfg.backend_embed, "embed"))
    detector = None
    if need_detector:
        if not cfg.backend_detect:
            raise ConfigError("a detector backend is required (--backend-detect)")
        detector = build_detector(_provider_config(cfg, cfg.backend_detect, "detect"))
    llm = build_llm(_provider_config(cfg, cfg.backend_llm, "llm")) if cfg.backend_llm else None
    return Providers(embedder=embedder, detector=detector, llm=llm,
                     box_threshold=cfg.box_threshold)


def _check_policy_llm(cfg: RunConfig, llm) -> DecompositionPolicy:
    policy = DecompositionPolicy(cfg.policy)
    if policy in (DecompositionPolicy.LLM_ONLY, DecompositionPolicy.LLM_FIRST) and llm is None:
        raise ConfigError(f"policy {policy.value} requires an LLM backend (--backend-llm)")
    return policy


def _templates(cfg: RunConfig) -> PromptTemplates:
    if cfg.prompts is None:
        return PromptTemplates()
    path = Path(cfg.prompts)
    if not path.is_dir():
        raise ConfigError(f"prompts directory does not exist: {path}")
    return PromptTemplates.from_dir(path)


def _write_report(report: dict, out: str) -> Path:
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(reporting.dumps(report) + "\n", encoding="utf-8")
    return path


def _parallel(items, worker, workers: int, what: str) -> list:
    """Run worker(index, item) over items; results return in input order."""
    results = [None] * len(items)
    done = 0
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(worker, i, item): i for i, item in enumerate(items)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
            done += 1
            if done % PROGRESS_EVERY == 0 or done == len(items):
                log.info("processed %d/%d %s", done, len(items), what)
    return results


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_decompose(args) -> int:
    cfg = load_run_config(args)
    llm = build_llm(_provider_config(cfg, cfg.backend_llm, "llm")) if cfg.backend_llm else None
    policy = _check_policy_llm(cfg, llm)
    try:
        decomp = decompose(args.caption, llm, policy, _templates(cfg))
    except DecompositionFailed as exc:
        print(f"decomposition failed: {exc}", file=sys.stderr)
        return EXIT_DECOMPOSITION
    print(decomp.to_json())
    return EXIT_OK


def cmd_score_pair(args) -> int:
    cfg = load_run_config(args)
    providers = _build_providers(cfg)
    policy = _check_policy_llm(cfg, providers.llm)
    from .core import Image

    image = Image.from_file(args.image)
    try:
        pair = score_pair(image, args.caption, providers, cfg.fusion,
                          policy=policy, templates=_templates(cfg))
    except DecompositionFailed as exc:
        print(f"decomposition failed: {exc}", file=sys.stderr)
        return EXIT_DECOMPOSITION
    text = reporting.dumps(pair.to_dict())
    if cfg.out:
        _write_report(pair.to_dict(), cfg.out)
    print(text)
    return EXIT_OK


def cmd_match(args) -> int:
    cfg = load_run_config(args)
    if not cfg.out:
        raise _UsageError("match requires --out for the report file")
    providers = _build_providers(cfg)
    policy = _check_policy_llm(cfg, providers.llm)
    templates = _templates(cfg)
    records, load_errors = load_match_records(args.pairs)
    try:
        manifest = load_corpus_manifest(args.images)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load image manifest: {exc}") from exc
    if not records:
        print("no records", file=sys.stderr)
        return EXIT_NO_RECORDS

    def worker(index: int, record):
        row = {
            "index": index,
            "caption": record.caption,
            "component": record.component.value,
            "positive_image_id": record.positive_image_id,
            "negative_image_id": record.negative_image_id,
            "positive": None,
            "negative": None,
            "base_hit": None,
            "fused_hit": None,
            "error": None,
        }
        try:
            pos_img = load_image_checked(record.positive_image_id, manifest)
            neg_img = load_image_checked(record.negative_image_id, manifest)
            decomp = decompose(record.caption, providers.llm, policy, templates)
            pos = score_pair(pos_img, record.caption, providers, cfg.fusion,
                             decomposition=decomp)
            neg = score_pair(neg_img, record.caption, providers, cfg.fusion,
                             decomposition=decomp)
            row["positive"] = pos.to_dict()
            row["negative"] = neg.to_dict()
            row["base_hit"] = pos.base_similarity > neg.base_similarity
            row["fused_hit"] = pos.fused_similarity > neg.fused_similarity
        except (GroundfuseError, ValueError, OSError) as exc:
            row["error"] = str(exc)
            log.warning("record %d failed: %s", index, exc)
        return row

    rows = _parallel(records, worker, cfg.workers, "match records")
    succeeded = [(rec, row) for rec, row in zip(records, rows) if row["error"] is None]
    aggregates = {
        "succeeded": len(succeeded),
        "failed": len(rows) - len(succeeded),
        "baseline_accuracy": None,
        "fused_accuracy": None,
        "flipped": None,
    }
    if succeeded:
        base_outcomes = [
            MatchOutcome(rec, row["positive"]["base_similarity"],
                         row["negative"]["base_similarity"])
            for rec, row in succeeded
        ]
        fused_outcomes = [
            MatchOutcome(rec, row["positive"]["fused_similarity"],
                         row["negative"]["fused_similarity"])
            for rec, row in succeeded
        ]
        aggregates["baseline_accuracy"] = matching_accuracy(base_outcomes).to_dict()
        aggregates["fused_accuracy"] = matching_accuracy(fused_outcomes).to_dict()
        aggregates["flipped"] = sum(
            1 for _, row in succeeded if row["base_hit"] != row["fused_hit"])

    report = {
        "command": "match",
        "config": cfg.to_dict(),
        "load_errors": load_errors,
        "records": rows,
        "aggregates": aggregates,
    }
    path = _write_report(report, cfg.out)
    written = json.loads(path.read_text(encoding="utf-8"))
    if succeeded:
        print(reporting.render_match_table(written))
    print(f"report written to {path}")
    return EXIT_OK if succeeded else EXIT_NO_RECORDS


def cmd_retrieve(args) -> int:
    cfg = load_run_config(args)
    if not cfg.out:
        raise _UsageError("retrieve requires --out for the report file")
    if args.topk < 1:
        raise _UsageError(f"--topk must be >= 1, got {args.topk}")
    try:
        ks = sorted({int(k) for k in args.recall_ks.split(",") if k.strip()})
    except ValueError as exc:
        raise _UsageError(f"bad --recall-ks: {exc}")
    if not ks or any(k < 1 for k in ks):
        raise _UsageError(f"--recall-ks must be positive integers, got {args.recall_ks!r}")

    providers = _build_providers(cfg)
    policy = _check_policy_llm(cfg, providers.llm)
    templates = _templates(cfg)
    queries, load_errors = load_retrieval_queries(args.queries)
    try:
        manifest = load_corpus_manifest(args.images)
        corpus = [load_image_checked(image_id, manifest) for image_id in manifest]
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load corpus: {exc}") from exc
    if not queries:
        print("no queries", file=sys.stderr)
        return EXIT_NO_RECORDS

    def worker(index: int, query):
        row = {
            "index": index,
            "caption": query.caption,
            "gold_image_id": query.gold_image_id,
            "baseline": None,
            "reranked": None,
            "gold_rank_before": None,
            "gold_rank_after": None,
            "warnings": [],
            "error": None,
        }
        if query.gold_image_id not in manifest:
            row["error"] = f"gold image {query.gold_image_id} is not in the corpus manifest"
            return row
        try:
            candidates = baseline_topk(query.caption, corpus, args.topk, providers.embedder)
            decomp = None
            try:
                decomp = decompose(query.caption, providers.llm, policy, templates)
            except DecompositionFailed as exc:
                row["warnings"].append(f"decomposition failed, keeping baseline order: {exc}")
            reranked = rerank(query.caption, candidates, providers, cfg.fusion,
                              decomposition=decomp, warnings=row["warnings"])
            before = tuple((c.image_id, c.score) for c in candidates)
            after = tuple((c.image_id, c.score) for c in reranked)
            outcome = RetrievalOutcome(
                query=query,
                baseline_ranking=before,
                reranked=after,
                gold_rank_before=gold_rank(before, query.gold_image_id),
                gold_rank_after=gold_rank(after, query.gold_image_id),
            )
            row["baseline"] = [{"image_id": i, "score": s} for i, s in before]
            row["reranked"] = [{"image_id": i, "score": s} for i, s in after]
            row["gold_rank_before"] = outcome.gold_rank_before
            row["gold_rank_after"] = outcome.gold_rank_after
            row["outcome"] = outcome
        except (GroundfuseError, ValueError, OSError) as exc:
            row["error"] = str(exc)
            log.warning("query %d failed: %s", index, exc)
        return row

    rows = _parallel(queries, worker, cfg.workers, "queries")
    outcomes = [row.pop("outcome") for row in rows if "outcome" in row]
    succeeded = [row for row in rows if row["error"] is None]
    aggregates = {"succeeded": len(succeeded), "failed": len(rows) - len(succeeded),
                  "recall": None}
    if outcomes:
        before = recall_at_k(outcomes, ks, use="before")
        after = recall_at_k(outcomes, ks, use="after")
        aggregates["recall"] = {
            "before": {str(k): before[k] for k in ks},
            "after": {str(k): after[k] for k in ks},
        }

    report = {
        "command": "retrieve",
        "config": cfg.to_dict(),
        "topk": args.topk,
        "recall_ks": ks,
        "load_errors": load_errors,
        "queries": rows,
        "aggregates": aggregates,
    }
    path = _write_report(report, cfg.out)
    written = json.loads(path.read_text(encoding="utf-8"))
    if aggregates["recall"] is not None:
        print(reporting.render_retrieval_table(written))
    print(f"report written to {path}")
    return EXIT_OK if succeeded else EXIT_NO_RECORDS


# ---------------------------------------------------------------------------
# Parser and entry points
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="groundfuse",
                     description="Compositional image-text alignment pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser) -> None:
        p.add_argument("--backend-embed", help="fixture:<dir> or http:<base-url>")
        p.add_argument("--backend-detect", help="fixture:<dir> or http:<base-url>")
        p.add_argument("--backend-llm", help="fixture:<dir> or http:<base-url>")
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--policy", choices=[p.value for p in DecompositionPolicy])
        p.add_argument("--box-threshold", type=float, dest="box_threshold")
        p.add_argument("--timeout-ms", type=int, dest="timeout_ms")
        p.add_argument("--retry-budget", type=int, dest="retry_budget")
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="report output path")
        p.add_argument("--prompts", help="directory with stage1.txt / stage2.txt")

    p = sub.add_parser("decompose", help="decompose a caption into entities and relations")
    p.add_argument("--caption", required=True)
    common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("score-pair", help="score one caption against one image")
    p.add_argument("--caption", required=True)
    p.add_argument("--image", required=True, help="path to a PNG or JPEG file")
    common(p)
    p.set_defaults(func=cmd_score_pair)

    p = sub.add_parser("match", help="run the two-alternative matching benchmark")
    p.add_argument("--pairs", required=True, help="JSONL match records")
    p.add_argument("--images", required=True, help="JSONL corpus manifest")
    common(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("retrieve", help="baseline top-K retrieval plus re-ranking")
    p.add_argument("--queries", required=True, help="JSONL retrieval queries")
    p.add_argument("--images", required=True, help="JSONL corpus manifest")
    p.add_argument("--topk", type=int, default=10)
    p.add_argument("--recall-ks", default="1,5", dest="recall_ks")
    common(p)
    p.set_defaults(func=cmd_retrieve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help exits 0 through argparse
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def console_main() -> None:
    sys.exit(main(sys.argv[1:]))
