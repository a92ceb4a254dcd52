"""Command-line interface.

Subcommands: chunk, score, compare, sweep, ppl-report. One JSON config file,
overridden by flags; env vars are used only for backend credentials. Exit
codes: 0 success, 1 usage/config/data error, 2 backend failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import statistics
import sys
from pathlib import Path

from .chunkers import run_chunker, strategy_label
from .config import AppConfig, build_backend
from .corpus import load_jsonl
from .errors import BackendError, ChunklabError
from .metrics import (
    SweepGrid,
    lambda_sweep,
    perplexity,
    score_chunk_texts,
    sweep_argmax,
)
from .pipeline import PipelineConfig, run_pipeline

CHUNK_STRATEGIES = ("fixed", "sentence", "semantic", "qchunker")


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; this toolkit reserves 2 for backend
    failures, so usage errors exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="chunklab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--backend", choices=("stub", "http"))
        p.add_argument("--seed", type=int)
        p.add_argument("--lambda", dest="lam", type=float,
                       help="weight of logical independence in the composite score")
        p.add_argument("--alpha", type=float, help="Gram-matrix regularization constant")
        p.add_argument("--parallelism", type=int)

    p = sub.add_parser("chunk", help="chunk a corpus with one strategy")
    common(p)
    p.add_argument("--input", required=True, help="corpus JSONL (id, text per line)")
    p.add_argument("--strategy", required=True, choices=CHUNK_STRATEGIES)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--target-len", type=int, help="length target for fixed/sentence strategies")
    p.add_argument("--threshold", type=float, help="similarity threshold for the semantic strategy")
    p.add_argument("--candidates", type=int, help="number of sampled candidate partitionings")
    p.add_argument("--results-dir", help="where qchunker writes per-document run records")
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("score", help="score stored chunkings")
    common(p)
    p.add_argument("--chunks", required=True, help="chunk JSONL produced by `chunk`")
    p.add_argument("--out", required=True, help="output JSONL with a score object per line")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("compare", help="compare chunkings of the same corpus")
    common(p)
    p.add_argument("--chunks", action="append", required=True,
                   help="chunk JSONL; pass two or more times")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="correlate recombined scores with downstream quality")
    common(p)
    p.add_argument("--scores", required=True,
                   help="JSONL with phi_li and phi_sd per chunking scheme")
    p.add_argument("--downstream", required=True,
                   help="JSONL with a downstream quality value per scheme")
    p.add_argument("--grid", default="0:1:0.01", help="start:end:step for the weight grid")
    p.add_argument("--plot", help="write a line chart (SVG) of r against the weight")
    p.add_argument("--out", help="write the TSV rows here as well as stdout")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ppl-report", help="perplexity of original vs completed chunks")
    common(p)
    p.add_argument("--result", required=True, help="pipeline run record (JSON)")
    p.add_argument("--plot", help="write a per-chunk perplexity chart")
    p.set_defaults(func=cmd_ppl_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BackendError as exc:
        print(f"chunklab: backend error: {exc}", file=sys.stderr)
        return 2
    except (ChunklabError, OSError, json.JSONDecodeError) as exc:
        print(f"chunklab: error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


# -- helpers -------------------------------------------------------------------


def _config_from(args) -> AppConfig:
    overrides = {
        "backend": getattr(args, "backend", None),
        "seed": getattr(args, "seed", None),
        "lam": getattr(args, "lam", None),
        "alpha": getattr(args, "alpha", None),
        "parallelism": getattr(args, "parallelism", None),
    }
    return AppConfig.load(getattr(args, "config", None), **overrides)


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False)


def _read_chunk_lines(path: str) -> list[dict]:
    lines: list[dict] = []
    p = Path(path)
    if not p.exists():
        raise ChunklabError(f"chunk file not found: {p}")
    with p.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ChunklabError(f"{path}: line {lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict) or "doc_id" not in obj:
                raise ChunklabError(f"{path}: line {lineno}: missing doc_id")
            chunks = obj.get("chunks")
            if (
                not isinstance(chunks, list)
                or not chunks
                or not all(isinstance(c, dict) and c.get("text") for c in chunks)
            ):
                raise ChunklabError(f"{path}: line {lineno}: missing or empty chunks")
            lines.append(obj)
    return lines


# -- commands ------------------------------------------------------------------


def cmd_chunk(args) -> int:
    cfg = _config_from(args)
    chunker_cfg = cfg.chunker
    if args.strategy in ("fixed", "sentence", "semantic"):
        updates = {"strategy": args.strategy}
        if args.target_len is not None:
            updates["target_len"] = args.target_len
        if args.threshold is not None:
            updates["similarity_threshold"] = args.threshold
        chunker_cfg = dataclasses.replace(chunker_cfg, **updates)
    docs = load_jsonl(args.input)
    backend = None
    if args.strategy in ("semantic", "qchunker"):
        backend = build_backend(cfg)
    candidates_p = args.candidates if args.candidates is not None else cfg.candidates_p

    results_dir = None
    if args.strategy == "qchunker":
        results_dir = Path(args.results_dir) if args.results_dir else Path(f"{args.out}.results")
        results_dir.mkdir(parents=True, exist_ok=True)

    out_path = Path(args.out)
    with out_path.open("w", encoding="utf-8", newline="\n") as out:
        for doc in docs:
            if args.strategy == "qchunker":
                pipe_cfg = PipelineConfig(
                    scorer=backend,
                    embedder=backend,
                    generator=backend,
                    lam=cfg.lam,
                    alpha=cfg.alpha,
                    candidates_p=candidates_p,
                    sampling=cfg.sampling,
                    parallelism=cfg.parallelism,
                    review_window_tokens=cfg.review_window_tokens,
                    backend_kind=cfg.backend,
                    seed=cfg.seed,
                )
                result = run_pipeline(doc, pipe_cfg)
                result_path = results_dir / f"{doc.id}.json"
                result_path.write_text(
                    _dumps(result.to_json_dict()) + "\n", encoding="utf-8"
                )
                partition = result.selected_partition
                chunks = []
                for chunk, entry in zip(partition.chunks, result.completed):
                    text = entry.rewritten_text if hasattr(entry, "rewritten_text") else entry.text
                    chunks.append(
                        {
                            "text": text,
                            "start_sentence": chunk.start_sentence,
                            "end_sentence": chunk.end_sentence,
                        }
                    )
                line = {
                    "doc_id": doc.id,
                    "strategy": "qchunker",
                    "boundaries": list(partition.boundaries),
                    "chunks": chunks,
                    "pipeline_result": str(result_path),
                }
            else:
                partition = run_chunker(doc, chunker_cfg, embedder=backend)
                line = {
                    "doc_id": doc.id,
                    "strategy": strategy_label(args.strategy),
                    "boundaries": list(partition.boundaries),
                    "chunks": [
                        {
                            "text": c.text,
                            "start_sentence": c.start_sentence,
                            "end_sentence": c.end_sentence,
                        }
                        for c in partition.chunks
                    ],
                }
            out.write(_dumps(line) + "\n")
    return 0


def cmd_score(args) -> int:
    cfg = _config_from(args)
    backend = build_backend(cfg)
    lines = _read_chunk_lines(args.chunks)
    rows = []
    with Path(args.out).open("w", encoding="utf-8", newline="\n") as out:
        for obj in lines:
            texts = [c["text"] for c in obj["chunks"]]
            breakdown = score_chunk_texts(texts, backend, backend, cfg.lam, cfg.alpha)
            obj = dict(obj)
            obj["score"] = breakdown.to_dict()
            out.write(_dumps(obj) + "\n")
            rows.append((obj["doc_id"], breakdown))
    print(f"{'doc_id':<20} {'K':>4} {'phi_li':>12} {'phi_sd':>12} {'phi_cs':>12}")
    for doc_id, b in rows:
        print(f"{doc_id:<20} {b.k:>4} {b.phi_li:>12.8f} {b.phi_sd:>12.8f} {b.phi_cs:>12.8f}")
    return 0


def cmd_compare(args) -> int:
    if len(args.chunks) < 2:
        raise ChunklabError("compare needs two or more --chunks paths")
    cfg = _config_from(args)
    backend = build_backend(cfg)

    tables = []
    for path in args.chunks:
        lines = _read_chunk_lines(path)
        by_doc = {obj["doc_id"]: obj for obj in lines}
        if len(by_doc) != len(lines):
            raise ChunklabError(f"{path}: duplicate doc_id")
        label = lines[0].get("strategy") or Path(path).stem
        tables.append((label, path, by_doc))

    base_ids = set(tables[0][2])
    for label, path, by_doc in tables[1:]:
        if set(by_doc) != base_ids:
            raise ChunklabError(
                f"corpora mismatch: {path} covers different doc_ids than {tables[0][1]}"
            )

    doc_ids = sorted(base_ids)
    documents = []
    for doc_id in doc_ids:
        entries = []
        for label, _path, by_doc in tables:
            texts = [c["text"] for c in by_doc[doc_id]["chunks"]]
            b = score_chunk_texts(texts, backend, backend, cfg.lam, cfg.alpha)
            entries.append({"strategy": label, "score": b.to_dict()})
        # Min-max normalized diagnostic; never used for selection.
        lis = [e["score"]["phi_li"] for e in entries]
        sds = [e["score"]["phi_sd"] for e in entries]
        for e in entries:
            nli = _minmax(e["score"]["phi_li"], lis)
            nsd = _minmax(e["score"]["phi_sd"], sds)
            e["phi_cs_normalized"] = cfg.lam * nli + (1 - cfg.lam) * nsd
        best = max(range(len(entries)), key=lambda i: (entries[i]["score"]["phi_cs"], -i))
        documents.append({"doc_id": doc_id, "entries": entries, "winner": entries[best]["strategy"]})

    report = {"lambda": cfg.lam, "alpha": cfg.alpha, "documents": documents}
    if args.json:
        payload = _dumps(report) + "\n"
        if args.out:
            Path(args.out).write_text(payload, encoding="utf-8")
        else:
            sys.stdout.write(payload)
        return 0

    lines_out = [f"{'doc_id':<16} {'strategy':<26} {'K':>4} {'phi_li':>12} {'phi_sd':>12} {'phi_cs':>12}"]
    for doc in documents:
        for e in doc["entries"]:
            s = e["score"]
            lines_out.append(
                f"{doc['doc_id']:<16} {e['strategy']:<26} {s['k']:>4}"
                f" {s['phi_li']:>12.8f} {s['phi_sd']:>12.8f} {s['phi_cs']:>12.8f}"
            )
        lines_out.append(f"{doc['doc_id']:<16} -> winner: {doc['winner']}")
    text = "\n".join(lines_out) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _minmax(value: float, values: list[float]) -> float:
    lo, hi = min(values), max(values)
    if hi - lo < 1e-300:
        return 0.5
    return (value - lo) / (hi - lo)


def _read_jsonl(path: str) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise ChunklabError(f"file not found: {p}")
    out = []
    with p.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ChunklabError(f"{path}: line {lineno}: malformed JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise ChunklabError(f"{path}: line {lineno}: expected a JSON object")
            out.append(obj)
    return out


def cmd_sweep(args) -> int:
    score_rows = _read_jsonl(args.scores)
    downstream_rows = _read_jsonl(args.downstream)
    try:
        pairs = [(float(r["phi_li"]), float(r["phi_sd"])) for r in score_rows]
    except KeyError as exc:
        raise ChunklabError(f"{args.scores}: every line needs phi_li and phi_sd ({exc})")
    try:
        values = [float(r["value"]) for r in downstream_rows]
    except KeyError as exc:
        raise ChunklabError(f"{args.downstream}: every line needs a value field ({exc})")

    if all("scheme" in r for r in score_rows) and all("scheme" in r for r in downstream_rows):
        by_scheme = {r["scheme"]: v for r, v in zip(downstream_rows, values)}
        missing = [r["scheme"] for r in score_rows if r["scheme"] not in by_scheme]
        if missing or len(by_scheme) != len(score_rows):
            raise ChunklabError(f"scheme mismatch between score and downstream files: {missing}")
        values = [by_scheme[r["scheme"]] for r in score_rows]
    elif len(pairs) != len(values):
        raise ChunklabError(
            f"length mismatch: {len(pairs)} schemes vs {len(values)} downstream values"
        )

    grid = _parse_grid(args.grid)
    points = lambda_sweep(pairs, values, grid)
    try:
        best = sweep_argmax(points)
    except ChunklabError:
        best = -1

    rows = ["lambda\tr\tbest"]
    for i, p in enumerate(points):
        r_text = "undefined" if p.r is None else f"{p.r:.6f}"
        rows.append(f"{p.lam:.2f}\t{r_text}\t{'*' if i == best else ''}")
    text = "\n".join(rows) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.plot:
        from .plots import save_sweep_plot

        save_sweep_plot(points, args.plot)
    return 0


def _parse_grid(spec: str) -> SweepGrid:
    parts = spec.split(":")
    if len(parts) != 3:
        raise ChunklabError(f"bad grid {spec!r}; expected start:end:step")
    try:
        start, end, step = (float(v) for v in parts)
        return SweepGrid(start=start, end=end, step=step)
    except ValueError as exc:
        raise ChunklabError(f"bad grid {spec!r}: {exc}") from exc


def cmd_ppl_report(args) -> int:
    cfg = _config_from(args)
    path = Path(args.result)
    if not path.exists():
        raise ChunklabError(f"result file not found: {path}")
    try:
        result = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ChunklabError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(result, dict) or "completed" not in result:
        raise ChunklabError(f"{path}: not a pipeline run record (no 'completed' field)")
    completed = result["completed"]
    if not completed:
        print("no completions performed")
        return 0

    backend = build_backend(cfg)
    rows: list[tuple[int, float, float]] = []
    for i, entry in enumerate(completed):
        if not isinstance(entry, dict) or "kind" not in entry:
            raise ChunklabError(f"{path}: completed[{i}] is malformed")
        if entry["kind"] == "completed":
            original = entry["original"]["text"]
            rewritten = entry["rewritten_text"]
        else:
            original = entry["text"]
            rewritten = entry["text"]
        rows.append((i, perplexity(backend, original), perplexity(backend, rewritten)))

    print(f"{'chunk':>6} {'ppl_original':>14} {'ppl_completed':>14} {'delta':>12}")
    for i, orig, comp in rows:
        print(f"{i:>6} {orig:>14.4f} {comp:>14.4f} {comp - orig:>12.4f}")
    orig_vals = [r[1] for r in rows]
    comp_vals = [r[2] for r in rows]
    print(f"{'mean':>6} {_mean(orig_vals):>14.4f} {_mean(comp_vals):>14.4f}"
          f" {_mean(comp_vals) - _mean(orig_vals):>12.4f}")
    print(f"{'var':>6} {_var(orig_vals):>14.4f} {_var(comp_vals):>14.4f}"
          f" {_var(comp_vals) - _var(orig_vals):>12.4f}")
    if args.plot:
        from .plots import save_ppl_plot

        save_ppl_plot(rows, args.plot)
    return 0


def _mean(values: list[float]) -> float:
    return statistics.fmean(values)


def _var(values: list[float]) -> float:
    return statistics.pvariance(values) if len(values) > 1 else 0.0
