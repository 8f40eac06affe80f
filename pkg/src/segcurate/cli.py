"""Single executable exposing every pipeline stage as a subcommand.

Outputs are JSON (canonicalized key order) to stdout or ``--out``; exit code
0 on success, 1 when a validation-style subcommand reports findings, 2 on
usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import curation, dataset, losses, matching, metrics, qagen
from .errors import SegcurateError
from .masks import RleMask, mask_to_bbox, rle_decode

__all__ = ["dispatch", "main"]


def _emit(payload, out_path: str | None, raw: str | None = None) -> None:
    text = raw if raw is not None else json.dumps(payload, sort_keys=True, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _read_jsonl(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _tensor(obj: dict) -> np.ndarray:
    return np.asarray(obj["data"], dtype=float).reshape(obj["shape"])


def _mask_set(path: str) -> np.ndarray:
    """Load (n, H, W) masks from a tensor JSON or an RLE-list JSON file."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if "shape" in obj:
        arr = _tensor(obj)
        return arr[None] if arr.ndim == 2 else arr
    rles = [RleMask.from_json(m) for m in obj["masks"]]
    return np.stack([rle_decode(r).astype(float) for r in rles])


# -- subcommand handlers -------------------------------------------------------


def _cmd_grid(args) -> int:
    if args.grid_cmd == "global":
        points = curation.global_grid(args.width, args.height)
        _emit({"points": [{"x": p.x, "y": p.y} for p in points]}, args.out)
    else:
        spec = curation.local_grid(args.h, args.w)
        _emit({"R": spec.rows, "C": spec.cols}, args.out)
    return 0


def _cmd_filter(args) -> int:
    if args.filter_cmd == "derive-stats":
        gold = [rle_decode(RleMask.from_json(row["mask"])) for row in _read_jsonl(args.gold)]
        stats = curation.derive_reference_stats(args.category, gold)
        _emit(stats.to_json(), args.out)
        return 0
    stats_by_cat = {}
    for path in args.stats:
        with open(path, encoding="utf-8") as fh:
            ref = curation.ReferenceStats.from_json(json.load(fh))
        stats_by_cat[ref.category] = ref
    items = [
        curation.Stage2Item(
            item_id=row["id"],
            mask=rle_decode(RleMask.from_json(row["mask"])),
            bbox_count=int(row["bbox_count"]),
            category=row["category"],
        )
        for row in _read_jsonl(args.items)
    ]
    results, summary = curation.run_stage2(items, stats_by_cat, args.ksigma, jobs=args.jobs)
    lines = "\n".join(json.dumps(r.to_json(), sort_keys=True) for r in results)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(lines + ("\n" if lines else ""))
    _emit(summary.to_json(), args.out)
    return 0


def _cmd_mask2bbox(args) -> int:
    if args.mask:
        rle = RleMask.from_json(json.loads(args.mask))
        _emit({"bbox": mask_to_bbox(rle_decode(rle)).to_json()}, args.out)
        return 0
    rows = []
    for row in _read_jsonl(args.infile):
        rle = RleMask.from_json(row["mask"])
        rows.append({"id": row.get("id"), "bbox": mask_to_bbox(rle_decode(rle)).to_json()})
    _emit({"bboxes": rows}, args.out)
    return 0


def _cmd_loss_eval(args) -> int:
    with open(args.infile, encoding="utf-8") as fh:
        spec = json.load(fh)
    weights = losses.LossWeights(**spec.get("weights", {}))
    l_text = losses.token_ce(
        _tensor(spec["token"]["logits"]),
        np.asarray(spec["token"]["targets"], dtype=int),
        spec["token"].get("ignore_id", -100),
    )
    l_bce = losses.bce_loss(_tensor(spec["bce"]["logits"]), _tensor(spec["bce"]["targets"]))
    l_dice = losses.dice_loss(
        _tensor(spec["dice"]["probs"]),
        _tensor(spec["dice"]["targets"]),
        spec["dice"].get("smooth", 1.0),
    )
    if "spatial" in spec:
        value, _, skipped = losses.spatial_or_skip(
            _tensor(spec["spatial"]["stack"]),
            _tensor(spec["spatial"]["gt"]).astype(int),
            weights.epsilon_log,
        )
        l_spatial = None if skipped else value
    else:
        l_spatial = None
    report = losses.total_loss(l_text, l_bce, l_dice, l_spatial, weights)
    _emit(report.to_json(), args.out)
    return 0


def _cmd_match(args) -> int:
    result = matching.select_masks(
        _mask_set(args.candidates), _mask_set(args.targets),
        w_bce=args.w_bce, w_dice=args.w_dice, jobs=args.jobs,
    )
    _emit(result.to_json(), args.out)
    return 0


def _cmd_sweep(args) -> int:
    targets = _mask_set(args.targets)
    shape = targets.shape[1:]
    rng = np.random.default_rng(args.seed)
    pool = rng.random((max(args.ks), *shape))

    def gen(k: int) -> np.ndarray:
        return pool[:k]

    rows = matching.sweep_queries(gen, targets, ks=args.ks,
                                  w_bce=args.w_bce, w_dice=args.w_dice)
    _emit({"sweep": rows}, args.out)
    if args.csv:
        header = "k,cost_evaluations,wall_time_s,bypassed,total_cost"
        body = "\n".join(
            f"{r['k']},{r['cost_evaluations']},{r['wall_time_s']:.6f},"
            f"{int(r['bypassed'])},{r['total_cost']:.6f}"
            for r in rows
        )
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(header + "\n" + body + "\n")
    return 0


def _cmd_eval(args) -> int:
    with open(args.data, encoding="utf-8") as fh:
        validation = dataset.validate(fh)
    preds = {row["id"]: row["mask"] for row in _read_jsonl(args.preds)}
    samples, findings = [], []
    for rec in validation.records:
        if rec.id not in preds:
            findings.append({"id": rec.id, "problem": "missing prediction"})
            continue
        pred = rle_decode(RleMask.from_json(preds[rec.id]))
        gt = np.zeros_like(pred)
        for rle in rec.masks:
            gt |= rle_decode(rle)  # union of all target masks
        acc = metrics.MetricsAccumulator().update(pred, gt)
        samples.append(metrics.LabeledSample(
            iou=acc.per_sample_ious[0],
            intersection=acc.cum_intersection,
            union=acc.cum_union,
            granularity=rec.granularity,
            multiplicity=rec.multiplicity,
            reasoning=rec.reasoning,
            linguistic=rec.linguistic,
        ))
    report = metrics.dimension_report(samples)
    payload = report.to_json()
    payload["findings"] = findings + [e.to_json() for e in validation.errors]
    _emit(payload, args.out)
    if args.table:
        print(metrics.format_table(report))
    return 1 if payload["findings"] else 0


def _cmd_stats(args) -> int:
    with open(args.data, encoding="utf-8") as fh:
        validation = dataset.validate(fh)
    _emit(dataset.stats(validation.records).to_json(), args.out)
    return 0


def _cmd_validate(args) -> int:
    with open(args.data, encoding="utf-8") as fh:
        validation = dataset.validate(fh)
    split_report = dataset.split_check(validation.records)
    payload = {
        "records": len(validation.records),
        "errors": [e.to_json() for e in validation.errors],
        "warnings": [w.to_json() for w in validation.warnings],
        "split_check": split_report,
    }
    if args.rewrite:
        with open(args.rewrite, "w", encoding="utf-8") as fh:
            for rec in validation.records:
                fh.write(rec.to_line() + "\n")
    _emit(payload, args.out)
    return 1 if validation.errors or not split_report["clean"] else 0


def _cmd_qa_gen(args) -> int:
    cfg = qagen.GenerationConfig(endpoint=args.endpoint, model=args.model,
                                 temperature=args.temperature)
    if args.mock:
        client = qagen.MockClient()
    else:
        client = qagen.HttpClient(cfg, api_key=os.environ.get(cfg.api_key_env))
    requests_ = [
        qagen.PromptRequest(
            mode=row["mode"],
            image=row.get("image", ""),
            region=row.get("region", ""),
            category=row.get("category"),
            reasoning=row.get("reasoning", "explicit"),
            linguistic=row.get("linguistic", "short"),
        )
        for row in _read_jsonl(args.requests)
    ]
    rows = qagen.generate_batch(requests_, cfg, client, max_in_flight=args.jobs)
    raw = "\n".join(json.dumps(r, sort_keys=True, ensure_ascii=False) for r in rows)
    _emit(None, args.out, raw=raw)
    return 0


def _cmd_review(args) -> int:
    import uvicorn

    from .review import ReviewItem, ReviewStore
    from .server import create_app

    store = ReviewStore.replay(args.log) if args.log and os.path.exists(args.log) \
        else ReviewStore(log_path=args.log)
    if args.log:
        store._log_path = args.log
    if args.items:
        known = {i for i in store.state_dict()["order"]}
        for row in _read_jsonl(args.items):
            item = ReviewItem.from_json(row)
            if item.item_id not in known:
                store.enqueue(item)
    app = create_app(store, images_dir=args.images_dir, ui_dir=args.ui_dist)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _cmd_audit(args) -> int:
    from .review import ReviewStore

    store = ReviewStore.replay(args.log)
    created = store.sample_audit(args.fraction, args.seed)
    _emit({"enqueued": created}, args.out)
    return 0


# -- parser ---------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segcurate")
    sub = parser.add_subparsers(dest="cmd", required=True)
    jobs_default = os.cpu_count() or 1

    def add_out(p):
        p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("grid", help="point-prompt grids")
    gsub = p.add_subparsers(dest="grid_cmd", required=True)
    g = gsub.add_parser("global")
    g.add_argument("--width", type=int, required=True)
    g.add_argument("--height", type=int, required=True)
    add_out(g)
    g.set_defaults(func=_cmd_grid)
    g = gsub.add_parser("local")
    g.add_argument("--h", type=int, required=True)
    g.add_argument("--w", type=int, required=True)
    add_out(g)
    g.set_defaults(func=_cmd_grid)

    p = sub.add_parser("filter", help="stage-2 mask filtering")
    fsub = p.add_subparsers(dest="filter_cmd", required=True)
    f = fsub.add_parser("derive-stats")
    f.add_argument("--gold", required=True, help="JSONL of {id, mask} gold masks")
    f.add_argument("--category", required=True)
    add_out(f)
    f.set_defaults(func=_cmd_filter)
    f = fsub.add_parser("run")
    f.add_argument("--items", required=True, help="JSONL of {id, mask, bbox_count, category}")
    f.add_argument("--stats", action="append", required=True, help="reference stats JSON (repeatable)")
    f.add_argument("--ksigma", type=float, default=2.0)
    f.add_argument("--report", help="write per-item verdict JSONL here")
    f.add_argument("--jobs", type=int, default=jobs_default)
    add_out(f)
    f.set_defaults(func=_cmd_filter)

    p = sub.add_parser("mask2bbox", help="tight boxes from masks")
    p.add_argument("--mask", help="single RLE JSON object")
    p.add_argument("--in", dest="infile", help="JSONL of {id, mask}")
    add_out(p)
    p.set_defaults(func=_cmd_mask2bbox)

    p = sub.add_parser("loss", help="loss evaluation")
    lsub = p.add_subparsers(dest="loss_cmd", required=True)
    le = lsub.add_parser("eval")
    le.add_argument("--in", dest="infile", required=True, help="loss parts JSON")
    add_out(le)
    le.set_defaults(func=_cmd_loss_eval)

    p = sub.add_parser("match", help="assign candidates to targets")
    p.add_argument("--candidates", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--w-bce", type=float, default=matching.DEFAULT_COST_W_BCE)
    p.add_argument("--w-dice", type=float, default=matching.DEFAULT_COST_W_DICE)
    p.add_argument("--jobs", type=int, default=jobs_default)
    add_out(p)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("sweep", help="cost-evaluation counters over k")
    p.add_argument("--targets", required=True)
    p.add_argument("--ks", type=_int_list, default=list(matching.DEFAULT_SWEEP_KS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--w-bce", type=float, default=matching.DEFAULT_COST_W_BCE)
    p.add_argument("--w-dice", type=float, default=matching.DEFAULT_COST_W_DICE)
    p.add_argument("--csv", help="also write the table as CSV here")
    add_out(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("eval", help="gIoU/cIoU four-dimension report")
    p.add_argument("--preds", required=True, help="JSONL of {id, mask}")
    p.add_argument("--data", required=True, help="dataset JSONL")
    p.add_argument("--table", action="store_true", help="also print the text table")
    add_out(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--data", required=True)
    add_out(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("validate", help="schema validation + split check")
    p.add_argument("--data", required=True)
    p.add_argument("--rewrite", help="write canonicalized valid records here")
    add_out(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("qa-gen", help="generate QA pairs via an LLM endpoint")
    p.add_argument("--requests", required=True, help="JSONL of prompt requests")
    p.add_argument("--endpoint", default="")
    p.add_argument("--model", default="")
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--mock", action="store_true", help="use the bundled offline client")
    p.add_argument("--jobs", type=int, default=4)
    add_out(p)
    p.set_defaults(func=_cmd_qa_gen)

    p = sub.add_parser("review", help="human review service")
    rsub = p.add_subparsers(dest="review_cmd", required=True)
    r = rsub.add_parser("serve")
    r.add_argument("--items", help="JSONL of review items to enqueue")
    r.add_argument("--log", help="append-only decision log path")
    r.add_argument("--host", default="127.0.0.1")
    r.add_argument("--port", type=int, default=8787)
    r.add_argument("--images-dir")
    r.add_argument("--ui-dist", help="built review UI bundle directory")
    r.set_defaults(func=_cmd_review)

    p = sub.add_parser("audit", help="re-enqueue a seeded sample of accepted items")
    p.add_argument("--log", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    add_out(p)
    p.set_defaults(func=_cmd_audit)

    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SegcurateError as exc:
        print(f"error: {exc.__class__.__name__}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
