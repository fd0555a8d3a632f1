"""Command-line entry points: data preparation, training, generation,
evaluation, and the HTTP service."""

from __future__ import annotations

import json
import os
import pathlib

import click
import numpy as np

from .core import (
    DEFAULT_VOCAB,
    compute_category_stats,
    floorplan_to_dict,
    hybrid_sort,
)
from .connectivity import diagram_from_json, parse_bubble_diagram
from .data import (
    RawSample,
    SplitSpec,
    SynthSample,
    filter_noisy,
    make_splits,
    read_corpus,
    synth_corpus,
    vectorize_to_boxes,
    write_corpus,
)
from .draft import ModelConfig
from .evaluation import (
    compatibility,
    diagram_to_graph,
    fid_diversity,
    graph_edit_distance,
    rasterize,
    reconstruct_graph,
    render_svg,
)
from .inference import GenerationPipeline, GenerationRequest
from .training import TrainConfig, load_checkpoint, save_checkpoint, train


@click.group()
def main() -> None:
    """Graph-constrained floorplan generation toolkit."""


@main.group()
def data() -> None:
    """Corpus preparation: ingest, synth, split."""


@data.command()
@click.option("--raw", "raw_path", required=True, type=click.Path(exists=True),
              help="JSONL of labeled polygons in the unit square.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--tau", default=0.5, show_default=True,
              help="Interior-door overlap tolerance for the noise filter.")
def ingest(raw_path: str, out_path: str, tau: float) -> None:
    """Vectorize raw polygon samples into sorted box floorplans."""
    plans = []
    dropped = 0
    with open(raw_path) as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            raw = RawSample(
                tuple(
                    (p["category"], tuple((v[0], v[1]) for v in p["vertices"]))
                    for p in doc["polygons"]
                ),
                doc.get("source_id", ""),
            )
            fp = vectorize_to_boxes(raw)
            keep, reason = filter_noisy(fp, tau=tau)
            if not keep:
                dropped += 1
                click.echo(f"drop {raw.source_id}: {reason}", err=True)
                continue
            plans.append(fp)
    if not plans:
        raise click.ClickException("no samples survived the noise filter")
    stats = compute_category_stats(plans)
    with open(out_path, "w") as fh:
        for fp in plans:
            fh.write(json.dumps(floorplan_to_dict(hybrid_sort(fp, stats))) + "\n")
    click.echo(f"wrote {len(plans)} plans ({dropped} dropped) to {out_path}")


@data.command()
@click.option("--n", default=500, show_default=True)
@click.option("--rooms", nargs=2, type=int, default=(4, 8), show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def synth(n: int, rooms: tuple[int, int], seed: int, out_path: str) -> None:
    """Generate a synthetic corpus of floorplan/diagram pairs."""
    samples = synth_corpus(n, room_count_range=rooms, seed=seed)
    write_corpus(out_path, samples)
    click.echo(f"wrote {len(samples)} samples to {out_path}")


@data.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["separate", "mixed"]), default="mixed",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--held-out-rooms", type=int, default=None,
              help="Room count reserved for the test split (separate mode).")
@click.option("--fractions", nargs=3, type=float, default=(0.8, 0.1, 0.1),
              show_default=True)
@click.option("--out-dir", required=True, type=click.Path())
def split(corpus_path, mode, seed, held_out_rooms, fractions, out_dir) -> None:
    """Partition a corpus into train/val/test JSONL files."""
    samples = read_corpus(corpus_path)
    spec = SplitSpec(mode, seed, held_out_room_count=held_out_rooms,
                     fractions=tuple(fractions))
    splits = make_splits(samples, spec)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in splits.items():
        write_corpus(out / f"{name}.jsonl", part)
        click.echo(f"{name}: {len(part)} samples")


@main.command(name="train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="JSON with corpus/out paths and optimizer settings.")
def train_cmd(config_path: str) -> None:
    """Train the draft and refinement models on a corpus."""
    with open(config_path) as fh:
        doc = json.load(fh)
    samples = read_corpus(doc["corpus"])
    model = ModelConfig.from_dict(doc.get("model", {})) if doc.get("model") else ModelConfig()
    cfg = TrainConfig(
        lr=doc.get("lr", 3e-4),
        epochs=doc.get("epochs", 20),
        batch_size=doc.get("batch_size", 128),
        n_r=doc.get("refine_iters", 5),
        seed=doc.get("seed", 0),
        geometric_loss=doc.get("geometric_loss", True),
        model=model,
    )
    log_path = doc.get("log")
    draft, refiner, stats, metrics = train(samples, cfg, log_path=log_path)
    save_checkpoint(doc["out"], draft, refiner, stats, samples[0].floorplan.vocab, cfg)
    click.echo(f"trained {len(metrics)} steps; checkpoint at {doc['out']}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--diagram", "diagram_path", required=True, type=click.Path(exists=True))
@click.option("--n", default=1, show_default=True, help="Number of candidates.")
@click.option("--seed", default=0, show_default=True)
@click.option("--top-k", default=5, show_default=True)
@click.option("--refine-iters", default=5, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def generate(model_path, diagram_path, n, seed, top_k, refine_iters, out_dir) -> None:
    """Generate floorplan candidates for a bubble diagram."""
    draft, refiner, stats, vocab, model_hash = load_checkpoint(model_path)
    pipeline = GenerationPipeline(draft, refiner, stats, vocab, model_hash)
    with open(diagram_path) as fh:
        bd = diagram_from_json(fh.read(), vocab)
    req = GenerationRequest(bd, num_candidates=n, seed=seed, top_k=top_k,
                            refine_iters=refine_iters)
    result = pipeline.generate(req)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "result.json", "w") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    for i, cand in enumerate(result.candidates):
        (out / f"candidate_{i}.svg").write_text(render_svg(cand.floorplan))
        click.echo(f"candidate {i}: compatibility {cand.compatibility}")
    click.echo(f"results in {out}")


@main.command(name="eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True))
@click.option("--metrics", default="ged,fid", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--report", "report_path", required=True, type=click.Path())
def eval_cmd(model_path, split_path, metrics, seed, report_path) -> None:
    """Evaluate a checkpoint on a held-out split."""
    wanted = {m.strip() for m in metrics.split(",") if m.strip()}
    unknown = wanted - {"ged", "fid"}
    if unknown:
        raise click.ClickException(f"unknown metrics: {sorted(unknown)}")
    draft, refiner, stats, vocab, model_hash = load_checkpoint(model_path)
    pipeline = GenerationPipeline(draft, refiner, stats, vocab, model_hash)
    samples = read_corpus(split_path, vocab)
    report: dict = {"model_hash": model_hash, "split": split_path,
                    "n_samples": len(samples), "seed": seed}
    generated = []
    draft_geds, refined_geds = [], []
    for i, s in enumerate(samples):
        res = pipeline.generate(
            GenerationRequest(s.diagram, num_candidates=1, seed=seed + i)
        )
        cand = res.candidates[0]
        generated.append(cand.floorplan)
        if "ged" in wanted:
            ordered, _ = parse_bubble_diagram(s.diagram, pipeline.stats)
            draft_fp = pipeline._to_floorplan(cand.trace.iterations[0], ordered)
            g_target = diagram_to_graph(s.diagram)
            draft_geds.append(
                graph_edit_distance(g_target, reconstruct_graph(draft_fp)).value
            )
            refined_geds.append(cand.compatibility)
    if "ged" in wanted:
        report["ged"] = {
            "mean_draft": float(np.mean(draft_geds)),
            "mean_refined": float(np.mean(refined_geds)),
        }
    if "fid" in wanted:
        gen_rasters = [rasterize(fp) for fp in generated]
        ref_rasters = [rasterize(s.floorplan) for s in samples]
        report["fid"] = fid_diversity(gen_rasters, ref_rasters)
    with open(report_path, "w") as fh:
        json.dump(report, fh, indent=2)
    click.echo(json.dumps({k: v for k, v in report.items() if k in wanted}, indent=2))


@main.command()
@click.option("--model", "model_path", default=None, type=click.Path(),
              help="Checkpoint path (defaults to PLANFORGE_MODEL).")
@click.option("--store", "store_path", default=None, type=click.Path(),
              help="Session store file (defaults to PLANFORGE_STORE).")
@click.option("--port", default=None, type=int,
              help="Listen port (defaults to PLANFORGE_PORT or 8000).")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(model_path, store_path, port, host) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(
        model_path=model_path or os.environ.get("PLANFORGE_MODEL"),
        store_path=store_path or os.environ.get("PLANFORGE_STORE"),
    )
    uvicorn.run(app, host=host, port=port or int(os.environ.get("PLANFORGE_PORT", "8000")))


if __name__ == "__main__":
    main()
