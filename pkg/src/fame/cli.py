"""Command line entry points.

    fame groups <shape.obj>                      dump part groups as JSON
    fame crossover <A.obj> <groupA> <B.obj> <groupB> --out <dir>
    fame score <shape.obj> [--models <dir>] [--simplified]
    fame evolve --dataset <dir> --labels a,b --generations N --seed S --out <dir>
    fame fixtures --out <dir>                    write the fixture corpus
    fame serve --storage <dir>                   run the HTTP API

Group selectors are comma-separated part ids, or ``#<k>`` to pick the
k-th enumerated group of the shape.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from .errors import FameError


@click.group()
def main():
    """Functionality-aware evolution of segmented 3D shapes."""


@main.command("groups")
@click.argument("shape_path", type=click.Path(exists=True, path_type=Path))
@click.option("--max-groups", default=64, show_default=True)
def groups_cmd(shape_path: Path, max_groups: int):
    """Enumerate the part groups of one shape."""
    from .part_groups import enumerate_part_groups
    from .shape_model import load_shape

    shape = load_shape(shape_path)
    groups = enumerate_part_groups(shape, max_groups)
    click.echo(json.dumps([g.to_dict() for g in groups], indent=2))


def _pick_group(shape, selector: str):
    from .part_groups import enumerate_part_groups

    groups = enumerate_part_groups(shape)
    if selector.startswith("#"):
        return groups[int(selector[1:])]
    wanted = frozenset(selector.split(","))
    for g in groups:
        if g.part_ids == wanted:
            return g
    raise click.ClickException(
        f"shape {shape.id!r} has no enumerated group {sorted(wanted)}")


@main.command("crossover")
@click.argument("shape_a", type=click.Path(exists=True, path_type=Path))
@click.argument("group_a")
@click.argument("shape_b", type=click.Path(exists=True, path_type=Path))
@click.argument("group_b")
@click.option("--out", type=click.Path(path_type=Path), default=Path("offspring"),
              show_default=True)
def crossover_cmd(shape_a: Path, group_a: str, shape_b: Path, group_b: str, out: Path):
    """Exchange two part groups and write both offspring."""
    from .crossover import exchange
    from .shape_model import load_shape, save_shape

    a = load_shape(shape_a)
    b = load_shape(shape_b)
    ga = _pick_group(a, group_a)
    gb = _pick_group(b, group_b)
    first, second = exchange(a, ga, b, gb)
    save_shape(first, out)
    save_shape(second, out)
    click.echo(f"wrote {first.id} and {second.id} to {out}")


@main.command("score")
@click.argument("shape_path", type=click.Path(exists=True, path_type=Path))
@click.option("--models", "models_dir", type=click.Path(exists=True, path_type=Path),
              default=None, help="Directory of model config JSONs (default: built-in).")
@click.option("--simplified", is_flag=True,
              help="Score only the whole shape and the two parent-derived groups.")
def score_cmd(shape_path: Path, models_dir: Path | None, simplified: bool):
    """Per-category raw and normalized scores plus the best subset."""
    from .functionality import (
        load_models,
        partial_match,
        provenance_subsets,
        simplified_partial_match,
    )
    from .shape_model import load_shape

    shape = load_shape(shape_path)
    models = load_models(models_dir)
    if simplified:
        try:
            provenance_subsets(shape)
        except FameError as exc:
            raise click.ClickException(str(exc))
        result = simplified_partial_match(shape, models)
        for ev in result.evaluations:
            click.echo(f"{ev.category:10s} {ev.name:9s} valid={str(ev.valid):5s} "
                       f"normalized={ev.normalized_score:.4f}")
        click.echo(f"simplified score: {result.score:.4f}")
        return
    for model in models:
        res = partial_match(shape, model)
        click.echo(f"{model.category:10s} raw={res.raw_score:.4f} "
                   f"normalized={res.normalized_score:.4f} "
                   f"subset={','.join(sorted(res.best_subset)) or '-'}")


@main.command("evolve")
@click.option("--dataset", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--labels", default="", help="Comma-separated required labels.")
@click.option("--generations", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--mode", type=click.Choice(["full", "simplified"]), default="simplified",
              show_default=True)
@click.option("--ranking", type=click.Choice(["plausibility", "multi_functionality"]),
              default="plausibility", show_default=True)
@click.option("--top-k", default=8, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
def evolve_cmd(dataset: Path, labels: str, generations: int, seed: int,
               mode: str, ranking: str, top_k: int, out: Path):
    """Run a headless evolution and write one directory per generation."""
    from .evolution import EvolutionConfig, evolve
    from .shape_model import load_population, save_shape

    population = load_population(dataset)
    user_labels = tuple(l for l in labels.split(",") if l)
    config = EvolutionConfig(user_labels=user_labels, max_generations=generations,
                             rng_seed=seed, scoring_mode=mode, ranking=ranking,
                             top_k=top_k)
    try:
        result = evolve(population, config)
    except FameError as exc:
        raise click.ClickException(str(exc))
    out.mkdir(parents=True, exist_ok=True)
    for generation in result:
        gen_dir = out / f"gen_{generation.index}"
        gen_dir.mkdir(exist_ok=True)
        for shape in generation.shapes:
            save_shape(shape, gen_dir)
        (gen_dir / "manifest.json").write_text(generation.manifest_json())
        click.echo(f"gen {generation.index}: {len(generation.shapes)} shapes, "
                   f"top={generation.shapes[0].id} ({generation.scores[0]:.3f})")
    click.echo(f"wrote {len(result)} generations to {out}")


@main.command("fixtures")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--ids", default="", help="Comma-separated fixture ids (default: all).")
def fixtures_cmd(out: Path, ids: str):
    """Write the built-in fixture corpus as a dataset."""
    from .fixtures import write_corpus_dataset

    chosen = tuple(i for i in ids.split(",") if i) or None
    written = write_corpus_dataset(out, chosen)
    click.echo(f"wrote {len(written)} shapes to {out}")


@main.command("serve")
@click.option("--storage", type=click.Path(path_type=Path), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve_cmd(storage: Path, host: str, port: int):
    """Run the interactive-session HTTP API."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(storage), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
