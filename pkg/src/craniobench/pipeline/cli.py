"""Batch command line: cache, synth, reconstruct, evaluate, serve."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from ..errors import CranioError, StageError
from ..geometry.meshio import load_mesh, save_mesh
from ..geometry.synthetic import SyntheticParams, make_synthetic_case
from ..voxelgrid.fuse import OffsetField
from .cache import Repository, build_cache
from .config import PipelineConfig, load_config, save_config
from .run import run_reconstruction, evaluate_case
from ..metrics.report import MetricsReport


@click.group()
def main():
    """Semi-automatic cranial implant design workbench."""


@main.command()
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--repo", "repo_dir", type=click.Path(file_okay=False),
              help="Cache repository location (default: <dataset_dir>/cache).")
@click.option("--voxel-size", default=0.5, show_default=True)
def cache(dataset_dir, repo_dir, voxel_size):
    """Build the per-case mesh/grid/descriptor cache."""
    repo = build_cache(dataset_dir, repo_dir, voxel_size)
    click.echo(f"cached {len(repo.cases)} cases at {repo.root}")
    for case_id, reason in sorted(repo.skipped.items()):
        click.echo(f"skipped {case_id}: {reason}", err=True)


@main.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True)
@click.option("--templates", default=5, show_default=True)
@click.option("--defect-radius", default=16.0, show_default=True)
@click.option("--jitter", default=0.01, show_default=True,
              help="Per-template fractional radius jitter.")
@click.option("--max-rotation", default=5.0, show_default=True, help="degrees")
@click.option("--max-translation", default=3.0, show_default=True, help="mm")
def synth(out_dir, seed, templates, defect_radius, jitter, max_rotation,
          max_translation):
    """Generate a seeded synthetic dataset plus a matching config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = SyntheticParams(defect_radius=defect_radius, template_count=templates,
                             max_rotation_deg=max_rotation,
                             max_translation_mm=max_translation,
                             radius_jitter=jitter, seed=seed)
    case = make_synthetic_case(params)
    save_mesh(case.target, out / "target.stl")
    save_mesh(case.ground_truth_implant, out / "target.gt.stl")
    for i, template in enumerate(case.templates):
        save_mesh(template, out / f"template_{i:02d}.stl")
    config = PipelineConfig(roi=case.roi, seed=seed,
                            offset=OffsetField(1.0, case.border_markers, 5.0))
    save_config(config, out / "config.json")
    click.echo(f"wrote target + {templates} templates + config to {out}")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--target", "target_id", required=True)
@click.option("--repo", "repo_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--no-clip", is_flag=True, help="Disable ROI clipping during alignment.")
def reconstruct(config_path, target_id, repo_dir, out_dir, no_clip):
    """Run the full reconstruction pipeline for one target case."""
    try:
        config = load_config(config_path)
        if no_clip:
            config = PipelineConfig.from_dict({**config.to_dict(), "clipping": False})
        repo = Repository.open(repo_dir)
        target = repo.case(target_id)
        implant, manifest, rep = run_reconstruction(config, target, repo,
                                                    out_dir=out_dir)
    except StageError as exc:
        click.echo(str(exc), err=True)
        sys.exit(2)
    except (CranioError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(f"implant: {manifest.artifacts.get('implant')}")
    if rep is not None:
        click.echo(MetricsReport.csv_header())
        click.echo(rep.csv_row())


@main.command()
@click.option("--implant", "implant_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--truth", "truth_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--label", default="", help="Case label for the report row.")
def evaluate(implant_path, truth_path, label):
    """Print the deviation report row for an implant vs its ground truth."""
    try:
        rep = evaluate_case(load_mesh(implant_path), load_mesh(truth_path),
                            label or Path(implant_path).stem)
    except CranioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(MetricsReport.csv_header())
    click.echo(rep.csv_row())


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--repo", "repo_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(port, repo_dir, host):
    """Start the local HTTP session service."""
    import uvicorn

    from ..service.app import create_app

    uvicorn.run(create_app(repo_dir), host=host, port=port)


if __name__ == "__main__":
    main()
