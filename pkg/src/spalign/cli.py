"""Command-line entry point wiring banks, models, classification, gap
metrics, similarity maps, sweeps, and synthetic generation.

Exit codes: 0 success, 1 runtime/IO failure, 2 usage error, 3 provenance
mismatch between model and bank.
"""

from __future__ import annotations

import functools
import json
import sys
import warnings

import click

from .ablation import ablation_csv, run_ablation
from .bank import load_bank, save_bank, synth_bank
from .classify import ClassifierSpec, evaluate
from .errors import ProvenanceError, RankClampWarning, SpalignError
from .projectors import SspConfig, align, load_model, save_model
from .selectors import similarity_map
from .util import unit_rows

_CLASSIFIER_NAMES = {
    "raw-zeroshot": "raw_zeroshot",
    "ssp-zeroshot": "ssp_zeroshot",
    "ssp-cache": "ssp_cache",
}


def _emit(out: str, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ProvenanceError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except click.ClickException:
            raise
        except ValueError as exc:
            raise click.UsageError(str(exc))
        except (SpalignError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _config_options(fn):
    fn = click.option("--q", type=int, default=None, help="Vision region count per sample.")(fn)
    fn = click.option("--c", type=int, default=None, help="Language region count per shot.")(fn)
    fn = click.option(
        "--rank", type=int, default=None, help="Component count for both subspace families."
    )(fn)
    fn = click.option("--r-vis", type=int, default=None, help="Vision component count (overrides --rank).")(fn)
    fn = click.option("--r-tex", type=int, default=None, help="Language component count (overrides --rank).")(fn)
    fn = click.option("--rank-tol", type=float, default=1e-6, show_default=True, help="Relative numerical-rank cutoff.")(fn)
    return fn


def _classifier_options(fn):
    fn = click.option(
        "--classifier",
        type=click.Choice(sorted(_CLASSIFIER_NAMES)),
        default="ssp-zeroshot",
        show_default=True,
    )(fn)
    fn = click.option("--alpha", type=float, default=1.0, show_default=True, help="Cache blend weight.")(fn)
    fn = click.option("--beta", type=float, default=5.5, show_default=True, help="Cache kernel sharpness.")(fn)
    fn = click.option(
        "--text-term",
        type=click.Choice(["tex", "vis"]),
        default="tex",
        show_default=True,
        help="Which projected test feature the text logits use.",
    )(fn)
    return fn


def _threads_option(fn):
    return click.option(
        "--threads",
        type=int,
        default=None,
        help="Cap on internal worker threads (results do not depend on it).",
    )(fn)


def _make_config(q, c, rank, r_vis, r_tex, rank_tol) -> SspConfig:
    return SspConfig(
        q=q,
        c=c,
        r_vis=r_vis if r_vis is not None else rank,
        r_tex=r_tex if r_tex is not None else rank,
        rank_rel_tol=rank_tol,
    )


def _make_spec(classifier, alpha, beta, text_term) -> ClassifierSpec:
    return ClassifierSpec(
        kind=_CLASSIFIER_NAMES[classifier],
        alpha=alpha,
        beta=beta,
        text_term_source=text_term,
    )


def _parse_values(values: str) -> list[int]:
    try:
        parsed = [int(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise click.UsageError(f"cannot parse integer list from {values!r}")
    if not parsed:
        raise click.UsageError("empty value list")
    return parsed


@click.group()
def main():
    """Training-free vision/language embedding alignment via selective
    local-feature subspace projection."""


@main.command()
@click.option("--classes", type=int, required=True)
@click.option("--shots", type=int, required=True)
@click.option("--test", "num_test", type=int, required=True)
@click.option("--dim", type=int, required=True)
@click.option("--grid", type=int, nargs=2, required=True, metavar="H W")
@click.option("--gap-angle", type=float, default=60.0, show_default=True, help="Injected text/image gap in degrees.")
@click.option("--kappa", type=float, default=50.0, show_default=True, help="vMF noise concentration.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, help="Output bank directory.")
@_threads_option
@_handle_errors
def synth(classes, shots, num_test, dim, grid, gap_angle, kappa, seed, out, threads):
    """Generate a synthetic feature bank with an injected modality gap."""
    bank = synth_bank(
        num_classes=classes,
        shots=shots,
        num_test=num_test,
        dim=dim,
        grid_h=grid[0],
        grid_w=grid[1],
        gap_angle_deg=gap_angle,
        noise_kappa=kappa,
        seed=seed,
    )
    save_bank(bank, out)
    m = bank.manifest
    click.echo(
        f"wrote bank to {out}: {m.num_classes} classes x {m.shots} shots, "
        f"dim {m.dim}, grid {m.grid[0]}x{m.grid[1]}, {m.num_test} test rows"
    )


@main.command()
@click.option("--bank", "bank_path", required=True)
@click.option("--out", required=True, help="Output model file.")
@_config_options
@_threads_option
@_handle_errors
def build(bank_path, out, q, c, rank, r_vis, r_tex, rank_tol, threads):
    """Build the vision and language subspaces and write the model file."""
    bank = load_bank(bank_path)
    cfg = _make_config(q, c, rank, r_vis, r_tex, rank_tol).resolve(bank.manifest)
    with warnings.catch_warnings():
        # clamping is reported per class below
        warnings.simplefilter("ignore", RankClampWarning)
        model = align(bank, cfg, max_workers=threads)
    if model.vision.r < cfg.r_vis:
        click.echo(f"vision: rank clamped {cfg.r_vis} -> {model.vision.r}", err=True)
    for i, s in enumerate(model.language):
        if s.r < cfg.r_tex:
            click.echo(f"class {i}: language rank clamped {cfg.r_tex} -> {s.r}", err=True)
    save_model(model, out)
    click.echo(
        f"wrote model to {out}: vision rank {model.vision.r}, "
        f"{model.num_classes} language subspaces"
    )


@main.command()
@click.option("--bank", "bank_path", required=True)
@click.option("--model", "model_path", default=None, help="Required for ssp-* classifiers.")
@_classifier_options
@click.option("--out", default="-", show_default=True, help="Report JSON path ('-' = stdout).")
@click.option(
    "--timing/--no-timing",
    default=False,
    show_default=True,
    help="Include wall-clock timing in the report (off keeps outputs reproducible).",
)
@_threads_option
@_handle_errors
def classify(bank_path, model_path, classifier, alpha, beta, text_term, out, timing, threads):
    """Classify the bank's test features and write an evaluation report."""
    bank = load_bank(bank_path)
    model = load_model(model_path) if model_path is not None else None
    report = evaluate(bank, model, _make_spec(classifier, alpha, beta, text_term))
    _emit(out, _json_text(report.to_json_dict(with_timing=timing)))
    click.echo(f"accuracy {report.accuracy:.6f}", err=True)


@main.command()
@click.option("--bank", "bank_path", required=True)
@click.option("--model", "model_path", default=None, help="Adds the after-alignment block.")
@click.option("--out", default="-", show_default=True)
@_threads_option
@_handle_errors
def gap(bank_path, model_path, out, threads):
    """Measure the text/image modality gap with vMF statistics."""
    from .vmf import gap_report

    bank = load_bank(bank_path)
    model = load_model(model_path) if model_path is not None else None
    report = gap_report(bank, model)
    _emit(out, _json_text(report.to_dict()))


@main.command()
@click.option("--bank", "bank_path", required=True)
@click.option("--class-index", type=int, required=True)
@click.option("--shot", type=int, required=True)
@click.option(
    "--ref",
    type=click.Choice(["text", "global", "aligned-text"]),
    default="text",
    show_default=True,
    help="Reference feature scored against the sample's local grid.",
)
@click.option("--model", "model_path", default=None, help="Required for --ref aligned-text.")
@click.option("--normalized", is_flag=True, help="Min-max normalize the map to [0, 1].")
@click.option("--out", default="-", show_default=True)
@_threads_option
@_handle_errors
def simmap(bank_path, class_index, shot, ref, model_path, normalized, out, threads):
    """Emit the similarity map between a reference feature and one training
    sample's local feature grid."""
    bank = load_bank(bank_path)
    m = bank.manifest
    if not 0 <= class_index < m.num_classes:
        raise ValueError(f"class index must be in [0, {m.num_classes}), got {class_index}")
    if not 0 <= shot < m.shots:
        raise ValueError(f"shot must be in [0, {m.shots}), got {shot}")
    if ref == "text":
        ref_vec = bank.text[class_index]
    elif ref == "global":
        ref_vec = bank.train_global[class_index, shot]
    else:
        if model_path is None:
            raise ValueError("--ref aligned-text requires --model")
        model = load_model(model_path)
        if model.provenance != m.digest():
            raise ProvenanceError(model.provenance, m.digest())
        ref_vec = unit_rows(model.aligned_text, "aligned text")[class_index]
    grid = similarity_map(
        ref_vec, bank.train_local[class_index, shot], m.grid[0], m.grid[1], normalized
    )
    _emit(
        out,
        _json_text(
            {
                "class": class_index,
                "shot": shot,
                "h": m.grid[0],
                "w": m.grid[1],
                "map": grid.tolist(),
            }
        ),
    )


@main.command()
@click.option("--bank", "bank_path", required=True)
@click.option(
    "--param",
    type=click.Choice(["q", "c", "rank"]),
    required=True,
    help="Which knob to sweep ('rank' sets both component counts).",
)
@click.option("--values", required=True, help="Comma-separated integer list.")
@_config_options
@_classifier_options
@click.option("--out", default="-", show_default=True)
@_threads_option
@_handle_errors
def sweep(bank_path, param, values, q, c, rank, r_vis, r_tex, rank_tol,
          classifier, alpha, beta, text_term, out, threads):
    """Rebuild and evaluate over a grid of Q, C, or rank values; emits CSV."""
    bank = load_bank(bank_path)
    spec = _make_spec(classifier, alpha, beta, text_term)
    base = _make_config(q, c, rank, r_vis, r_tex, rank_tol)
    lines = ["param,value,accuracy"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankClampWarning)
        for value in _parse_values(values):
            if param == "q":
                cfg = SspConfig(q=value, c=base.c, r_vis=base.r_vis, r_tex=base.r_tex,
                                rank_rel_tol=base.rank_rel_tol)
            elif param == "c":
                cfg = SspConfig(q=base.q, c=value, r_vis=base.r_vis, r_tex=base.r_tex,
                                rank_rel_tol=base.rank_rel_tol)
            else:
                cfg = SspConfig(q=base.q, c=base.c, r_vis=value, r_tex=value,
                                rank_rel_tol=base.rank_rel_tol)
            model = align(bank, cfg, max_workers=threads)
            report = evaluate(bank, model, spec)
            lines.append(f"{param},{value},{report.accuracy!r}")
    _emit(out, "\n".join(lines) + "\n")


@main.command()
@click.option("--bank", "bank_path", required=True)
@click.option("--shots", "shots_values", required=True, help="Comma-separated shot counts.")
@_config_options
@_classifier_options
@click.option("--out", default="-", show_default=True)
@_threads_option
@_handle_errors
def ablate(bank_path, shots_values, q, c, rank, r_vis, r_tex, rank_tol,
           classifier, alpha, beta, text_term, out, threads):
    """Run the projector on/off ablation table; emits CSV."""
    bank = load_bank(bank_path)
    cfg = _make_config(q, c, rank, r_vis, r_tex, rank_tol)
    spec = _make_spec(classifier, alpha, beta, text_term)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankClampWarning)
        rows = run_ablation(bank, cfg, spec, _parse_values(shots_values))
    _emit(out, ablation_csv(rows))


if __name__ == "__main__":
    main()
