"""Command-line entry point tying the pipeline together.

    claimkit datagen      corrupt SUPPORTED claims into a correction dataset
    claimkit train-toy-lm fit the desk-scale n-gram model on a correction dataset
    claimkit decode       generate corrected claims (toy or remote backend)
    claimkit judge        estimate correction accuracy with a chat-LLM judge
    claimkit metrics      per-example SARI / diff values
    claimkit report       aggregate MetricReports + table + TSV + figures
    claimkit ingest       build the blinded annotation task pool
    claimkit serve-annot  run the annotation HTTP service

All outputs are written atomically (temp file + rename). Exit codes:
0 ok, 1 usage, 2 data error, 3 backend error.
"""

from __future__ import annotations

import json
import os
import sys
from collections import defaultdict
from pathlib import Path

import click

from . import data as D
from .chat import BackoffPolicy, ChatClient, ChatError, GenPolicy
from .datagen import Checkpoint, DatagenError, build_correction_dataset, load_prompt
from .decoder import DecodeConfig, DecodeError, correct_claim
from .judge import JudgeError, JudgeVerdict, judge_one
from .lm import LmError, NgramModel, RemoteLm, Vocab
from .metrics import MetricError
from .report import build_reports, format_table, format_tsv, per_example_rows, to_json
from .semdiff import LexicalScorer, RemoteScorer, SemdiffError


CONFIG_KEYS = (
    "LLM_BASE_URL", "LLM_API_KEY", "LLM_MODEL",
    "LM_BASE_URL", "SEMDIFF_BASE_URL", "ANNOT_PORT",
)


def _apply_config_file(path: str) -> None:
    """key=value lines feeding the env-driven settings; real env wins."""
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip().strip('"')
        if key not in CONFIG_KEYS:
            raise click.UsageError(f"{path}:{lineno}: unknown key {key!r}")
        os.environ.setdefault(key, value)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="key=value file for backend settings; precedence flags > env > file")
def cli(config_path):
    """Factual claim correction toolkit."""
    if config_path:
        _apply_config_file(config_path)


# --- datagen -----------------------------------------------------------------


@cli.command("datagen")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), default=None)
@click.option("--prompt-file", type=click.Path(exists=True), default=None)
@click.option("--max-attempts", default=3, show_default=True)
@click.option("--parallel", default=4, show_default=True)
@click.option("--temperature", default=0.7, show_default=True)
@click.option("--rate-limit", type=float, default=None, help="requests per minute")
@click.option("--two-call", is_flag=True, help="separate call for the augmented claim")
@click.option("--force", is_flag=True, help="ignore a corrupt checkpoint")
def datagen_cmd(input_path, output_path, checkpoint_path, prompt_file, max_attempts,
                parallel, temperature, rate_limit, two_call, force):
    """Corrupt SUPPORTED verification records into a correction dataset."""
    loaded = D.load_verification_dataset(input_path)
    for lineno, reason in loaded.rejects:
        click.echo(f"reject {input_path}:{lineno}: {reason}", err=True)
    policy = GenPolicy(
        max_attempts=max_attempts,
        temperature=temperature,
        backoff=BackoffPolicy(),
        requests_per_minute=rate_limit,
    )
    client = ChatClient(policy=policy)
    checkpoint = None
    if checkpoint_path:
        if force and Path(checkpoint_path).exists():
            try:
                Checkpoint(checkpoint_path)
            except DatagenError:
                Path(checkpoint_path).unlink()
        checkpoint = Checkpoint(checkpoint_path)
    prompt = Path(prompt_file).read_text(encoding="utf-8") if prompt_file else load_prompt()
    prompt_version = Path(prompt_file).stem if prompt_file else "corrupt_v1"
    outcome = build_correction_dataset(
        loaded.records, client, policy,
        checkpoint=checkpoint, parallel=parallel,
        prompt=prompt, prompt_version=prompt_version, two_call=two_call,
    )
    D.save_jsonl(outcome.records, output_path)
    for rid, reason in outcome.skipped:
        click.echo(f"skipped {rid}: {reason}", err=True)
    click.echo(
        f"wrote {len(outcome.records)} records to {output_path} "
        f"({len(outcome.skipped)} skipped, {client.request_count} requests)"
    )


# --- toy LM ------------------------------------------------------------------


def _training_texts(records, config: DecodeConfig, explanations: bool) -> list[str]:
    texts = []
    for rec in records:
        prompt = config.prompt_template.format(
            evidence=rec.evidence_text, claim=rec.incorrect_claim
        )
        target = rec.correct_claim
        if explanations:
            target = f"{rec.correct_claim} {config.explanation_separator} {rec.explanation}"
        texts.append(f"{prompt} {target}")
        texts.append(rec.augmented_claim)
    return texts


@cli.command("train-toy-lm")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--order", default=3, show_default=True)
@click.option("--alpha", default=0.01, show_default=True)
@click.option("--template", "template_file", type=click.Path(exists=True), default=None)
@click.option("--no-explanations", is_flag=True,
              help="train targets without the explanation tail (ablation)")
def train_toy_lm_cmd(input_path, output_path, order, alpha, template_file, no_explanations):
    """Fit the add-alpha n-gram model on a correction dataset."""
    records = D.load_correction_dataset(input_path).records
    config = _decode_config_from(template_file=template_file)
    texts = _training_texts(records, config, explanations=not no_explanations)
    vocab = Vocab.build(texts)
    model = NgramModel.train(vocab, texts, order=order, alpha=alpha)
    Path(output_path).parent.mkdir(parents=True, exist_ok=True)
    model.save(output_path)
    click.echo(f"trained order-{order} model, vocab {len(vocab)}, -> {output_path}")


# --- decode --------------------------------------------------------------------


def _decode_config_from(
    beam=4, branch_k=4, lam=0.0, horizon=0, max_len=48, lookahead_every=1,
    epsilon=1e-6, template_file=None, explanation_separator="Explanation:",
    on_diff_error="fail",
) -> DecodeConfig:
    template = (
        Path(template_file).read_text(encoding="utf-8").strip()
        if template_file
        else "evidence: {evidence} claim: {claim}"
    )
    return DecodeConfig(
        beam_width=beam, branch_k=branch_k, lam=lam,
        lookahead_horizon=horizon, max_len=max_len,
        lookahead_every=lookahead_every, epsilon=epsilon,
        prompt_template=template, explanation_separator=explanation_separator,
        on_diff_error=on_diff_error,
    )


def _load_decode_input(path: str):
    first = next(D.iter_jsonl_dicts(path), None)
    if first is None:
        raise D.DataError(f"{path}: empty input")
    if "incorrect_claim" in first:
        return D.load_correction_dataset(path).records
    return D.load_verification_dataset(path).records


@cli.command("decode")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--method", default="claim-aware", show_default=True,
              help="method name recorded on predictions")
@click.option("--model-file", type=click.Path(exists=True), default=None,
              help="toy n-gram model JSON; omit to use LM_BASE_URL")
@click.option("--semdiff", "semdiff_kind", default="lexical", show_default=True,
              type=click.Choice(["lexical", "remote", "none"]))
@click.option("--beam", default=4, show_default=True)
@click.option("--branch-k", default=4, show_default=True)
@click.option("--lambda", "lam", default=0.5, show_default=True)
@click.option("--horizon", default=16, show_default=True)
@click.option("--max-len", default=48, show_default=True)
@click.option("--lookahead-every", default=1, show_default=True)
@click.option("--epsilon", default=1e-6, show_default=True)
@click.option("--template", "template_file", type=click.Path(exists=True), default=None)
@click.option("--explanation-separator", default="Explanation:", show_default=True)
@click.option("--trace", "trace_dir", type=click.Path(), default=None)
@click.option("--on-diff-error", default="fail", type=click.Choice(["fail", "degrade"]))
def decode_cmd(input_path, output_path, method, model_file, semdiff_kind, beam,
               branch_k, lam, horizon, max_len, lookahead_every, epsilon,
               template_file, explanation_separator, trace_dir, on_diff_error):
    """Generate corrected claims for every input record."""
    records = _load_decode_input(input_path)
    config = _decode_config_from(
        beam=beam, branch_k=branch_k, lam=lam, horizon=horizon, max_len=max_len,
        lookahead_every=lookahead_every, epsilon=epsilon, template_file=template_file,
        explanation_separator=explanation_separator, on_diff_error=on_diff_error,
    )
    if model_file:
        model = NgramModel.load(model_file)
    else:
        # Remote backend: the vocab must cover every prompt we will encode.
        prompts = [
            config.prompt_template.format(
                evidence=r.evidence_text,
                claim=r.incorrect_claim if hasattr(r, "incorrect_claim") else r.claim,
            )
            for r in records
        ]
        model = RemoteLm(vocab=Vocab.build(prompts))
    scorer = {
        "lexical": LexicalScorer(),
        "remote": RemoteScorer() if semdiff_kind == "remote" else None,
        "none": None,
    }[semdiff_kind]
    predictions = []
    for rec in records:
        pred, trace = correct_claim(model, scorer, rec, config, method)
        predictions.append(pred)
        if trace_dir:
            Path(trace_dir).mkdir(parents=True, exist_ok=True)
            D.atomic_write_text(Path(trace_dir) / f"{rec.id}.json", trace.to_json())
    D.save_jsonl(predictions, output_path)
    click.echo(f"wrote {len(predictions)} predictions to {output_path}")


# --- judge ---------------------------------------------------------------------


@cli.command("judge")
@click.option("--predictions", "predictions_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--fact-mode", default="correct-claim", show_default=True,
              type=click.Choice(["correct-claim", "none"]),
              help="what goes in the Fact slot: the gold claim, or None")
@click.option("--evidence-cap", type=int, default=None,
              help="optional character cap on the evidence passage")
@click.option("--max-attempts", default=3, show_default=True)
def judge_cmd(predictions_path, dataset_path, output_path, fact_mode, evidence_cap,
              max_attempts):
    """Judge each prediction True/False against evidence (+ optional gold fact)."""
    preds = D.load_predictions(predictions_path).records
    first = next(D.iter_jsonl_dicts(dataset_path), None)
    if first is not None and "incorrect_claim" in first:
        dataset = {r.id: r for r in D.load_correction_dataset(dataset_path).records}
        facts = {r.id: r.correct_claim for r in dataset.values()}
    else:
        dataset = {r.id: r for r in D.load_verification_dataset(dataset_path).records}
        facts = {}
    policy = GenPolicy(max_attempts=max_attempts)
    client = ChatClient(policy=policy)
    rows = []
    for pred in preds:
        rec = dataset.get(pred.record_id)
        if rec is None:
            raise D.DataError(f"prediction {pred.record_id!r} missing from dataset")
        fact = facts.get(pred.record_id) if fact_mode == "correct-claim" else None
        verdict = judge_one(
            client, pred.record_id, rec.evidence_text, pred.predicted_claim,
            fact=fact, policy=policy, evidence_cap=evidence_cap,
        )
        rows.append(
            {
                "record_id": verdict.record_id,
                "method": pred.method,
                "verdict": verdict.verdict,
                "attempts": verdict.attempts,
                "raw_response": verdict.raw_response,
            }
        )
    D.atomic_write_text(
        output_path,
        "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in rows),
    )
    parseable = [r for r in rows if r["verdict"] is not None]
    click.echo(
        f"wrote {len(rows)} verdicts to {output_path} "
        f"({len(rows) - len(parseable)} unparseable)"
    )


def _load_verdicts(path) -> dict[str, list[JudgeVerdict]]:
    out: dict[str, list[JudgeVerdict]] = defaultdict(list)
    for obj in D.iter_jsonl_dicts(path):
        out[obj.get("method", "unknown")].append(
            JudgeVerdict(
                record_id=obj["record_id"],
                verdict=obj["verdict"],
                raw_response=obj.get("raw_response", ""),
                attempts=int(obj.get("attempts", 1)),
            )
        )
    return dict(out)


# --- metrics / report ------------------------------------------------------------


@cli.command("metrics")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--predictions", "predictions_path", required=True, type=click.Path(exists=True))
@click.option("--output", "output_path", required=True, type=click.Path())
def metrics_cmd(dataset_path, predictions_path, output_path):
    """Per-example SARI and lexical-diff values as JSONL."""
    dataset = {r.id: r for r in D.load_correction_dataset(dataset_path).records}
    preds = D.load_predictions(predictions_path).records
    rows = per_example_rows(dataset, preds)
    D.atomic_write_text(
        output_path,
        "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in rows),
    )
    click.echo(f"wrote {len(rows)} metric rows to {output_path}")


@cli.command("report")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--predictions", "predictions_path", required=True, type=click.Path(exists=True))
@click.option("--verdicts", "verdicts_path", type=click.Path(exists=True), default=None)
@click.option("--judgments", "judgments_path", type=click.Path(exists=True), default=None)
@click.option("--unblind-map", "unblind_path", type=click.Path(exists=True), default=None,
              help="JSON {method: blind_key}, from `claimkit serve-annot` unblinding")
@click.option("--coverage", default=3, show_default=True)
@click.option("--output", "output_path", required=True, type=click.Path())
@click.option("--table", "table_path", type=click.Path(), default=None)
@click.option("--tsv", "tsv_path", type=click.Path(), default=None)
@click.option("--figures-dir", type=click.Path(), default=None,
              help="defaults to <output stem>_figures next to --output")
@click.option("--no-figures", is_flag=True)
def report_cmd(dataset_path, predictions_path, verdicts_path, judgments_path,
               unblind_path, coverage, output_path, table_path, tsv_path,
               figures_dir, no_figures):
    """Aggregate per-method MetricReports; render table, TSV, and figures."""
    dataset = {r.id: r for r in D.load_correction_dataset(dataset_path).records}
    preds = D.load_predictions(predictions_path).records
    verdicts = _load_verdicts(verdicts_path) if verdicts_path else None
    judgments = (
        D.load_judgments(judgments_path).records if judgments_path else None
    )
    mapping = (
        json.loads(Path(unblind_path).read_text(encoding="utf-8"))
        if unblind_path
        else None
    )
    bundle = build_reports(
        dataset, preds, verdicts=verdicts, judgments=judgments,
        method_to_blind=mapping, coverage=coverage,
    )
    D.atomic_write_text(output_path, to_json(bundle))
    table = format_table(bundle)
    if table_path:
        D.atomic_write_text(table_path, table)
    if tsv_path:
        D.atomic_write_text(tsv_path, format_tsv(bundle))
    if not no_figures:
        from .plots import render_report_figures

        outdir = figures_dir or str(Path(output_path).with_suffix("")) + "_figures"
        created = render_report_figures(bundle, outdir)
        click.echo(f"figures: {', '.join(str(p) for p in created)}")
    click.echo(table, nl=False)


# --- annotation service ---------------------------------------------------------


@cli.command("ingest")
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--predictions", "predictions_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--k", default=3, show_default=True, help="judgments per task")
@click.option("--seed", type=int, default=None, help="blind-key RNG seed")
def ingest_cmd(data_dir, predictions_path, dataset_path, k, seed):
    """Build the blinded annotation task pool in DATA_DIR."""
    from .annot.store import AnnotStore

    store = AnnotStore(data_dir, seed=seed)
    result = store.ingest(predictions_path, dataset_path, k)
    click.echo(json.dumps(result))


@cli.command("serve-annot")
@click.option("--data-dir", required=True, type=click.Path())
@click.option("--port", type=int, default=None, help="default: ANNOT_PORT or 8400")
@click.option("--ui-dir", type=click.Path(exists=True), default=None)
@click.option("--lease-seconds", type=float, default=30 * 60, show_default=True)
@click.option("--seed", type=int, default=None, help="task-shuffle RNG seed")
def serve_annot_cmd(data_dir, port, ui_dir, lease_seconds, seed):
    """Run the blind annotation HTTP service."""
    import uvicorn

    from .annot.service import create_app
    from .annot.store import AnnotStore

    store = AnnotStore(data_dir, lease_seconds=lease_seconds, seed=seed)
    app = create_app(store, ui_dir=ui_dir)
    port = port or int(os.environ.get("ANNOT_PORT", "8400"))
    uvicorn.run(app, host="127.0.0.1", port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (D.DataError, DatagenError, MetricError, JudgeError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except (ChatError, LmError, SemdiffError, DecodeError) as exc:
        click.echo(f"backend error: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
