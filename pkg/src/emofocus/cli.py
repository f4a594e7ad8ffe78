"""Command-line surface: train, recognize, extract causes, build worlds,
generate, evaluate, sweep, and the synthetic benchmark generator.

Every run is reproducible: all randomness flows from explicit --seed flags
(default 0, never wall clock), and each run emits a manifest recording the
resolved arguments and input fingerprints (to --manifest, else stderr).

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 degenerate
model error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv as csv_module
import hashlib
import json
import sys

from . import __version__
from .backend import (
    ConditionalModel,
    ContextEchoModel,
    Sampling,
    Utterance,
    load_model,
    save_model,
    train_ngram,
)
from .distractor import SamplingConfig, build_world
from .errors import (
    DataFormatError,
    DegenerateModelError,
    EmofocusError,
    UsageError,
)
from .evaluation import (
    coverage,
    emotion_accuracy,
    expected_random_recall,
    random_baseline,
    read_corpus,
    read_emocause,
    read_labeled,
    recall_at_k,
)
from .pragmatics import RsaConfig, decode, init_session, sample_plain_contexts
from .recognition import EmotionCatalog, analyze, recognize_emotion, word_filter
from .synthetic import generate_benchmark, write_benchmark

# Stride between per-example derived seeds; large enough that the handful
# of per-example draws never overlap.
SEED_STRIDE = 1_000_003


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]

def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _file_sha256(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                h.update(chunk)
    except OSError:
        return "unavailable"
    return h.hexdigest()


def _emit_manifest(args: argparse.Namespace, command: str) -> None:
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("func", "manifest") and not k.startswith("_")
    }
    inputs = {}
    for key in ("corpus", "data", "pool", "model", "speaker", "gee"):
        value = getattr(args, key, None)
        if isinstance(value, str) and not value.startswith("bridge:"):
            inputs[value] = _file_sha256(value)
    manifest = {
        "command": command,
        "argv": list(args._argv),
        "config": config,
        "inputs": inputs,
        "tool_version": __version__,
    }
    line = json.dumps(manifest, sort_keys=True)
    if getattr(args, "manifest", None):
        with open(args.manifest, "w", encoding="utf-8") as fh:
            fh.write(line + "\n")
    else:
        print(line, file=sys.stderr)


def _print_json(doc: dict) -> None:
    print(json.dumps(doc, sort_keys=True))


def _load_backend(spec: str, echo_weight: float = 0.0) -> ConditionalModel:
    """Resolve a model argument: a model file path or ``bridge:CMD``."""
    if spec.startswith("bridge:"):
        try:
            from emofocus_bridge.host import BridgeModel
        except ImportError as exc:
            raise UsageError(
                "bridge backend requested but emofocus-bridge is not installed"
            ) from exc
        model: ConditionalModel = BridgeModel.start(spec[len("bridge:"):])
    else:
        model = load_model(spec)
    if echo_weight > 0.0:
        model = ContextEchoModel(model, echo_weight)
    return model


def _apply_backend_override(args: argparse.Namespace) -> None:
    override = getattr(args, "backend", None)
    if not override:
        return
    if not override.startswith("bridge:"):
        raise UsageError("--backend expects bridge:CMD")
    if hasattr(args, "speaker"):
        args.speaker = override
    elif hasattr(args, "model"):
        args.model = override


def _exclusions(args: argparse.Namespace):
    stop = tuple(getattr(args, "stopwords", "").split(",")) if getattr(
        args, "stopwords", ""
    ) else ()
    drop_punct = bool(getattr(args, "drop_punct", False))
    if not stop and not drop_punct:
        return None
    return word_filter(stopwords=[w for w in stop if w], drop_punctuation=drop_punct)


def cmd_train(args) -> int:
    corpus = read_corpus(args.corpus)
    labels = args.labels.split(",") if args.labels else None
    model = train_ngram(
        corpus, order=args.order, discount=args.discount, labels=labels
    )
    save_model(model, args.out)
    _print_json(
        {
            "model": args.out,
            "examples": len(corpus),
            "labels": list(model.vocabulary.labels),
            "order": model.order,
            "discount": model.discount,
            "vocab_size": len(model.vocabulary),
            "fingerprint": model.trained_on,
        }
    )
    return 0


def cmd_emotion(args) -> int:
    model = _load_backend(args.model)
    catalog = EmotionCatalog.from_model(model)
    posterior = recognize_emotion(model, catalog, Utterance.from_text(args.text))
    top = posterior.sorted_labels[: args.top]
    _print_json(
        {
            "text": args.text,
            "top": [
                {"label": lb, "probability": posterior.prob_of(lb)} for lb in top
            ],
        }
    )
    return 0


def cmd_causes(args) -> int:
    model = _load_backend(args.model)
    catalog = EmotionCatalog.from_model(model)
    posterior, scores, selection = analyze(
        model,
        catalog,
        args.text,
        k=args.k,
        contrast_size=args.contrast,
        exclusions=_exclusions(args),
    )
    _print_json(
        {
            "text": args.text,
            "emotion": posterior.top_label,
            "contrast_set": list(scores.contrast_set),
            "selection": [
                {
                    "position": pos,
                    "word": word,
                    "score": scores.per_position[pos].score,
                }
                for pos, word in zip(selection.positions, selection.words)
            ],
            "scores": [
                {"position": t, "word": p.word, "score": p.score}
                for t, p in enumerate(scores.per_position)
            ],
        }
    )
    return 0


def cmd_world(args) -> int:
    model = _load_backend(args.model)
    catalog = EmotionCatalog.from_model(model)
    posterior, scores, selection = analyze(model, catalog, args.text, k=args.k)
    cfg = SamplingConfig(
        strategy=Sampling(mode="top_p", p=args.top_p, temperature=args.temperature),
        max_retries=args.retries,
        n_negative_emotions=args.n,
        world_size=args.size,
    )
    world = build_world(
        model, Utterance.from_text(args.text), selection, posterior, cfg, args.seed
    )
    _print_json(
        {
            "emotion": posterior.top_label,
            "contexts": [ctx.text for ctx in world.contexts],
            "replaced": [
                [
                    {
                        "position": r.position,
                        "original": r.original,
                        "replacement": r.replacement,
                    }
                    for r in repl
                ]
                for repl in world.replaced_positions
            ],
            "source_emotions": [list(src) for src in world.source_emotions],
            "duplicates": list(world.duplicate_indices()),
        }
    )
    return 0


def _generation_contexts(
    mode: str,
    gee: ConditionalModel,
    catalog: EmotionCatalog,
    utterance: Utterance,
    args,
    seed: int,
    pool: list[Utterance] | None,
):
    posterior, scores, selection = analyze(gee, catalog, utterance, k=args.k)
    if mode == "focused":
        cfg = SamplingConfig(n_negative_emotions=args.n, world_size=args.size)
        contexts = build_world(gee, utterance, selection, posterior, cfg, seed).contexts
    elif mode == "plain":
        if not pool:
            raise UsageError("plain mode needs --pool with candidate contexts")
        contexts = sample_plain_contexts(utterance, pool, args.size, seed)
    else:
        contexts = (utterance,)
    return contexts, selection


def _read_pool(path: str | None) -> list[Utterance] | None:
    if not path:
        return None
    pool = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if "tokens" in doc:
                pool.append(Utterance.from_words(doc["tokens"]))
            elif "text" in doc:
                pool.append(Utterance.from_text(doc["text"]))
            else:
                raise DataFormatError(f"{path}: pool entries need tokens or text")
    return pool


def cmd_generate(args) -> int:
    speaker = _load_backend(args.speaker, echo_weight=args.echo_weight)
    gee = _load_backend(args.gee)
    catalog = EmotionCatalog.from_model(gee)
    utterance = Utterance.from_text(args.context)
    pool = _read_pool(args.pool)
    contexts, _ = _generation_contexts(
        args.mode, gee, catalog, utterance, args, args.seed, pool
    )
    config = RsaConfig(
        alpha=args.alpha,
        beta=args.beta,
        max_length=args.max_len,
        mode=args.mode,
    )
    session = init_session(speaker, contexts, config, seed=args.seed)
    result = decode(session)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for step in result.trace:
                fh.write(json.dumps(step.to_dict()) + "\n")
    print(result.text)
    return 0


def _rank_one(example) -> list[int]:
    utt = Utterance.from_words(example.tokens)
    _, scores, _ = analyze(
        _WORKER["gee"], _WORKER["catalog"], utt, k=1,
        exclusions=_WORKER["exclusions"],
    )
    return sorted(
        range(len(example.tokens)),
        key=lambda t: (-scores.per_position[t].score, t),
    )


def _ranking_init(model_path, stopwords, drop_punct):
    model = _load_backend(model_path)
    _WORKER["gee"] = model
    _WORKER["catalog"] = EmotionCatalog.from_model(model)
    exclusions = None
    if stopwords or drop_punct:
        exclusions = word_filter(
            stopwords=[w for w in stopwords.split(",") if w],
            drop_punctuation=drop_punct,
        )
    _WORKER["exclusions"] = exclusions


def _gee_rankings(args, examples):
    """Full cause-score position ranking per example."""
    init = (args.model, getattr(args, "stopwords", ""),
            bool(getattr(args, "drop_punct", False)))
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=args.jobs, initializer=_ranking_init, initargs=init
        ) as pool:
            return list(pool.map(_rank_one, examples, chunksize=8))
    _ranking_init(*init)
    return [_rank_one(example) for example in examples]


def cmd_eval_causes(args) -> int:
    examples = read_emocause(args.data)
    if args.limit:
        examples = examples[: args.limit]
    ks = _ints(args.k)
    report: dict = {"n_examples": len(examples), "k": ks}
    rankings = _gee_rankings(args, examples)
    gee_report = recall_at_k(rankings, examples, ks)
    report["gee"] = gee_report.to_dict()
    if args.baseline == "random":
        max_k = max(ks)
        predictions = [
            random_baseline(ex, max_k, args.seed + SEED_STRIDE * i)
            for i, ex in enumerate(examples)
        ]
        report["random"] = recall_at_k(predictions, examples, ks).to_dict()
        report["random_expected"] = {
            str(k): sum(expected_random_recall(len(ex.tokens), k) for ex in examples)
            / len(examples)
            for k in ks
        }
    _print_json(report)
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv_module.writer(fh)
            writer.writerow(["method", "k", "recall"])
            for k in ks:
                writer.writerow(["gee", k, gee_report.per_k[k]])
                if args.baseline == "random":
                    writer.writerow(["random", k, report["random"]["recall"][str(k)]])
    return 0


# Worker state for --jobs parallelism; set once per worker process.
_WORKER: dict = {}


def _coverage_init(speaker_path, gee_path, echo_weight, data_path, limit):
    examples = read_labeled(data_path)
    if limit:
        examples = examples[:limit]
    gee = _load_backend(gee_path)
    _WORKER["speaker"] = _load_backend(speaker_path, echo_weight=echo_weight)
    _WORKER["gee"] = gee
    _WORKER["catalog"] = EmotionCatalog.from_model(gee)
    _WORKER["examples"] = examples
    _WORKER["pool"] = [Utterance.from_words(ex.tokens) for ex in examples]


def _coverage_one(task) -> int:
    index, mode, k, alpha, beta, n, size, max_len, seed = task
    example = _WORKER["examples"][index]
    utterance = Utterance.from_words(example.tokens)
    posterior, scores, selection = analyze(
        _WORKER["gee"], _WORKER["catalog"], utterance, k=k
    )
    example_seed = seed + SEED_STRIDE * index
    if mode == "focused":
        cfg = SamplingConfig(n_negative_emotions=n, world_size=size)
        contexts = build_world(
            _WORKER["gee"], utterance, selection, posterior, cfg, example_seed
        ).contexts
    elif mode == "plain":
        contexts = sample_plain_contexts(
            utterance, _WORKER["pool"], size, example_seed
        )
    else:
        contexts = (utterance,)
    config = RsaConfig(
        alpha=alpha if mode != "base" else 0.0,
        beta=beta,
        max_length=max_len,
        mode=mode,
    )
    result = decode(init_session(_WORKER["speaker"], contexts, config))
    return coverage(Utterance.from_words(result.words), selection)


def _run_coverage(args, modes, ks, alphas, betas):
    init = (args.speaker, args.gee, args.echo_weight, args.data, args.limit)
    _coverage_init(*init)
    n_examples = len(_WORKER["examples"])
    tasks = []
    cells = []
    for mode in modes:
        for k in ks:
            for alpha in alphas:
                for beta in betas:
                    cells.append((mode, k, alpha, beta))
                    tasks.extend(
                        (i, mode, k, alpha, beta, args.n, args.size,
                         args.max_len, args.seed)
                        for i in range(n_examples)
                    )
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_coverage_init,
            initargs=init,
        ) as pool:
            values = list(pool.map(_coverage_one, tasks, chunksize=16))
    else:
        values = [_coverage_one(t) for t in tasks]
    results = []
    for j, cell in enumerate(cells):
        chunk = values[j * n_examples : (j + 1) * n_examples]
        results.append((cell, sum(chunk) / n_examples))
    return results, n_examples


def cmd_eval_coverage(args) -> int:
    modes = [m for m in args.modes.split(",") if m]
    results, n = _run_coverage(args, modes, [args.k], [args.alpha], [args.beta])
    _print_json(
        {
            "coverage": {cell[0]: value for cell, value in results},
            "n_examples": n,
            "k": args.k,
            "alpha": args.alpha,
            "beta": args.beta,
        }
    )
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv_module.writer(fh)
            writer.writerow(["mode", "k", "alpha", "beta", "coverage"])
            for cell, value in results:
                writer.writerow([cell[0], cell[1], cell[2], cell[3], value])
    return 0


def cmd_eval_emotion(args) -> int:
    model = _load_backend(args.model)
    catalog = EmotionCatalog.from_model(model)
    examples = read_labeled(args.data)
    if args.limit:
        examples = examples[: args.limit]
    ks = _ints(args.top)
    accuracy = emotion_accuracy(model, catalog, examples, ks)
    _print_json(
        {
            "accuracy": {str(k): accuracy[k] for k in ks},
            "n_examples": len(examples),
        }
    )
    return 0


def cmd_sweep(args) -> int:
    alphas = _floats(args.alpha)
    betas = _floats(args.beta)
    ks = _ints(args.k)
    results, n = _run_coverage(args, [args.mode], ks, alphas, betas)
    grid = [
        {
            "mode": cell[0],
            "k": cell[1],
            "alpha": cell[2],
            "beta": cell[3],
            "coverage": value,
        }
        for cell, value in results
    ]
    _print_json({"grid": grid, "n_examples": n})
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv_module.writer(fh)
            writer.writerow(["mode", "k", "alpha", "beta", "coverage"])
            for cell in grid:
                writer.writerow(
                    [cell["mode"], cell["k"], cell["alpha"], cell["beta"],
                     cell["coverage"]]
                )
    return 0


def cmd_synth(args) -> int:
    examples = generate_benchmark(
        n_emotions=args.emotions, n_sentences=args.sentences, seed=args.seed
    )
    write_benchmark(examples, args.out)
    _print_json(
        {
            "written": args.out,
            "n": len(examples),
            "emotions": sorted({ex.emotion for ex in examples}),
        }
    )
    return 0


def cmd_rerun(args) -> int:
    with open(args.manifest_file, encoding="utf-8") as fh:
        manifest = json.loads(fh.read())
    return run(manifest["argv"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emofocus",
        description="Emotion-cause recognition and cause-focused pragmatic decoding.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_manifest(p):
        p.add_argument("--manifest", help="write the run manifest to this path")

    p = sub.add_parser("train", help="train the reference n-gram backend")
    p.add_argument("--corpus", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--discount", type=float, default=0.75)
    p.add_argument("--labels", default="")
    p.add_argument("--out", required=True)
    add_manifest(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("emotion", help="recognize the emotion of an utterance")
    p.add_argument("--model", required=True)
    p.add_argument("--backend", default="")
    p.add_argument("--text", required=True)
    p.add_argument("--top", type=int, default=5)
    add_manifest(p)
    p.set_defaults(func=cmd_emotion)

    p = sub.add_parser("causes", help="score and select emotion cause words")
    p.add_argument("--model", required=True)
    p.add_argument("--backend", default="")
    p.add_argument("--text", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--contrast", type=int, default=2)
    p.add_argument("--drop-punct", action="store_true")
    p.add_argument("--stopwords", default="")
    add_manifest(p)
    p.set_defaults(func=cmd_causes)

    p = sub.add_parser("world", help="build the shared world with distractors")
    p.add_argument("--model", required=True)
    p.add_argument("--backend", default="")
    p.add_argument("--text", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-p", type=float, default=0.9)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--retries", type=int, default=10)
    add_manifest(p)
    p.set_defaults(func=cmd_world)

    p = sub.add_parser("generate", help="decode a response with the pragmatic speaker")
    p.add_argument("--speaker", required=True)
    p.add_argument("--gee", required=True)
    p.add_argument("--backend", default="")
    p.add_argument("--context", required=True)
    p.add_argument("--mode", choices=("focused", "plain", "base"), default="focused")
    p.add_argument("--alpha", type=float, default=4.0)
    p.add_argument("--beta", type=float, default=0.9)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--max-len", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--echo-weight", type=float, default=0.3)
    p.add_argument("--pool", default="")
    p.add_argument("--trace", default="")
    add_manifest(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="evaluation harnesses")
    eval_sub = p.add_subparsers(dest="eval_command", required=True)

    q = eval_sub.add_parser("causes", help="cause-word recall@k")
    q.add_argument("--model", required=True)
    q.add_argument("--backend", default="")
    q.add_argument("--data", required=True)
    q.add_argument("--k", default="1,3,5")
    q.add_argument("--baseline", choices=("", "random"), default="")
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--limit", type=int, default=0)
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--drop-punct", action="store_true")
    q.add_argument("--stopwords", default="")
    q.add_argument("--csv", default="")
    add_manifest(q)
    q.set_defaults(func=cmd_eval_causes)

    q = eval_sub.add_parser("coverage", help="cause coverage of generated responses")
    q.add_argument("--speaker", required=True)
    q.add_argument("--gee", required=True)
    q.add_argument("--backend", default="")
    q.add_argument("--data", required=True)
    q.add_argument("--modes", default="base,plain,focused")
    q.add_argument("--k", type=int, default=5)
    q.add_argument("--alpha", type=float, default=4.0)
    q.add_argument("--beta", type=float, default=0.9)
    q.add_argument("--n", type=int, default=3)
    q.add_argument("--size", type=int, default=3)
    q.add_argument("--max-len", type=int, default=40)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--echo-weight", type=float, default=0.3)
    q.add_argument("--limit", type=int, default=0)
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--csv", default="")
    add_manifest(q)
    q.set_defaults(func=cmd_eval_coverage)

    q = eval_sub.add_parser("emotion", help="emotion classification accuracy")
    q.add_argument("--model", required=True)
    q.add_argument("--backend", default="")
    q.add_argument("--data", required=True)
    q.add_argument("--top", default="1,5")
    q.add_argument("--limit", type=int, default=0)
    add_manifest(q)
    q.set_defaults(func=cmd_eval_emotion)

    p = sub.add_parser("sweep", help="grid sweep over alpha/beta/k")
    p.add_argument("--speaker", required=True)
    p.add_argument("--gee", required=True)
    p.add_argument("--backend", default="")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", default="4.0")
    p.add_argument("--beta", default="0.9")
    p.add_argument("--k", default="1,2,4,8")
    p.add_argument("--mode", choices=("focused", "plain", "base"), default="focused")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--max-len", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--echo-weight", type=float, default=0.3)
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv", default="")
    add_manifest(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate the synthetic benchmark")
    p.add_argument("--emotions", type=int, default=8)
    p.add_argument("--sentences", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    add_manifest(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rerun", help="re-run a command from its manifest")
    p.add_argument("manifest_file")
    p.set_defaults(func=cmd_rerun)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    args._argv = list(argv)
    try:
        _apply_backend_override(args)
        code = args.func(args)
        if args.command != "rerun":
            _emit_manifest(args, args.command)
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegenerateModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except EmofocusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
