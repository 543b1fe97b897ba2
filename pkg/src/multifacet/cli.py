"""Command-line interface: ``multifacet {train,inspect,score,summarize,hypernym,eval}``.

File formats
  embeddings  text, one record per line: ``token v1 ... vE`` (space-separated)
  corpus      UTF-8, one sentence per line, blank line between documents;
              phrase mode marks phrases inline with ``[[ ... ]]``
  frequency   TSV ``token<TAB>count`` after a ``#total<TAB>N`` header
  sts         TSV ``gold<TAB>sentence_a<TAB>sentence_b``
  pairs       TSV ``label<TAB>phrase_a<TAB>phrase_b`` (label 1: a is the
              hypernym of b, -1: b is the hypernym of a, 0: other relation)
  turney      TSV ``query<TAB>gold<TAB>cand1<TAB>...``
  documents   JSON lines ``{"sentences": [...], "reference": "..."}``
  checkpoint  binary, see ``multifacet.checkpoint``

Every command writes ``manifest.json`` into its ``--out`` directory.
Errors are reported on stderr as ``<CODE>: <message>`` with a nonzero exit.
"""

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__, nnsc, scoring
from .checkpoint import load_checkpoint
from .embeddings import (DEFAULT_ALPHA, WordFrequencyTable, load_embeddings, lookup_matrix,
                         normalize_rows)
from .errors import ConfigError, EmptyMatrixError, MetricError, MultifacetError
from .evaluation import (auc_pr, direction_accuracy, pearson, read_sts,
                         read_turney, rouge_n_f1, spearman, sts_low_split, turney_accuracy)
from .facet_model import ModelConfig
from .summarize import CODEBOOK, FacetSource, greedy_select, read_documents
from .training import TrainConfig, corpus_sentences, read_corpus_file, train

logger = logging.getLogger("multifacet")

METHODS = ("avg", "prob_avg", "sif", "wmd", "prob_wmd", "sc")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def write_manifest(out_dir, command, config, inputs, outputs, seed, started):
    """Record the resolved configuration and checksums next to the outputs."""
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "seed": seed,
        "inputs": {p: _sha256(p) for p in inputs if p and os.path.exists(p)},
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs if os.path.exists(p)},
        "started": started,
        "finished": _now(),
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    return path


def _args_config(args):
    return {k: v for k, v in vars(args).items() if k != "func"}


def _load_table(args):
    lowercase = args.case == "lower" if args.case != "auto" else getattr(args, "mode", "") == "phrase"
    return normalize_rows(load_embeddings(args.embeddings, lowercase=lowercase))


def _solver(args):
    return nnsc.SolverConfig(lam=args.lam)


# -- train -------------------------------------------------------------------

def cmd_train(args):
    started = _now()
    table = _load_table(args)
    overrides = dict(enc_layers=args.enc_layers, heads=args.heads, max_len=args.max_len,
                     seed=args.seed)
    for key in ("dec_layers", "ff_dim", "attn_dropout"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    model_cfg = ModelConfig.for_mode(args.mode, table.dim, args.k, **overrides)
    cfg = TrainConfig(mode=args.mode, window=args.window, max_seq_len=min(50, args.max_len),
                      max_cooc=args.max_cooc, min_word_count=args.min_count,
                      learning_rate=args.lr, grad_clip_norm=args.clip, epochs=args.epochs,
                      batch_size=args.batch_size, seed=args.seed, threads=args.threads,
                      solver=_solver(args), model=model_cfg)
    corpus = read_corpus_file(args.corpus)
    os.makedirs(args.out, exist_ok=True)
    freq = WordFrequencyTable.from_corpus(corpus_sentences(corpus, args.mode))
    freq_path = os.path.join(args.out, "freq.tsv")
    freq.save(freq_path)
    result = train(corpus, cfg, table, out_dir=args.out, freq=freq)
    config = _args_config(args)
    config["resolved"] = {"model": asdict(result.model.config),
                          "solver": asdict(cfg.solver),
                          "train": {k: v for k, v in asdict(cfg).items()
                                    if k not in ("model", "solver")}}
    outputs = [result.checkpoint, result.loss_log, freq_path]
    outputs += [os.path.join(args.out, f"checkpoint-epoch{e}.bin") for e in range(1, args.epochs + 1)]
    write_manifest(args.out, "train", config, [args.corpus, args.embeddings], outputs,
                   args.seed, started)
    for epoch, loss in enumerate(result.epoch_losses, start=1):
        print(f"epoch {epoch}\tmean_loss {loss:.6f}")
    print(f"instances {result.n_instances}\tcheckpoint {result.checkpoint}")
    return 0


# -- inspect -----------------------------------------------------------------

def inspect_report(model, table, tokens, top=3) -> str:
    fold = str.lower if model.config.lowercase else str
    if not any(t in table or fold(t) in model.index for t in tokens):
        raise EmptyMatrixError("input has no in-vocabulary tokens")
    F = model.codebook(tokens)
    lines = ["Input: " + " ".join(tokens) + " <eos>"]
    width = len(f"e{F.shape[1]}")
    for k in range(F.shape[1]):
        pairs = ", ".join(f"{w} {s:.3f}" for w, s in table.nearest(F[:, k], top))
        lines.append(f"{'e' + str(k + 1):<{width}} | {pairs}")
    return "\n".join(lines)


def cmd_inspect(args):
    started = _now()
    model = load_checkpoint(args.checkpoint)
    args.mode = "phrase" if model.config.lowercase else "sentence"
    table = _load_table(args)
    texts = [args.text] if args.text else []
    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            texts += [line.strip() for line in fh if line.strip()]
    if not texts:
        raise ConfigError("give --text or --input")
    reports = [inspect_report(model, table, t.split(), args.top) for t in texts]
    text = "\n\n".join(reports)
    print(text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "inspect.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        write_manifest(args.out, "inspect", _args_config(args),
                       [args.checkpoint, args.embeddings, args.input], [path], None, started)
    return 0


# -- score -------------------------------------------------------------------

def pair_scores(pairs, method, table, freq, model=None, alpha=DEFAULT_ALPHA,
                solver=nnsc.SolverConfig(), seed=0):
    """Similarity of every pair under one of the named scoring methods."""
    attention = method.startswith("attention:")
    base = method.split(":", 1)[1] if attention else method
    if base not in METHODS or (attention and base == "sc"):
        raise ConfigError(f"unknown method {method!r}")
    if (attention or base == "sc") and model is None:
        raise ConfigError(f"method {method!r} needs --checkpoint")
    cb = {}

    def codebook(tokens):
        key = tuple(tokens)
        if key not in cb:
            cb[key] = model.codebook(list(tokens))
        return cb[key]

    if base == "sc":
        cfg = scoring.ScoreConfig(solver=solver)
        return [-scoring.sc_distance(codebook(p.text_a), codebook(p.text_b), cfg) for p in pairs]

    if base in ("avg", "prob_avg", "sif"):
        weighting = {("avg", False): scoring.UNIFORM, ("avg", True): scoring.ATTENTION}.get(
            (base, attention), scoring.PROB_X_ATTENTION if attention else scoring.PROB)
        vecs = []
        for p in pairs:
            for s in (p.text_a, p.text_b):
                vecs.append(scoring.sentence_vector(s, table, weighting, freq, alpha,
                                                    codebook(s) if attention else None))
        V = np.vstack(vecs)
        if base == "sif":
            V = scoring.sif_postprocess(V, seed=seed)
        return [scoring.cosine(V[2 * i], V[2 * i + 1]) for i in range(len(pairs))]

    out = []
    for p in pairs:
        masses = []
        for s in (p.text_a, p.text_b):
            weighting = scoring.PROB if base == "prob_wmd" else scoring.UNIFORM
            if attention:
                weighting = scoring.PROB_X_ATTENTION if base == "prob_wmd" else scoring.ATTENTION
            _, w = scoring.word_weights(s, table, weighting, freq, alpha,
                                        codebook(s) if attention else None)
            masses.append(w)
        out.append(-scoring.wmd(p.text_a, p.text_b, table, masses[0], masses[1]))
    return out


def _frequencies(args, sentences):
    if args.freq:
        return WordFrequencyTable.load(args.freq)
    return WordFrequencyTable.from_corpus(sentences)


def cmd_score(args):
    started = _now()
    pairs = read_sts(args.sts)
    model = load_checkpoint(args.checkpoint) if args.checkpoint else None
    args.mode = "phrase" if model is not None and model.config.lowercase else "sentence"
    table = _load_table(args)
    freq = _frequencies(args, [s for p in pairs for s in (p.text_a, p.text_b)])
    scores = pair_scores(pairs, args.method, table, freq, model, args.alpha, _solver(args),
                         args.seed)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "scores.tsv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index\tgold\tscore\n")
        for i, (p, s) in enumerate(zip(pairs, scores)):
            fh.write(f"{i}\t{p.gold:g}\t{s:.9g}\n")
    write_manifest(args.out, "score", _args_config(args),
                   [args.sts, args.embeddings, args.checkpoint, args.freq], [path], args.seed, started)
    all_r = pearson([p.gold for p in pairs], scores)
    low = sts_low_split(pairs)
    low_ids = {id(p) for p in low}
    low_scores = [s for p, s in zip(pairs, scores) if id(p) in low_ids]
    print(f"pairs\t{len(pairs)}")
    print(f"pearson_all\t{all_r:.6f}")
    if len(low) >= 2:
        print(f"pearson_low\t{pearson([p.gold for p in low], low_scores):.6f}")
    return 0


# -- summarize ---------------------------------------------------------------

def cmd_summarize(args):
    started = _now()
    docs = read_documents(args.docs)
    model = load_checkpoint(args.checkpoint) if args.checkpoint else None
    if args.source == CODEBOOK and model is None:
        raise ConfigError("--source codebook needs --checkpoint")
    args.mode = "phrase" if model is not None and model.config.lowercase else "sentence"
    table = _load_table(args)
    freq = _frequencies(args, [s for d in docs for s in d.sentences])
    source = FacetSource(args.source, model)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "summaries.jsonl")
    r1s, r2s, lens = [], [], []
    with open(path, "w", encoding="utf-8") as fh:
        for i, doc in enumerate(docs):
            summ = greedy_select(doc, args.k, source, freq, table, args.alpha)
            rec = {"doc": i, "indices": summ.order, "gains": [round(g, 9) for g in summ.gains],
                   "len": summ.length}
            if doc.reference:
                cand = [t for j in summ.order for t in doc.sentences[j]]
                rec["rouge1"] = rouge_n_f1(cand, doc.reference, 1)
                rec["rouge2"] = rouge_n_f1(cand, doc.reference, 2) if len(doc.reference) > 1 else 0.0
                r1s.append(rec["rouge1"])
                r2s.append(rec["rouge2"])
            lens.append(summ.length)
            fh.write(json.dumps(rec) + "\n")
            print(f"doc {i}\tindices {' '.join(map(str, summ.order))}\t"
                  f"gains {' '.join(f'{g:.4f}' for g in summ.gains)}\tlen {summ.length}")
    write_manifest(args.out, "summarize", _args_config(args),
                   [args.docs, args.embeddings, args.checkpoint, args.freq], [path], None, started)
    print(f"mean_len\t{np.mean(lens):.2f}")
    if r1s:
        print(f"rouge1_f1\t{np.mean(r1s):.4f}\nrouge2_f1\t{np.mean(r2s):.4f}")
    return 0


# -- hypernym ----------------------------------------------------------------

def _read_hypernym_pairs(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) == 2:
                out.append((None, parts[0].split(), parts[1].split()))
            elif len(parts) == 3:
                out.append((int(float(parts[0])), parts[1].split(), parts[2].split()))
            else:
                raise MetricError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
    return out


def cmd_hypernym(args):
    started = _now()
    model = load_checkpoint(args.checkpoint)
    args.mode = "phrase" if model.config.lowercase else "sentence"
    table = _load_table(args)
    cfg = scoring.ScoreConfig(solver=_solver(args))
    rows = _read_hypernym_pairs(args.pairs)
    diffs = []
    for _, a, b in rows:
        Wa, _ = lookup_matrix(a, table)
        Wb, _ = lookup_matrix(b, table)
        diffs.append(scoring.hypernym_diff(model.codebook(a), model.codebook(b), Wa, Wb, cfg))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "diff.tsv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index\tlabel\tdiff\n")
        for i, ((label, _, _), d) in enumerate(zip(rows, diffs)):
            fh.write(f"{i}\t{'' if label is None else label}\t{d:.9g}\n")
    write_manifest(args.out, "hypernym", _args_config(args),
                   [args.pairs, args.embeddings, args.checkpoint], [path], None, started)
    labels = [label for label, _, _ in rows]
    if any(l is None for l in labels):
        raise MetricError("pair file lacks labels; AUC and direction accuracy need them")
    print(f"pairs\t{len(rows)}")
    if any(l == 1 for l in labels):
        print(f"auc_pr\t{auc_pr([int(l == 1) for l in labels], diffs):.6f}")
    directed = [(d, l) for d, l in zip(diffs, labels) if l != 0]
    if directed:
        acc = direction_accuracy([d for d, _ in directed], [l for _, l in directed])
        print(f"direction_accuracy\t{acc:.6f}")
    return 0


# -- eval --------------------------------------------------------------------

def cmd_eval(args):
    started = _now()
    outputs = []
    if args.predictions:
        gold, pred = [], []
        with open(args.predictions, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            gi, si = header.index("gold"), header.index("score")
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                if len(parts) > max(gi, si):
                    gold.append(float(parts[gi]))
                    pred.append(float(parts[si]))
        print(f"pearson\t{pearson(gold, pred):.6f}")
        print(f"spearman\t{spearman(gold, pred):.6f}")
        if set(gold) <= {0.0, 1.0}:
            print(f"auc_pr\t{auc_pr([int(g) for g in gold], pred):.6f}")
    if args.turney:
        queries = read_turney(args.turney)
        if not args.embeddings:
            raise ConfigError("--turney needs --embeddings")
        args.mode = "phrase"
        table = _load_table(args)
        if args.checkpoint:
            model = load_checkpoint(args.checkpoint)
            cfg = scoring.ScoreConfig(solver=_solver(args))
            scorer = lambda q, c: -scoring.sc_distance(model.codebook(q), model.codebook(c), cfg)
        else:
            scorer = lambda q, c: scoring.weighted_avg_similarity(q, c, table)
        print(f"turney_accuracy\t{turney_accuracy(queries, scorer):.6f}")
    if not (args.predictions or args.turney):
        raise ConfigError("give --predictions and/or --turney")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_manifest(args.out, "eval", _args_config(args),
                       [args.predictions, args.turney, args.checkpoint], outputs, None, started)
    return 0


# -- parser ------------------------------------------------------------------

def _common(p, embeddings_required=True):
    p.add_argument("--embeddings", required=embeddings_required,
                   help="word vectors, text format 'token v1 ... vE'")
    p.add_argument("--case", choices=("auto", "preserve", "lower"), default="auto",
                   help="token case policy (auto: lowercase for phrase models)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.4, help="sparsity weight")
    p.add_argument("--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="multifacet", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn a facet model from a corpus")
    _common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=("sentence", "phrase"), default="sentence")
    p.add_argument("--k", type=int, default=10, help="number of facets")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--clip", type=float, default=1.0, help="global gradient-norm clip")
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--max-cooc", type=int, default=30)
    p.add_argument("--min-count", type=int, default=100)
    p.add_argument("--enc-layers", type=int, default=3)
    p.add_argument("--dec-layers", type=int)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--ff-dim", type=int)
    p.add_argument("--attn-dropout", type=float)
    p.add_argument("--max-len", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("inspect", help="nearest words of every facet")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--text")
    p.add_argument("--input", help="file with one sequence per line")
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("score", help="score STS pairs and report Pearson")
    _common(p)
    p.add_argument("--sts", required=True)
    p.add_argument("--method", required=True,
                   help="avg | prob_avg | sif | wmd | prob_wmd | sc | attention:<base>")
    p.add_argument("--checkpoint")
    p.add_argument("--freq")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("summarize", help="greedy facet-coverage summaries")
    _common(p)
    p.add_argument("--docs", required=True)
    p.add_argument("--source", choices=("codebook", "sent_emb", "w_emb"), default="codebook")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--checkpoint")
    p.add_argument("--freq")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("hypernym", help="asymmetric hypernym scores")
    _common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hypernym)

    p = sub.add_parser("eval", help="metrics for a scores file or the Turney task")
    _common(p, embeddings_required=False)
    p.add_argument("--predictions", help="TSV with 'gold' and 'score' columns")
    p.add_argument("--turney")
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MultifacetError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"MF900: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
