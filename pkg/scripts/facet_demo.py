"""Train a small model on a two-topic toy corpus and print each facet's nearest words.

    python3 scripts/facet_demo.py [--epochs 3] [--seed 0]

Takes about a minute on one core. The facets of a sentence drawn from one
topic should list that topic's words (``t0w*`` or ``t1w*``) as neighbours.
"""

import argparse

from multifacet.cli import inspect_report
from multifacet.facet_model import ModelConfig
from multifacet.synthetic import topic_corpus, topic_embeddings
from multifacet.training import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    table, topics = topic_embeddings(dim=16, words_per_topic=20, seed=args.seed)
    corpus = topic_corpus(topics, sentences_per_topic=500, seed=args.seed)
    model_cfg = ModelConfig(dim=16, K=3, enc_layers=1, dec_layers=1, heads=2, ff_dim=32,
                            seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, min_word_count=0, seed=args.seed, model=model_cfg)
    result = train(corpus, cfg, table)
    for epoch, loss in enumerate(result.epoch_losses, start=1):
        print(f"epoch {epoch}  mean loss {loss:.4f}")
    for topic in topics:
        print()
        print(inspect_report(result.model, table, topic[:6]))


if __name__ == "__main__":
    main()
