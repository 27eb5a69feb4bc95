# -*- coding: utf-8 -*-
"""
`generate`: writes a synthetic corpus directory from the [Generation] settings
(optionally one of the ladder presets) and prints its summary statistics.
"""

import logging
from typing import Any, Dict

from datagen import LADDER_PRESETS, GenConfig, SynthCorpus, emit_corpus, generate_corpus, ladder_config

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('generate', help="Generate a synthetic movie QA corpus")
    parser.add_argument('--out', dest='output_dir', help="Corpus directory (default: [Experiment] corpus_dir)")
    parser.add_argument('--preset', choices=list(LADDER_PRESETS), help="Apply a ladder preset's document settings")
    parser.add_argument('--seed', type=int, help="Override [Generation] seed")
    parser.set_defaults(func=run)


def summary_text(corpus: SynthCorpus) -> str:
    manifest = corpus.manifest
    counts = manifest['counts']
    lines = [
        f"movies {counts['movies']}  entities {counts['entities']}  triples {counts['triples']}",
        f"documents {counts['documents']}  questions {counts['questions']} "
        f"(train {counts['train']} / dev {counts['dev']} / test {counts['test']})",
        f"conjunction rate {manifest['measured_conjunction_rate']:.3f}  "
        f"coreference rate {manifest['measured_coreference_rate']:.3f}",
        f"recommended hash threshold F = {manifest['recommended_hash_threshold']}",
    ]
    return "\n".join(lines) + "\n"


def run(args, settings: Dict[str, Any]) -> int:
    config: GenConfig = settings['generation']
    if args.seed is not None:
        config = GenConfig(**{**config.to_dict(), 'seed': args.seed}).validate()
    if args.preset:
        label, config, _ = ladder_config(config, args.preset)
        logger.info(f"Using ladder preset '{args.preset}' ({label})")
    out_dir = args.output_dir or settings['experiment'].corpus_dir
    corpus = generate_corpus(config)
    emit_corpus(corpus, out_dir)
    print(f"Corpus written to {out_dir}")
    print(summary_text(corpus), end="")
    return 0
