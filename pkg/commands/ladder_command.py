# -*- coding: utf-8 -*-
"""
`ladder`: the KB-versus-documents ablation. Generates one corpus per ladder
preset, trains a model on each, evaluates it on test and emits a single
comparison (text table, ladder.json and ladder.xlsx).
"""

import dataclasses
import json
import logging
import os
from collections import OrderedDict
from typing import Any, Dict, List

from checkpoint import checkpoint_fingerprint
from comparison_logic import comparison_table, ordering_violations, write_comparison_workbook
from datagen import LADDER_PRESETS, emit_corpus, generate_corpus, ladder_config
from evaluation import EvalReport
from experiment import ExperimentConfig
from model import HyperParams
from utils import ensure_dir
from commands.common import CHECKPOINT_FILE, evaluate_split, report_fingerprint, write_report
from commands.train_command import run_training

logger = logging.getLogger(__name__)

# hits@1 should not increase from one tier to the next
LADDER_ORDER = (
    ("kb",),
    ("one_template",),
    ("all_templates",),
    ("one_template_coref", "one_template_conj"),
    ("all_templates_conj_coref",),
)
DOC_REPRESENTATION = "window_center_title"
LADDER_TABLE = "ladder.txt"
LADDER_JSON = "ladder.json"
LADDER_XLSX = "ladder.xlsx"


def register(subparsers):
    parser = subparsers.add_parser('ladder', help="Run the KB-vs-documents ablation ladder")
    parser.add_argument('--out', dest='output_dir', help="Ladder directory (default: [Experiment] output_dir)")
    parser.add_argument('--presets', nargs='+', choices=list(LADDER_PRESETS), default=list(LADDER_PRESETS),
                        help="Subset of ladder rows to run")
    parser.add_argument('--epochs', type=int, help="Override [Training] epochs")
    parser.add_argument('--tolerance', type=float, default=2.0,
                        help="hits@1 points a lower row may exceed a higher one by")
    parser.set_defaults(func=run)


def run_preset(preset: str, settings: Dict[str, Any], hyper: HyperParams, root: str) -> EvalReport:
    """Generates, trains and tests one ladder row under root/<preset>/."""
    label, gen_config, source = ladder_config(settings['generation'], preset)
    preset_dir = ensure_dir(os.path.join(root, preset))
    corpus_dir = os.path.join(preset_dir, "corpus")
    logger.info(f"Ladder row '{label}': generating corpus into {corpus_dir}")
    emit_corpus(generate_corpus(gen_config), corpus_dir)

    base: ExperimentConfig = settings['experiment']
    config = dataclasses.replace(
        base, source=source, representation="kb_triple" if source == "kb" else DOC_REPRESENTATION,
        corpus_dir=corpus_dir, output_dir=os.path.join(preset_dir, "model")).validate()
    experiment, result, _ = run_training(config, hyper, settings.get('progress', False))
    ckpt_fp = checkpoint_fingerprint(os.path.join(config.output_dir, CHECKPOINT_FILE))
    encoded_test = experiment.encoded['test']
    if not encoded_test:
        raise ValueError(f"Ladder row '{label}' has an empty test split.")
    report, _ = evaluate_split(experiment, result.params, 'test', report_fingerprint(experiment, ckpt_fp))
    write_report(report, config.output_dir, 'report_test', title=f"test ({label})")
    return report


def run(args, settings: Dict[str, Any]) -> int:
    hyper: HyperParams = settings['hyper']
    if args.epochs is not None:
        hyper = dataclasses.replace(hyper, epochs=args.epochs).validate()
    root = ensure_dir(args.output_dir or settings['experiment'].output_dir)

    reports: "OrderedDict[str, EvalReport]" = OrderedDict()
    by_preset: Dict[str, EvalReport] = {}
    for preset in args.presets:
        report = run_preset(preset, settings, hyper, root)
        by_preset[preset] = report
        reports[LADDER_PRESETS[preset][0]] = report
        logger.info(f"Ladder row '{preset}': test hits@1 {report.overall_hits1:.2f}")

    table = comparison_table(reports, title="Synthetic document ladder (test hits@1)")
    with open(os.path.join(root, LADDER_TABLE), 'w', encoding='utf-8') as handle:
        handle.write(table)
    with open(os.path.join(root, LADDER_JSON), 'w', encoding='utf-8') as handle:
        json.dump({preset: report.to_json() for preset, report in by_preset.items()}, handle, indent=2)
        handle.write("\n")
    write_comparison_workbook(os.path.join(root, LADDER_XLSX), reports)
    print(table, end="")

    violations: List[str] = ordering_violations(by_preset, LADDER_ORDER, args.tolerance)
    for message in violations:
        logger.warning(f"Ladder ordering: {message}")
    return 0
