# -*- coding: utf-8 -*-
import configparser
import json
import os

import pytest

import app
from checkpoint import checkpoint_fingerprint, load_checkpoint, save_checkpoint
from datagen import KB_FILE, MANIFEST_FILE
from model import EpochRecord
from utils import read_tsv

SMALL_SETTINGS = [
    'generation.n_movies=20', 'generation.n_actors=30', 'generation.n_directors=8', 'generation.n_writers=10',
    'generation.n_tags=15', 'generation.n_genres=4', 'generation.n_languages=3',
    'generation.templates_per_relation=1', 'generation.conjunction_rate=0', 'generation.coreference_rate=0',
    'generation.patterns_per_question=1', 'generation.seed=5',
    'model.d=8', 'model.hops=1', 'model.window=3', 'model.hash_threshold=inf', 'model.max_slots=2000',
    'training.lr=0.05', 'training.seed=4',
]


@pytest.fixture
def cli(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)

    def invoke(*argv, settings=()):
        options = ['--config', str(tmp_path / 'config.ini'), '--log-file', str(tmp_path / 'run.log')]
        for setting in list(SMALL_SETTINGS) + list(settings):
            options += ['--set', setting]
        return app.main(options + list(argv))
    return invoke


def test_usage_errors_exit_1(cli):
    assert cli('frobnicate') == app.EXIT_USAGE
    assert cli('eval') == app.EXIT_USAGE
    assert cli('train', '--baseline', 'lstm') == app.EXIT_USAGE


def test_help_exits_0(cli):
    assert cli('--help') == app.EXIT_OK


def test_bad_setting_exits_1(cli):
    assert cli('generate', settings=['model.window=4']) == app.EXIT_USAGE
    assert cli('generate', settings=['model.nope=1']) == app.EXIT_USAGE


def test_missing_corpus_exits_2(cli, tmp_path):
    assert cli('train', '--corpus', str(tmp_path / 'absent'), '--out', str(tmp_path / 'run')) == app.EXIT_DATA


def test_missing_checkpoint_exits_2(cli, tmp_path):
    assert cli('eval', str(tmp_path / 'absent.ckpt')) == app.EXIT_DATA


def test_malformed_corpus_exits_2(cli, tmp_path):
    corpus = tmp_path / 'corpus'
    assert cli('generate', '--out', str(corpus)) == app.EXIT_OK
    with open(corpus / KB_FILE, 'a', encoding='utf-8') as handle:
        handle.write("only two\tcolumns\n")
    assert cli('train', '--corpus', str(corpus), '--out', str(tmp_path / 'run')) == app.EXIT_DATA


def test_divergence_exits_3(cli, tmp_path):
    corpus = str(tmp_path / 'corpus')
    assert cli('generate', '--out', corpus) == app.EXIT_OK
    code = cli('train', '--corpus', corpus, '--out', str(tmp_path / 'run'), '--epochs', '3',
               settings=['training.lr=1e300', 'training.clip_norm=none', 'model.init_scale=1e10'])
    assert code == app.EXIT_NUMERICAL


def test_generate_writes_corpus(cli, tmp_path, capsys):
    corpus = tmp_path / 'corpus'
    assert cli('generate', '--out', str(corpus), '--seed', '11') == app.EXIT_OK
    with open(corpus / MANIFEST_FILE, encoding='utf-8') as handle:
        assert json.load(handle)['seed'] == 11
    out = capsys.readouterr().out
    assert "recommended hash threshold F = 100" in out


@pytest.mark.slow
def test_generate_train_eval_inspect(cli, tmp_path, capsys):
    corpus, run = str(tmp_path / 'corpus'), str(tmp_path / 'run')
    assert cli('generate', '--out', corpus) == app.EXIT_OK
    assert cli('train', '--corpus', corpus, '--out', run, '--epochs', '2') == app.EXIT_OK
    for name in ('model.ckpt', 'last.ckpt', 'train_log.jsonl', 'report_dev.json', 'config.ini'):
        assert os.path.exists(os.path.join(run, name)), name
    with open(os.path.join(run, 'train_log.jsonl'), encoding='utf-8') as handle:
        assert [json.loads(line)['epoch'] for line in handle] == [0, 1]

    checkpoint = os.path.join(run, 'model.ckpt')
    assert cli('eval', checkpoint, '--xlsx') == app.EXIT_OK
    for name in ('report_test.json', 'report_test.txt', 'rankings_test.jsonl', 'report_test.xlsx'):
        assert os.path.exists(os.path.join(run, name)), name

    movie = read_tsv(os.path.join(corpus, KB_FILE), 3)[0][0]
    capsys.readouterr()
    assert cli('inspect', checkpoint, f"who directed {movie}?", '--top-k', '3') == app.EXIT_OK
    out = capsys.readouterr().out
    assert "memory slots" in out and "hop 1" in out

    assert cli('train', '--out', run, '--resume', os.path.join(run, 'last.ckpt'), '--epochs', '1') == app.EXIT_OK
    with open(os.path.join(run, 'train_log.jsonl'), encoding='utf-8') as handle:
        assert [json.loads(line)['epoch'] for line in handle] == [0, 1, 2]


@pytest.mark.slow
def test_inspect_out_of_vocabulary_question_uses_fallback_slots(cli, tmp_path, capsys):
    corpus, run = str(tmp_path / 'corpus'), str(tmp_path / 'run')
    assert cli('generate', '--out', corpus) == app.EXIT_OK
    assert cli('train', '--corpus', corpus, '--out', run, '--epochs', '1') == app.EXIT_OK
    capsys.readouterr()
    assert cli('inspect', os.path.join(run, 'model.ckpt'), "zzqx vvrp") == app.EXIT_OK
    out = capsys.readouterr().out
    assert "memory slots N = " in out and "answers:" in out
    with open(tmp_path / 'run.log', encoding='utf-8') as handle:
        log = handle.read()
    assert "WARNING" in log and "No word of 'zzqx vvrp' is in the model's vocabulary" in log


@pytest.mark.slow
def test_train_snapshot_records_effective_settings(cli, tmp_path):
    corpus, run = str(tmp_path / 'corpus'), str(tmp_path / 'run')
    assert cli('generate', '--out', corpus) == app.EXIT_OK
    assert cli('train', '--corpus', corpus, '--out', run, '--epochs', '2', '--baseline', 'memnn') == app.EXIT_OK
    snapshot = configparser.ConfigParser(interpolation=None)
    snapshot.read(os.path.join(run, 'config.ini'), encoding='utf-8')
    assert snapshot['Training']['epochs'] == '2'
    assert snapshot['Experiment']['baseline'] == 'memnn'
    assert snapshot['Experiment']['corpus_dir'] == corpus
    assert snapshot['Experiment']['output_dir'] == run
    assert snapshot['Model']['hash_threshold'] == 'inf'


@pytest.mark.slow
def test_resume_keeps_better_model_from_before(cli, tmp_path):
    corpus, run = str(tmp_path / 'corpus'), str(tmp_path / 'run')
    assert cli('generate', '--out', corpus) == app.EXIT_OK
    assert cli('train', '--corpus', corpus, '--out', run, '--epochs', '1') == app.EXIT_OK

    # a stored dev score no resumed epoch can beat
    last_path, best_path = os.path.join(run, 'last.ckpt'), os.path.join(run, 'model.ckpt')
    last = load_checkpoint(last_path)
    history = [EpochRecord(**dict(r, dev_hits1=100.0, dev_mrr=1.0, dev_map=1.0)) for r in last.history]
    save_checkpoint(last_path, last.params, last.kind, last.experiment, last.vocab, last.index_arrays,
                    last.corpus_fingerprint, last.epochs_completed, history)
    best_before = checkpoint_fingerprint(best_path)

    assert cli('train', '--out', run, '--resume', last_path, '--epochs', '1') == app.EXIT_OK
    assert checkpoint_fingerprint(best_path) == best_before
    resumed = load_checkpoint(last_path)
    assert resumed.epochs_completed == 2 and len(resumed.history) == 2
    with open(os.path.join(run, 'report_dev.json'), encoding='utf-8') as handle:
        assert f"checkpoint:{best_before}" in json.load(handle)['fingerprint']
