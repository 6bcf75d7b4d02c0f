"""Command-line entry points.

    adaptmt-server  --bind <addr:port> --config-root <dir> --credentials <file>
    adaptmt-sim     --config <file> --document <tsv> --ol {on,off} --out <report>
    adaptmt-eval    <hypothesis_file> <reference_file> [--lowercase]
    adaptmt-init    --root <dir> [--seed N] ...
    pelog           report <file.xml> --segments <file>
"""

from __future__ import annotations

import argparse
import os
import signal
import sys
import threading

from .adaptation import AdaptiveSession, load_config
from .metrics import bleu, corpus_ter
from .pelog import compute_effort, format_effort_table, parse_log_file
from .server import CredentialStore, ModelRegistry, serve
from .simulator import (
    build_project,
    format_run_report,
    make_corpus,
    read_document,
    run_simulation,
)
from .textpipe import WordTokenizer


def server_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="adaptmt-server", description="Run the translation server.")
    parser.add_argument("--bind", default="127.0.0.1:8765", help="address:port to listen on")
    parser.add_argument(
        "--config-root",
        default=os.environ.get("ADAPTMT_CONFIG_ROOT"),
        help="directory of per-project .cfg files (default: $ADAPTMT_CONFIG_ROOT)",
    )
    parser.add_argument("--credentials", required=True, help="credential store JSON file")
    args = parser.parse_args(argv)
    if not args.config_root:
        parser.error("--config-root or ADAPTMT_CONFIG_ROOT is required")

    registry = ModelRegistry(args.config_root)
    credentials = CredentialStore.load(args.credentials)
    handle = serve(registry, args.bind, credentials)
    print(f"serving {registry.project_ids()} on {handle.url}", flush=True)

    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    stop.wait()
    print("shutting down, flushing checkpoints", flush=True)
    handle.shutdown()
    return 0


def sim_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adaptmt-sim", description="Replay a document in simulated post-editing mode."
    )
    parser.add_argument("--config", required=True, help="project config file")
    parser.add_argument("--document", required=True, help="TSV document: source<TAB>reference")
    parser.add_argument("--ol", required=True, choices=("on", "off"), help="online learning on/off")
    parser.add_argument("--out", required=True, help="report output path")
    args = parser.parse_args(argv)

    config = load_config(args.config)
    session = AdaptiveSession.from_config(config)
    document = read_document(args.document)
    run = run_simulation(session, document, ol_enabled=(args.ol == "on"))
    report = format_run_report(run)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report)
    print(report.rstrip("\n").splitlines()[-1])
    return 0


def eval_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adaptmt-eval", description="Score a hypothesis file against a reference file."
    )
    parser.add_argument("hypotheses", help="hypothesis file, one segment per line")
    parser.add_argument("references", help="reference file, one segment per line")
    parser.add_argument("--lowercase", action="store_true", help="lowercase before scoring")
    args = parser.parse_args(argv)

    tokenizer = WordTokenizer()

    def read_lines(path):
        with open(path, encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh]

    hyp_lines = read_lines(args.hypotheses)
    ref_lines = read_lines(args.references)
    if len(hyp_lines) != len(ref_lines):
        print(
            f"error: segment count mismatch ({len(hyp_lines)} vs {len(ref_lines)})",
            file=sys.stderr,
        )
        return 2
    if args.lowercase:
        hyp_lines = [s.lower() for s in hyp_lines]
        ref_lines = [s.lower() for s in ref_lines]
    hyp_tokens = [tokenizer.tokenize(s) for s in hyp_lines]
    ref_tokens = [tokenizer.tokenize(s) for s in ref_lines]
    try:
        score_bleu = bleu(hyp_tokens, ref_tokens)
        score_ter = corpus_ter(hyp_tokens, ref_tokens)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"BLEU={score_bleu:.1f} TER={score_ter:.3f} segs={len(hyp_tokens)}")
    return 0


def init_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="adaptmt-init",
        description="Create a demo project: synthetic corpus, pretrained model, config.",
    )
    parser.add_argument("--root", required=True, help="project directory to create")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--project-id", default="demo")
    parser.add_argument("--train-segments", type=int, default=300)
    parser.add_argument("--test-segments", type=int, default=100)
    parser.add_argument("--credentials-user", default=None, help="also write credentials.json for USER")
    parser.add_argument("--credentials-password", default=None)
    args = parser.parse_args(argv)

    corpus = make_corpus(seed=args.seed, n_train=args.train_segments, n_test=args.test_segments)
    config = build_project(args.root, corpus=corpus, seed=args.seed, project_id=args.project_id)
    print(f"project {config.project_id!r} ready under {args.root}")
    print(f"  checkpoint: {config.checkpoint_path}")
    print(f"  config:     {os.path.join(args.root, config.project_id + '.cfg')}")
    if args.credentials_user:
        if not args.credentials_password:
            parser.error("--credentials-password is required with --credentials-user")
        store = CredentialStore()
        store.add_user(args.credentials_user, args.credentials_password, ["*"])
        cred_path = os.path.join(args.root, "credentials.json")
        store.save(cred_path)
        print(f"  credentials: {cred_path}")
    return 0


def pelog_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pelog", description="Effort-log tooling.")
    sub = parser.add_subparsers(dest="command", required=True)
    report = sub.add_parser("report", help="aggregate an XML log into an effort table")
    report.add_argument("logfile", help="pelog XML file")
    report.add_argument(
        "--segments",
        required=True,
        help="TSV file: segment_id<TAB>source<TAB>final_target per line",
    )
    args = parser.parse_args(argv)

    events = parse_log_file(args.logfile)
    segments: dict[str, tuple[str, str]] = {}
    with open(args.segments, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                print(
                    f"error: {args.segments}:{lineno}: expected id<TAB>source<TAB>target",
                    file=sys.stderr,
                )
                return 2
            segments[parts[0]] = (parts[1], parts[2])
    table = format_effort_table(compute_effort(events, segments))
    print(table)
    return 0
