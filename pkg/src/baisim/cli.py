"""Command line entry points.

codes     print or save the stimulus codebook
simulate  synthesize one trial of EEG and save it
train     run the simulated training session and save the model
decode    replay a saved segment through a saved model
dataset   build a fine-tuning dataset from a conversation corpus
eval      summarize ratings and run the one-way ANOVA
serve     run the session endpoint (tcp or websocket)

Every documented failure exits with status 2 and the error on stderr.
"""

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import classifier, datasetgen, decoder, eegsim, evalstats, harness
from . import server as engine_server
from . import stimulus
from .errors import EngineError


def _load_engine_config(args):
    if getattr(args, "config", None):
        return harness.load_config(args.config)
    return harness.EngineConfig()


def _cmd_codes(args):
    config = _load_engine_config(args)
    bundle = harness.build_engine(config)
    text = stimulus.export_codebook(bundle.codebook)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args):
    config = _load_engine_config(args)
    bundle = harness.build_engine(config)
    segment = harness.simulate_trial(
        bundle, args.attended, args.sigma, args.seed, noise_kind=args.noise
    )
    eegsim.save_segment(segment, args.out)
    clean = harness.simulate_trial(bundle, args.attended, 0.0, args.seed)
    snr = eegsim.snr_estimate(segment, clean)
    snr_text = "noiseless" if snr == float("inf") else f"{snr:.2f} dB"
    print(f"wrote {args.out}: {segment.samples.shape[0]} channels x "
          f"{segment.n_samples} samples, snr {snr_text}")
    return 0


def _cmd_train(args):
    config = _load_engine_config(args)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if args.kind == "cnn":
        hyper = dict(classifier.DEFAULT_CNN_HYPER)
    else:
        hyper = dict(classifier.DEFAULT_LINEAR_HYPER)
    hyper["seed"] = harness.derive_seed(config.master_seed, "classifier-init")
    if args.epochs is not None:
        hyper["epochs"] = args.epochs
    if args.train_frames is not None:
        frames_per_trial = len(harness.build_engine(config).timeline.frames)
        trials = max(1, -(-args.train_frames // frames_per_trial))
        config = replace(config, training_trials=trials)
    model, report = harness.run_training_session(config, hyper)
    classifier.save_model(model, args.out)
    for key, value in report.items():
        print(f"{key}={value}")
    print(f"saved {args.out}")
    return 0


def _cmd_decode(args):
    config = _load_engine_config(args)
    bundle = harness.build_engine(config)
    model = classifier.load_model(args.model)
    segment = eegsim.load_segment(args.eeg)
    records = []
    outcome = decoder.run_offline(
        segment, bundle.timeline, model, bundle.codebook, bundle.decoder_config,
        on_push=records.append,
    )
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
    print(f"{outcome.kind} stimulus={outcome.stimulus} "
          f"frames={outcome.frames_to_decision} "
          f"selection_time_ms={outcome.selection_time_ms}")
    return 0


def _cmd_dataset(args):
    with open(args.corpus, encoding="utf-8") as fh:
        conversations = datasetgen.parse_corpus(fh.read())
    rng = np.random.default_rng(args.seed)
    samples = datasetgen.build_dataset(conversations, variant=args.variant, rng=rng)
    if args.overrides:
        overrides = datasetgen.read_overrides(args.overrides)
        samples = datasetgen.apply_overrides(samples, overrides)
    datasetgen.write_dataset(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_eval(args):
    with open(args.ratings, encoding="utf-8") as fh:
        records = evalstats.parse_ratings(fh.read())
    summaries = evalstats.summarize(records)
    sys.stdout.write(evalstats.format_summaries(summaries))
    tags = [s.model_tag for s in summaries]
    if len(tags) >= 2:
        groups = {tag: [] for tag in tags}
        for rec in records:
            groups[rec.model_tag].append(evalstats.adjusted_rating(rec))
        f_stat, p_value = evalstats.one_way_anova(list(groups.values()))
        print(f"anova_f={f_stat:.4f}")
        print(f"anova_p={p_value:.6g}")
    return 0


def _cmd_serve(args):
    config = _load_engine_config(args)
    model = classifier.load_model(args.model) if args.model else None
    if args.mode == "tcp":
        print(f"serving tcp on {args.host}:{args.port}", flush=True)
        engine_server.run_tcp_server(
            config, args.host, args.port, model, args.transcript_dir
        )
    else:
        import uvicorn

        app = engine_server.create_app(config, model, args.transcript_dir)
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="baisim")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("codes", help="print or save the stimulus codebook")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_codes)

    p = sub.add_parser("simulate", help="synthesize one trial of EEG")
    p.add_argument("--attended", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--noise", choices=["white", "pink"], default="white")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="run the simulated training session")
    p.add_argument("--kind", choices=["cnn", "linear"], default="cnn")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--train-frames", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decode", help="replay a saved segment through a model")
    p.add_argument("--model", required=True)
    p.add_argument("--eeg", required=True)
    p.add_argument("--log")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("dataset", help="build a fine-tuning dataset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--variant", choices=["xl", "cr"], default="xl")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--overrides")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("eval", help="rating summaries and ANOVA")
    p.add_argument("--ratings", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("serve", help="run the session endpoint")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8750)
    p.add_argument("--mode", choices=["tcp", "ws"], default="tcp")
    p.add_argument("--model")
    p.add_argument("--transcript-dir")
    p.add_argument("--config")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
