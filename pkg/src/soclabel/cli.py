"""Command-line front door: offline selection on prediction logs, cluster
inspection, simulation runs, and invariant verification.

Exit codes: 0 success, 1 verification failure, 2 usage/config error,
3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import labels as lb
from .clustering import kmedoids, pick_candidates
from .errors import ConfigError, SchemaError
from .kselect import KPolicy, select_k
from .sim import (
    config_from_dict,
    entropy_vs_k,
    final_score,
    generate_dataset,
    run,
    write_metrics_csv,
)
from .transitions import PredictionBank, TransitionLedger
from .verify import run_suite

LOG_SCHEMA = "soc-log-v1"

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_USAGE = 2
EXIT_DATA = 3


def _read_log(path: str):
    """Parse an NDJSON prediction log into (records, n_classes)."""
    records = []
    n_classes = None
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if rec.get("schema") != LOG_SCHEMA:
                raise SchemaError(f"line {lineno}: expected schema {LOG_SCHEMA!r}")
            try:
                sample_id = str(rec["id"])
                step = int(rec["step"])
                probs = np.asarray(rec["probs"], dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"line {lineno}: bad record fields ({exc})") from exc
            if n_classes is None:
                n_classes = probs.size
            elif probs.size != n_classes:
                raise SchemaError(
                    f"line {lineno}: K mismatch ({probs.size} != {n_classes})"
                )
            if (sample_id, step) in seen:
                raise SchemaError(f"line {lineno}: duplicate (id, step)")
            seen.add((sample_id, step))
            records.append((step, sample_id, lb.ProbVector(probs / probs.sum())))
    if not records:
        raise SchemaError("log contains no records")
    return records, n_classes


def _replay(records, n_classes: int, window: int):
    """Feed the log through the transition tracker in step order."""
    ledger = TransitionLedger(n_classes, window)
    bank = PredictionBank()
    steps = sorted(set(step for step, _, _ in records))
    by_step = {s: [] for s in steps}
    for step, sample_id, p in records:
        by_step[step].append((sample_id, p))
    for step in steps:
        ledger.observe_batch(bank, [(sid, p.argmax()) for sid, p in by_step[step]])
    if len(steps) < 2:
        print("warning: single-step log, similarity is cold (all zero)", file=sys.stderr)
    return ledger, by_step[steps[-1]]


def _policy_from_args(args, n_classes: int) -> KPolicy:
    if args.policy == "linear":
        return KPolicy.linear(args.alpha, n_classes)
    if args.policy == "exp":
        return KPolicy.exponential(args.beta, n_classes)
    return KPolicy.fixed(args.k, n_classes)


def _default_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("SOC_SEED", "0"))


def cmd_select(args) -> int:
    records, n_classes = _read_log(args.log)
    ledger, final_step = _replay(records, n_classes, args.nb)
    policy = _policy_from_args(args, n_classes)
    seed = _default_seed(args)
    sim = ledger.similarity_matrix()
    cache = {}
    lines = []
    for sample_id, p in final_step:
        k = select_k(policy, p.confidence())
        if k not in cache:
            cache[k] = kmedoids(sim.values, k, seed=seed,
                                ledger_version=sim.ledger_version)
        candidates = pick_candidates(cache[k], p.argmax())
        g = lb.build_indicator(candidates, n_classes)
        selected = lb.select_label(p, g)
        lines.append(json.dumps({
            "id": sample_id,
            "k": k,
            "candidate_classes": sorted(candidates.classes),
            "p_tilde": selected.probs.probs.tolist(),
            "entropy_before": lb.entropy(p),
            "entropy_after": lb.entropy(selected.probs),
        }, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_cluster(args) -> int:
    records, n_classes = _read_log(args.log)
    ledger, final_step = _replay(records, n_classes, args.nb)
    sim = ledger.similarity_matrix()
    if args.k is not None:
        k = args.k
    else:
        policy = _policy_from_args(args, n_classes)
        confs = [p.confidence() for _, p in final_step]
        k = select_k(policy, float(np.mean(confs)))
    clusters = kmedoids(sim.values, k, seed=_default_seed(args),
                        ledger_version=sim.ledger_version)
    print(clusters.to_json())
    return EXIT_OK


def cmd_sim(args) -> int:
    raw = {}
    if args.config:
        with open(args.config) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
    sim_raw = raw.setdefault("sim", {})
    if args.baseline:
        sim_raw["baseline"] = args.baseline
    if args.tau is not None:
        sim_raw["tau"] = args.tau
    if args.policy:
        policy = {"policy": args.policy}
        if args.policy == "linear":
            policy["alpha"] = args.alpha
        elif args.policy == "exp":
            policy["beta"] = args.beta
        else:
            policy["k"] = args.k
        sim_raw["k_policy"] = policy
    if args.seed is not None:
        sim_raw["seed"] = args.seed
    if args.nb is not None:
        sim_raw["window"] = args.nb
    if args.iters is not None:
        sim_raw["iters"] = args.iters

    config, spec = config_from_dict(raw)
    dataset = generate_dataset(spec)
    state = run(config, dataset)
    write_metrics_csv(state.history, args.out)
    if args.pairs_out:
        _write_obj1_entropy_pairs(state, config, dataset, args.pairs_out)
    last = state.history[-1]
    print(
        f"final top1={final_score(state.history):.4f} pl_acc={last.pl_acc:.4f} "
        f"mean_entropy_sel={last.mean_entropy_sel:.4f} k_mean={last.k_mean:.2f} "
        f"(metrics -> {args.out})"
    )
    return EXIT_OK


def _write_obj1_entropy_pairs(state, config, dataset, path) -> None:
    """Per-sample (ground-truth mass retained, selected entropy) rows from
    the final model; the raw data behind density-plot comparisons."""
    from .losses import softmax
    from .sim import build_targets

    probs = softmax(state.model.logits(dataset.x_unlabeled))
    targets, _ = build_targets(probs, config, state.ledger)
    with open(path, "w") as fh:
        fh.write("zobj1,entropy\n")
        for p, t, y in zip(probs, targets, dataset.y_unlabeled):
            zobj1 = p[y] if t[y] > 0 else 0.0
            fh.write(f"{zobj1},{lb.entropy(t)}\n")


def cmd_verify(args) -> int:
    try:
        results = run_suite(args.suite, trials=args.trials, seed=_default_seed(args))
    except KeyError:
        print(f"unknown suite {args.suite!r}", file=sys.stderr)
        return EXIT_USAGE
    failed = False
    for res in results:
        status = "pass" if res.ok else "FAIL"
        print(f"{res.name}: {res.passed}/{res.total} {status}")
        failed |= not res.ok
    return EXIT_VERIFY_FAIL if failed else EXIT_OK


def cmd_entropy_sweep(args) -> int:
    raw = {}
    if args.config:
        with open(args.config) as fh:
            raw = json.load(fh)
    config, spec = config_from_dict(raw)
    dataset = generate_dataset(spec)
    state = run(config, dataset)
    ks = [int(k) for k in args.ks.split(",")]
    means = entropy_vs_k(state.model, dataset, state.ledger, ks,
                         seed=_default_seed(args))
    for k, m in zip(ks, means):
        print(f"k={k} mean_entropy_sel={m}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soclabel",
        description="Soft pseudo-label selection via class-transition clustering",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_policy_flags(p):
        p.add_argument("--policy", choices=["linear", "exp", "fixed"], default="linear")
        p.add_argument("--alpha", type=float, default=5.0)
        p.add_argument("--beta", type=float, default=0.5)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("select", help="replay a prediction log and select soft labels")
    p.add_argument("log")
    add_policy_flags(p)
    p.add_argument("--nb", type=int, default=512, help="transition window size")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("cluster", help="cluster the class space of a prediction log")
    p.add_argument("log")
    add_policy_flags(p)
    p.add_argument("--nb", type=int, default=512)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sim", help="run the training simulator")
    p.add_argument("--config", default=None, help="JSON config file")
    add_policy_flags(p)
    p.add_argument("--baseline", choices=["soc", "fixmatch", "soft"], default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--nb", type=int, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--out", default="metrics.csv")
    p.add_argument("--pairs-out", default=None)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("entropy-sweep", help="mean selected entropy vs fixed k")
    p.add_argument("--config", default=None)
    p.add_argument("--ks", default="2,4,8,16,32")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_entropy_sweep)

    p = sub.add_parser("verify", help="run randomized invariant suites")
    p.add_argument("suite", help="lemma1|theorem1|krange|cluster|ctt|losses|all")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
