"""Command-line entry point (``oranslice``).

Log verbosity comes from ``ORANSLICE_LOG`` (DEBUG, INFO, WARNING, ...).
``--scenario`` accepts a JSON file or one of the built-ins ``desk`` and
``paper`` (4 BSs, 40 UEs).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from ..drl.ppo import PPOConfig
from ..e2lite.codec import DEFAULT_PORT
from ..exceptions import CatalogError, ConfigurationError, ProtocolError
from .config import ScenarioConfig, desk_scenario
from .experiment import run_experiment
from .reporting import compare_policies, report
from .training import TrainingOptions, load_ppo_file, train_bandit, train_offline

log = logging.getLogger("oranslice")

BUILTIN_SCENARIOS = {
    "desk": lambda: desk_scenario(),
    "paper": lambda: desk_scenario(paper_scale=True),
}


def load_scenario(name):
    if name in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name]()
    return ScenarioConfig.load(name)


def parse_seeds(text):
    """``'1-10'`` or ``'1,2,5'`` (or a mix) -> list of ints."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        seeds.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def parse_address(text):
    host, _, port = text.rpartition(":")
    return (host or "127.0.0.1", int(port))


def _add_deterministic(p):
    p.add_argument("--deterministic", dest="deterministic", action="store_true", default=True,
                   help="single-threaded, in-process RIC link (default)")
    p.add_argument("--threaded", dest="deterministic", action="store_false",
                   help="RIC over TCP with threaded xApp workers")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="oranslice", description="Sliced RAN simulator with a near-RT RIC closed control loop.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario in one control mode")
    p.add_argument("--scenario", required=True)
    p.add_argument("--mode", default=None, help="static:rr|static:wf|static:pf|drl:<catalog dir>")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--duration-ms", type=int, default=None)
    p.add_argument("--ric", type=parse_address, default=None, help="external RIC host:port (drl mode)")
    _add_deterministic(p)

    p = sub.add_parser("train", help="offline PPO training; writes a model catalog")
    p.add_argument("--scenario", required=True, help="scenario file, built-in name, or 'bandit'")
    p.add_argument("--ppo", default=None, help="JSON with PPO hyperparameters (+ optional 'training')")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--episode-ms", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="paired-seed comparison of control modes")
    p.add_argument("--scenario", required=True)
    p.add_argument("--modes", required=True, help="comma-separated modes")
    p.add_argument("--seeds", type=parse_seeds, default=[1])
    p.add_argument("--out", required=True)
    p.add_argument("--duration-ms", type=int, default=None)
    _add_deterministic(p)

    p = sub.add_parser("report", help="emit CDF / table CSVs from a run or compare directory")
    p.add_argument("--in", dest="in_dir", required=True)

    p = sub.add_parser("ric", help="serve a near-RT RIC over TCP")
    p.add_argument("--catalog", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--status", default=None, help="periodic status JSON path")

    p = sub.add_parser("scenario", help="write a built-in scenario as JSON")
    p.add_argument("name", choices=sorted(BUILTIN_SCENARIOS))
    p.add_argument("--out", required=True)
    return ap


def cmd_run(args):
    cfg = load_scenario(args.scenario)
    if args.duration_ms:
        cfg = cfg.replace(duration_ms=args.duration_ms)
    s = run_experiment(cfg, args.out, mode=args.mode, seed=args.seed,
                       deterministic=args.deterministic, ric_address=args.ric)
    print(f"{s.mode} seed={s.seed}: {s.n_windows} windows, {s.controls} controls -> {args.out}")


def cmd_train(args):
    ppo, opts = (load_ppo_file(args.ppo) if args.ppo else (PPOConfig(), TrainingOptions()))
    if args.episode_ms:
        opts.episode_ms = args.episode_ms
    if args.seed is not None:
        opts.seed = args.seed
    episodes = args.episodes if args.episodes is not None else opts.episodes
    if args.scenario == "bandit":
        curve, _ = train_bandit(ppo, episodes, seed=opts.seed, out_dir=args.out)
        print(f"bandit: mean reward {curve[0][1]:.3f} -> {curve[-1][1]:.3f}")
        return
    res = train_offline(load_scenario(args.scenario), ppo, episodes, args.out, opts)
    state = "halted (diverged)" if res.halted else "done"
    print(f"training {state} after {res.episodes_run} episodes; deployed: "
          + ", ".join(f"{st.name}={e}" for st, e in sorted(res.deployed.items())))


def cmd_compare(args):
    cfg = load_scenario(args.scenario)
    if args.duration_ms:
        cfg = cfg.replace(duration_ms=args.duration_ms)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    doc = compare_policies(cfg, modes, args.seeds, args.out, deterministic=args.deterministic)
    print(json.dumps({k: doc[k] for k in ("modes", "deltas") if k in doc}, indent=1))


def cmd_report(args):
    doc = report(args.in_dir)
    for mode, stats in doc["modes"].items():
        for st, s in stats.items():
            se = "-" if s["se_median"] is None else f"{s['se_median']:.4f}"
            print(f"{mode:28s} {st:6s} se_median={se} buffer_mean={s['buffer_mean']:.1f}")


def cmd_ric(args):
    from ..drl.catalog import ModelCatalog
    from ..ric.ric import NearRtRic
    from ..ric.server import RicServer
    from ..ric.xapp import XAppDescriptor

    catalog = ModelCatalog(args.catalog)
    ric = NearRtRic(catalog, inline=False)
    for st, entry_id in sorted(catalog.deployed().items()):
        ric.register_xapp(XAppDescriptor(f"{st.name.lower()}-xapp", st, entry_id))
    server = RicServer(ric, args.host, args.port, status_path=args.status)
    print(f"RIC listening on {args.host}:{server.port}", flush=True)
    server.serve_forever()


def cmd_scenario(args):
    BUILTIN_SCENARIOS[args.name]().save(args.out)
    print(args.out)


COMMANDS = {
    "run": cmd_run, "train": cmd_train, "compare": cmd_compare, "report": cmd_report,
    "ric": cmd_ric, "scenario": cmd_scenario,
}


def main(argv=None):
    level = os.environ.get("ORANSLICE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ConfigurationError, CatalogError, ProtocolError, ConnectionError,
            FileNotFoundError, TimeoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
