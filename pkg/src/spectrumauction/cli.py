"""Command-line front end: run one auction, sweep experiments, generate and
validate instances. Exit codes: 0 success, 1 validation/input failure, 2
configuration error."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .distributions import BidDistribution
from .mechanisms import (
    Allocator,
    AuctionOutcome,
    ConfigurationError,
    MechanismConfig,
    Objective,
    run_framework,
)
from .model import instance_from_dict, instance_to_dict, validate_instance
from .sim import (
    DISTRIBUTIONS,
    MechanismSetting,
    ScenarioConfig,
    generate_scenario,
    run_experiment,
)

log = logging.getLogger("spectrumauction")

_MECHANISMS = {a.value: a for a in Allocator}
_OBJECTIVES = {"social": Objective.SOCIAL_EFFICIENCY, "revenue": Objective.REVENUE}


def _setup_logging() -> None:
    level_name = os.environ.get("SPECTRUM_AUCTION_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.WARNING))


def _load_instance(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(
                f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
    return instance_from_dict(data)


def _distribution(name: Optional[str]) -> Optional[BidDistribution]:
    if name is None:
        return None
    try:
        return DISTRIBUTIONS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown distribution {name!r}; choose from {sorted(DISTRIBUTIONS)}"
        ) from None


def _outcome_json(outcome: AuctionOutcome, mechanism: str, objective: str) -> dict:
    sub = outcome.instance
    winners = []
    for i, j in enumerate(outcome.allocation.assignment):
        if j is None:
            continue
        rid = sub.requests[i].id
        winners.append(
            {
                "request": rid,
                "channel": sub.channels[j].id,
                "payment": outcome.payments.get(rid, 0.0),
                "virtual_payment": outcome.virtual_payments.get(rid, 0.0),
            }
        )
    out = {
        "mechanism": mechanism,
        "objective": objective,
        "objective_value": outcome.objective_value,
        "winners": winners,
    }
    if outcome.lottery is not None:
        out["lottery"] = [
            {
                "winners": [sub.requests[i].id for i in alloc.winners()],
                "probability": prob,
            }
            for alloc, prob in outcome.lottery
        ]
        out["lottery_payments"] = outcome.lottery_payments or {}
    return out


def _write_or_print(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectrum-auction",
        description="Truthful spectrum auctions with spatial and temporal reuse",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one auction from an instance JSON")
    run_p.add_argument("--instance", required=True)
    run_p.add_argument("--mechanism", required=True, choices=sorted(_MECHANISMS))
    run_p.add_argument("--objective", default="social", choices=sorted(_OBJECTIVES))
    run_p.add_argument("--distribution", default=None, choices=sorted(DISTRIBUTIONS))
    run_p.add_argument("--reserve", type=float, default=0.0)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--out", default=None)

    sweep_p = sub.add_parser("sweep", help="run an experiment sweep, write CSV")
    sweep_p.add_argument("--mechanism", default="dca,mdca,cate,mgca",
                         help="comma-separated mechanism ids")
    sweep_p.add_argument("--objective", default="social", choices=sorted(_OBJECTIVES))
    sweep_p.add_argument("--distribution", default="uniform",
                         help="comma-separated distribution names")
    sweep_p.add_argument("--reserve", type=float, default=0.0)
    sweep_p.add_argument("--seed", type=int, default=0)
    sweep_p.add_argument("--trials", type=int, default=30)
    sweep_p.add_argument("--n-requests", default="20,40,60,80",
                         help="comma-separated request counts")
    sweep_p.add_argument("--n-channels", type=int, default=3)
    sweep_p.add_argument("--skip-payments", action="store_true",
                         help="welfare-only sweep (revenue ratios reported as 0)")
    sweep_p.add_argument("--out", default=None)

    gen_p = sub.add_parser("generate", help="generate a scenario instance JSON")
    gen_p.add_argument("--n-requests", type=int, required=True)
    gen_p.add_argument("--n-channels", type=int, default=3)
    gen_p.add_argument("--distribution", default="uniform", choices=sorted(DISTRIBUTIONS))
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--trial", type=int, default=0)
    gen_p.add_argument("--out", default=None)

    val_p = sub.add_parser("validate", help="validate an instance JSON")
    val_p.add_argument("--instance", required=True)
    return parser


def run_cli(argv: Sequence[str]) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "validate":
            instance = _load_instance(args.instance)
            report = validate_instance(instance)
            if report:
                for line in report:
                    print(line)
                return 1
            print("instance is valid")
            return 0
        if args.command == "generate":
            config = ScenarioConfig(
                n_requests=args.n_requests,
                n_channels=args.n_channels,
                bid_distribution=args.distribution,
                rng_seed=args.seed,
            )
            instance = generate_scenario(config, args.trial)
            _write_or_print(
                json.dumps(instance_to_dict(instance), indent=2) + "\n", args.out
            )
            return 0
        if args.command == "run":
            instance = _load_instance(args.instance)
            report = validate_instance(instance)
            if report:
                for line in report:
                    print(line)
                return 1
            config = MechanismConfig(
                objective=_OBJECTIVES[args.objective],
                allocator=_MECHANISMS[args.mechanism],
                reserve=args.reserve,
                distribution=_distribution(args.distribution),
                rng_seed=args.seed,
            )
            outcome = run_framework(instance, config)
            _write_or_print(
                json.dumps(_outcome_json(outcome, args.mechanism, args.objective), indent=2)
                + "\n",
                args.out,
            )
            return 0
        if args.command == "sweep":
            objective = _OBJECTIVES[args.objective]
            mechanisms = []
            for name in args.mechanism.split(","):
                name = name.strip()
                if name not in _MECHANISMS:
                    raise ConfigurationError(f"unknown mechanism {name!r}")
                mechanisms.append(
                    MechanismSetting(
                        allocator=_MECHANISMS[name],
                        objective=objective,
                        reserve=args.reserve,
                        compute_payments=not args.skip_payments,
                    )
                )
            counts = [int(v) for v in str(args.n_requests).split(",")]
            distributions = [d.strip() for d in args.distribution.split(",")]
            for d in distributions:
                if d not in DISTRIBUTIONS:
                    raise ConfigurationError(f"unknown distribution {d!r}")
            sweep = []
            for dist_name in distributions:
                for n in counts:
                    sweep.append(
                        (
                            ScenarioConfig(
                                n_requests=n,
                                n_channels=args.n_channels,
                                bid_distribution=dist_name,
                                rng_seed=args.seed,
                                trials=args.trials,
                            ),
                            mechanisms,
                        )
                    )
            log.info("sweep over %d cells", len(sweep))
            table = run_experiment(sweep)
            _write_or_print(table.to_csv(), args.out)
            return 0
        raise ConfigurationError(f"unknown command {args.command!r}")
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
