"""Command-line entry point.

Verbs: pretrain, toddler, addl, popularity, synth, eval. Parameters come
from an optional JSON config file (--config) and are overridable by flags.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ConfigError, DataError, NumericalError
from .experiments import run_experiment

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file with experiment parameters")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--dataset", help="input CSV path")
    p.add_argument("--schema", choices=["ulb", "generic"], help="CSV schema")
    p.add_argument("--label-column", dest="label_column", help="label column (generic schema)")
    p.add_argument("--normalize", action="store_const", const=True,
                   help="z-score features before the experiment")
    p.add_argument("--subsample-ratio", dest="subsample_ratio", type=int,
                   help="normals-per-anomaly subsampling ratio (0 = off)")
    p.add_argument("--sparsity", type=int, help="OMP sparsity s")
    p.add_argument("--residual-tol", dest="residual_tol", type=float,
                   help="OMP residual early-exit norm")
    p.add_argument("--dl-iterations", dest="dl_iterations", type=int,
                   help="AK-SVD iterations per training")
    p.add_argument("--stage-atoms", dest="stage_atoms", type=int,
                   help="dictionary atoms per training stage")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dictad",
                                 description="dictionary-learning anomaly detection experiments")
    sub = ap.add_subparsers(dest="method", required=True)

    p = sub.add_parser("pretrain", help="LC-KSVD offline pretraining")
    _add_common(p)
    p.add_argument("--alpha", type=float, help="classifier weight")
    p.add_argument("--beta", type=float, help="label-consistency weight")
    p.add_argument("--atoms-per-class", dest="atoms_per_class", type=int)

    p = sub.add_parser("toddler", help="semi-supervised online run (pretrain + stream)")
    _add_common(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--atoms-per-class", dest="atoms_per_class", type=int)
    p.add_argument("--phi", type=float, help="forgetting factor (default 0.95)")
    p.add_argument("--lambda-policy", dest="lambda_policy",
                   choices=["gram-norm", "model-norms", "fixed"])
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--pretrain-fraction", dest="pretrain_fraction", type=float)

    p = sub.add_parser("addl", help="error-threshold unsupervised filter")
    _add_common(p)
    p.add_argument("--global-iterations", dest="global_iterations", type=int)

    p = sub.add_parser("popularity", help="atom-popularity unsupervised filter")
    _add_common(p)
    p.add_argument("--n-anomalies", dest="n_anomalies", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--literal-set-builder", dest="literal_set_builder",
                   action="store_const", const=True)

    p = sub.add_parser("synth", help="generate a planted-anomaly dataset CSV")
    _add_common(p)
    p.add_argument("--n-normal", dest="n_normal", type=int)
    p.add_argument("--n-anomaly", dest="n_anomaly", type=int)
    p.add_argument("--features", type=int, help="signal dimension m")
    p.add_argument("--normal-atoms", dest="normal_atoms", type=int)
    p.add_argument("--anomaly-atoms", dest="anomaly_atoms", type=int)
    p.add_argument("--s-gen", dest="s_gen", type=int)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)

    p = sub.add_parser("eval", help="confusion report for a predictions file")
    _add_common(p)
    p.add_argument("--predictions", help="file with one 0/1 estimate per line")

    return ap


_SYNTH_KEYS = {
    "n_normal": "n_normal", "n_anomaly": "n_anomaly", "features": "m",
    "normal_atoms": "normal_atoms", "anomaly_atoms": "anomaly_atoms",
    "s_gen": "s_gen", "noise_sigma": "noise_sigma",
}


def _collect_params(args: argparse.Namespace) -> dict:
    params: dict = {}
    if args.config:
        try:
            with open(args.config) as f:
                params.update(json.load(f))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {args.config} is not valid JSON: {e}") from None
    overrides = {k: v for k, v in vars(args).items()
                 if v is not None and k not in ("config", "out", "method")}
    if args.method == "synth":
        synth = dict(params.get("synth") or {})
        synth.setdefault("seed", overrides.get("seed", params.get("seed", 0)))
        for flag, field in _SYNTH_KEYS.items():
            overrides.pop(flag, None)
            if getattr(args, flag, None) is not None:
                synth[field] = getattr(args, flag)
        params["synth"] = synth
    params.update(overrides)
    return params


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = run_experiment(args.method, _collect_params(args), args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    metrics = json.dumps(result["metrics"], sort_keys=True)
    print(f"{args.method}: done in {result['wall_time_s']:.2f}s metrics={metrics}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
