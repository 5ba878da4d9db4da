"""Command-line front end.

Exit codes: 0 success, 1 a verified claim failed, 2 usage error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field

from . import bounds, verify
from .discrepancy import estimate_profile
from .env import (
    DENSE_MAX_SIDE,
    ColumnFunctionEnvironment,
    Environment,
    make_checkerboard,
    make_constant,
    make_iid_uniform,
    make_megacell,
    make_prefix_walk,
    make_row_gradient,
)
from .errors import FormatError, InvalidParameter, SmoothscaleError
from .pgm import load_pgm, save_pgm
from .rng import normalize_seed
from .sampling import SamplerConfig

EXIT_OK, EXIT_CLAIM, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
ENV_KINDS = ("checkerboard", "megacell", "prefix", "iid", "constant", "gradient", "pgm")


@dataclass
class RunConfig:
    subcommand: str
    env: str | None = None
    N: int = 1 << 12
    n: int = 32
    k: int = 6
    trials: int = 10_000
    seed: int = 0
    alpha: float | None = None
    log_n: int | None = None
    out: str | None = None
    format: str = "json"
    workers: int = 1
    claim: str | None = None
    windows: int | None = None
    tolerances: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls(**json.loads(text))


def make_env(text: str, N: int, k: int, seed: int) -> Environment:
    """Build an environment from ``kind[:param]``.

    megacell:<k> (default: the number of scales), prefix:<k> (default 16),
    constant:<v> (default 0.5), pgm:<path>.
    """
    kind, _, param = text.partition(":")
    if kind not in ENV_KINDS:
        raise InvalidParameter(f"unknown environment {kind!r}; choose from {', '.join(ENV_KINDS)}")
    if kind == "checkerboard":
        return make_checkerboard(N)
    if kind == "megacell":
        return make_megacell(N, int(param) if param else k)
    if kind == "prefix":
        return make_prefix_walk(N, int(param) if param else 16)
    if kind == "iid":
        return make_iid_uniform(N, seed)
    if kind == "constant":
        return make_constant(N, float(param) if param else 0.5)
    if kind == "gradient":
        return make_row_gradient(N)
    if not param:
        raise InvalidParameter("pgm environments need a path: pgm:<path>")
    return load_pgm(param)


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_generate(cfg: RunConfig) -> int:
    # validate before allocating anything large
    kind = cfg.env.partition(":")[0]
    dense_kinds = ("iid",)
    if kind in dense_kinds and cfg.N > DENSE_MAX_SIDE:
        raise InvalidParameter(f"dense environments are capped at N={DENSE_MAX_SIDE}")
    env = make_env(cfg.env, cfg.N, cfg.k, cfg.seed)
    out = cfg.out or "."
    os.makedirs(out, exist_ok=True)
    stem = os.path.join(out, kind)
    meta = {"environment": env.params(), "denominator": env.denominator, "files": []}
    if env.N <= DENSE_MAX_SIDE:
        save_pgm(env, stem + ".pgm")
        meta["files"].append(os.path.basename(stem + ".pgm"))
    elif not isinstance(env, ColumnFunctionEnvironment):
        raise InvalidParameter(
            f"N={env.N} is too large to render (cap {DENSE_MAX_SIDE}); use 'stats' on the procedural "
            "environment instead"
        )
    if isinstance(env, ColumnFunctionEnvironment):
        path = stem + "_columns.csv"
        with open(path, "w", newline="") as fh:
            fh.write("column,intensity\n")
            values = env.column_values()
            fh.writelines(f"{j},{v:.17g}\n" for j, v in enumerate(values))
        meta["files"].append(os.path.basename(path))
        if hasattr(env, "extreme_fraction"):
            meta["extreme_fraction"] = env.extreme_fraction()
    with open(stem + ".json", "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
    print(f"wrote {', '.join(meta['files'] + [os.path.basename(stem + '.json')])} to {out}")
    return EXIT_OK


def cmd_stats(cfg: RunConfig) -> int:
    sampler = SamplerConfig(cfg.n, cfg.k, cfg.seed)
    if not cfg.env.startswith("pgm:"):
        sampler.validate(cfg.N)
    env = make_env(cfg.env, cfg.N, cfg.k, cfg.seed)
    prof = estimate_profile(env, sampler, cfg.trials, cfg.workers)
    _write(cfg.out, prof.to_csv() if cfg.format == "csv" else prof.to_json() + "\n")
    return EXIT_OK


def cmd_bound(cfg: RunConfig) -> int:
    sol = bounds.solve_decay(cfg.alpha, cfg.log_n)
    text = json.dumps(sol.to_dict(), sort_keys=True, indent=2)
    _write(cfg.out, text + "\n")
    if cfg.out is not None:
        print(f"p = {sol.p:.15g}\nbound = {sol.bound:.15g}\nasymptotic bound = {sol.asymptotic_bound:.15g}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    claims = verify.CLAIMS if cfg.claim in (None, "all") else (cfg.claim,)
    if cfg.claim == "determinism":
        res = verify.claim_determinism(1, max(cfg.workers, 8), log=print)
        results = [res]
    else:
        envs = None
        if cfg.env is not None:
            name = cfg.env.partition(":")[0]
            envs = {name: make_env(cfg.env, cfg.N, cfg.k or 6, cfg.seed)}
        results = []
        for name in claims:
            overrides = {}
            if name in ("bessel", "domino"):
                if cfg.windows is not None:
                    overrides["windows"] = cfg.windows
                if cfg.k is not None:
                    overrides["k"] = cfg.k
            if name in ("ld2-bound", "scale-margins") and envs is None:
                envs = verify.builtin_environments()
            res = verify.run_claim(name, workers=cfg.workers, envs=envs, **overrides)
            print(res.line())
            results.append(res)
    if cfg.out is not None:
        _write(cfg.out, verify.suite_json(results) + "\n")
    failed = [r.claim for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} claims passed")
    return EXIT_CLAIM if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smoothscale", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, env_required=True):
        p.add_argument("--env", required=env_required, help="checkerboard|megacell[:k]|prefix[:k]|iid|constant[:v]|gradient|pgm:<path>")
        p.add_argument("--N", type=int, default=1 << 12, help="cells per side (power of two)")
        p.add_argument("--k", type=int, default=None, help="number of scales")
        p.add_argument("--seed", type=int, default=None, help="falls back to $SMOOTHSCALE_SEED, then 0")
        p.add_argument("--out", default=None)

    g = sub.add_parser("generate", help="write an environment as PGM/CSV plus metadata JSON")
    common(g)

    s = sub.add_parser("stats", help="Monte-Carlo scale profile")
    common(s)
    s.add_argument("--n", type=int, default=32)
    s.add_argument("--trials", type=int, default=10_000)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    v = sub.add_parser("verify", help="run claim checks and print a pass/fail table")
    common(v, env_required=False)
    v.add_argument("--claim", default="all", help=f"one of: all, determinism, {', '.join(verify.CLAIMS)}")
    v.add_argument("--windows", type=int, default=None)
    v.add_argument("--workers", type=int, default=os.cpu_count() or 1)

    b = sub.add_parser("bound", help="solve the decay equation")
    b.add_argument("--alpha", type=float, required=True)
    group = b.add_mutually_exclusive_group(required=True)
    group.add_argument("--log-n", type=int, dest="log_n")
    group.add_argument("--n", type=int, help="image side; log n is derived")
    b.add_argument("--out", default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = int(os.environ.get("SMOOTHSCALE_SEED", "0"))
    cfg = RunConfig(subcommand=args.subcommand, seed=normalize_seed(seed), out=args.out)
    for name in ("env", "N", "n", "trials", "format", "workers", "claim", "windows", "alpha"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    k = getattr(args, "k", None)
    if k is not None:
        cfg.k = k
    elif args.subcommand == "verify":
        cfg.k = None
    if args.subcommand == "bound":
        if args.log_n is not None:
            cfg.log_n = args.log_n
        else:
            if args.n < 2 or args.n & (args.n - 1):
                raise InvalidParameter(f"n must be a power of two, got {args.n}")
            cfg.log_n = args.n.bit_length() - 1
    if cfg.workers < 1:
        raise InvalidParameter("--workers must be at least 1")
    return cfg


COMMANDS = {"generate": cmd_generate, "stats": cmd_stats, "verify": cmd_verify, "bound": cmd_bound}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.subcommand](cfg)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidParameter, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SmoothscaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CLAIM


if __name__ == "__main__":
    sys.exit(main())
