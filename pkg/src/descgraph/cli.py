"""Command-line interface.

Every subcommand prints a JSON report (sorted keys) on standard output.
Exit codes: 0 success, 1 a check returned a negative verdict, 2 unreadable or
malformed input, 3 precondition error, 4 internal invariant violation.
Relative paths are resolved against ``$DESCGRAPH_WORKDIR`` when it is set.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import sys
from itertools import combinations
from pathlib import Path

from . import amalgam, gamma_checks, limit
from .errors import InvariantViolation, MalformedAddress, MalformedPrefix, NotFound, PreconditionError
from .export import presentation_dot
from .presentation import (Presentation, Ref, canonical_form, common_predecessors, max_multiplicity,
                           reduce, require_valid, tree, validate)
from .tree_core import parse_address

WORKDIR_ENV = "DESCGRAPH_WORKDIR"
EXIT_OK, EXIT_NEGATIVE, EXIT_PARSE, EXIT_PRECONDITION, EXIT_INVARIANT = 0, 1, 2, 3, 4


class InputError(Exception):
    """Unreadable or malformed input."""


def resolve_path(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(WORKDIR_ENV)
    return p if p.is_absolute() or not base else Path(base) / p


def read_json(path: str):
    try:
        return json.loads(resolve_path(path).read_text())
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}") from e


def write_text(path: str, text: str) -> None:
    target = resolve_path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text)


def load_presentation(path: str, check: bool = True) -> Presentation:
    try:
        p = Presentation.from_dict(read_json(path))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, PreconditionError):
            raise InputError(str(e)) from e
        raise InputError(f"{path} is not a presentation: {e}") from e
    if check:
        require_valid(p, path)
    return p


def refs(values) -> list[Ref]:
    return [Ref.parse(v) for v in values or []]


def addresses(values) -> list[str]:
    return [parse_address(v) for v in values or []]


def emit(report: dict, code: int = EXIT_OK) -> int:
    print(json.dumps(report, sort_keys=True, indent=2, default=str))
    return code


def maybe_dot(args, p: Presentation) -> None:
    if getattr(args, "dot", None):
        write_text(args.dot, presentation_dot(p))


def maybe_out(args, p: Presentation) -> None:
    if getattr(args, "out", None):
        write_text(args.out, p.to_json() + "\n")


# ---------------------------------------------------------------- presentation commands

def cmd_validate(args) -> int:
    p = load_presentation(args.file, check=False)
    issues = validate(p)
    return emit({"ok": not issues, "violations": [v.to_dict() for v in issues]},
                EXIT_OK if not issues else EXIT_NEGATIVE)


def cmd_canon(args) -> int:
    p = load_presentation(args.file)
    form = canonical_form(p)
    maybe_dot(args, p)
    return emit({"canonical_form": form.decode(), "sha256": hashlib.sha256(form).hexdigest()})


def cmd_reduce(args) -> int:
    p = reduce(load_presentation(args.file))
    maybe_out(args, p)
    maybe_dot(args, p)
    return emit({"presentation": p.to_dict()})


def cmd_contains_tn(args) -> int:
    p = load_presentation(args.file)
    m = max_multiplicity(p)
    return emit({"contains": m >= args.n, "multiplicity": m, "n": args.n})


# ---------------------------------------------------------------- amalgam commands

def load_problem(path: str) -> amalgam.AmalgamProblem:
    """Problem bundle: {"A", "A_generators", "B1", "B2", "f1", "f2"}."""
    d = read_json(path)
    try:
        a, b1, b2 = (Presentation.from_dict(d[k]) for k in ("A", "B1", "B2"))
        gens = refs(d.get("A_generators")) or a.sources()
        f1 = {Ref.parse(k): Ref.parse(v) for k, v in d["f1"].items()}
        f2 = {Ref.parse(k): Ref.parse(v) for k, v in d["f2"].items()}
    except (KeyError, TypeError, AttributeError) as e:
        raise InputError(f"{path} is not an amalgamation problem: missing {e}") from e
    for name, p in (("A", a), ("B1", b1), ("B2", b2)):
        require_valid(p, name)
    return amalgam.AmalgamProblem.make(a, gens, b1, b2, f1, f2)


def cmd_amalgamate(args) -> int:
    prob = load_problem(args.problem)
    if args.mode == "free":
        sol = amalgam.free_amalgam(prob)
    else:
        sol = amalgam.class_amalgam(prob, args.n)
    maybe_out(args, sol.c)
    maybe_dot(args, sol.c)
    return emit({"mode": args.mode, "n": amalgam.format_n(amalgam.parse_n(args.n)),
                 "C": sol.c.to_dict(), "g1": sol.g1.to_dict(), "g2": sol.g2.to_dict(),
                 "identifications": [i.to_dict() for i in sol.identifications],
                 "max_multiplicity": max_multiplicity(sol.c)})


def cmd_complement(args) -> int:
    p = load_presentation(args.file)
    return emit(amalgam.complement(p, refs(args.x)).to_dict())


def cmd_merge_preds(args) -> int:
    p = load_presentation(args.file)
    t = load_presentation(args.tree) if args.tree else tree(p.q, "b")
    return emit(amalgam.merge_predecessors(p, refs(args.u), t, refs(args.v)).to_dict())


def cmd_augment(args) -> int:
    p = load_presentation(args.file)
    u = refs(args.u)
    b, emb = amalgam.augment_predecessors(p, u, args.N, args.n)
    counts = {}
    if len(u) >= p.q:
        counts = {",".join(map(str, pq)): len(common_predecessors(b, [emb(x) for x in pq]))
                  for pq in combinations(u, p.q)}
    maybe_out(args, b)
    maybe_dot(args, b)
    return emit({"B": b.to_dict(), "embedding": emb.to_dict(), "common_predecessors": counts})


def cmd_replay(args) -> int:
    p = load_presentation(args.file)
    d, report = amalgam.replay_free_extension(p, refs(args.u), addresses(args.v), args.n)
    maybe_out(args, d)
    maybe_dot(args, d)
    return emit({"report": report.to_dict(), "D": d.to_dict()})


# ---------------------------------------------------------------- limit commands

def load_state(path: str) -> limit.LimitState:
    try:
        return limit.LimitState.from_dict(read_json(path))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, PreconditionError):
            raise
        raise InputError(f"{path} is not a limit state: {e}") from e


def cmd_limit_grow(args) -> int:
    target = resolve_path(args.state)
    if args.resume and target.exists():
        state = load_state(args.state)
    else:
        state = limit.new_state(args.n, args.q, args.seed)
    limit.grow(state, args.steps)
    write_text(args.state, state.to_json())
    return emit({"state": str(args.state), "step_count": state.step_count,
                 "core_size": len(state.current.vertices),
                 "max_multiplicity": max_multiplicity(state.current),
                 "identifications": sum(h["identifications"] for h in state.history),
                 "history_sha256": limit.history_digest(state),
                 "canonical_sha256": hashlib.sha256(canonical_form(state.current)).hexdigest()
                 if args.canon else None})


def cmd_limit_ball(args) -> int:
    state = load_state(args.state)
    ball = limit.ball_at(state, Ref.parse(args.vertex), args.radius)
    if args.format == "dot":
        text = ball.to_dot()
        if args.out:
            write_text(args.out, text)
            return emit({"written": args.out, "size": len(ball.nodes)})
        sys.stdout.write(text)
        return EXIT_OK
    if args.out:
        write_text(args.out, json.dumps(ball.to_dict(), sort_keys=True) + "\n")
    return emit(ball.to_dict())


def cmd_limit_check_ext(args) -> int:
    state = load_state(args.state)
    if args.trial:
        trials = [limit.ExtensionDescriptor.from_dict(read_json(args.trial))]
    else:
        trials = limit.sample_trials(state, args.random, random.Random(args.seed))
    results = limit.check_extension_battery(state, trials, args.budget)
    ok = all(r.realized for r in results)
    return emit({"all_realized": ok, "budget": args.budget, "results": [r.to_dict() for r in results]},
                EXIT_OK if ok else EXIT_NEGATIVE)


def cmd_limit_probe(args) -> int:
    a, b = load_state(args.state_a), load_state(args.state_b)
    res = limit.back_and_forth_probe(a, b, args.radius, args.trials, args.grow_budget, seed=args.seed)
    return emit(res.to_dict(), EXIT_OK if res.passed else EXIT_NEGATIVE)


# ---------------------------------------------------------------- gamma checks

def cmd_gamma_check(args) -> int:
    try:
        p = gamma_checks.LevelPrefix.from_dict(read_json(args.file))
    except MalformedPrefix as e:
        raise InputError(str(e)) from e
    checks = [c.strip().lower() for c in args.checks.split(",") if c.strip()]
    report: dict = {}
    ok = True
    for c in checks:
        if c == "t1":
            report["t1"] = gamma_checks.check_T1(p)
            ok &= report["t1"]["pass"]
        elif c == "t2":
            targets = args.u or list(p.vertices)
            report["t2"] = [gamma_checks.check_T2_prefix(p, u) for u in targets]
            ok &= all(r["pass"] for r in report["t2"])
        elif c == "t3":
            report["t3"] = gamma_checks.level_orbits(p)
        elif c == "t4":
            report["t4"] = gamma_checks.check_T4(p)
        elif c == "g3":
            report["g3"] = gamma_checks.check_G3(p)
        elif c == "c2":
            if not args.x:
                raise PreconditionError("check c2 needs --x")
            if args.gamma:
                gammas = [read_json(args.gamma)]
            else:
                gammas = list(gamma_checks.cone_automorphisms(p, args.x, args.N))
            results = [gamma_checks.check_ball_fixing_extension(p, args.x, args.N, g) for g in gammas]
            failed = [r for r in results if not r["pass"]]
            report["c2"] = {"pass": not failed, "automorphisms": len(results),
                            "first_violation": failed[0] if failed else None}
            ok &= not failed
        else:
            raise PreconditionError(f"unknown check {c!r}")
    return emit(report, EXIT_OK if ok else EXIT_NEGATIVE)


# ---------------------------------------------------------------- parser

def n_value(text: str):
    try:
        return amalgam.parse_n(text)
    except (ValueError, PreconditionError) as e:
        raise argparse.ArgumentTypeError(f"n must be an integer >= 2 or 'inf', got {text!r}") from e


def seed_value(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="descgraph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name, func, help_text, file_arg=True, outputs=False):
        sp = sub.add_parser(name, help=help_text)
        if file_arg:
            sp.add_argument("file", help="presentation JSON file")
        if outputs:
            sp.add_argument("--out", help="write the resulting presentation here")
            sp.add_argument("--dot", help="write a DOT rendering here")
        sp.set_defaults(func=func)
        return sp

    cmd("validate", cmd_validate, "check presentation invariants")
    cmd("canon", cmd_canon, "canonical form").add_argument("--dot")
    cmd("reduce", cmd_reduce, "frontier-maximal normal form", outputs=True)
    cmd("contains-tn", cmd_contains_tn, "does T_n embed descendant-closed").add_argument(
        "--n", type=int, required=True)

    sp = cmd("amalgamate", cmd_amalgamate, "amalgamate a problem bundle", file_arg=False, outputs=True)
    sp.add_argument("problem", help="problem bundle JSON")
    sp.add_argument("--mode", choices=["free", "class"], default="free")
    sp.add_argument("--n", type=n_value, default=amalgam.INF)

    cmd("complement", cmd_complement, "complement an independent set").add_argument(
        "--x", nargs="*", default=[], help="vertex refs, e.g. r or r/01")

    sp = cmd("merge-preds", cmd_merge_preds, "merge q-sets with common predecessors")
    sp.add_argument("--u", nargs="+", required=True)
    sp.add_argument("--v", nargs="+", required=True, help="refs in the tree (default tree root b)")
    sp.add_argument("--tree", help="presentation of the tree side")

    sp = cmd("augment", cmd_augment, "add common predecessors", outputs=True)
    sp.add_argument("--u", nargs="*", default=[])
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--n", type=n_value, required=True)

    sp = cmd("replay-free-ext", cmd_replay, "rebuild a free extension inside C_n", outputs=True)
    sp.add_argument("--u", nargs="*", default=[])
    sp.add_argument("--v", nargs="*", default=[], help="addresses below the new root")
    sp.add_argument("--n", type=n_value, required=True)

    sp = cmd("limit-grow", cmd_limit_grow, "grow an approximation of D_n", file_arg=False)
    sp.add_argument("--n", type=n_value, required=True)
    sp.add_argument("--q", type=int, default=2)
    sp.add_argument("--seed", type=seed_value, default=0)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--state", required=True)
    sp.add_argument("--resume", action="store_true", help="continue an existing state file")
    sp.add_argument("--canon", action="store_true", help="also report a canonical-form hash")

    sp = cmd("limit-ball", cmd_limit_ball, "ball around a vertex of a state", file_arg=False)
    sp.add_argument("--state", required=True)
    sp.add_argument("--vertex", required=True)
    sp.add_argument("--radius", type=int, default=limit.DEFAULT_BALL_RADIUS)
    sp.add_argument("--format", choices=["json", "dot"], default="json")
    sp.add_argument("--out")

    sp = cmd("limit-check-ext", cmd_limit_check_ext, "extension-property trials", file_arg=False)
    sp.add_argument("--state", required=True)
    sp.add_argument("--trial", help="descriptor JSON {base, U, V}")
    sp.add_argument("--random", type=int, default=10, help="number of sampled trials")
    sp.add_argument("--seed", type=seed_value, default=0)
    sp.add_argument("--budget", type=int, default=limit.DEFAULT_STEP_BUDGET)

    sp = cmd("limit-probe", cmd_limit_probe, "back-and-forth probe between states", file_arg=False)
    sp.add_argument("--state-a", required=True)
    sp.add_argument("--state-b", required=True)
    sp.add_argument("--radius", type=int, default=2)
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--grow-budget", type=int, default=200)
    sp.add_argument("--seed", type=seed_value, default=0)

    sp = cmd("gamma-check", cmd_gamma_check, "descendant-set checks on a level prefix", file_arg=False)
    sp.add_argument("--file", required=True)
    sp.add_argument("--checks", default="t1,t4,g3")
    sp.add_argument("--u", nargs="*", help="vertices for t2 (default all)")
    sp.add_argument("--x", nargs="*", help="X generators for c2")
    sp.add_argument("--N", type=int, default=0)
    sp.add_argument("--gamma", help="JSON map for c2 (default: every ball-fixing automorphism)")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_PARSE
    try:
        return args.func(args)
    except (InputError, MalformedAddress, MalformedPrefix) as e:
        return emit({"error": "parse", "message": str(e)}, EXIT_PARSE)
    except (PreconditionError, NotFound) as e:
        return emit({"error": "precondition", "message": str(e).strip("'\"")}, EXIT_PRECONDITION)
    except InvariantViolation as e:
        return emit({"error": "invariant", "message": str(e)}, EXIT_INVARIANT)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
