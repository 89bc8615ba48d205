"""Command-line interface: ``termplan <subcommand> ...``.

Exit codes: 0 success, 1 negative answer (false formula, no plan, invalid
plan, failed check), 2 usage or input error, 3 internal error.
"""

from __future__ import annotations

import argparse
import fnmatch
import json
import sys

from .dsl import (
    load_task, parse_plan, parse_step, plan_to_json,
    serialize_plan, serialize_problem, to_sexpr, model_to_json,
)
from .dynamics import NotApplicable, update_pointed, validate_action
from .frames import (
    EnumerationBudgetExceeded, EnumerationSpec, check_characterization, frame_properties,
)
from .planning import (
    NoneWithinBound, PlanningTask, SearchConfig, find_plan, verify_plan,
)
from .reduction import translate
from .semantics import satisfies, validate_model
from .syntax import TermplanError, free_vars, well_formed

EXIT_OK, EXIT_NO, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _task(args):
    return load_task(_read(args.domain), _read(args.problem))


def _emit(args, text, payload):
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text)


def _sentence(prob, text):
    f = prob.parse_formula(text)
    issues = well_formed(f, prob.sig)
    if issues:
        raise UsageError("; ".join(f"{'/'.join(map(str, p)) or 'root'}: {m}" for p, m in issues))
    if free_vars(f):
        names = ", ".join(sorted(v.name for v in free_vars(f)))
        raise UsageError(f"formula has free variables: {names}")
    return f


# ---------------------------------------------------------------- subcommands


def cmd_validate(args):
    dom, prob = _task(args)
    issues = []
    formulas = [prob.goal] if prob.goal is not None else []
    issues += validate_model(prob.model, prob.sig, formulas)
    for S in dom.schemas:
        issues += [f"{S.name}: {m}" for m in validate_action(S, prob.sig)]
    if prob.goal is not None:
        issues += [f"goal: {m}" for _, m in well_formed(prob.goal, prob.sig)]
    summary = (f"domain {dom.name}: {len(dom.schemas)} action schemas; "
               f"problem {prob.name}: {len(prob.model.worlds)} worlds, "
               f"{len(prob.model.agents)} agents, {len(prob.model.objects)} objects")
    text = summary + ("\nok" if not issues else "\n" + "\n".join(issues))
    _emit(args, text, {"ok": not issues, "issues": issues, "domain": dom.name,
                       "problem": prob.name, "worlds": len(prob.model.worlds),
                       "schemas": [S.name for S in dom.schemas]})
    return EXIT_OK if not issues else EXIT_NO


def cmd_check(args):
    _, prob = _task(args)
    f = _sentence(prob, args.formula)
    w = args.at or prob.point
    if w not in prob.model.windex:
        raise UsageError(f"unknown world {w}")
    val = satisfies(prob.model, w, {}, f)
    _emit(args, "true" if val else "false", {"world": w, "formula": to_sexpr(f), "value": val})
    return EXIT_OK if val else EXIT_NO


def _resolve_step(prob, text):
    step = parse_step(text)
    A = prob.action_resolver()(step.action, step.args)
    ev = step.event or A.designated
    if ev not in A.events:
        raise UsageError(f"{A.name} has no event {ev}")
    return A, ev


def cmd_update(args):
    _, prob = _task(args)
    A, ev = _resolve_step(prob, args.action)
    try:
        s = update_pointed(prob.initial, A, ev)
    except NotApplicable as exc:
        _emit(args, f"not applicable: {exc}", {"applicable": False, "message": str(exc)})
        return EXIT_NO
    new = prob.with_state(s)
    text = serialize_problem(new)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.json:
        payload = model_to_json(new)
        payload["applicable"] = True
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif not args.output:
        sys.stdout.write(text)
    else:
        print(f"{len(s.model.worlds)} worlds, actual world {s.point}; written to {args.output}")
    return EXIT_OK


def _excluder(patterns):
    if not patterns:
        return None

    def exclude(g):
        label = f"{g.schema}({','.join(g.args)})"
        return any(fnmatch.fnmatchcase(label, p) for p in patterns)

    return exclude


def _event_overrides(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--event expects SCHEMA=EVENT, got {item}")
        k, v = item.split("=", 1)
        out[k] = v
    return out


def cmd_plan(args):
    _, prob = _task(args)
    if prob.goal is None:
        raise UsageError("the problem has no :goal")
    task = PlanningTask.from_problem(prob, exclude=_excluder(args.exclude),
                                     events=_event_overrides(args.event))
    cfg = SearchConfig(args.max_depth, args.strategy, args.dedup)
    res = find_plan(task, cfg)
    if isinstance(res, NoneWithinBound):
        msg = "no plan within bound"
        if res.exhausted:
            msg += " (reachable states exhausted)"
        _emit(args, msg, {"status": "none_within_bound", "max_depth": res.max_depth,
                          "exhausted": res.exhausted, "plan": None})
        return EXIT_NO
    steps = [a.step() for a in res.plan]
    text = serialize_plan(steps).rstrip("\n")
    _emit(args, text, {"status": "found", "length": len(steps),
                       "plan": json.loads(plan_to_json(steps))})
    return EXIT_OK


def cmd_verify(args):
    _, prob = _task(args)
    if prob.goal is None:
        raise UsageError("the problem has no :goal")
    steps = parse_plan(_read(args.plan))
    task = PlanningTask.from_problem(prob, events=_event_overrides(args.event))
    res = verify_plan(task, steps)
    if res.valid:
        text = "valid"
    elif res.failed_at is not None:
        text = f"invalid: step {res.failed_at + 1} ({steps[res.failed_at]}) is not applicable"
    else:
        text = "invalid: goal does not hold in the final state"
    _emit(args, text, {"valid": res.valid, "failed_at": res.failed_at,
                       "worlds": [len(s.model.worlds) for s in res.trace]})
    return EXIT_OK if res.valid else EXIT_NO


def cmd_translate(args):
    _, prob = _task(args)
    f = prob.parse_formula(args.formula)
    res = translate(f, prob.sig, trace=True, knowledge_rule=args.knowledge_rule)
    text = str(res.formula)
    if args.trace:
        lines = [f"{s.axiom} at {list(s.path)}: {s.before} -> {s.after}" for s in res.trace]
        text = "\n".join(lines + [text])
    payload = {"formula": to_sexpr(res.formula), "infix": str(res.formula)}
    if args.trace:
        payload["trace"] = [s.to_json() for s in res.trace]
    _emit(args, text, payload)
    return EXIT_OK


def cmd_frames(args):
    spec = EnumerationSpec(args.agents, args.worlds, n_objects=args.objects, budget=args.budget)
    kind = args.check
    n = args.size
    if kind in ("N", "M") and n is None:
        raise UsageError(f"--size is required for {kind}")
    rep = check_characterization(kind, spec, n=n, keep_outcomes=args.outcomes)
    text = (f"{rep.kind}: {rep.frames} frames, {rep.with_property} with the property "
            f"({rep.valid_on_property} valid), {rep.falsified_off_property} falsified without it, "
            f"{rep.inconclusive} inconclusive, {len(rep.failures)} failures\n"
            + ("confirmed" if rep.confirmed else "not confirmed"))
    _emit(args, text, rep.to_json(outcomes=args.outcomes))
    return EXIT_OK if rep.confirmed else EXIT_NO


def cmd_properties(args):
    _, prob = _task(args)
    rep = frame_properties(prob.model)
    lines = [f"{a}: " + ", ".join(k for k, v in flags.items() if v) for a, flags in rep.flags.items()]
    _emit(args, "\n".join(lines), rep.to_json())
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser():
    p = argparse.ArgumentParser(prog="termplan", description="Term-modal dynamic epistemic logic engine")
    sub = p.add_subparsers(dest="command", required=True)

    def task_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("-d", "--domain", required=True, help="domain file (.tmd)")
        sp.add_argument("-p", "--problem", required=True, help="problem file (.tmp)")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        return sp

    task_cmd("validate", "parse and check a domain/problem pair")
    sp = task_cmd("check", "model-check a sentence")
    sp.add_argument("-f", "--formula", required=True)
    sp.add_argument("--at", help="world (default: the actual world)")
    sp = task_cmd("update", "apply a pointed action and print the new problem")
    sp.add_argument("-a", "--action", required=True, help='e.g. "Move(a1,r1,r2)@em"')
    sp.add_argument("-o", "--output", help="write the problem file here")
    sp = task_cmd("plan", "bounded plan search")
    sp.add_argument("--max-depth", type=int, required=True)
    sp.add_argument("--dedup", choices=["iso", "isomorphism", "none"], default="iso")
    sp.add_argument("--strategy", choices=["bfs", "iddfs"], default="bfs")
    sp.add_argument("--exclude", action="append", metavar="PATTERN",
                    help='glob over "Name(args)" labels, e.g. "Reboot(a1,*)"')
    sp.add_argument("--event", action="append", metavar="SCHEMA=EVENT")
    sp = task_cmd("verify", "verify a plan file")
    sp.add_argument("--plan", required=True)
    sp.add_argument("--event", action="append", metavar="SCHEMA=EVENT")
    sp = task_cmd("translate", "reduce a dynamic formula to a static one")
    sp.add_argument("-f", "--formula", required=True)
    sp.add_argument("--trace", action="store_true")
    sp.add_argument("--knowledge-rule", choices=["guarded", "printed"], default="guarded")
    task_cmd("properties", "relational properties of the initial model")
    sp = sub.add_parser("frames", help="check a characterization schema by enumeration")
    sp.add_argument("--check", required=True, choices=["T", "D", "4", "5", "N", "M"])
    sp.add_argument("--agents", type=int, default=2)
    sp.add_argument("--worlds", type=int, default=3)
    sp.add_argument("--objects", type=int, default=1)
    sp.add_argument("--size", type=int, help="n for N(n) and M(m)")
    sp.add_argument("--budget", type=int, default=2_000_000)
    sp.add_argument("--outcomes", action="store_true", help="include per-frame outcomes in JSON")
    sp.add_argument("--json", action="store_true")
    return p


COMMANDS = {
    "validate": cmd_validate, "check": cmd_check, "update": cmd_update, "plan": cmd_plan,
    "verify": cmd_verify, "translate": cmd_translate, "frames": cmd_frames,
    "properties": cmd_properties,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (UsageError, TermplanError, ValueError, EnumerationBudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
