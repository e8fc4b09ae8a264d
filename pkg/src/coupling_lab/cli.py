"""Command-line front end.

Every subcommand reads one JSON instance file and writes one artifact
(JSON, or CSV for ``converge``).  Writes go through a temp file and a rename,
and a ``<output>.meta.json`` sidecar records the seed and the full config.

Exit codes: 0 success, 1 parse or validation error, 2 failed internal check.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np

from . import continuity_lab, coupling, matching, prokhorov, transport
from .errors import CouplingLabError
from .metric_measure import DiscreteMeasure, measure_from_json, validate_space

COMMANDS = ("solve", "stable", "prokhorov", "glue", "perturb", "converge", "audit")


class ParseError(CouplingLabError):
    pass


@dataclass
class RunConfig:
    command: str
    input_path: str
    output_path: str | None = None
    master_seed: int = 0
    n_grid: list = field(default_factory=list)
    trials: int = 1
    slack_mode: str = "zero"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.slack_mode not in ("zero", "paper"):
            raise ValueError("slack_mode must be 'zero' or 'paper'")


def trial_seed(master_seed: int, trial: int) -> int:
    """64-bit seed of one trial, derived from the master seed."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(trial,))
    return int(seq.generate_state(1, np.uint64)[0])


def _load(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _field(obj, name):
    try:
        return obj[name]
    except (KeyError, TypeError):
        raise ParseError(f"missing field {name!r}") from None


def _marginals(obj):
    mu = measure_from_json(_field(obj, "mu"))
    nu = measure_from_json(_field(obj, "nu"))
    phi = transport.SurplusGrid(_field(obj, "phi"))
    return mu, nu, phi


def _plan_json(opt, pot):
    return {"value": opt.value, "plan": opt.plan.mass.tolist(),
            "u": pot.u.tolist(), "v": pot.v.tolist()}


def _cmd_solve(cfg, obj):
    mu, nu, phi = _marginals(obj)
    opt, pot = transport.solve_transport(mu, nu, phi)
    return _plan_json(opt, pot)


def _cmd_stable(cfg, obj):
    mu, nu, phi = _marginals(obj)
    out = matching.stable_matching_exists(mu, nu, phi)
    blocking = matching.is_stable(out, phi).blocking_pairs
    return {"plan": out.plan.mass.tolist(), "u": out.payoff.u.tolist(),
            "v": out.payoff.v.tolist(), "blocking_pairs": [list(b) for b in blocking]}


def _cmd_prokhorov(cfg, obj):
    if "P" in obj:
        P, Q = measure_from_json(obj["P"]), measure_from_json(obj["Q"])
    else:
        S = validate_space(_field(obj, "dist"))
        P, Q = DiscreteMeasure(S, _field(obj, "p")), DiscreteMeasure(S, _field(obj, "q"))
    cert = prokhorov.prokhorov_distance(P, Q)
    return {"epsilon": cert.epsilon, "far_mass": cert.far_mass, "attained": cert.attained}


def _cmd_glue(cfg, obj):
    m12 = coupling.coupling_from_json(_field(obj, "m12"), tol=coupling.TAU_GLUE)
    m23 = coupling.coupling_from_json(_field(obj, "m23"), tol=coupling.TAU_GLUE)
    m = coupling.glue(m12, m23)
    return {"mass": m.mass.tolist(), "marginal_error": m.marginal_error()}


def _cmd_perturb(cfg, obj):
    mu = measure_from_json(_field(obj, "mu"))
    nu = measure_from_json(_field(obj, "nu"))
    plan = coupling.coupling_from_json(_field(obj, "plan"), mu.space, nu.space, tol=1e-10)
    plan = coupling.Coupling(mu, nu, plan.mass, tol=1e-10)
    mu_new = DiscreteMeasure(mu.space, _field(obj, "mu_new"))
    nu_new = DiscreteMeasure(nu.space, _field(obj, "nu_new"))
    n = cfg.n_grid[0] if cfg.n_grid else 1
    slack = 1.0 / n if cfg.slack_mode == "paper" else 0.0
    cert = continuity_lab.transfer_coupling(plan, mu_new, nu_new, slack=slack)
    return {"pi_n": cert.pi_n.mass.tolist(), "eps_n": cert.eps_n, "delta_n": cert.delta_n,
            "d_bound": cert.d_bound, "d_actual": cert.d_actual, "slack": slack}


def _cmd_converge(cfg, obj):
    mu, nu, phi = _marginals(obj)
    if not cfg.n_grid:
        raise ParseError("converge needs --n-grid")
    seeds = [trial_seed(cfg.master_seed, t) for t in range(cfg.trials)]
    workers = max(1, int(os.environ.get("COUPLING_LAB_THREADS", "1")))
    rows = continuity_lab.value_convergence(mu, nu, phi, cfg.n_grid, seeds, workers=workers)
    text = continuity_lab.rows_to_csv(rows)
    continuity_lab.rows_from_csv(text)  # re-parse and re-validate before writing
    return text


def _cmd_audit(cfg, obj):
    mu, nu, phi = _marginals(obj)
    rep = matching.equivalence_audit(mu, nu, phi)
    return {
        "value": rep.value,
        "consistent": rep.consistent,
        "vertices": [
            {"plan": a.plan.mass.tolist(), "surplus": a.surplus, "optimal": a.optimal,
             "stable_payoff": a.stable_payoff, "unstable_by_audit": a.unstable_by_audit}
            for a in rep.vertices
        ],
    }


_DISPATCH = {
    "solve": _cmd_solve, "stable": _cmd_stable, "prokhorov": _cmd_prokhorov,
    "glue": _cmd_glue, "perturb": _cmd_perturb, "converge": _cmd_converge,
    "audit": _cmd_audit,
}


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    try:
        result = _DISPATCH[cfg.command](cfg, _load(cfg.input_path))
    except (CouplingLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"internal check failed: {exc}", file=sys.stderr)
        return 2
    text = result if isinstance(result, str) else json.dumps(result, indent=2) + "\n"
    if cfg.output_path is None:
        stdout.write(text)
        return 0
    _atomic_write(cfg.output_path, text)
    meta = {"master_seed": cfg.master_seed, "config": asdict(cfg)}
    _atomic_write(cfg.output_path + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return 0


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="coupling-lab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--input", required=True, help="JSON instance file")
    p.add_argument("--output", help="artifact path; stdout when omitted")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--trials", type=int, default=1, help="seeds per sample size for converge")
    p.add_argument("--n-grid", type=_int_list, default=[],
                   help="comma-separated sample sizes, e.g. 50,200,1000")
    p.add_argument("--slack-mode", choices=("zero", "paper"), default="zero",
                   help="perturb: exact Prokhorov witnesses, or levels raised by 1/n")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(args.command, args.input, args.output, args.seed, args.n_grid,
                        args.trials, args.slack_mode)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
