"""Command-line front end.

Exit codes: 0 ok, 2 config error, 3 missing dependency, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import config as config_mod
from .agent import BestResponseNet, train_best_response
from .errors import ConfigError, LitDarkError, MissingDependencyError, NumericalError
from .exchange import ExchangeSolution, ValueGrid, solve_exchange, solve_mm_no_exchange
from .oracle import GridSpec, exchange_backward_grid
from .simulator import (fill_rate_check, fixed_policy, simulate_paths, tables_from_exchange,
                        tables_from_mm, tables_from_oracle, agent_utility_samples,
                        exchange_utility_samples, _se)

log = logging.getLogger("litdark")


def _write_config(out: Path, cfg, command: str, extra=None):
    out.mkdir(parents=True, exist_ok=True)
    data = {"command": command, "config": cfg.to_dict()}
    if extra:
        data.update(extra)
    (out / "run_config.json").write_text(json.dumps(data, indent=2))


def _load_agent(args, cfg) -> BestResponseNet:
    path = args.agent_checkpoint
    if path is None:
        default = Path(args.out) / "agent.json"
        if not default.exists():
            raise MissingDependencyError("this stage needs --agent-checkpoint (run train-agent first)")
        path = default
    path = Path(path)
    if not path.exists():
        raise MissingDependencyError(f"agent checkpoint {path} not found")
    try:
        br = BestResponseNet.load(path)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise MissingDependencyError(f"unreadable agent checkpoint {path}: {exc}") from exc
    if br.q_bar != cfg.market.q_bar or br.z_bar != cfg.exchange.z_bar:
        raise ConfigError(f"checkpoint was trained for q_bar={br.q_bar}, z_bar={br.z_bar}")
    return br


def cmd_train_agent(args, cfg):
    out = Path(args.out)
    t0 = time.time()
    br = train_best_response(cfg.train, cfg.agent, cfg.exchange, cfg.market)
    br.history["resolved_config"] = cfg.to_dict()
    out.mkdir(parents=True, exist_ok=True)
    br.save(out / "agent.json")
    _write_config(out, cfg, "train-agent", {"epochs": br.history["epochs"],
                                            "seconds": time.time() - t0})
    print(f"trained best response for {br.history['epochs']} epochs -> {out / 'agent.json'}")


def cmd_solve_mm(args, cfg):
    out = Path(args.out)
    so = cfg.solver
    sol = solve_mm_no_exchange(cfg.agent, cfg.market, so.T, so.dt, so.volume_step)
    sol.write(out)
    _write_config(out, cfg, "solve-mm")
    q = sol.value.q
    k = sol.quotes.shape[0] - 1
    print(f"solved market-maker HJB on {so.n_steps} steps; quotes at t={sol.value.times[k]:g}:")
    _print_rows(q, sol.quotes[k], ["l_al", "l_bl", "l_ad", "l_bd"])


def cmd_solve_exchange(args, cfg):
    out = Path(args.out)
    br = _load_agent(args, cfg)
    so = cfg.solver
    sol = solve_exchange(cfg.train, br, cfg.agent, cfg.exchange, cfg.market, so.T, so.dt)
    sol.write(out)
    _write_config(out, cfg, "solve-exchange")
    k = sol.quotes.shape[0] - 1
    print(f"solved exchange problem on {so.n_steps} steps; slice t={sol.value.times[k]:g}:")
    _print_rows(sol.value.q, np.concatenate([sol.value.values[k][:, None], sol.incentives[k]], axis=1),
                ["v", "z_al", "z_bl", "z_ad", "z_bd", "z_s"])


def _print_rows(q, rows, cols, max_rows=11):
    idx = np.unique(np.linspace(0, len(q) - 1, min(max_rows, len(q))).round().astype(int))
    print("      q " + " ".join(f"{c:>11s}" for c in cols))
    for i in idx:
        print(f"{int(q[i]):7d} " + " ".join(f"{x:11.5g}" for x in rows[i]))


def _read_exchange_dir(path: Path, cfg) -> ExchangeSolution:
    files = [path / n for n in ("value.csv", "incentives.csv", "quotes.csv")]
    for f in files:
        if not f.exists():
            raise MissingDependencyError(f"{f} not found (run solve-exchange first)")
    nq = 2 * cfg.market.q_bar + 1

    def table(f, ncol):
        with open(f) as fh:
            rows = list(csv.reader(fh))[1:]
        arr = np.array([[float(x) for x in r] for r in rows])
        return arr, arr[:, 2:2 + ncol]

    v, vv = table(files[0], 1)
    times = np.unique(v[:, 0])
    try:
        values = vv.reshape(times.size, nq)
        _, inc = table(files[1], 5)
        _, quo = table(files[2], 4)
        n = times.size - 1
        inc = inc.reshape(n, nq, 5)
        quo = quo.reshape(n, nq, 4)
    except ValueError as exc:
        raise ConfigError(f"{path} does not match market.q_bar={cfg.market.q_bar}") from exc
    return ExchangeSolution(ValueGrid(times, values, cfg.market.q_bar), [], inc, quo,
                            np.zeros((n, nq)))


def cmd_simulate(args, cfg):
    out = Path(args.out)
    sc = cfg.sim
    so = cfg.solver
    policy = args.policy
    if policy == "fixed":
        L = np.array(args.quotes if args.quotes else [cfg.market.q_bar / 2] * 4, dtype=float)
        pol = fixed_policy(L, cfg.market, so.dt)
    elif policy == "mm":
        pol = tables_from_mm(solve_mm_no_exchange(cfg.agent, cfg.market, so.T, so.dt, so.volume_step),
                             cfg.market)
    elif policy == "oracle":
        gs = GridSpec(so.volume_step, so.z_step, cfg.exchange.z_bar)
        slices = exchange_backward_grid(cfg.agent, cfg.exchange, cfg.market, gs, so.T, so.dt,
                                        use_cap=True)
        pol = tables_from_oracle(slices, so.dt, cfg.market, cfg.agent)
    else:
        source = Path(args.policy_dir) if args.policy_dir else out
        sol = _read_exchange_dir(source, cfg)
        grid = GridSpec(so.volume_step, so.z_step, cfg.exchange.z_bar) if args.oracle else None
        br = None if args.oracle else _load_agent(args, cfg)
        if br is not None:
            z = sol.incentives
            q = np.broadcast_to(np.arange(-cfg.market.q_bar, cfg.market.q_bar + 1, dtype=float),
                                z.shape[:2])
            sol.quotes = br.quotes_arrays(z[..., :4], q)
        pol = tables_from_exchange(sol, br, cfg.market, cfg.agent, use_grid=grid)
    res = simulate_paths(sc.replace(max_events=max(sc.max_events, 0)), pol, cfg.agent,
                         cfg.exchange, cfg.market)
    ua = agent_utility_samples(res, cfg.agent)
    ue = exchange_utility_samples(res, cfg.exchange)
    counts, comp, zsc = fill_rate_check(res)
    res.extra = {"policy": policy, "oracle_coupon": bool(args.oracle),
                 "agent_utility": {"mean": float(ua.mean()), "std_error": _se(ua)},
                 "exchange_utility": {"mean": float(ue.mean()), "std_error": _se(ue)},
                 "fills": counts.tolist(), "compensators": comp.tolist(),
                 "table_clamps": pol.n_clamped, "config": cfg.to_dict()}
    res.write(out)
    _write_config(out, cfg, "simulate", {"policy": policy})
    print(f"simulated {sc.n_paths} paths over T={sc.T:g}")
    print(f"agent utility    {ua.mean():.8g} +- {_se(ua):.3g}")
    print(f"exchange utility {ue.mean():.8g} +- {_se(ue):.3g}")


def cmd_verify(args, cfg):
    from .verify import run_checks

    report = run_checks(cfg, agent_checkpoint=args.agent_checkpoint, quick=not args.full)
    width = max(len(n) for n, _, _ in report)
    for name, ok, detail in report:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(json.dumps(
        [{"check": n, "pass": bool(ok), "detail": d} for n, ok, d in report], indent=2))
    if not all(ok for _, ok, _ in report):
        raise NumericalError("verification failed")


COMMANDS = {"train-agent": cmd_train_agent, "solve-mm": cmd_solve_mm,
            "solve-exchange": cmd_solve_exchange, "simulate": cmd_simulate, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with dotted keys, e.g. market.sigma = 0.2")
    common.add_argument("--preset", default="reference", choices=sorted(config_mod.PRESETS))
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--agent-checkpoint", default=None)
    common.add_argument("--oracle", action="store_true",
                        help="use the grid best response and its H in simulation")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="litdark", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("train-agent", "solve-mm", "solve-exchange"):
        sub.add_parser(name, parents=[common])
    s = sub.add_parser("simulate", parents=[common])
    s.add_argument("--policy", choices=("exchange", "mm", "oracle", "fixed"), default="exchange")
    s.add_argument("--policy-dir", default=None, help="directory holding solve-exchange output")
    s.add_argument("--quotes", type=float, nargs=4, metavar=("AL", "BL", "AD", "BD"))
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--full", action="store_true", help="also run the slower checks")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_mod.load(args.config, args.preset, args.seed)
        COMMANDS[args.command](args, cfg)
    except LitDarkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FloatingPointError, OverflowError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
