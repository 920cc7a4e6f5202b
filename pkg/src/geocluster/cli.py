"""Command-line interface.

Every subcommand reads its inputs from ``--config`` (YAML or JSON) and/or
flags, prints a human-readable result to stdout and, with ``--out DIR``,
writes ``<command>.csv`` and/or ``<command>.json`` atomically. The resolved
configuration is echoed to stderr and embedded, with its hash, in every
output file.

Exit codes: 0 success, 2 configuration or validation error, 3 computation
error, 4 infeasible design or sample.
"""

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from ._validation import ComputationError, GeoclusterError, InfeasibleError, ValidationError
from .approx import fit_approximation, get_preset, ratio_q, regenerate_table1, s_tilde, simulate_table
from .config import config_hash, load_file, reproducible_part, resolve
from .correlation import CorrelationModel
from .elicitation import (
    DichotomousSpec,
    ElicitedDensity,
    averaged_ess,
    rho_dichotomous,
    rho_from_sd_ratio,
    sd_from_interval,
)
from .ess import ClusterConfig, cluster_ess, design_ess
from .geometry import PointSet
from .optimize import CostModel, DensityModel, optimize
from .scenarios import CSV_FIELDS, ScenarioConfig, compare_strategies, equivalent_sample_size, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_INFEASIBLE = 0, 2, 3, 4


@dataclass
class Output:
    header: list
    rows: list
    payload: object
    text: str


def _rho(value):
    if isinstance(value, dict):
        return rho_dichotomous(DichotomousSpec(value["p"], value["p_cond"]))
    return value


def _table(header, rows, fmt="{:>12}"):
    lines = [" ".join(fmt.format(h) for h in header)]
    for row in rows:
        cells = []
        for v in row:
            cells.append(fmt.format(f"{v:.6g}" if isinstance(v, float) else str(v)))
        lines.append(" ".join(cells))
    return "\n".join(lines)


# -- subcommands ------------------------------------------------------------

def cmd_ess(cfg, glob):
    with open(cfg["points"], newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        fields = [f.strip() for f in (reader.fieldnames or [])]
        if "x" not in fields or "y" not in fields:
            raise ValidationError(f"{cfg['points']}: expected columns x,y (optionally cluster)")
        groups = {}
        for row in reader:
            row = {k.strip(): v for k, v in row.items()}
            key = row.get("cluster", "1")
            groups.setdefault(key, []).append((float(row["x"]), float(row["y"])))
    if not groups:
        raise ValidationError(f"{cfg['points']}: no points")
    model = CorrelationModel(cfg["family"], cfg["r"], _rho(cfg["rho"]))
    clusters = {k: ClusterConfig(PointSet(np.array(v)), model) for k, v in groups.items()}
    results = {k: cluster_ess(c) for k, c in clusters.items()}
    header = ["cluster", "n", "n_star", "s_bar", "icc_sp"]
    rows = [[k, res.n, res.n_star, res.s_bar, res.icc_sp] for k, res in results.items()]
    total = design_ess(list(clusters.values()))
    if len(results) == 1:
        payload = next(iter(results.values())).to_dict()
    else:
        payload = {
            "clusters": [{"cluster": k, **res.to_dict()} for k, res in results.items()],
            "design_ess": total,
        }
    text = _table(header, rows) + f"\ndesign ESS = {total:.6f}"
    return Output(header, rows, payload, text)


def cmd_stilde(cfg, glob):
    spec = get_preset(cfg["family"], cfg["sampling"], cfg["shape"])
    q = ratio_q(cfg["sampling"], cfg["r"], cfg["R"], cfg["n"])
    s = s_tilde(spec, q)
    header = ["family", "sampling", "shape", "form", "q", "s_tilde"]
    rows = [[spec.family, spec.sampling, spec.shape, spec.form, q, s]]
    payload = {**spec.to_dict(), "q": q, "s_tilde": s}
    return Output(header, rows, payload, f"{s:.6f}")


def cmd_fit(cfg, glob):
    if cfg["data"]:
        with open(cfg["data"], newline="") as fh:
            reader = csv.DictReader(row for row in fh if not row.startswith("#"))
            data = np.array([(float(r["q"]), float(r["s"])) for r in reader])
    else:
        sim = simulate_table(cfg["sampling"], cfg["shape"], glob["replicates"], glob["seed"],
                             n_jobs=glob["n_jobs"])
        data = np.column_stack([sim.q, sim.s[cfg["family"]]])
    fits = fit_approximation(data, cfg["forms"], cfg["family"], cfg["sampling"], cfg["shape"], seed=glob["seed"])
    best = fits[0]
    if not best.converged:
        raise ComputationError("no candidate form converged")
    order = np.argsort(data[:, 0], kind="stable")
    header = ["q", "s", "s_fit"]
    rows = [[float(q), float(s), float(best.spec(q))] for q, s in data[order]]
    payload = {"fits": [f.to_dict() for f in fits], "best_form": best.spec.form}
    summary = [[f.spec.form, f.mse, " ".join(f"{c:.4g}" for c in f.spec.coeffs)] for f in fits]
    text = _table(["form", "mse", "coeffs"], summary, "{:>24}")
    return Output(header, rows, payload, text)


def cmd_regen(cfg, glob):
    table = regenerate_table1(glob["seed"], glob["replicates"], glob["n_jobs"], tuple(cfg["forms"]))
    payload = table.to_dict()
    header = ["family", "sampling", "shape", "form", "coeffs", "mse", "best_form"]
    rows = [
        [p["family"], p["sampling"], p["shape"], p["form"], ";".join(repr(c) for c in p["coeffs"]), p["mse"],
         p["best_form"]]
        for p in payload["presets"]
    ]
    text = _table(header, [[*r[:4], r[4].replace(";", " "), *r[5:]] for r in rows], "{:>14}")
    return Output(header, rows, payload, text)


def cmd_simulate(cfg, glob):
    config = ScenarioConfig(
        scenario=cfg["scenario"], N=cfg["N"], j_values=cfg["j_values"], rhos=cfg["rhos"], rs=cfg["rs"],
        families=cfg["families"], schemes=cfg["schemes"], p=cfg["p"], m=cfg["m"], r0=cfg["r0"],
        replicates=glob["replicates"], seed=glob["seed"],
    )
    result = run_scenario(config, n_jobs=glob["n_jobs"])
    header = list(CSV_FIELDS)
    rows = [[row[k] for k in header] for row in result.rows]
    return Output(header, rows, {"rows": result.rows}, result.to_csv().rstrip("\n"))


def _strategy(cfg, p, rho):
    return ScenarioConfig(
        scenario="fixed-mp", N=cfg["N"], j_values=cfg["j_values"], rhos=(rho,), rs=(cfg["r"],),
        families=(cfg["family"],), schemes=(cfg["sampling"],), p=p, r0=cfg["r0"], replicates=1,
    )


def cmd_compare(cfg, glob):
    rho = _rho(cfg["rho"])
    base, alt = _strategy(cfg, cfg["base_p"], rho), _strategy(cfg, cfg["alt_p"], rho)
    rows_d = compare_strategies(base, alt)
    header = ["J", "base_m", "base_n", "base_ess", "alt_m", "alt_n", "alt_ess"]
    rows = [[row[k] for k in header] for row in rows_d]
    peak = max(rows_d, key=lambda row: (row["base_ess"], -row["J"]))
    # survey size with the alternative enumeration that matches the peak ESS
    n_alt = equivalent_sample_size(base, peak["J"], peak["alt_m"], peak["base_ess"])
    summary = {
        "rho": rho,
        "peak_J": peak["J"],
        "peak_m": peak["base_m"],
        "peak_n": peak["base_n"],
        "peak_p": cfg["base_p"],
        "peak_ess": peak["base_ess"],
        "equivalent_alt_m": peak["alt_m"],
        "equivalent_alt_n": n_alt,
        "n_reduction": 1.0 - n_alt / peak["base_n"],
        "households_saved": peak["base_n"] - n_alt,
    }
    text = _table(header, rows) + "\n" + "\n".join(f"{k} = {v:.6g}" for k, v in summary.items())
    return Output(header, rows, {"rows": rows_d, "summary": summary}, text)


def cmd_optimize(cfg, glob):
    rho = _rho(cfg["rho"])
    model = CorrelationModel(cfg["family"], cfg["r"], rho)
    spec = get_preset(cfg["family"], cfg["sampling"], "disc")
    cost = CostModel(cfg["cm"], cfg["cn"], cfg["C"], cfg["j_max"], cfg["j_min"])
    sol = optimize(model, spec, DensityModel(cfg["r0"]), cost, cfg["budget_scope"], cfg["m_cap"])
    d = sol.to_dict()
    header = list(d)
    rows = [[d[k] for k in header]]
    text = _table(header, rows) + "\n" + json.dumps(d, indent=2)
    return Output(header, rows, {**d, "rho": rho, "budget_scope": cfg["budget_scope"]}, text)


def cmd_rho_dichot(cfg, glob):
    rho = rho_dichotomous(DichotomousSpec(cfg["p"], cfg["p_cond"]), cfg["allow_above_one"])
    payload = {"p": cfg["p"], "p_cond": cfg["p_cond"], "rho": rho}
    return Output(["p", "p_cond", "rho"], [[cfg["p"], cfg["p_cond"], rho]], payload, f"{rho:.6f}")


def cmd_elicit(cfg, glob):
    prov = []
    sources = [cfg["p"] is not None or cfg["p_cond"] is not None, cfg["sd_ratio"] is not None,
               cfg["neighbour"] is not None or cfg["population"] is not None]
    if sum(sources) > 1:
        raise ValidationError("give exactly one source for rho: (p, p_cond), sd_ratio, or (neighbour, population, b)")
    rho = None
    if sources[0]:
        if cfg["p"] is None or cfg["p_cond"] is None:
            raise ValidationError("the dichotomous route needs both p and p_cond")
        rho = rho_dichotomous(DichotomousSpec(cfg["p"], cfg["p_cond"]), cfg["allow_above_one"])
        prov.append(f"rho = (p_cond - p) / (p (1 - p)) = ({cfg['p_cond']} - {cfg['p']}) / "
                    f"({cfg['p']} * {1 - cfg['p']:.6g}) = {rho:.6f}")
    elif sources[1]:
        rho = rho_from_sd_ratio(cfg["sd_ratio"])
        prov.append(f"rho = 1 - ratio^2 = 1 - {cfg['sd_ratio']}^2 = {rho:.6f}")
    elif sources[2]:
        if cfg["neighbour"] is None or cfg["population"] is None or cfg["b"] is None:
            raise ValidationError("the interval route needs neighbour, population and b")
        sd_n = sd_from_interval(*cfg["neighbour"], cfg["b"])
        sd_p = sd_from_interval(*cfg["population"], cfg["b"])
        prov.append(f"sd_neighbour = width / (2 z_(1+b)/2) = {sd_n:.6f} from {cfg['neighbour']} at b={cfg['b']}")
        prov.append(f"sd_population = {sd_p:.6f} from {cfg['population']} at b={cfg['b']}")
        ratio = sd_n / sd_p
        if ratio > 1:
            raise ValidationError(f"neighbour sd exceeds population sd (ratio {ratio:.6g} > 1)")
        rho = rho_from_sd_ratio(ratio)
        prov.append(f"rho = 1 - (sd_neighbour / sd_population)^2 = 1 - {ratio:.6f}^2 = {rho:.6f}")
    r = cfg["r"]
    if r is not None:
        prov.append(f"r = {r:g} (minimum plausible distance over which the population interval applies)")
    payload = {"rho": rho, "r": r, "provenance": prov}
    av = cfg["averaged"]
    if av is not None:
        spec = get_preset(av["family"], av["sampling"], "disc")
        h_r, h_rho = ElicitedDensity.from_config(av["h_r"]), ElicitedDensity.from_config(av["h_rho"])
        value = averaged_ess(av["R"], av["J"], av["n"], h_r, h_rho, spec, av["order"])
        payload["averaged_ess"] = value
        prov.append(f"averaged ESS over h_r={av['h_r']} and h_rho={av['h_rho']} = {value:.6f}")
    if rho is None and r is None and av is None:
        raise ValidationError("nothing to elicit: give a rho source, r, or an averaged block")
    header = ["quantity", "value"]
    rows = [[k, payload[k]] for k in ("rho", "r", "averaged_ess") if payload.get(k) is not None]
    lines = [f"{k} = {v:.6f}" for k, v in rows]
    return Output(header, rows, payload, "\n".join(lines + ["# " + p for p in prov]))


COMMANDS = {
    "ess": (cmd_ess, "exact effective sample size of point clusters"),
    "stilde": (cmd_stilde, "approximate mean within-cluster correlation"),
    "fit": (cmd_fit, "simulate (q, s) pairs and fit candidate curve forms"),
    "regen-table1": (cmd_regen, "regenerate the approximation coefficient table"),
    "simulate": (cmd_simulate, "scenario simulation of exact and approximate ESS"),
    "compare": (cmd_compare, "compare two enumeration strategies over J"),
    "optimize": (cmd_optimize, "budget-constrained design optimisation"),
    "rho-dichot": (cmd_rho_dichot, "rho from dichotomous outcome probabilities"),
    "elicit": (cmd_elicit, "rho and r from elicited quantities"),
}

# flag name -> (config key, type, nargs)
_FLAGS = {
    "ess": [("--points", "points", str), ("--family", "family", str), ("--rho", "rho", float), ("--r", "r", float)],
    "stilde": [("--family", "family", str), ("--sampling", "sampling", str), ("--shape", "shape", str),
               ("--r", "r", float), ("--R", "R", float), ("--n", "n", float)],
    "fit": [("--family", "family", str), ("--sampling", "sampling", str), ("--shape", "shape", str),
            ("--forms", "forms", str), ("--data", "data", str)],
    "regen-table1": [("--forms", "forms", str)],
    "simulate": [("--scenario", "scenario", str), ("--N", "N", int), ("--j-values", "j_values", str),
                 ("--rhos", "rhos", str), ("--rs", "rs", str), ("--families", "families", str),
                 ("--schemes", "schemes", str), ("--p", "p", float), ("--m", "m", int), ("--r0", "r0", float)],
    "compare": [("--family", "family", str), ("--sampling", "sampling", str), ("--rho", "rho", float),
                ("--r", "r", float), ("--r0", "r0", float), ("--N", "N", int), ("--j-values", "j_values", str),
                ("--base-p", "base_p", float), ("--alt-p", "alt_p", float)],
    "optimize": [("--family", "family", str), ("--sampling", "sampling", str), ("--rho", "rho", float),
                 ("--r", "r", float), ("--r0", "r0", float), ("--cm", "cm", float), ("--cn", "cn", float),
                 ("--C", "C", float), ("--j-min", "j_min", int), ("--j-max", "j_max", int),
                 ("--budget-scope", "budget_scope", str), ("--m-cap", "m_cap", int)],
    "rho-dichot": [("--p", "p", float), ("--p-cond", "p_cond", float)],
    "elicit": [("--p", "p", float), ("--p-cond", "p_cond", float), ("--sd-ratio", "sd_ratio", float),
               ("--b", "b", float), ("--r", "r", float)],
}
_PAIR_FLAGS = {"elicit": [("--neighbour", "neighbour"), ("--population", "population")]}
_BOOL_FLAGS = {"rho-dichot": [("--allow-above-one", "allow_above_one")],
               "elicit": [("--allow-above-one", "allow_above_one")]}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", default=argparse.SUPPRESS, help="YAML or JSON configuration file")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    g.add_argument("--replicates", type=int, default=argparse.SUPPRESS, help="simulation replicates (default 500)")
    g.add_argument("--jobs", dest="n_jobs", type=int, default=argparse.SUPPRESS, help="worker threads")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    g.add_argument("--format", choices=("csv", "json", "both"), default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="geocluster", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        for flag, key, typ in _FLAGS.get(name, []):
            sp.add_argument(flag, dest=f"cfg_{key}", type=typ, default=argparse.SUPPRESS)
        for flag, key in _PAIR_FLAGS.get(name, []):
            sp.add_argument(flag, dest=f"cfg_{key}", type=float, nargs=2, metavar=("LO", "HI"),
                            default=argparse.SUPPRESS)
        for flag, key in _BOOL_FLAGS.get(name, []):
            sp.add_argument(flag, dest=f"cfg_{key}", action="store_true", default=argparse.SUPPRESS)
    return parser


def _write_atomic(path, content):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {str(k): _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_outputs(command, resolved, output):
    out_dir = resolved["out"]
    os.makedirs(out_dir, exist_ok=True)
    digest = config_hash(resolved)
    echoed = reproducible_part(resolved)
    stem = os.path.join(out_dir, command)
    written = []
    if resolved["format"] in ("csv", "both"):
        buf = io.StringIO()
        buf.write(f"# config_hash: {digest}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(output.header)
        for row in output.rows:
            writer.writerow([_csv_cell(v) for v in row])
        _write_atomic(stem + ".csv", buf.getvalue())
        written.append(stem + ".csv")
    if resolved["format"] in ("json", "both"):
        doc = {"command": command, "config_hash": digest, "config": echoed, "result": output.payload}
        _write_atomic(stem + ".json", json.dumps(_to_builtin(doc), indent=2, sort_keys=True) + "\n")
        written.append(stem + ".json")
    return written


def main(argv=None):
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    try:
        doc = load_file(args.pop("config")) if "config" in args else {}
        flags = {k[4:]: v for k, v in args.items() if k.startswith("cfg_")}
        global_flags = {k: v for k, v in args.items() if not k.startswith("cfg_")}
        resolved = resolve(command, doc, global_flags, flags)
        echoed = {k: v for k, v in resolved.items() if k != "out"}
        print("# resolved config: " + json.dumps(echoed, sort_keys=True), file=sys.stderr)
        print(f"# config_hash: {config_hash(resolved)}", file=sys.stderr)
        handler = COMMANDS[command][0]
        glob = {k: resolved[k] for k in resolved if k != command}
        output = handler(resolved[command], glob)
        print(output.text)
        if resolved["out"] is not None:
            for path in write_outputs(command, resolved, output):
                print(f"# wrote {path}", file=sys.stderr)
    except InfeasibleError as exc:
        print(f"geocluster {command}: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValidationError, ValueError) as exc:
        print(f"geocluster {command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"geocluster {command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ComputationError, GeoclusterError, ArithmeticError) as exc:
        print(f"geocluster {command}: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
