"""Batch command-line front end.

    fringelab <hom|simulate|fit|predict|reproduce-fig3> --config cfg.json
              [--seed N] [--out DIR]

Every subcommand reads a JSON config, writes CSV/JSON artifacts into the
output directory, and is deterministic given (config, seed).  Exit codes:
0 success, 2 config error, 3 parse error, 4 non-convergence or ill-posed
data.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import detection, estimation, fock, metrology, spectral
from .errors import IllPosedError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_NONCONVERGENCE = 4


class ConfigError(ValueError):
    pass


class ParseError(ValueError):
    pass


class NonConvergence(RuntimeError):
    pass


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _check_keys(data: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(data)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return data


def _read_csv(path: str, header: str) -> list[tuple[int, list[str]]]:
    """Rows as (line_number, fields); raises ParseError with line numbers."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError(f"{path}:1: empty file, expected header '{header}'")
    if lines[0].strip() != header:
        raise ParseError(f"{path}:1: expected header '{header}', got '{lines[0].strip()}'")
    rows = []
    n_fields = len(header.split(","))
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != n_fields:
            raise ParseError(f"{path}:{i}: expected {n_fields} fields, got {len(fields)}")
        rows.append((i, fields))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return rows


def _float_field(path: str, line: int, value: str, name: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"{path}:{line}: bad {name} value '{value}'") from None


# ---------------------------------------------------------------------------
# Experiment configuration.


def _build_probe(probe_cfg: dict):
    if not isinstance(probe_cfg, dict) or "type" not in probe_cfg:
        raise ConfigError("probe: must be an object with a 'type' key")
    kind = probe_cfg["type"]
    try:
        if kind == "two_photon":
            _check_keys(probe_cfg, {"type", "iprime"}, {"iprime"}, "probe")
            return fock.spdc_two_photon(float(probe_cfg["iprime"]))
        if kind == "four_photon":
            _check_keys(probe_cfg, {"type", "lambdas", "tau"}, {"lambdas", "tau"}, "probe")
            spectrum = spectral.SchmidtSpectrum([float(v) for v in probe_cfg["lambdas"]])
            return fock.four_photon_schmidt(spectrum, float(probe_cfg["tau"]))
        if kind == "dual_fock":
            _check_keys(probe_cfg, {"type", "n", "indist"}, {"n", "indist"}, "probe")
            return fock.dual_fock_mismatched(int(probe_cfg["n"]), float(probe_cfg["indist"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"probe: {exc}") from exc
    raise ConfigError(f"probe.type: unknown probe type '{kind}'")


def _phase_grid(phases_cfg: dict | None) -> np.ndarray:
    if phases_cfg is None:
        phases_cfg = {}
    _check_keys(phases_cfg, {"count", "start", "stop"}, set(), "phases")
    count = int(phases_cfg.get("count", 32))
    if count < 1:
        raise ConfigError("phases.count: must be positive")
    start = float(phases_cfg.get("start", 0.0))
    stop = float(phases_cfg.get("stop", 2.0 * math.pi))
    if stop <= start:
        raise ConfigError("phases.stop: must exceed phases.start")
    return start + (stop - start) * np.arange(count) / count


_EXPERIMENT_KEYS = {
    "probe",
    "zeta",
    "bins_per_arm",
    "phases",
    "expected_counts_per_point",
    "seed",
    "restarts",
    "bootstrap_trials",
}


def _experiment_config(data: dict, *, need_probe: bool, extra: set[str] = frozenset()) -> dict:
    allowed = _EXPERIMENT_KEYS | extra
    required = {"expected_counts_per_point"} | ({"probe"} if need_probe else set())
    _check_keys(data, allowed, required, "config")
    try:
        noise = detection.NoiseAndEfficiencyConfig(
            zeta=float(data.get("zeta", 0.0)),
            bins_per_arm=int(data.get("bins_per_arm", 4)),
        )
    except ValueError as exc:
        raise ConfigError(f"zeta/bins_per_arm: {exc}") from exc
    expected = float(data["expected_counts_per_point"])
    if expected <= 0:
        raise ConfigError("expected_counts_per_point: must be positive")
    return {
        "probe": _build_probe(data["probe"]) if need_probe else None,
        "noise": noise,
        "phases": _phase_grid(data.get("phases")),
        "expected": expected,
        "seed": int(data.get("seed", 0)),
        "restarts": int(data.get("restarts", 8)),
        "bootstrap_trials": int(data.get("bootstrap_trials", 100)),
    }


# ---------------------------------------------------------------------------
# Simulation and fitting building blocks shared by subcommands.


def _simulate_points(probe, noise, phases, expected, seed):
    """Per-phase sampled class counts plus the ground-truth probabilities."""
    family = metrology.counting_family(probe, noise.zeta)
    etas = detection.class_efficiencies(family.n_photons, noise.bins_per_arm)
    children = np.random.SeedSequence(seed).spawn(len(phases))
    points = []
    truth = []
    for child, theta in zip(children, phases):
        probs = family.evaluator(float(theta))
        means = {c: probs[c] * etas[c] for c in family.classes}
        counts = detection.sample_counts(means, expected, child)
        points.append((float(theta), counts))
        truth.append({c: probs[c] for c in family.classes})
    return family, etas, points, truth


def _write_fringe_csv(path: Path, points) -> None:
    lines = ["theta,class,count"]
    for theta, counts in points:
        for c in sorted(counts):
            lines.append(f"{_fmt(theta)},{c},{counts[c]}")
    path.write_text("\n".join(lines) + "\n")


def _write_truth_json(path: Path, family, etas, truth, points, noise, expected) -> None:
    payload = {
        "classes": list(family.classes),
        "zeta": noise.zeta,
        "bins_per_arm": noise.bins_per_arm,
        "efficiencies": {str(c): etas[c] for c in family.classes},
        "expected_counts_per_point": expected,
        "theta": [theta for theta, _ in points],
        "probs": [[row[c] for c in family.classes] for row in truth],
    }
    path.write_text(json.dumps(payload, indent=1) + "\n")


def _fit_pipeline(dataset, harmonics, restarts, trials, seed):
    fit = estimation.fit_mle(dataset, harmonics, restarts=restarts, seed=seed)
    fisher = estimation.fisher_from_model(fit.model)
    boot = estimation.bootstrap_errors(fit, dataset, trials=trials, seed=seed + 1)
    return fit, fisher, boot


def _fit_report_payload(fit, fisher, boot) -> dict:
    return {
        "fit": {
            "model": json.loads(fit.model.to_json()),
            "log_likelihood": fit.log_likelihood,
            "converged": fit.converged,
            "restarts_used": fit.restarts_used,
        },
        "fisher": json.loads(fisher.to_json()),
        "bootstrap": json.loads(boot.to_json()),
    }


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_hom(config: dict, out: Path) -> int:
    _check_keys(config, {"input", "init"}, {"input", "init"}, "config")
    init = config["init"]
    _check_keys(init, {"a", "b", "sigma"}, {"a", "b", "sigma"}, "init")
    rows = _read_csv(str(config["input"]), "x,p,weight")
    points = []
    for line, (xs, ps, ws) in rows:
        points.append(
            (
                _float_field(config["input"], line, xs, "x"),
                _float_field(config["input"], line, ps, "p"),
                _float_field(config["input"], line, ws, "weight"),
            )
        )
    try:
        fit = spectral.fit_hom_dip(
            points, (float(init["a"]), float(init["b"]), float(init["sigma"]))
        )
    except IllPosedError as exc:
        raise NonConvergence(f"dip fit is ill-posed: {exc}") from exc
    (out / "hom_fit.json").write_text(fit.to_json() + "\n")
    xs = sorted({x for x, _, _ in points})
    lines = ["x,iprime"]
    for x in xs:
        q = spectral.quartic_gaussian_overlap(x, fit.sigma) if not fit.ill_posed else 0.0
        lines.append(f"{_fmt(x)},{_fmt(1.0 - 2.0 * (fit.a + fit.b * q))}")
    (out / "iprime_curve.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'hom_fit.json'} and {out / 'iprime_curve.csv'}")
    if fit.ill_posed:
        raise NonConvergence("dip fit is ill-posed (sigma unidentifiable)")
    return EXIT_OK


def cmd_simulate(config: dict, out: Path) -> int:
    cfg = _experiment_config(config, need_probe=True)
    family, etas, points, truth = _simulate_points(
        cfg["probe"], cfg["noise"], cfg["phases"], cfg["expected"], cfg["seed"]
    )
    _write_fringe_csv(out / "fringe.csv", points)
    _write_truth_json(
        out / "fringe_truth.json", family, etas, truth, points, cfg["noise"], cfg["expected"]
    )
    print(f"wrote {out / 'fringe.csv'} and {out / 'fringe_truth.json'}")
    return EXIT_OK


def cmd_fit(config: dict, out: Path) -> int:
    allowed = {"fringe_csv", "efficiency_json", "harmonics", "restarts", "bootstrap_trials", "seed"}
    _check_keys(config, allowed, {"fringe_csv", "efficiency_json", "harmonics"}, "config")
    rows = _read_csv(str(config["fringe_csv"]), "theta,class,count")
    by_theta: dict[float, dict[int, int]] = {}
    for line, (ts, cs, xs) in rows:
        theta = _float_field(config["fringe_csv"], line, ts, "theta")
        try:
            cls, count = int(cs), int(xs)
        except ValueError:
            raise ParseError(
                f"{config['fringe_csv']}:{line}: class and count must be integers"
            ) from None
        by_theta.setdefault(theta, {})[cls] = count
    try:
        eff_text = Path(str(config["efficiency_json"])).read_text()
        eff = {int(k): float(v) for k, v in json.loads(eff_text).items()}
    except OSError as exc:
        raise ParseError(f"cannot read {config['efficiency_json']}: {exc}") from exc
    except (json.JSONDecodeError, ValueError) as exc:
        raise ParseError(f"{config['efficiency_json']}: {exc}") from exc
    try:
        dataset = estimation.FringeDataset(
            tuple((t, by_theta[t]) for t in sorted(by_theta)), eff
        )
        fit, fisher, boot = _fit_pipeline(
            dataset,
            [int(k) for k in config["harmonics"]],
            int(config.get("restarts", 50)),
            int(config.get("bootstrap_trials", 200)),
            int(config.get("seed", 0)),
        )
    except IllPosedError as exc:
        raise NonConvergence(f"fit is ill-posed: {exc}") from exc
    (out / "fit_report.json").write_text(
        json.dumps(_fit_report_payload(fit, fisher, boot), indent=1) + "\n"
    )
    print(f"wrote {out / 'fit_report.json'}")
    if not fit.converged:
        raise NonConvergence("maximum-likelihood fit did not converge")
    return EXIT_OK


def cmd_predict(config: dict, out: Path) -> int:
    if "mode" not in config:
        raise ConfigError("config: missing keys ['mode']")
    mode = config["mode"]
    path = out / "prediction.csv"
    if mode == "two_photon_curve":
        _check_keys(config, {"mode", "zeta", "iprimes"}, {"zeta"}, "config")
        zeta = float(config["zeta"])
        grid_cfg = config.get("iprimes", {"count": 51})
        if isinstance(grid_cfg, dict):
            _check_keys(grid_cfg, {"count"}, {"count"}, "iprimes")
            grid = np.linspace(0.0, 1.0, int(grid_cfg["count"]))
        else:
            grid = np.array([float(v) for v in grid_cfg])
        try:
            curve = metrology.predicted_fprime_curve(grid, zeta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        lines = ["iprime,fprime"]
        lines += [f"{_fmt(ip)},{_fmt(fp)}" for ip, fp in zip(grid, curve)]
    elif mode == "four_photon_extremes":
        _check_keys(config, {"mode", "lambda4", "zeta"}, {"lambda4", "zeta"}, "config")
        try:
            full, zero = metrology.predict_four_photon_extremes(
                float(config["lambda4"]), float(config["zeta"])
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        lines = ["iprime,fprime", f"1,{_fmt(full)}", f"0,{_fmt(zero)}"]
    elif mode == "small_angle":
        _check_keys(config, {"mode", "n", "indist"}, {"n", "indist"}, "config")
        try:
            value = metrology.small_angle_fisher(int(config["n"]), float(config["indist"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        lines = ["n,indist,fisher", f"{int(config['n'])},{_fmt(config['indist'])},{_fmt(value)}"]
    else:
        raise ConfigError(f"mode: unknown prediction mode '{mode}'")
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_reproduce_fig3(config: dict, out: Path) -> int:
    cfg = _experiment_config(config, need_probe=False, extra={"iprimes"})
    grid_cfg = config.get("iprimes", {"count": 6})
    if isinstance(grid_cfg, dict):
        _check_keys(grid_cfg, {"count"}, {"count"}, "iprimes")
        grid = np.linspace(0.0, 1.0, int(grid_cfg["count"]))
    else:
        grid = np.array([float(v) for v in grid_cfg])
    zeta = cfg["noise"].zeta
    seeds = np.random.SeedSequence(cfg["seed"]).spawn(len(grid))
    rows = []
    for point_seed, iprime in zip(seeds, grid):
        iprime = float(iprime)
        try:
            probe = fock.spdc_two_photon(iprime)
            sub_seeds = point_seed.generate_state(2)
            _, etas, points, _ = _simulate_points(
                probe, cfg["noise"], cfg["phases"], cfg["expected"], int(sub_seeds[0])
            )
            dataset = estimation.FringeDataset(tuple(points), etas)
            fit, fisher, boot = _fit_pipeline(
                dataset, [2], cfg["restarts"], cfg["bootstrap_trials"], int(sub_seeds[1])
            )
            if not fit.converged:
                raise NonConvergence("fit did not converge")
            predicted = metrology.optimal_fisher_two_photon(iprime, zeta).value / 2.0
        except (ValueError, RuntimeError) as exc:
            raise NonConvergence(f"stage failure at iprime={iprime}: {exc}") from exc
        rows.append(
            {
                "iprime": iprime,
                "fprime": fisher.per_photon,
                "sigma": boot.sigma_per_photon,
                "predicted": predicted,
            }
        )
    lines = ["iprime,fprime,sigma,predicted"]
    for r in rows:
        lines.append(
            f"{_fmt(r['iprime'])},{_fmt(r['fprime'])},{_fmt(r['sigma'])},{_fmt(r['predicted'])}"
        )
    (out / "fig3.csv").write_text("\n".join(lines) + "\n")
    deviations = [
        abs(r["fprime"] - r["predicted"]) / r["sigma"] if r["sigma"] > 0 else math.inf
        for r in rows
    ]
    summary = {
        "points": rows,
        "max_abs_deviation_sigma": max(deviations),
    }
    (out / "fig3_summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(f"wrote {out / 'fig3.csv'} and {out / 'fig3_summary.json'}")
    return EXIT_OK


_COMMANDS = {
    "hom": cmd_hom,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "reproduce-fig3": cmd_reproduce_fig3,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fringelab",
        description="Simulate, fit, and predict photon-counting interference fringes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NonConvergence as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
