"""Monte Carlo experiments: simulate, reconstruct, compare, aggregate.

Every random stream is keyed by (seed, trial, ...) so a trial gives the same
result whether it runs alone, in a sweep, or on another worker process.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import yaml
from scipy import stats

from .distance import median_matrix, neighbor_joining
from .errors import ConfigError, InputError, ReconstructionAbort, SaturationError
from .highways import planted_splits, road_roller
from .lgt import Highway, LgtParams, generate_gene_trees
from .newick import parse_newick, read_rates
from .quartets import quartet_plurality
from .rng import derive_rng, derive_seed
from .sequences import GtrModel, evolve_sequences, logdet_matrix
from .species import BoundedRatesParams, YuleParams, generate_bounded_rates, generate_yule
from .tree import extant_phylogeny, rf_distance, tree_distance_matrix

METHODS = ("qp", "mt", "mt-seq", "rr")
GENERATORS = ("yule", "bounded-rates", "newick")
TOP_KEYS = {"seed", "trials", "genes", "method", "generator", "yule", "br", "newick", "lgt",
            "highways", "seq", "gtr", "out", "threads"}
SWEEP_AXES = {"lambda": ("lgt", "target_lambda"), "R": ("lgt", "R"), "p": ("lgt", "p"),
              "N": (None, "genes"), "k": ("seq", "k")}


def _section(raw, name, allowed):
    block = raw.get(name) or {}
    if not isinstance(block, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    unknown = set(block) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    return block


def _number(x, name, lo=None, hi=None, integer=False, open_lo=False):
    if isinstance(x, str) and x.strip().lower() in ("inf", "+inf", "infinity", ".inf"):
        x = math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{name} must be a number, got {x!r}")
    if integer and (not float(x).is_integer()):
        raise ConfigError(f"{name} must be an integer")
    if lo is not None and (x < lo or (open_lo and x == lo)):
        raise ConfigError(f"{name} must be {'>' if open_lo else '>='} {lo}")
    if hi is not None and x > hi:
        raise ConfigError(f"{name} must be <= {hi}")
    return int(x) if integer else float(x)


@dataclass
class HighwayConfig:
    clade0: tuple
    clade1: tuple
    gamma: float
    direction: str = "perGeneUniform"


@dataclass
class ExperimentConfig:
    seed: int = 0
    trials: int = 10
    genes: int = 50
    method: str = "qp"
    generator: str = "yule"
    yule_n: int = 32
    yule_nu: float = 1.0
    br_n_plus: int = 32
    br_tau_bar: float = 1.0
    br_rho_tau: float = 0.5
    br_shape: str = "randomUltrametric"
    newick_path: str = ""
    newick_rates: str = ""
    lambda_bar: float | None = None
    target_lambda: float | None = None
    rho_lambda: float = 1.0
    R: float = math.inf
    p: float = 1.0
    highways: list = field(default_factory=list)
    gamma_lo: float = 0.1
    seq_k: int = 1000
    seq_rate: float = 1.0
    gtr_pi: tuple = (0.25, 0.25, 0.25, 0.25)
    gtr_rates: tuple = (1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    out: str = "results"
    threads: int = 1

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(raw) - TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        c = cls()
        c.seed = _number(raw.get("seed", 0), "seed", lo=0, integer=True)
        c.trials = _number(raw.get("trials", c.trials), "trials", lo=1, integer=True)
        c.genes = _number(raw.get("genes", c.genes), "genes", lo=1, integer=True)
        c.threads = _number(raw.get("threads", 1), "threads", lo=1, integer=True)
        c.method = raw.get("method", c.method)
        if c.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        c.generator = raw.get("generator", c.generator)
        if c.generator not in GENERATORS:
            raise ConfigError(f"generator must be one of {GENERATORS}")
        y = _section(raw, "yule", {"n", "nu"})
        c.yule_n = _number(y.get("n", c.yule_n), "yule.n", lo=2, integer=True)
        c.yule_nu = _number(y.get("nu", c.yule_nu), "yule.nu", lo=0, open_lo=True)
        br = _section(raw, "br", {"n_plus", "tau_bar", "rho_tau", "lambda_bar", "rho_lambda", "shape"})
        c.br_n_plus = _number(br.get("n_plus", c.br_n_plus), "br.n_plus", lo=2, integer=True)
        c.br_tau_bar = _number(br.get("tau_bar", c.br_tau_bar), "br.tau_bar", lo=0, open_lo=True)
        c.br_rho_tau = _number(br.get("rho_tau", c.br_rho_tau), "br.rho_tau", lo=0, hi=1, open_lo=True)
        c.br_shape = br.get("shape", c.br_shape)
        if c.br_shape not in ("completeBinary", "randomUltrametric"):
            raise ConfigError("br.shape must be completeBinary or randomUltrametric")
        nw = _section(raw, "newick", {"path", "rates"})
        base = Path(base_dir) if base_dir else Path(".")
        if nw.get("path"):
            c.newick_path = str(base / nw["path"])
        if nw.get("rates"):
            c.newick_rates = str(base / nw["rates"])
        if c.generator == "newick" and not c.newick_path:
            raise ConfigError("generator 'newick' needs newick.path")
        lgt = _section(raw, "lgt", {"lambda_bar", "target_lambda", "rho_lambda", "R", "p"})
        lam_bar = lgt.get("lambda_bar", br.get("lambda_bar"))
        if "lambda_bar" in lgt and "lambda_bar" in br and lgt["lambda_bar"] != br["lambda_bar"]:
            raise ConfigError("lgt.lambda_bar and br.lambda_bar disagree")
        target = lgt.get("target_lambda")
        if lam_bar is not None and target is not None:
            raise ConfigError("lgt.lambda_bar and lgt.target_lambda are mutually exclusive")
        if lam_bar is not None:
            c.lambda_bar = _number(lam_bar, "lambda_bar", lo=0)
        if target is not None:
            c.target_lambda = _number(target, "lgt.target_lambda", lo=0)
        if c.lambda_bar is None and c.target_lambda is None and not (
                c.generator == "newick" and c.newick_rates):
            raise ConfigError("set lgt.lambda_bar or lgt.target_lambda")
        c.rho_lambda = _number(lgt.get("rho_lambda", br.get("rho_lambda", 1.0)), "rho_lambda",
                               lo=0, hi=1, open_lo=True)
        c.R = _number(lgt.get("R", math.inf), "lgt.R", lo=0, open_lo=True)
        c.p = _number(lgt.get("p", 1.0), "lgt.p", lo=0, hi=1, open_lo=True)
        hw = _section(raw, "highways", {"gamma_lo", "list"})
        c.gamma_lo = _number(hw.get("gamma_lo", c.gamma_lo), "highways.gamma_lo", lo=0, hi=1,
                             open_lo=True)
        c.highways = []
        for i, h in enumerate(hw.get("list") or []):
            if not isinstance(h, dict) or not {"clade0", "clade1", "gamma"} <= set(h):
                raise ConfigError(f"highway {i} needs clade0, clade1 and gamma")
            c.highways.append(HighwayConfig(
                tuple(str(x) for x in h["clade0"]), tuple(str(x) for x in h["clade1"]),
                _number(h["gamma"], f"highway {i} gamma", lo=0, hi=1, open_lo=True),
                h.get("direction", "perGeneUniform")))
        seq = _section(raw, "seq", {"k", "rate"})
        c.seq_k = _number(seq.get("k", c.seq_k), "seq.k", lo=1, integer=True)
        c.seq_rate = _number(seq.get("rate", c.seq_rate), "seq.rate", lo=0, open_lo=True)
        gtr = _section(raw, "gtr", {"pi", "rates"})
        c.gtr_pi = tuple(gtr.get("pi", c.gtr_pi))
        c.gtr_rates = tuple(gtr.get("rates", c.gtr_rates))
        try:
            GtrModel(c.gtr_pi, c.gtr_rates)
        except InputError as exc:
            raise ConfigError(f"gtr: {exc}") from None
        c.out = str(raw.get("out", c.out))
        return c

    def with_value(self, axis: str, value) -> "ExperimentConfig":
        """Copy with one sweep axis set."""
        if axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {axis!r}; choose from {sorted(SWEEP_AXES)}")
        c = copy.deepcopy(self)
        if axis == "lambda":
            c.lambda_bar, c.target_lambda = None, float(value)
        elif axis == "R":
            c.R = float(value)
        elif axis == "p":
            c.p = float(value)
        elif axis == "N":
            c.genes = int(value)
        elif axis == "k":
            c.seq_k = int(value)
        return c


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return ExperimentConfig.from_dict(raw or {}, base_dir=Path(path).parent)


# ---------------------------------------------------------------------------
# one trial
# ---------------------------------------------------------------------------


def build_species(cfg: ExperimentConfig, trial: int):
    """Species phylogeny for a trial, with rates scaled to the requested level."""
    s = derive_seed(cfg.seed, trial, 0)
    lam_bar = 1.0 if cfg.target_lambda is not None else (cfg.lambda_bar or 0.0)
    if cfg.generator == "yule":
        sp = generate_yule(YuleParams(cfg.yule_n, cfg.yule_nu, lam_bar, cfg.rho_lambda, s))
    elif cfg.generator == "bounded-rates":
        sp = generate_bounded_rates(BoundedRatesParams(
            cfg.br_n_plus, cfg.br_tau_bar, cfg.br_rho_tau, lam_bar, cfg.rho_lambda, cfg.br_shape, s))
    else:
        with open(cfg.newick_path) as fh:
            sp = parse_newick(fh.read().strip(), kind="species")
        if cfg.newick_rates:
            sp = read_rates(cfg.newick_rates, sp)
        else:
            rng = derive_rng(cfg.seed, trial, 0)
            lam = rng.uniform(cfg.rho_lambda * lam_bar, lam_bar, size=len(sp))
            lam[sp.root] = 0.0
            sp = sp.with_rates(lam)
    if cfg.target_lambda is not None:
        sp = scale_to_target(sp, cfg.target_lambda)
    return sp


def scale_to_target(sp, target: float):
    """Rescale every rate so that the extant LGT weight equals ``target``."""
    current = float(np.sum(extant_phylogeny(sp).edge_weight))
    if target == 0:
        return sp.scale_rates(0.0)
    if current <= 0:
        raise ConfigError("cannot rescale a phylogeny with zero LGT rates to a positive target")
    return sp.scale_rates(target / current)


def resolve_highways(sp, cfg: ExperimentConfig) -> list:
    by_clade = {frozenset(sp.clusters[v]): v for v in range(len(sp)) if v != sp.root}
    out = []
    for i, h in enumerate(cfg.highways):
        e = [by_clade.get(frozenset(c)) for c in (h.clade0, h.clade1)]
        if None in e:
            raise ConfigError(f"highway {i}: clade not found in the species phylogeny")
        out.append(Highway(e[0], e[1], h.gamma, h.direction))
    return out


@dataclass
class TrialRecord:
    trial: int
    seed: int
    lambda_tot: float
    extant_lambda: float
    events: int
    success: bool
    rf: int
    discarded_genes: int
    discarded_events: int
    saturated_pairs: int
    aborted: str = ""
    median_exact: bool = False
    highways_called: int = 0
    highways_correct: int = 0
    runtime: float = 0.0

    CSV_FIELDS = ("trial", "seed", "lambda_tot", "extant_lambda", "events", "success", "rf",
                  "discarded_genes", "discarded_events", "saturated_pairs", "aborted",
                  "median_exact", "highways_called", "highways_correct")


def _seq_matrices(genes, cfg, trial):
    model = GtrModel(cfg.gtr_pi, cfg.gtr_rates)
    mats, saturated = [], 0
    for g, gene in enumerate(genes):
        aln = evolve_sequences(gene, model, cfg.seq_k, derive_rng(cfg.seed, trial, 2, g), g)
        D, s = logdet_matrix(aln)
        mats.append(D)
        saturated += s
    return mats, saturated


def run_trial(cfg: ExperimentConfig, trial: int) -> TrialRecord:
    t0 = time.perf_counter()
    sp = build_species(cfg, trial)
    total, extant = float(np.sum(sp.edge_weight)), float(np.sum(extant_phylogeny(sp).edge_weight))
    highways = resolve_highways(sp, cfg)
    rates = None if cfg.seq_rate == 1.0 else [cfg.seq_rate] * len(sp)
    params = LgtParams(cfg.R, cfg.p, cfg.seed)
    samples = generate_gene_trees(sp, params, cfg.genes, highways, stream=(trial,),
                                  rates=rates, details=True)
    genes = [s.gene for s in samples if not s.gene.is_empty]
    truth = extant_phylogeny(sp)
    taxa = sorted(truth.taxa)
    rec = TrialRecord(trial, derive_seed(cfg.seed, trial, 0), total, extant,
                      sum(len(s.events) for s in samples), False, -1,
                      len(samples) - len(genes), sum(s.discarded for s in samples), 0)
    try:
        if not genes:
            raise ReconstructionAbort("every gene tree was empty")
        if cfg.method == "qp":
            est = quartet_plurality(genes, taxa)
        elif cfg.method == "mt":
            med = median_matrix(genes, taxa)
            true_d = tree_distance_matrix(truth, taxa).values
            rec.median_exact = bool(np.allclose(med.matrix.values, true_d, rtol=1e-9, atol=1e-12))
            est = neighbor_joining(med.matrix)
        elif cfg.method == "mt-seq":
            mats, rec.saturated_pairs = _seq_matrices(genes, cfg, trial)
            est = neighbor_joining(median_matrix(mats, taxa).matrix)
        else:
            est, report = road_roller(genes, taxa, cfg.gamma_lo)
            want = {planted_splits(sp, h.edge0, h.edge1) for h in highways}
            got = [frozenset(c.splits) for c in report.calls]
            rec.highways_called = len(got)
            rec.highways_correct = sum(g in want for g in set(got))
        rec.rf = rf_distance(est, truth)
        rec.success = rec.rf == 0
        if cfg.method == "rr":
            rec.success = rec.success and rec.highways_correct == len(highways) \
                and rec.highways_called == len(highways)
    except (ReconstructionAbort, SaturationError) as exc:
        rec.aborted = type(exc).__name__
    rec.runtime = time.perf_counter() - t0
    return rec


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------


def clopper_pearson(k: int, n: int, level: float = 0.95):
    """Exact binomial confidence interval for k successes in n trials."""
    if n == 0:
        return 0.0, 1.0
    a = 1 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


@dataclass
class ExperimentResult:
    records: list
    successes: int
    trials: int
    success_rate: float
    ci: tuple
    mean_rf: float

    def summary(self) -> dict:
        aborts = Counter(r.aborted for r in self.records if r.aborted)
        return {"trials": self.trials, "successes": self.successes,
                "success_rate": self.success_rate, "ci_low": self.ci[0], "ci_high": self.ci[1],
                "mean_rf": self.mean_rf, "aborts": dict(sorted(aborts.items()))}


def _map_trials(cfg, trials, threads):
    fn = partial(run_trial, cfg)
    if threads <= 1 or len(trials) <= 1:
        return [fn(t) for t in trials]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, trials, chunksize=max(1, len(trials) // (4 * threads))))


def aggregate(records) -> ExperimentResult:
    n = len(records)
    k = sum(r.success for r in records)
    rfs = [r.rf for r in records if r.rf >= 0]
    return ExperimentResult(records, k, n, k / n if n else 0.0, clopper_pearson(k, n),
                            float(np.mean(rfs)) if rfs else float("nan"))


def run_experiment(cfg: ExperimentConfig, threads: int | None = None, out=None) -> ExperimentResult:
    """Run every trial and optionally write trials.csv, summary.json, timings.csv."""
    threads = cfg.threads if threads is None else threads
    records = _map_trials(cfg, list(range(cfg.trials)), threads)
    result = aggregate(records)
    if out is not None:
        write_outputs(result, out)
    return result


def write_outputs(result: ExperimentResult, out) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trials.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TrialRecord.CSV_FIELDS)
        for r in result.records:
            row = asdict(r)
            w.writerow([_fmt(row[f]) for f in TrialRecord.CSV_FIELDS])
    with open(out / "summary.json", "w") as fh:
        json.dump(result.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    # wall-clock times vary run to run, so they live apart from the reproducible outputs
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "runtime_s"])
        for r in result.records:
            w.writerow([r.trial, f"{r.runtime:.6f}"])


def _fmt(x):
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, float):
        return repr(x)
    return x


SWEEP_FIELDS = ("axis", "value", "trials", "successes", "success_rate", "ci_low", "ci_high",
                "mean_rf")


def sweep(cfg: ExperimentConfig, axis: str, grid, threads: int | None = None, out=None) -> list:
    """One experiment per grid value, all sharing the base seed."""
    rows = []
    for value in grid:
        res = run_experiment(cfg.with_value(axis, value), threads=threads)
        rows.append({"axis": axis, "value": value, "trials": res.trials,
                     "successes": res.successes, "success_rate": res.success_rate,
                     "ci_low": res.ci[0], "ci_high": res.ci[1], "mean_rf": res.mean_rf})
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SWEEP_FIELDS)
            for r in rows:
                w.writerow([_fmt(r[f]) for f in SWEEP_FIELDS])
    return rows


def report(sweep_csv, out) -> list:
    """Two-column gnuplot files (value, success rate) per axis plus summary.json."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(sweep_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    by_axis = {}
    for r in rows:
        by_axis.setdefault(r["axis"], []).append(r)
    written = []
    for axis, rs in sorted(by_axis.items()):
        path = out / f"{axis}.dat"
        with open(path, "w") as fh:
            fh.write(f"# {axis} success_rate\n")
            for r in rs:
                fh.write(f"{r['value']} {r['success_rate']}\n")
        written.append(path)
    summary = {axis: [{k: r[k] for k in SWEEP_FIELDS if k != "axis"} for r in rs]
               for axis, rs in sorted(by_axis.items())}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return written


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))
