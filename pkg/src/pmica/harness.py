"""Seeded Monte Carlo sweeps reproducing the synthetic experiments at desk scale.

Each sweep is a grid of cells, each cell is repeated ``replicates`` times,
and replicate ``r`` of cell ``c`` draws from ``default_rng([seed, c, r])``.
Cells run sequentially or in a process pool; the tables do not depend on
which.  Every row carries a digest of the producing :class:`SweepSpec`.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .cumulants import cumulant_tensor, whiten
from .metrics import distance_to_subspace, gap_and_offdiag
from .optim import FitConfig, random_orthogonal, rgd_fit
from .samplers import mix, pilot_scales, sample_alpha_mix, sample_dirichlet_l1
from .subspace import DIAG, PMI

__all__ = [
    "SweepSpec",
    "SweepResult",
    "PRESETS",
    "preset",
    "mixing_matrix",
    "run_sweep",
    "run_alpha_sweep",
    "run_gap4_curve",
    "run_dimension_sweep",
    "run_trials_sweep",
    "run_sample_complexity",
    "loglog_slope",
    "write_csv",
]

EXPERIMENTS = ("alpha_sweep", "gap4_curve", "dimension_sweep", "trials_sweep",
               "sample_complexity")
METHODS = {"rgd-pmica": PMI, "rgd-ica": DIAG}


@dataclass
class SweepSpec:
    """One experiment: its grid, replicate count, base seed and sample size.

    ``grid`` keys by experiment:

    * ``alpha_sweep`` / ``gap4_curve``: ``alpha`` (list of floats)
    * ``dimension_sweep``: ``n`` (list of ints)
    * ``trials_sweep``: ``n`` and ``inits`` (list of start counts)
    * ``sample_complexity``: ``n`` and ``N`` (list of sample sizes)

    ``threshold`` is the distance to PMI below which a fit counts as a
    recovery.  ``fit`` holds :class:`FitConfig` overrides.
    """

    experiment: str
    grid: dict
    replicates: int = 10
    seed: int = 0
    n_samples: int = 100_000
    n_inits: int = 25
    threshold: float = 0.02
    methods: tuple = ("rgd-pmica", "rgd-ica")
    fit: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            raise ValueError("grid axes must be non-empty")
        self.methods = tuple(self.methods)
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
        need = {"alpha_sweep": ("alpha",), "gap4_curve": ("alpha",),
                "dimension_sweep": ("n",), "trials_sweep": ("n", "inits"),
                "sample_complexity": ("n", "N")}[self.experiment]
        for key in need:
            if key not in self.grid:
                raise ValueError(f"{self.experiment} needs grid key {key!r}")

    def to_dict(self):
        out = asdict(self)
        out["methods"] = list(self.methods)
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


PRESETS = {
    "fig3": dict(experiment="alpha_sweep",
                 grid={"alpha": [round(0.1 * k, 1) for k in range(11)]}),
    "gap4": dict(experiment="gap4_curve",
                 grid={"alpha": [round(0.1 * k, 1) for k in range(11)]},
                 n_samples=1_000_000, replicates=3),
    "fig4": dict(experiment="dimension_sweep", grid={"n": [2, 3, 4]}, replicates=5),
    "fig5": dict(experiment="trials_sweep",
                 grid={"n": [2, 3], "inits": [1, 2, 5, 10, 20, 50]}, replicates=10),
    "fig6": dict(experiment="sample_complexity",
                 grid={"n": [2], "N": [1_000, 10_000, 100_000, 1_000_000]}, replicates=20),
}


def preset(name, **overrides):
    """A :class:`SweepSpec` from a named preset (``fig3 fig4 fig5 fig6 gap4``)."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return SweepSpec(**{**PRESETS[name], **overrides})


def mixing_matrix(seed, n):
    """The fixed Haar-random mixing matrix of an experiment with base ``seed``."""
    return random_orthogonal(n, np.random.default_rng([seed, 1_000_003, n]))


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list
    summary: dict
    manifest: dict

    def to_dict(self):
        return {"spec": self.spec.to_dict(), "rows": self.rows,
                "summary": self.summary, "manifest": self.manifest}


def write_csv(rows, path):
    """Write a list of flat dicts as CSV (columns in first-row order)."""
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def loglog_slope(x, y):
    """Least-squares slope of ``log10 y`` against ``log10 x``."""
    x = np.log10(np.asarray(x, dtype=np.float64))
    y = np.log10(np.asarray(y, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


# ----------------------------------------------------------------- cells

def _fit_cfg(spec, rng, **extra):
    kw = {"n_inits": spec.n_inits, **spec.fit, **extra}
    return FitConfig(seed=int(rng.integers(2**31)), **kw)


def _whitened_cumulant(S, A):
    return cumulant_tensor(whiten(mix(S, A)).whitened, 4)


def _alpha_cell(args):
    spec, cell, alpha, rep = args
    rng = np.random.default_rng([spec.seed, cell, rep])
    S = sample_alpha_mix(spec.n_samples, alpha, rng)
    K = _whitened_cumulant(S, mixing_matrix(spec.seed, 2))
    cfg = _fit_cfg(spec, rng)
    out = {}
    for m in spec.methods:
        Q = rgd_fit(K, METHODS[m], cfg).best_Q
        out[m] = (distance_to_subspace(Q, K, PMI), distance_to_subspace(Q, K, DIAG))
    return out


def _gap_cell(args):
    spec, cell, alpha, rep = args
    rng = np.random.default_rng([spec.seed, cell, rep])
    gap, off = gap_and_offdiag(cumulant_tensor(sample_alpha_mix(spec.n_samples, alpha, rng), 4))
    return gap, off


def _dimension_cell(args):
    spec, cell, n, rep = args
    rng = np.random.default_rng([spec.seed, cell, rep])
    S = sample_dirichlet_l1(spec.n_samples, n, rng)
    K = _whitened_cumulant(S, mixing_matrix(spec.seed, n))
    cfg = _fit_cfg(spec, rng)
    out = {}
    for m in spec.methods:
        Q = rgd_fit(K, METHODS[m], cfg).best_Q
        out[m] = (distance_to_subspace(Q, K, PMI), distance_to_subspace(Q, K, DIAG))
    return out


def _trials_cell(args):
    spec, cell, n, rep = args
    rng = np.random.default_rng([spec.seed, cell, rep])
    S = sample_dirichlet_l1(spec.n_samples, n, rng)
    K = _whitened_cumulant(S, mixing_matrix(spec.seed, n))
    kmax = max(spec.grid["inits"])
    fit = rgd_fit(K, PMI, _fit_cfg(spec, rng, n_inits=kmax, include_identity=False))
    values = np.minimum.accumulate([r.value for r in fit.per_init])
    norm2 = float(np.sum(K.values ** 2 * K.multiplicities))
    return np.sqrt(np.maximum(values, 0.0) / norm2)


def _complexity_cell(args):
    spec, cell, n, N, rep = args
    rng = np.random.default_rng([spec.seed, cell, rep])
    S = sample_dirichlet_l1(N, n, rng)
    K = _whitened_cumulant(S, mixing_matrix(spec.seed, n))
    Q = rgd_fit(K, PMI, _fit_cfg(spec, rng)).best_Q
    return K.values, distance_to_subspace(Q, K, PMI)


def _map(fn, jobs, threads):
    if threads and threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs, chunksize=1))
    return [fn(j) for j in jobs]


def _median(xs):
    return float(np.median(np.asarray(xs, dtype=np.float64)))


# ----------------------------------------------------------- experiments

def run_alpha_sweep(spec, threads=1):
    """Median distances to PMI and to independence of both fits, per alpha.

    Data: ``sample_alpha_mix`` mixed by the fixed Haar matrix, whitened; the
    fourth cumulant is fitted with the PMI pattern (``rgd-pmica``) and the
    diagonal pattern (``rgd-ica``).  ``summary["crossing_alpha"]`` is the
    smallest grid alpha at which the ``rgd-ica`` median distance to PMI
    exceeds ``threshold``.
    """
    alphas = [float(a) for a in spec.grid["alpha"]]
    jobs = [(spec, c, a, r) for c, a in enumerate(alphas) for r in range(spec.replicates)]
    res = _map(_alpha_cell, jobs, threads)
    rows = []
    digest = spec.digest()
    for c, a in enumerate(alphas):
        cell = res[c * spec.replicates:(c + 1) * spec.replicates]
        for m in spec.methods:
            rows.append({"alpha": a, "method": m,
                         "distance_to_pmi": _median([x[m][0] for x in cell]),
                         "distance_to_indep": _median([x[m][1] for x in cell]),
                         "replicates": spec.replicates, "spec_digest": digest})
    crossing = None
    if "rgd-ica" in spec.methods:
        fails = [r["alpha"] for r in rows
                 if r["method"] == "rgd-ica" and r["distance_to_pmi"] > spec.threshold]
        crossing = min(fails) if fails else None
    return rows, {"crossing_alpha": crossing, "threshold": spec.threshold,
                  "source_scales": {str(a): pilot_scales("alpha", (a,)).tolist()
                                    for a in alphas}}


def run_gap4_curve(spec, threads=1):
    """``gap4``, off-diagonal norm and their ratio for the standardized alpha law (no mixing)."""
    alphas = [float(a) for a in spec.grid["alpha"]]
    jobs = [(spec, c, a, r) for c, a in enumerate(alphas) for r in range(spec.replicates)]
    res = _map(_gap_cell, jobs, threads)
    rows = []
    digest = spec.digest()
    for c, a in enumerate(alphas):
        cell = res[c * spec.replicates:(c + 1) * spec.replicates]
        gap = _median([g for g, _ in cell])
        off = _median([o for _, o in cell])
        ratio = _median([g / o if o > 0 else math.inf for g, o in cell])
        rows.append({"alpha": a, "gap4": gap, "offdiag_norm": off, "ratio": ratio,
                     "replicates": spec.replicates, "spec_digest": digest})
    return rows, {}


def run_dimension_sweep(spec, threads=1):
    """Best-of-``n_inits`` distances per method and dimension on Dirichlet-L1 sources."""
    ns = [int(n) for n in spec.grid["n"]]
    jobs = [(spec, c, n, r) for c, n in enumerate(ns) for r in range(spec.replicates)]
    res = _map(_dimension_cell, jobs, threads)
    rows = []
    digest = spec.digest()
    for c, n in enumerate(ns):
        cell = res[c * spec.replicates:(c + 1) * spec.replicates]
        for m in spec.methods:
            rows.append({"n": n, "method": m,
                         "distance_to_pmi": _median([x[m][0] for x in cell]),
                         "distance_to_indep": _median([x[m][1] for x in cell]),
                         "replicates": spec.replicates, "spec_digest": digest})
    return rows, {}


def run_trials_sweep(spec, threads=1):
    """Probability that the best of the first ``k`` random starts recovers a PMI fit.

    Each replicate runs ``max(inits)`` Haar starts once (no identity start)
    and reads off the prefix minima, so the curves over ``k`` are nested.
    ``summary["inits_for_half"][n]`` is the smallest grid ``k`` with success
    rate at least 1/2 (``None`` if never reached).
    """
    ns = [int(n) for n in spec.grid["n"]]
    ks = sorted(int(k) for k in spec.grid["inits"])
    if ks[0] < 1:
        raise ValueError("init counts must be >= 1")
    jobs = [(spec, c, n, r) for c, n in enumerate(ns) for r in range(spec.replicates)]
    res = _map(_trials_cell, jobs, threads)
    rows = []
    half = {}
    digest = spec.digest()
    for c, n in enumerate(ns):
        cell = np.array(res[c * spec.replicates:(c + 1) * spec.replicates])
        for k in ks:
            best = cell[:, k - 1]
            rate = float(np.mean(best < spec.threshold))
            rows.append({"n": n, "inits": k, "success_rate": rate,
                         "median_distance_to_pmi": _median(best),
                         "replicates": spec.replicates, "spec_digest": digest})
            if rate >= 0.5 and str(n) not in half:
                half[str(n)] = k
        half.setdefault(str(n), None)
    return rows, {"inits_for_half": half, "threshold": spec.threshold}


def run_sample_complexity(spec, threads=1):
    """Replicate spread of the fourth cumulant and fitted distance versus ``N``.

    ``std`` is the root mean square, over canonical entries, of the
    across-replicate standard deviation (``ddof=1``).  The summary holds the
    log-log slope of ``std`` against ``N`` for each ``n``.

    Raises
    ------
    ValueError
        If ``replicates < 2`` (a spread needs at least two replicates).
    """
    if spec.replicates < 2:
        raise ValueError("sample_complexity needs replicates >= 2 to estimate a spread")
    ns = [int(n) for n in spec.grid["n"]]
    Ns = [int(N) for N in spec.grid["N"]]
    cells = [(n, N) for n in ns for N in Ns]
    jobs = [(spec, c, n, N, r) for c, (n, N) in enumerate(cells) for r in range(spec.replicates)]
    res = _map(_complexity_cell, jobs, threads)
    rows = []
    digest = spec.digest()
    for c, (n, N) in enumerate(cells):
        cell = res[c * spec.replicates:(c + 1) * spec.replicates]
        vals = np.array([v for v, _ in cell])
        std = float(np.sqrt(np.mean(vals.std(axis=0, ddof=1) ** 2)))
        rows.append({"n": n, "N": N, "std": std,
                     "distance_to_pmi": _median([d for _, d in cell]),
                     "replicates": spec.replicates, "spec_digest": digest})
    slopes = {str(n): loglog_slope([r["N"] for r in rows if r["n"] == n],
                                   [r["std"] for r in rows if r["n"] == n])
              for n in ns if len(Ns) >= 2}
    return rows, {"slopes": slopes}


_RUNNERS = {
    "alpha_sweep": run_alpha_sweep,
    "gap4_curve": run_gap4_curve,
    "dimension_sweep": run_dimension_sweep,
    "trials_sweep": run_trials_sweep,
    "sample_complexity": run_sample_complexity,
}


def run_sweep(spec, threads=1):
    """Run any experiment; returns a :class:`SweepResult` with its manifest."""
    rows, summary = _RUNNERS[spec.experiment](spec, threads)
    dims = sorted({int(r["n"]) for r in rows if "n" in r} or {2})
    manifest = {"spec_digest": spec.digest(), "seed": spec.seed,
                "mixing_matrices": {str(n): mixing_matrix(spec.seed, n).tolist() for n in dims}}
    return SweepResult(spec, rows, summary, manifest)
