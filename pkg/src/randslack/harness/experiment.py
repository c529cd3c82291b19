"""Benchmark orchestration: repeated train/evaluate runs per method.

Each repetition draws a fresh train/test pair from one hidden parameter
vector, trains the requested methods, and measures wall time plus mean
distortion under each method's inference mode. The randomized method reports
two rows: one decoded over fresh proposal sets ("Random") and one decoded
exactly ("Random/All"). Aggregates are means with 1.96 * stderr half-widths.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..features import SyntheticFeatureMap
from ..learning import Method, TrainConfig, _SyntheticEngine, train
from ..rng import derive_key
from ..sampling import proposal_set_size
from ..structures import StructureSpace, beta_constant
from .datasets import Dataset, generate_synthetic

ROW_ORDER = ("All", "Random", "Random/All", "LSSVM")

CSV_HEADER = (
    "problem,method,train_runtime_s,train_distortion,"
    "test_runtime_s,test_distortion,hw_train,hw_test"
)


@dataclass
class ExperimentResult:
    method: str
    train_runtime_s: float
    train_distortion: float
    test_runtime_s: float
    test_distortion: float
    hw_train: float
    hw_test: float
    rep_rows: list[dict] = field(default_factory=list)


def _subset(dataset: Dataset, lo: int, hi: int) -> Dataset:
    return Dataset(
        samples=dataset.samples[lo:hi],
        space=dataset.space,
        w_star=dataset.w_star,
        seed=dataset.seed,
        protocol_tag=dataset.protocol_tag,
    )


def _eval_exact(w, dataset: Dataset, featmap) -> tuple[float, float]:
    start = time.perf_counter()
    engine = _SyntheticEngine(dataset, featmap)
    tables = engine.tables(w)
    flat = tables.reshape(engine.n, -1).argmax(axis=1)
    pred = flat // engine.n_h
    dist = float(engine.dmat[engine.y_idx, pred].mean())
    return dist, time.perf_counter() - start


def _eval_random(w, dataset: Dataset, featmap, size: int, seed: int) -> tuple[float, float]:
    start = time.perf_counter()
    engine = _SyntheticEngine(dataset, featmap)
    members = engine.draw_members(w, seed, 0, size)
    phis = engine.masks[members[:, :, 0]] * engine.xors[
        np.arange(engine.n)[:, None], members[:, :, 1]
    ]
    scores = phis @ np.asarray(w)
    pick = scores.argmax(axis=1)
    pred = members[np.arange(engine.n), pick, 0]
    dist = float(engine.dmat[engine.y_idx, pred].mean())
    return dist, time.perf_counter() - start


def _one_rep(
    space: StructureSpace,
    methods: list[str],
    n_train: int,
    n_test: int,
    seed: int,
    rep: int,
) -> dict[str, dict]:
    data = generate_synthetic(space, n_train + n_test, derive_key(seed, rep))
    train_ds = _subset(data, 0, n_train)
    test_ds = _subset(data, n_train, n_train + n_test)
    featmap = SyntheticFeatureMap(space)
    eval_size = proposal_set_size(beta_constant(space), 0.0, 0.0, max(2, n_train))
    rows: dict[str, dict] = {}
    for mi, name in enumerate(methods):
        method = Method(name)
        config = TrainConfig(method=method, seed=derive_key(seed, rep, mi))
        report = train(train_ds, space, featmap, config)
        w = report.w_final.w
        if method is Method.RANDOM_SLACK:
            tr_d, tr_t = _eval_random(
                w, train_ds, featmap, eval_size, derive_key(seed, rep, mi, 1)
            )
            te_d, te_t = _eval_random(
                w, test_ds, featmap, eval_size, derive_key(seed, rep, mi, 2)
            )
            rows["Random"] = {
                "train_runtime_s": report.wall_time,
                "train_distortion": tr_d,
                "test_runtime_s": te_t,
                "test_distortion": te_d,
                "w_final": w.tolist(),
            }
            tr_d2, _ = _eval_exact(w, train_ds, featmap)
            te_d2, te_t2 = _eval_exact(w, test_ds, featmap)
            rows["Random/All"] = {
                "train_runtime_s": report.wall_time,
                "train_distortion": tr_d2,
                "test_runtime_s": te_t2,
                "test_distortion": te_d2,
                "w_final": w.tolist(),
            }
        else:
            label = "All" if method is Method.ALL_SLACK else "LSSVM"
            tr_d, _ = _eval_exact(w, train_ds, featmap)
            te_d, te_t = _eval_exact(w, test_ds, featmap)
            rows[label] = {
                "train_runtime_s": report.wall_time,
                "train_distortion": tr_d,
                "test_runtime_s": te_t,
                "test_distortion": te_d,
                "w_final": w.tolist(),
            }
    return rows


def _aggregate(label: str, rows: list[dict]) -> ExperimentResult:
    def stats(key: str) -> tuple[float, float]:
        vals = np.array([r[key] for r in rows])
        mean = float(vals.mean())
        if len(vals) < 2:
            return mean, 0.0
        return mean, float(1.96 * vals.std(ddof=1) / np.sqrt(len(vals)))

    tr_d, hw_tr = stats("train_distortion")
    te_d, hw_te = stats("test_distortion")
    tr_t, _ = stats("train_runtime_s")
    te_t, _ = stats("test_runtime_s")
    keyed = [dict(r, rep=i) for i, r in enumerate(rows)]
    return ExperimentResult(
        method=label,
        train_runtime_s=tr_t,
        train_distortion=tr_d,
        test_runtime_s=te_t,
        test_distortion=te_d,
        hw_train=hw_tr,
        hw_test=hw_te,
        rep_rows=keyed,
    )


def run_experiment(
    space: StructureSpace,
    methods: list[str],
    reps: int,
    n_train: int,
    n_test: int,
    seed: int,
    threads: int = 1,
) -> list[ExperimentResult]:
    """Benchmark all requested methods; rows aggregate over repetitions.

    Repetitions are independent and seeded by index, so any thread count
    produces the same numbers; aggregation runs in repetition order.
    """
    if reps < 1:
        raise ValueError("need at least one repetition")

    def worker(rep: int) -> dict:
        return _one_rep(space, methods, n_train, n_test, seed, rep)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(worker, range(reps)))
    else:
        per_rep = [worker(rep) for rep in range(reps)]
    results = []
    for label in ROW_ORDER:
        rows = [rep_rows[label] for rep_rows in per_rep if label in rep_rows]
        if rows:
            results.append(_aggregate(label, rows))
    return results


def results_to_csv(results: list[ExperimentResult], problem: str) -> str:
    lines = [CSV_HEADER]
    for r in results:
        lines.append(
            f"{problem},{r.method},{r.train_runtime_s:.6f},{r.train_distortion:.6f},"
            f"{r.test_runtime_s:.6f},{r.test_distortion:.6f},"
            f"{r.hw_train:.6f},{r.hw_test:.6f}"
        )
    return "\n".join(lines) + "\n"


def results_to_text(results: list[ExperimentResult], problem: str) -> str:
    lines = [
        f"{problem}:",
        f"  {'method':<11} {'train_s':>9} {'train_dist':>16} {'test_s':>9} {'test_dist':>16}",
    ]
    for r in results:
        lines.append(
            f"  {r.method:<11} {r.train_runtime_s:>9.3f}"
            f" {r.train_distortion * 100:>7.1f}% +-{r.hw_train * 100:.1f}%"
            f" {r.test_runtime_s:>9.3f}"
            f" {r.test_distortion * 100:>7.1f}% +-{r.hw_test * 100:.1f}%"
        )
    return "\n".join(lines)
