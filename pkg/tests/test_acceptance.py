"""Acceptance suite: one test per release criterion, each printing a
pass/fail line.  Scale is one million rows per group (desk scale); thresholds
are fixed here, not tuned per run."""

import math

import numpy as np
import pytest

from sampleopt import (
    AnalyticalFunction,
    ConversionRequest,
    GeneratorSpec,
    GridCase,
    ModelParams,
    Predicate,
    SearchConfig,
    SearchStatus,
    build_index,
    generate_synthetic,
    optimize_sample_size,
    optimize_with_metric,
    order_bound,
    simulated_confidence,
    stratified_sample,
    true_result,
)
from sampleopt.estimation import BootstrapConfig, bootstrap_error
from sampleopt.harness import error_draws, evaluate_case
from sampleopt.model import design_row, fit_wls, predict_log_error, predict_sizes
from sampleopt.model import ErrorProfile, ErrorRecord

F = AnalyticalFunction

ROWS = 1_000_000
DELTA = 0.05
CONF_REPS = 1000


def _report(criterion: int, ok: bool, detail: str):
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def _grid_cases():
    normal = lambda seed: GeneratorSpec("normal", (1.0, 1.0), rows_per_group=ROWS, seed=seed)
    uniform = lambda seed: GeneratorSpec("uniform", (0.0, 1.0), rows_per_group=ROWS, seed=seed)
    # predicates sit near the 10% tail so the optimum is well above the
    # initialization interval
    prop_n = F.proportion(Predicate("value", ">", 2.28))
    prop_u = F.proportion(Predicate("value", ">", 0.9))
    return [
        GridCase("avg-normal", F.avg(), (normal(101),), eps_rel=0.01),
        GridCase("avg-uniform", F.avg(), (uniform(102),), eps_rel=0.01),
        GridCase("var-normal", F.var(), (normal(103),), eps_rel=0.01),
        GridCase("var-uniform", F.var(), (uniform(104),), eps_rel=0.01),
        GridCase("median-normal", F.median(), (normal(105),), eps_rel=0.01),
        GridCase("median-uniform", F.median(), (uniform(106),), eps_rel=0.01),
        GridCase("proportion-normal", prop_n, (normal(107),), eps_rel=0.05),
        GridCase("proportion-uniform", prop_u, (uniform(108),), eps_rel=0.05),
    ]


@pytest.fixture(scope="module")
def accuracy_grid_reports():
    return [
        evaluate_case(case, delta=DELTA, alg_reps=1, conf_reps=CONF_REPS,
                      config=SearchConfig(), seed=900 + i)
        for i, case in enumerate(_grid_cases())
    ]


def test_criterion_1_accuracy_grid(accuracy_grid_reports):
    passed = 0
    details = []
    for rep in accuracy_grid_reports:
        ok = (
            rep.confidence is not None
            and rep.confidence >= 0.93
            and rep.r2 is not None
            and rep.r2 >= 0.8
        )
        passed += ok
        conf = "none" if rep.confidence is None else f"{rep.confidence:.3f}"
        r2 = "none" if rep.r2 is None else f"{rep.r2:.3f}"
        details.append(f"{rep.case}: c={conf} r2={r2}{'' if ok else ' (X)'}")
    _report(1, passed >= 7, f"{passed}/8 cases passed [{'; '.join(details)}]")


def test_criterion_2_multi_group_pairs():
    pairs = [
        ("normal-uniform", (
            GeneratorSpec("normal", (1.0, 1.0), rows_per_group=ROWS, seed=201),
            GeneratorSpec("uniform", (0.0, 1.0), rows_per_group=ROWS, seed=202),
        )),
        ("exponential-uniform", (
            GeneratorSpec("exponential", (1.0,), rows_per_group=ROWS, seed=203),
            GeneratorSpec("uniform", (0.0, 1.0), rows_per_group=ROWS, seed=204),
        )),
    ]
    details = []
    ok_all = True
    for i, (name, specs) in enumerate(pairs):
        case = GridCase(name, F.avg(), specs, eps_rel=0.01)
        rep = evaluate_case(case, delta=DELTA, alg_reps=1, conf_reps=CONF_REPS,
                            config=SearchConfig(), seed=910 + i)
        ok = (
            rep.confidence is not None and rep.confidence >= 0.93
            and rep.r2 is not None and rep.r2 >= 0.8
        )
        ok_all = ok_all and ok
        details.append(f"{name}: c={rep.confidence} r2={rep.r2}")
    _report(2, ok_all, "; ".join(details))


def test_criterion_3_near_optimal_vs_clt():
    ds = generate_synthetic(GeneratorSpec("normal", (1.0, 1.0), rows_per_group=ROWS, seed=301))
    idx = build_index(ds)
    eps = 0.0139
    sigma = float(ds.measures[:, 0].std())
    oracle = (1.96 * sigma / eps) ** 2
    totals = []
    for r in range(20):
        out = optimize_sample_size(ds, idx, F.avg(), eps, DELTA, SearchConfig(seed=3000 + r))
        assert out.status is SearchStatus.SATISFIED
        totals.append(int(out.sizes.sum()))
    ratio = float(np.median(totals)) / oracle
    _report(3, 0.5 <= ratio <= 2.0,
            f"median size {np.median(totals):.0f}, oracle {oracle:.0f}, ratio {ratio:.3f}")


def _brute_force_total(coef: np.ndarray, bound: float, grid: int = 10_000) -> int:
    """Exhaustive minimal total size with H(n) <= log(bound) on the grid."""
    c0, slopes = coef[0], coef[1:]
    target = c0 - math.log(bound)  # need slopes . log(n) >= target
    if len(slopes) == 1:
        n = np.arange(1, grid + 1)
        feasible = slopes[0] * np.log(n) >= target
        return int(n[feasible].min())
    n1 = np.arange(1, grid + 1)
    rest = target - slopes[0] * np.log(n1)
    n2 = np.ceil(np.exp(rest / slopes[1]))
    n2 = np.maximum(n2, 1.0)
    ok = n2 <= grid
    totals = n1[ok] + n2[ok].astype(np.int64)
    return int(totals.min())


def test_criterion_4_prediction_matches_grid_oracle():
    rng = np.random.default_rng(401)
    worst_gap, worst_resid = 0, 0.0
    for _ in range(100):
        m = int(rng.integers(1, 3))
        slopes = rng.uniform(0.1, 1.0, m)
        intercept = rng.uniform(-1.0, 1.0)
        scale = math.exp(rng.uniform(math.log(20.0), math.log(3000.0 / slopes.max())))
        log_bound = intercept - float(slopes @ np.log(slopes)) - slopes.sum() * math.log(scale)
        bound = math.exp(log_bound)
        params = ModelParams(np.concatenate([[intercept], slopes]))
        raw = slopes * scale
        resid = abs(predict_log_error(params, raw) - math.log(bound))
        worst_resid = max(worst_resid, resid)
        predicted = predict_sizes(params, bound)
        brute = _brute_force_total(params.coef, bound)
        gap = abs(int(predicted.sum()) - brute)
        worst_gap = max(worst_gap, gap)
        assert gap <= m + 1, (params.coef, bound, predicted, brute)
    _report(4, worst_resid <= 1e-9 and worst_gap <= 3,
            f"max |total - oracle| = {worst_gap}, max residual = {worst_resid:.2e}")


def test_criterion_5_wls_exact_recovery():
    rng = np.random.default_rng(501)
    worst = 0.0
    for _ in range(100):
        m = int(rng.integers(1, 6))
        coef = np.concatenate([rng.uniform(-1, 1, 1), rng.uniform(0.1, 1.0, m)])
        sizes = rng.integers(2, 100_000, size=(2 * (m + 1), m))
        profile = ErrorProfile(m)
        for row in sizes:
            err = math.exp(float(coef @ design_row(row)))
            profile.append(ErrorRecord(row, err))
        fitted = fit_wls(profile)
        worst = max(worst, float(np.abs(fitted.coef - coef).max()))
    _report(5, worst <= 1e-9, f"max coefficient error = {worst:.2e}")


def test_criterion_6_order_bound_matches_brute_force():
    rng = np.random.default_rng(601)
    for _ in range(1000):
        m = int(rng.integers(2, 33))
        vec = rng.normal(size=m) * 10.0 ** float(rng.integers(-3, 4))
        brute = min(
            abs(vec[i] - vec[j]) for i in range(m) for j in range(i + 1, m)
        ) / math.sqrt(2.0)
        assert order_bound(vec) == brute
    _report(6, True, "1000/1000 vectors matched exactly")


@pytest.fixture(scope="module")
def ordering_run():
    spec = GeneratorSpec("normal", (1.0, 1.0), rows_per_group=ROWS, num_groups=2,
                         group_bias=0.05, seed=701)
    ds = generate_synthetic(spec)
    idx = build_index(ds)
    out = optimize_with_metric(ds, idx, F.avg(), ConversionRequest("ordering"),
                               DELTA, SearchConfig(seed=702))
    return ds, idx, out


def test_criterion_7_ordering_end_to_end(ordering_run):
    ds, idx, out = ordering_run
    assert out.status is SearchStatus.SATISFIED
    truth = true_result(ds, F.avg(), idx)
    order = np.argsort(truth)
    preserved = 0
    for r in range(CONF_REPS):
        sample = stratified_sample(ds, idx, out.sizes, seed=70_000 + r)
        from sampleopt import evaluate

        est = evaluate(F.avg(), sample)
        preserved += bool(np.array_equal(np.argsort(est), order))
    freq = preserved / CONF_REPS
    _report(7, freq >= 0.93, f"order preserved in {freq:.3f} of {CONF_REPS} draws")


def test_criterion_8_metric_inequalities_on_draws(ordering_run):
    ds, idx, _ = ordering_run
    eps = 0.02
    cfg = SearchConfig(seed=801)
    linf_run = optimize_with_metric(ds, idx, F.avg(), ConversionRequest("linf", eps), DELTA, cfg)
    assert linf_run.status is SearchStatus.SATISFIED
    errs = error_draws(ds, idx, F.avg(), linf_run.sizes,
                       ["linf", "l2", "geometric_mean"], 500, seed=802)
    linf_ok = bool(np.all(errs[:, 0] <= errs[:, 1]))
    small = errs[:, 1] <= eps
    model_gap_ok = bool(np.all(np.abs(errs[small, 1] - errs[small, 2]) <= eps))

    eps_d = 0.03
    diff_run = optimize_with_metric(
        ds, idx, F.avg(), ConversionRequest("max_difference", eps_d), DELTA, cfg
    )
    assert diff_run.status is SearchStatus.SATISFIED
    errs_d = error_draws(ds, idx, F.avg(), diff_run.sizes,
                         ["max_difference", "l2"], 500, seed=803)
    within = errs_d[:, 1] <= eps_d / math.sqrt(2.0)
    diff_ok = bool(np.all(errs_d[within, 0] <= eps_d))
    _report(
        8,
        linf_ok and model_gap_ok and diff_ok,
        f"max<=l2: {linf_ok}, |l2-geo|<=eps: {model_gap_ok}, pairwise bound: {diff_ok} "
        f"(1000 draws, zero violations required)",
    )


def test_criterion_9_diagnostic_on_heavy_tailed_max():
    # effective sample maximum: alpha far below 1/N makes the top order
    # statistic the estimate, the regime the diagnostic exists to catch
    ds = generate_synthetic(GeneratorSpec("pareto", (1.0,), rows_per_group=200_000, seed=901))
    idx = build_index(ds)
    fn = F.max_approx(1e-9)
    statuses = []
    spurious = 0
    for r in range(20):
        out = optimize_sample_size(ds, idx, fn, 100.0, DELTA, SearchConfig(seed=9000 + r))
        statuses.append(out.status)
        if out.status is SearchStatus.SATISFIED:
            conf, _ = simulated_confidence(ds, idx, fn, "l2", 100.0, out.sizes, 200, seed=9500 + r)
            spurious += conf < 0.5
    flagged = sum(
        s in (SearchStatus.UNRECOVERABLE_FAILURE, SearchStatus.ITERATION_CAP_EXCEEDED)
        for s in statuses
    )
    counts = {s.value: statuses.count(s) for s in set(statuses)}
    _report(9, flagged >= 16 and spurious == 0,
            f"{flagged}/20 runs ended in a typed failure ({counts}); "
            f"{spurious} spuriously satisfied")


def test_criterion_10_error_decays_at_root_n_rate():
    ds = generate_synthetic(GeneratorSpec("normal", (1.0, 1.0), rows_per_group=ROWS, seed=1001))
    idx = build_index(ds)
    sizes = (1_000, 10_000, 100_000)
    medians = []
    for n in sizes:
        errs = [
            bootstrap_error(
                stratified_sample(ds, idx, [n], seed=10_000 + 31 * n + r),
                F.avg(), "l2", DELTA, BootstrapConfig(500, seed=11_000 + r),
            )
            for r in range(11)
        ]
        medians.append(float(np.median(errs)))
    slope = np.polyfit(np.log(sizes), np.log(medians), 1)[0]
    _report(10, -0.62 <= slope <= -0.40, f"log-log slope = {slope:.3f}")


def test_criterion_11_iterations_and_sampling_work(accuracy_grid_reports):
    pred_iters = []
    worst_ratio = 0.0
    for rep in accuracy_grid_reports:
        for run in rep.runs:
            pred_iters.append(run.prediction_iterations)
            for rec in run.outcome.trace:
                if rec.touched_rows is not None and rec.total_size:
                    worst_ratio = max(worst_ratio, rec.touched_rows / rec.total_size)
    median_iters = float(np.median(pred_iters))
    _report(
        11,
        median_iters <= 5 and worst_ratio <= 3.0,
        f"median prediction iterations = {median_iters:.1f}, "
        f"worst touched/size ratio = {worst_ratio:.2f}",
    )
