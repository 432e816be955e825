"""Acceptance campaigns at full size.

Each test prints one PASS/FAIL line (also collected into the terminal
summary).  Set BRWLAB_ACCEPTANCE_SCALE to a fraction to shrink replica
counts for a quick run; the default 1 is the full-size suite.
"""

import filecmp
import os

import pytest

from brwlab import campaigns as C
from brwlab.config import ExperimentConfig

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance

SCALE = float(os.environ.get("BRWLAB_ACCEPTANCE_SCALE", "1"))
LAW_B = [0.5, 0.0, 0.5]
LAW_SUPER = [0.25, 0.25, 0.5]
LAW_SUB = [0.4, 0.4, 0.2]
KIND_CONFIGS = [("axis1", 0.0), ("diag", 0.0), ("axis2", 0.0), ("axis2", 0.3)]
SEED = 20240601

# criterion -> list of (config, output dir) of the first runs, reused by the determinism check
RUNS: dict[int, list] = {}


def reps(m: int) -> int:
    return max(100, int(m * SCALE))


def record(criterion: int, ok: bool, detail: str) -> None:
    tag = "" if SCALE == 1 else f" [scale {SCALE}]"
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}{tag}"
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="module")
def outdir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def run(criterion, fn, cfg, out, *extra):
    res = fn(cfg, str(out), *extra)
    RUNS.setdefault(criterion, []).append((fn, cfg, out, extra))
    return res


def test_c01_coupling_invariants(outdir):
    problems, checks, capped = [], 0, 0
    for kind, pi in KIND_CONFIGS:
        for law in (LAW_B, LAW_SUPER):
            cfg = ExperimentConfig(kind=kind, survival=pi, law=law, mode="free", steps=50, cap=10**5,
                                   replicas=reps(10**4), seed=SEED).validate()
            out = outdir / f"c01_{kind}_{pi}_{law[1]}"
            try:
                res = run(1, C.coupled_free_campaign, cfg, out)
            except C.InvariantFailure as exc:
                problems.append(f"{kind} pi={pi} law={law}: {exc}")
                continue
            checks += res.report["invariant_checks"]
            capped += res.report["capped"]
    ok = not problems and checks > 0
    record(1, ok, f"{checks} step checks over 8 campaigns, {len(problems)} invariant violations"
                  f" ({capped} replicas stopped at the 1e5 cap)")
    assert ok, problems


def test_c02_hitting_ordering(outdir):
    exceptions, observed = {}, 0
    for kind, pi in KIND_CONFIGS:
        for law in (LAW_B, LAW_SUPER):
            for n in (2, 3, 4):
                cfg = ExperimentConfig(kind=kind, survival=pi, law=law, n=n, cap=10**5,
                                       replicas=reps(10**4), seed=SEED).validate()
                res = run(2, C.coupled_hitting_campaign, cfg, outdir / f"c02_{kind}_{pi}_{law[1]}_{n}")
                observed += res.report["tau0_observed"]
                bad = (len(res.report["ordering_exceptions"]) + len(res.report["identity_exceptions"])
                       + len(res.report["sigma_mismatch"]))
                if bad:
                    exceptions[(kind, pi, law[1], n)] = bad
    ok = not exceptions
    record(2, ok, f"24 campaigns, {observed} replicas with observed tau0, "
                  f"{sum(exceptions.values())} ordering/identity exceptions")
    assert ok, exceptions


def test_c03_marginal_preservation(outdir):
    failed, details = [], []
    for kind, pi in (("axis1", 0.0), ("diag", 0.0), ("axis2", 0.3)):
        cfg = ExperimentConfig(kind=kind, survival=pi, law=LAW_B, n=3, mode="marginal", record_at=3,
                               replicas=reps(10**5), reruns=1, alpha=0.01, seed=SEED).validate()
        res = run(3, C.marginal_campaign, cfg, outdir / f"c03_{kind}")
        pvals = [round(t["pvalue"], 3) for t in res.report["attempts"][0]["tests"] if "pvalue" in t]
        details.append(f"{kind}: p={pvals} attempts={len(res.report['attempts'])}")
        failed += [f"{kind} side {f['side']} {f['quantity']}" for f in res.report["final"] if not f["passed"]]
    ok = not failed
    record(3, ok, f"12 chi-square tests at alpha=0.01 with one rerun; failures {failed}; " + "; ".join(details))
    assert ok, failed


def test_c04_grid_monotonicity(outdir):
    bad = {}
    for kernel in ("strict", "lazy"):
        for law in (LAW_SUB, LAW_B, LAW_SUPER):
            for n in (2, 3, 4, 5):
                cfg = ExperimentConfig(kernel=kernel, law=law, n=n, t_max=200, tol=1e-10, seed=SEED).validate()
                res = run(4, C.oracle_grid_campaign, cfg, outdir / f"c04_{kernel}_{law[2]}_{n}")
                r = res.report
                count = len(r["cdf_audit"]["orthant_violations"])
                if kernel == "strict":
                    count += len(r["escape_audit"]["orthant_violations"]) + len(r["escape_audit"]["full_box_violations"])
                if count:
                    bad[(kernel, law[2], n)] = count
    ok = not bad
    record(4, ok, f"24 oracle grids (escape monotonicity, strict; CDF dominance t<=200, lazy), "
                  f"{sum(bad.values())} violations beyond 1e-10")
    assert ok, bad


def test_c05_pair_cdf_dominance(outdir):
    bad = []
    worst = -1.0
    for law in (LAW_SUB, LAW_B, LAW_SUPER):
        for n in (2, 3, 4):
            cfg = ExperimentConfig(kernel="strict", law=law, n=n, t_max=200, tol=1e-10, seed=SEED,
                                   pairs=[((0, 0), (0, 2)), ((0, 0), (1, 1))]).validate()
            res = run(5, C.oracle_grid_campaign, cfg, outdir / f"c05_{law[2]}_{n}")
            bad += res.report["cdf_audit"]["pair_violations"]
            worst = max([worst] + [p["max_gap"] for p in res.report["cdf_audit"]["pairs"]])
    ok = not bad
    record(5, ok, f"pairs (0,0)->(0,2), (0,0)->(1,1), n=2..4, 3 laws; largest P(tau^x<=t)-P(tau^y<=t) = {worst:.3e}")
    assert ok, bad


def test_c06_identities(outdir):
    rows = []
    for law in (LAW_B, LAW_SUPER):
        for n in (2, 3, 4):
            cfg = ExperimentConfig(kernel="strict", law=law, n=n, seed=SEED).validate()
            res = run(6, C.oracle_grid_campaign, cfg, outdir / f"c06_{law[1]}_{n}")
            rows.append(res.report["identities"])
    max_res = max(r["root_residual"] for r in rows)
    min_margin = min(r["neighbor_margin"] for r in rows)
    ok = max_res <= 1e-9 and min_margin >= -1e-9
    record(6, ok, f"max root residual {max_res:.2e} (<= 1e-9), min neighbour margin {min_margin:.3e} (>= -1e-9)")
    assert ok


def test_c07_oracle_mc_concordance(outdir):
    details, ok = [], True
    for kernel, law, n in (("strict", LAW_B, 3), ("lazy", LAW_SUPER, 2)):
        cfg = ExperimentConfig(kernel=kernel, law=law, n=n, cdf_times=[1, 5, 20], replicas=reps(10**5),
                               reruns=1, alpha=0.01, seed=SEED).validate()
        res = run(7, C.simulate_campaign, cfg, outdir / f"c07_{kernel}")
        ok &= res.report["concordant"]
        first = res.report["attempts"][0]["checks"]
        details.append(f"{kernel} n={n}: " + ", ".join(
            f"t={c['t']} oracle {c['oracle']:.4f} in [{c['wilson'][0]:.4f},{c['wilson'][1]:.4f}]={c['inside']}"
            for c in first) + f" (attempts {len(res.report['attempts'])})")
    record(7, ok, "; ".join(details))
    assert ok


def test_c08_even_diagonal(outdir):
    total, checked = 0, 0
    for law, pi in ((LAW_B, 0.3), (LAW_B, 0.0), (LAW_SUPER, 0.3)):
        cfg = ExperimentConfig(kind="axis2", survival=pi, law=law, mode="free", steps=20, cap=10**6,
                               replicas=reps(10**4), seed=SEED).validate()
        res = run(8, C.coupled_free_campaign, cfg, outdir / f"c08_{law[1]}_{pi}")
        total += res.report["even_diagonal_exceptions"]
        checked += res.report["replicas"]
    ok = total == 0
    record(8, ok, f"{checked} free replicas x 20 steps, {total} even-time probe exceptions")
    assert ok


def test_c09_continuous_time(outdir):
    cfg = ExperimentConfig(lam=0.2, t=1.0, probes=[(0, 0)], ladder=[20, 40, 80],
                           pairs=[((1, 0), (1, 1)), ((0, 1), (2, 1))], replicas=reps(10**5), alpha=0.01,
                           seed=SEED).validate()
    res = run(9, C.corollary_campaign, cfg, outdir / "c09")
    r = res.report
    statuses = [v["status"] for v in r["dominance"]]
    dom_ok = all(s == "Consistent" for s in statuses)
    errs = r["trend"]["0,0"]["abs_errors"]
    trend_ok = r["trend_monotone"]
    ok = dom_ok and trend_ok
    record(9, ok, f"dominance {[v['claim'] for v in r['dominance']]} -> {statuses}; "
                  f"ladder N={r['ladder']} |gamma - zeta| at (0,0) = {[f'{e:.3g}' for e in errs]} "
                  f"(monotone shrinking: {trend_ok})")
    assert dom_ok, r["dominance"]
    assert trend_ok, f"scaling-ladder gap does not shrink: {errs}"


def _rerun_matches(fn, cfg, first_out, new_out, extra):
    fn(cfg, str(new_out), *extra)
    names = sorted(os.listdir(first_out))
    if names != sorted(os.listdir(new_out)):
        return False
    _, mismatch, errors = filecmp.cmpfiles(first_out, new_out, names, shallow=False)
    return not mismatch and not errors


def test_c10_determinism(outdir):
    """Rerun one campaign of every criterion (with a different worker count) and compare bytes."""
    results = {}
    for criterion in range(1, 10):
        runs = RUNS.get(criterion)
        if not runs:
            continue
        fn, cfg, out, extra = runs[0]
        if fn is C.oracle_grid_campaign:
            same = _rerun_matches(fn, cfg, out, outdir / f"c10_{criterion}", extra)
        else:
            same = _rerun_matches(lambda c, o: fn(c, o, 2), cfg, out, outdir / f"c10_{criterion}", extra)
        results[criterion] = same
    ok = bool(results) and all(results.values())
    record(10, ok, f"byte-identical reruns per criterion: {results}")
    assert ok, results
