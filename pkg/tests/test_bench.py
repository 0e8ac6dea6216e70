import csv
import io

import pytest

from kquad import brute_force_L, generate_random
from kquad.bench import COLUMNS, POLICIES, bench_seed, run_bench, summarize, write_csv


def bench_text(**kw):
    return write_csv(run_bench(**kw), timing=False)


def test_csv_shape_and_header():
    rows = list(csv.reader(io.StringIO(bench_text(nmin=4, nmax=6, trials=3))))
    assert tuple(rows[0]) == COLUMNS
    data = [r for r in rows[1:] if r[2] != "mean"]
    means = [r for r in rows[1:] if r[2] == "mean"]
    assert len(data) == 3 * 2 * 3
    assert len(means) == 3 * 2
    assert all(len(r) == len(COLUMNS) for r in rows)


def test_bench_is_reproducible():
    a = bench_text(nmin=5, nmax=7, trials=2, seed=9)
    assert a == bench_text(nmin=5, nmax=7, trials=2, seed=9)
    assert a != bench_text(nmin=5, nmax=7, trials=2, seed=10)


def test_policies_share_instances_and_agree():
    records = list(run_bench(8, 9, 3, seed=1))
    by_key = {}
    for r in records:
        by_key.setdefault((r.n, r.trial), []).append(r)
    for (n, t), rs in by_key.items():
        assert len({r.seed for r in rs}) == 1
        assert len({r.L for r in rs}) == 1
        M = generate_random(n, n, -100, 100, seed=rs[0].seed)
        assert rs[0].L == brute_force_L(M).optimum


def test_chsh_adversarial_uses_blocks_and_skips_odd():
    records = list(run_bench(3, 6, 1, policies=["chsh-adversarial"]))
    assert [r.n for r in records] == [4, 6]
    assert [r.L for r in records] == [4, 6]


def test_seed_derivation_distinct():
    seeds = {bench_seed(0, n, t) for n in range(10, 20) for t in range(10)}
    assert len(seeds) == 100


def test_summary_means():
    records = list(run_bench(5, 5, 4, policies=["k0"]))
    (row,) = summarize(records)
    assert row[:3] == (5, "k0", "mean")
    assert row[5] == pytest.approx(sum(r.nodes for r in records) / 4)


def test_rejects_unknown_policy_and_range():
    with pytest.raises(ValueError):
        list(run_bench(4, 5, 1, policies=["k7"]))
    with pytest.raises(ValueError):
        list(run_bench(6, 5, 1))
    assert set(POLICIES) == {"k0", "kn4", "chsh-adversarial"}


def test_workers_do_not_change_results():
    one = [(r.L, r.seed) for r in run_bench(10, 11, 2)]
    many = [(r.L, r.seed) for r in run_bench(10, 11, 2, workers=3)]
    assert one == many
