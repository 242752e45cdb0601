import csv
import io
import json
import math

import numpy as np
import pytest

from fbtl import cli
from fbtl.bench import (
    ExperimentConfig,
    SyntheticScenario,
    bundle_from_arrays,
    emit_bound_table,
    export_bundle,
    format_number,
    load_dataset,
    make_instance,
    parse_estimators,
    run_experiment,
    sampling_rate,
)
from fbtl.errors import BasisError, ConfigError, OutOfScopeError, OutputError, ParseError
from fbtl.graphs import gen_family
from fbtl.metrics import default_m_grid, sample_complexity
from fbtl.model import sample_comparisons, sample_pairs
from fbtl.recovery import closed_form_threshold


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def small_config(tmp_path, **kw):
    base = dict(experiment_type="type1_vs_n", n=[12, 20], param=4, c=8, K=200, trials=3,
                seed=5, out=str(tmp_path / "out"))
    base.update(kw)
    return ExperimentConfig(**base)


def car_like_bundle(seed=0, n=20, d=6):
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n, d))
    theta = U @ rng.standard_normal(d)
    pairs = np.array([(i, j) for i in range(n) for j in range(i + 1, n)])
    K = 60
    p = 1 / (1 + np.exp(-(theta[pairs[:, 0]] - theta[pairs[:, 1]])))
    wins = rng.binomial(K, p)
    return bundle_from_arrays(U, pairs, wins, K - wins)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig("type2_vs_p", c=[0.5, 1, 2, 4, 8, 16, 32])
        assert cfg.K == (1000,)
        assert cfg.trials == 50
        assert cfg.estimators == ("fbtl_ls", "ols", "rank_centrality")
        assert len(cfg.points) == 7

    def test_estimator_aliases(self):
        assert parse_estimators("fbtl-ls,rc") == ("fbtl_ls", "rank_centrality")
        with pytest.raises(ConfigError):
            parse_estimators("imc")
        with pytest.raises(ConfigError):
            parse_estimators("")

    @pytest.mark.parametrize("kw", [
        dict(experiment_type="type4"),
        dict(experiment_type="type1_vs_n", n=[]),
        dict(experiment_type="type1_vs_n", c=[]),
        dict(experiment_type="type1_vs_n", c=[10, 20]),
        dict(experiment_type="type2_vs_p", n=[20, 40]),
        dict(experiment_type="type3_vs_alpha", K=[10, 100]),
        dict(experiment_type="type1_vs_n", trials=0),
        dict(experiment_type="type1_vs_n", K=0),
        dict(experiment_type="type1_vs_n", family="grid"),
        dict(experiment_type="real_dataset"),
        dict(experiment_type="sc_sweep", eps=0),
        dict(experiment_type="sc_sweep", m_grid_ratio=1.0),
    ])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kw)

    def test_load_with_overrides(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"experiment_type": "type1_vs_n", "n": [10, 20], "param": 2, "seed": 3}))
        cfg = ExperimentConfig.load(path, seed=9, trials=None, K=50)
        assert cfg.seed == 9 and cfg.trials == 50 and cfg.K == (50,)
        assert ExperimentConfig.from_dict(json.loads(cfg.to_json())) == cfg

    def test_load_errors(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"experiment_type": "type1_vs_n",\n "n": [10,}')
        with pytest.raises(ConfigError, match=":2:"):
            ExperimentConfig.load(path)
        path.write_text('{"experiment_type": "type1_vs_n", "colour": 1}')
        with pytest.raises(ConfigError, match="colour"):
            ExperimentConfig.load(path)


class TestHelpers:
    def test_format(self):
        assert format_number(1 / 3) == "0.333333333333"
        assert format_number(12) == "12"
        assert format_number(float("nan")) == "nan"
        assert format_number(None) == ""
        assert format_number(123456789.123456789) == "123456789.123"

    def test_sampling_rate(self):
        assert sampling_rate(10, 10, 100) == pytest.approx(10 * 10 * math.log(10) / 4950)
        assert sampling_rate(1e6, 10, 20) == 1.0
        assert sampling_rate(5, 1, 20) == 0.0

    def test_instance_normalised(self):
        inst = make_instance("r_disconnected_cliques", 20, 4, np.random.SeedSequence(0))
        assert np.linalg.norm(inst.model.theta) == pytest.approx(1.0)
        assert inst.features.alpha == 4

    def test_instance_seeded(self):
        a = make_instance("d_regular", 20, 3, np.random.SeedSequence(4))
        b = make_instance("d_regular", 20, 3, np.random.SeedSequence(4))
        assert a.graph.edges == b.graph.edges
        assert np.array_equal(a.model.theta, b.model.theta)


class TestRunExperiment:
    def test_rows_and_order(self, tmp_path):
        cfg = small_config(tmp_path)
        res = run_experiment(cfg)
        rows = read_csv(res.paths["trials"])
        assert len(rows) == 2 * 3 * 3
        keys = [(int(r["point"]), int(r["trial"]), cfg.estimators.index(r["estimator"])) for r in rows]
        assert keys == sorted(keys)
        assert {r["estimator"] for r in rows} <= set(cfg.estimators)
        assert list(rows[0]) == ["point", "trial", "estimator", "n", "alpha", "p", "K", "m", "l2_error", "pd_error"]

    def test_summary_means(self, tmp_path):
        res = run_experiment(small_config(tmp_path))
        rows = read_csv(res.paths["trials"])
        for s in read_csv(res.paths["summary"]):
            grp = [r for r in rows if r["point"] == s["point"] and r["estimator"] == s["estimator"]]
            l2 = [float(r["l2_error"]) for r in grp]
            pd = [float(r["pd_error"]) for r in grp]
            assert float(s["l2_mean"]) == pytest.approx(sum(l2) / len(l2), rel=1e-11, abs=1e-12)
            assert float(s["pd_mean"]) == pytest.approx(sum(pd) / len(pd), rel=1e-11, abs=1e-12)
            se = np.std(l2, ddof=1) / math.sqrt(len(l2))
            assert float(s["l2_se"]) == pytest.approx(se, rel=1e-9)
        for s in res.summary:
            grp = [r for r in res.rows if r["point"] == s["point"] and r["estimator"] == s["estimator"]]
            assert abs(s["l2_mean"] - np.mean([r["l2_error"] for r in grp])) < 1e-12

    def test_byte_identical(self, tmp_path):
        a = run_experiment(small_config(tmp_path, out=str(tmp_path / "a"), n=20, trials=1), workers=1)
        b = run_experiment(small_config(tmp_path, out=str(tmp_path / "b"), n=20, trials=1), workers=4)
        for key in ("trials", "summary"):
            assert a.paths[key].read_bytes() == b.paths[key].read_bytes()

    def test_worker_count_irrelevant(self, tmp_path):
        a = run_experiment(small_config(tmp_path, out=str(tmp_path / "a")), workers=1)
        b = run_experiment(small_config(tmp_path, out=str(tmp_path / "b")), workers=3)
        assert a.paths["trials"].read_bytes() == b.paths["trials"].read_bytes()

    def test_seed_matters(self, tmp_path):
        a = run_experiment(small_config(tmp_path, seed=1), write=False)
        b = run_experiment(small_config(tmp_path, seed=2), write=False)
        assert [r["l2_error"] for r in a.rows] != [r["l2_error"] for r in b.rows]

    def test_type2_rates(self, tmp_path):
        cfg = small_config(tmp_path, experiment_type="type2_vs_p", n=40, c=[0.5, 2, 8], trials=1)
        res = run_experiment(cfg, write=False)
        ps = sorted({r["p"] for r in res.rows})
        expected = sorted(sampling_rate(c, 4, 40) for c in (0.5, 2, 8))
        assert ps == pytest.approx(expected)

    def test_type3_error_roughly_flat(self):
        cfg = ExperimentConfig("type3_vs_alpha", n=500, param=[5, 10, 20, 50], c=10, trials=10,
                               estimators=["fbtl_ls"], seed=0)
        res = run_experiment(cfg, write=False)
        means = [s["l2_mean"] for s in res.summary]
        assert [s["alpha"] for s in res.summary] == [5, 10, 20, 50]
        assert max(means) / min(means) <= 2.0

    def test_type1_paper_shape_runs(self, tmp_path):
        cfg = small_config(tmp_path, n=[20, 60, 100], param=10, c=10, K=1000, trials=2,
                           family="r_disconnected_cliques")
        res = run_experiment(cfg)
        assert {s["alpha"] for s in res.summary} == {10}
        fb = [s["l2_mean"] for s in res.summary if s["estimator"] == "fbtl_ls"]
        ols = [s["l2_mean"] for s in res.summary if s["estimator"] == "ols"]
        assert all(a < b for a, b in zip(fb, ols))

    def test_empty_samples_give_nan(self, tmp_path):
        cfg = small_config(tmp_path, family="clique", n=6, param=None, trials=2)
        res = run_experiment(cfg, write=False)
        assert all(r["m"] == 0 and math.isnan(r["l2_error"]) for r in res.rows)
        assert all(math.isnan(s["l2_mean"]) for s in res.summary)

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OutputError):
            run_experiment(small_config(tmp_path, out=str(blocker / "sub")))


class TestScSweep:
    def test_matches_sample_complexity(self, tmp_path):
        cfg = ExperimentConfig("sc_sweep", n=[20, 40], param=4, K=200, trials=4, eps=0.4,
                               m_grid_ratio=1.4, estimators=["fbtl_ls", "ols"], seed=3,
                               out=str(tmp_path / "sc"))
        res = run_experiment(cfg)
        summary = read_csv(res.paths["summary"])
        for row in summary:
            n = int(row["n"])
            scenario = SyntheticScenario("r_disconnected_cliques", n, 4, 200, row["estimator"])
            expected = sample_complexity(scenario, 0.4, trials=4, m_grid=default_m_grid(4, n, 1.4), base_seed=3)
            assert row["sc"] == ("" if expected is None else str(expected))

    def test_not_reached_is_blank(self, tmp_path):
        cfg = ExperimentConfig("sc_sweep", n=12, param=3, K=5, trials=2, eps=1e-6,
                               m_grid_ratio=3.0, estimators=["ols"], out=str(tmp_path / "sc"))
        res = run_experiment(cfg)
        assert read_csv(res.paths["summary"])[0]["sc"] == ""


class TestDatasets:
    def test_round_trip(self, tmp_path):
        bundle = car_like_bundle()
        fpath, cpath = export_bundle(bundle, tmp_path / "data")
        back = load_dataset(fpath, cpath)
        assert np.array_equal(back.features.B, bundle.features.B)
        assert np.array_equal(back.sample.p_hat, bundle.sample.p_hat)
        assert np.array_equal(back.P_star, bundle.P_star, equal_nan=True)
        assert back.features.independent_set == bundle.features.independent_set

    def test_car_shape(self):
        bundle = car_like_bundle()
        assert bundle.n == 20
        assert bundle.features.alpha == 6
        assert bundle.features.residual() < 1e-8

    def _write(self, tmp_path, features, counts):
        f = tmp_path / "features.csv"
        c = tmp_path / "counts.csv"
        f.write_text(features)
        c.write_text(counts)
        return f, c

    def test_unknown_item(self, tmp_path):
        f, c = self._write(tmp_path, "item,f1\n1,1.0\n2,2.0\n", "i,j,wins_i,wins_j\n1,2,3,1\n1,9,1,1\n")
        with pytest.raises(ParseError, match="unknown item id 9"):
            load_dataset(f, c)

    @pytest.mark.parametrize("counts,line", [
        ("i,j,wins_i,wins_j\n1,2,3,1\n1,2,x,1\n", ":3:"),
        ("i,j,wins_i,wins_j\n1,2,3\n", ":2:"),
        ("i,j,wins_i,wins_j\n1,2,-1,1\n", ":2:"),
        ("i,j,wins_i,wins_j\n2,2,1,1\n", ":2:"),
        ("a,b,c,d\n1,2,1,1\n", ":1:"),
    ])
    def test_malformed_counts(self, tmp_path, counts, line):
        f, c = self._write(tmp_path, "item,f1\n1,1.0\n2,2.0\n", counts)
        with pytest.raises(ParseError, match=line):
            load_dataset(f, c)

    @pytest.mark.parametrize("features,line", [
        ("item,f1\n1,1.0\n2,abc\n", ":3:"),
        ("item,f1\n1,1.0\n1,2.0\n", ":3:"),
        ("id,f1\n1,1.0\n", ":1:"),
        ("item,f1,f2\n1,1.0\n", ":2:"),
    ])
    def test_malformed_features(self, tmp_path, features, line):
        f, c = self._write(tmp_path, features, "i,j,wins_i,wins_j\n")
        with pytest.raises(ParseError, match=line):
            load_dataset(f, c)

    def test_rank_deficient_features(self, tmp_path):
        f, c = self._write(tmp_path, "item,f1,f2\n1,1,2\n2,2,4\n3,3,6\n", "i,j,wins_i,wins_j\n1,2,1,1\n")
        with pytest.raises(BasisError):
            load_dataset(f, c)

    def test_aggregation_and_empirical_matrix(self, tmp_path):
        f, c = self._write(
            tmp_path,
            "item,f1,f2\n10,1,0\n20,0,1\n30,1,1\n",
            "i,j,wins_i,wins_j\n10,20,3,1\n20,10,2,2\n30,10,0,0\n",
        )
        bundle = load_dataset(f, c)
        assert bundle.item_ids == (10, 20, 30)
        assert bundle.sample.pairs.tolist() == [[0, 1]]
        assert bundle.sample.wins.tolist() == [5]
        assert bundle.P_star[0, 1] == pytest.approx(5 / 8)
        assert bundle.P_star[1, 0] == pytest.approx(3 / 8)
        assert np.isnan(bundle.P_star[0, 2])
        assert bundle.P_star[2, 2] == 0.5

    def test_real_dataset_experiment(self, tmp_path):
        fpath, cpath = export_bundle(car_like_bundle(), tmp_path / "data")
        cfg = ExperimentConfig("real_dataset", features=str(fpath), counts=str(cpath), c=[1, 4],
                               K=[10, 100], trials=3, out=str(tmp_path / "real"))
        res = run_experiment(cfg)
        rows = read_csv(res.paths["trials"])
        assert len(rows) == 4 * 3 * 3
        assert all(r["l2_error"] == "" for r in rows)
        pds = [float(r["pd_error"]) for r in rows if r["pd_error"] != "nan"]
        assert pds and all(0 <= v <= 0.5 for v in pds)


class TestBoundTable:
    def test_rows_match_formulas(self):
        text = emit_bound_table([("clique", None), ("disconnected", None), ("r_disconnected_cliques", 5)],
                                [25], [0.1])
        rows = list(csv.DictReader(io.StringIO(text)))
        assert [r["family"] for r in rows] == ["clique", "disconnected", "r_disconnected_cliques"]
        assert float(rows[0]["p_min"]) == pytest.approx(math.log(10) / math.comb(25, 2), rel=1e-11)
        assert float(rows[1]["p_min"]) == pytest.approx(math.log(625 / 0.1) / 24, rel=1e-11)
        assert float(rows[2]["p_min"]) == pytest.approx(
            closed_form_threshold("r_disconnected_cliques", 25, 5, 0.1), rel=1e-11
        )
        assert rows[2]["param"] == "5" and rows[0]["param"] == ""

    def test_empty_grid(self):
        assert emit_bound_table([("clique", None)], [], [0.1]) == "family,n,param,delta,p_min,p,bound\n"

    def test_bound_non_increasing_in_p(self, tmp_path):
        path = tmp_path / "bounds.csv"
        emit_bound_table([("disconnected", None), ("star", None), ("cycle", None), ("clique", None)],
                         [10, 20], [0.1], p_multipliers=[1, 1.5, 2, 3, 4], path=path)
        rows = read_csv(path)
        groups = {}
        for r in rows:
            groups.setdefault((r["family"], r["n"], r["delta"]), []).append(r)
        for grp in groups.values():
            ps = [float(r["p"]) for r in grp]
            bounds = [float(r["bound"]) for r in grp]
            assert ps == sorted(ps)
            assert all(b <= a for a, b in zip(bounds, bounds[1:]))

    def test_unsupported(self):
        with pytest.raises(OutOfScopeError):
            emit_bound_table([("k_ary_tree", 2)], [7], [0.1])


class TestCli:
    def test_gen_graph(self, tmp_path, capsys):
        out = tmp_path / "g.txt"
        assert cli.main(["gen-graph", "--family", "k_ary_tree", "--n", "7", "--param", "2", "--out", str(out)]) == 0
        assert "alpha=5" in capsys.readouterr().out
        assert out.read_text().startswith("n 7\nindependent 1 4 5 6 7\n")

    def test_simulate_then_estimate(self, tmp_path, capsys):
        sim = tmp_path / "sim"
        assert cli.main(["simulate", "--family", "r_disconnected_cliques", "--n", "30", "--param", "3",
                         "--k", "500", "--seed", "2", "--out", str(sim)]) == 0
        capsys.readouterr()
        assert cli.main(["estimate", "--features", str(sim / "features.csv"), "--counts", str(sim / "counts.csv"),
                         "--truth", str(sim / "theta.csv"), "--estimator", "fbtl-ls,ols",
                         "--out", str(tmp_path / "est")]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "estimator,n,alpha,m,pd_error,l2_error"
        fb = lines[1].split(",")
        assert fb[0] == "fbtl_ls" and float(fb[5]) < 0.5
        assert (tmp_path / "est" / "estimates.csv").exists()

    def test_bound(self, capsys):
        assert cli.main(["bound", "--family", "clique,r_disconnected_cliques:5", "--n", "25",
                         "--delta", "0.1,0.2"]) == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 4

    def test_experiment_and_sc(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"experiment_type": "type1_vs_n", "n": [12], "param": 3, "c": 8}))
        assert cli.main(["experiment", "--config", str(cfg), "--out", str(tmp_path / "e"), "--trials", "2",
                         "--k", "50", "--estimator", "rc", "--seed", "4"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("point,estimator") and "rank_centrality" in out
        assert cli.main(["sc", "--config", str(cfg), "--out", str(tmp_path / "s"), "--trials", "2",
                         "--estimator", "fbtl-ls"]) == 0
        assert capsys.readouterr().out.startswith("point,estimator,n,alpha,K,eps,sc")

    def test_error_exit(self, tmp_path, capsys):
        assert cli.main(["bound", "--family", "k_ary_tree:2", "--n", "7"]) == 2
        assert "error:" in capsys.readouterr().err
