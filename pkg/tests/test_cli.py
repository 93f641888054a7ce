import json
from pathlib import Path

import pytest

from dfolio import cli
from dfolio.backtest import BacktestLedger
from dfolio.reports import (
    read_hparams_csv,
    read_metrics_csv,
    read_metrics_json,
    read_nav_csv,
    read_panel_csv,
    read_plotdata_csv,
    read_weights_csv,
)


def run_cli(args):
    return cli.main(args)


@pytest.fixture
def synth_dir(tmp_path):
    data = tmp_path / "data"
    assert run_cli(["synth", "--out", str(data), "--assets", "4", "--days", "480", "--seed", "5"]) == 0
    return data


def write_config(tmp_path, data_dir, out_dir, **overrides):
    cfg = {
        "data_dir": str(data_dir),
        "output_dir": str(out_dir),
        "seed": 3,
        "backtest": {"start": "2016-02-01", "end": "2016-10-31"},
        "search": {"n_trials": 2, "epochs_min": 2, "epochs_max": 3},
        "strategies": ["max_sharpe", "spo_plus"],
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestSynthAndIngest:
    def test_synth_writes_ticker_csvs(self, synth_dir):
        files = sorted(p.name for p in synth_dir.iterdir())
        assert files == [f"SYN{i:02d}.csv" for i in range(4)]

    def test_ingest_summary_and_outputs(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "ingested"
        assert run_cli(["ingest", "--data", str(synth_dir), "--out", str(out)]) == 0
        captured = capsys.readouterr().out
        assert "assets: 4" in captured
        assert "dropped non-common dates: 0" in captured
        frame = read_panel_csv(out / "panel.csv")
        assert frame.n_assets == 4 and frame.n_dates == 480
        assert (out / "features.csv").exists()

    def test_ingest_empty_dir(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert run_cli(["ingest", "--data", str(empty), "--out", str(tmp_path / "o")]) == 1
        assert "no input files" in capsys.readouterr().err

    def test_ingest_missing_dir(self, tmp_path, capsys):
        assert run_cli(["ingest", "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_backtest_missing_data_dir(self, tmp_path, capsys):
        cfg = write_config(tmp_path, tmp_path / "nope", tmp_path / "o", strategies=["max_sharpe"])
        assert run_cli(["backtest", "--config", str(cfg)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_ingest_malformed_row_cites_file(self, tmp_path, capsys):
        data = tmp_path / "bad"
        data.mkdir()
        (data / "XX.csv").write_text(
            "date,open,high,low,close,adj_close,volume\n2020-01-06,1,1,1,1,oops,5\n"
        )
        code = run_cli(["ingest", "--data", str(data), "--out", str(tmp_path / "o")])
        assert code == 1
        assert "XX.csv" in capsys.readouterr().err


class TestBacktestCommand:
    def test_single_strategy_run(self, synth_dir, tmp_path, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, synth_dir, out, strategies=["max_sharpe"])
        assert run_cli(["backtest", "--config", str(cfg)]) == 0
        for name in ("nav.csv", "weights.csv", "hparams.csv", "metrics.json", "metrics.csv"):
            assert (out / name).exists(), name
        assert (out / "plotdata" / "nav_full.csv").exists()
        assert "max_sharpe" in capsys.readouterr().out

    def test_outputs_round_trip(self, synth_dir, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, synth_dir, out)
        assert run_cli(["backtest", "--config", str(cfg)]) == 0
        nav = read_nav_csv(out / "nav.csv")
        assert set(nav) == {"max_sharpe", "spo_plus"}
        weights = read_weights_csv(out / "weights.csv")
        assert {w["strategy"] for w in weights} == {"max_sharpe", "spo_plus"}
        hparams = read_hparams_csv(out / "hparams.csv")
        assert {h["strategy"] for h in hparams} == {"spo_plus"}  # max_sharpe has no search
        mj = read_metrics_json(out / "metrics.json")
        mc = read_metrics_csv(out / "metrics.csv")
        assert mj.keys() == mc.keys()
        for s in mj:
            assert mj[s]["full"] == mc[s]["full"]
        plot = read_plotdata_csv(out / "plotdata" / "nav_full.csv")
        for name, (dates, values) in plot.items():
            assert dates == nav[name][0]
            assert values == nav[name][1]

    def test_negative_gamma_names_key(self, synth_dir, tmp_path, capsys):
        cfg = write_config(
            tmp_path, synth_dir, tmp_path / "o",
            strategies=[{"name": "fee", "kind": "spo_plus_fee", "gamma": -0.1}],
        )
        assert run_cli(["backtest", "--config", str(cfg)]) == 2
        err = capsys.readouterr().err
        assert "strategies[0]" in err and "gamma" in err

    def test_errors_reported_exhaustively(self, synth_dir, tmp_path, capsys):
        cfg = write_config(
            tmp_path, synth_dir, tmp_path / "o",
            seed=-1,
            backtest={"start": "not-a-date", "end": "2016-10-31", "fee_rate": -2},
        )
        assert run_cli(["backtest", "--config", str(cfg)]) == 2
        err = capsys.readouterr().err
        assert "seed" in err
        assert "backtest.start" in err
        assert "backtest.fee_rate" in err

    def test_bad_json(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        assert run_cli(["backtest", "--config", str(path)]) == 2
        assert "valid JSON" in capsys.readouterr().err

    def test_strategy_filter_flag(self, synth_dir, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, synth_dir, out)
        assert run_cli(["backtest", "--config", str(cfg), "--strategies", "max_sharpe"]) == 0
        nav = read_nav_csv(out / "nav.csv")
        assert set(nav) == {"max_sharpe"}

    def test_unknown_strategy_filter(self, synth_dir, tmp_path, capsys):
        cfg = write_config(tmp_path, synth_dir, tmp_path / "o")
        assert run_cli(["backtest", "--config", str(cfg), "--strategies", "nope"]) == 2
        assert "not in the configured roster" in capsys.readouterr().err

    def test_deterministic_outputs(self, synth_dir, tmp_path):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        cfg = write_config(tmp_path, synth_dir, out1)
        assert run_cli(["backtest", "--config", str(cfg)]) == 0
        assert run_cli(["backtest", "--config", str(cfg), "--out", str(out2)]) == 0
        assert (out1 / "nav.csv").read_bytes() == (out2 / "nav.csv").read_bytes()
        assert (out1 / "metrics.json").read_bytes() == (out2 / "metrics.json").read_bytes()

    def test_partial_failure_exit_code(self, synth_dir, tmp_path, monkeypatch, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, synth_dir, out, strategies=["max_sharpe", "spo_plus"])

        import dfolio.cli as cli_mod

        real = cli_mod.run_backtest

        def partial(frame, roster, config):
            ledgers = real(frame, roster, config)
            ledgers["spo_plus"] = BacktestLedger(strategy="spo_plus", error="boom")
            return ledgers

        monkeypatch.setattr(cli_mod, "run_backtest", partial)
        assert run_cli(["backtest", "--config", str(cfg)]) == 1
        outtext = capsys.readouterr().out
        assert "FAILED: boom" in outtext

    def test_report_spans(self, synth_dir, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(
            tmp_path, synth_dir, out,
            strategies=["max_sharpe"],
            report_spans={"late": ["2016-06-01", "2016-10-31"]},
        )
        assert run_cli(["backtest", "--config", str(cfg)]) == 0
        report = read_metrics_json(out / "metrics.json")
        assert set(report["max_sharpe"]) == {"full", "late"}
        assert (out / "plotdata" / "nav_late.csv").exists()


class TestCompareCommand:
    def _metrics(self, synth_dir, tmp_path):
        out = tmp_path / "m"
        cfg = write_config(tmp_path, synth_dir, out, strategies=["max_sharpe"])
        assert run_cli(["backtest", "--config", str(cfg)]) == 0
        return out / "metrics.json"

    def test_self_compare_zero_deltas(self, synth_dir, tmp_path, capsys):
        m = self._metrics(synth_dir, tmp_path)
        assert run_cli(["compare", str(m), str(m)]) == 0
        out = capsys.readouterr().out
        assert "max_sharpe" in out
        assert "+0.0000" in out

    def test_unmatched_strategies_listed(self, synth_dir, tmp_path, capsys):
        m = self._metrics(synth_dir, tmp_path)
        other = tmp_path / "other.json"
        payload = json.loads(Path(m).read_text())
        payload["ghost"] = payload["max_sharpe"]
        other.write_text(json.dumps(payload))
        assert run_cli(["compare", str(m), str(other)]) == 0
        assert "unmatched strategies: ghost" in capsys.readouterr().out

    def test_sign_flip_marked(self, synth_dir, tmp_path, capsys):
        m = self._metrics(synth_dir, tmp_path)
        payload = json.loads(Path(m).read_text())
        row = payload["max_sharpe"]["full"]
        flipped = dict(row)
        flipped["annualized_return"] = 5.0 if row["annualized_return"] < 0 else -5.0
        other = tmp_path / "flip.json"
        other.write_text(json.dumps({"max_sharpe": {"full": flipped}}))
        assert run_cli(["compare", str(m), str(other)]) == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("max_sharpe")]
        assert any("!" in l for l in lines)

    def test_schema_mismatch(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"s": {"full": {"wrong": 1}}}')
        good = tmp_path / "good.json"
        good.write_text("{}")
        assert run_cli(["compare", str(bad), str(good)]) == 2
        assert "cannot read metrics" in capsys.readouterr().err
