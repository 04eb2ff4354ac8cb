import json
import math
from pathlib import Path

import numpy as np
import pytest

from inr_forge import cli, io, metrics, tasks
from inr_forge.errors import ConfigError
from inr_forge.network import GaborReal, Relu, Sine, Trident

TINY = ["network.hidden_width=16", "data.size=32", "data.samples=400", "data.projections=8"]


def run(argv, capsys=None):
    code = cli.main(argv)
    out = capsys.readouterr().out if capsys else ""
    return code, out


# -- config resolution -------------------------------------------------------------

def test_defaults_encode_protocol():
    fit = tasks.resolve_config({"task": "fit"})
    assert (fit.network.hidden_layers, fit.network.hidden_width) == (2, 256)
    assert fit.network.s0 == 5.0 and fit.network.omega0 == 10.0
    audio = tasks.resolve_config({"task": "audio"})
    assert (audio.network.hidden_layers, audio.network.hidden_width) == (5, 256)
    assert audio.schedule is False
    ct = tasks.resolve_config({"task": "ct"})
    assert ct.network.hidden_width == 300 and ct.data.projections == 100
    dn = tasks.resolve_config({"task": "denoise"})
    assert (dn.data.max_photons, dn.data.integration_time) == (30.0, 2.0)
    assert tasks.resolve_config({"task": "sr"}).data.sr_factor == 4
    occ = tasks.resolve_config({"task": "occupancy"})
    assert occ.batch_size == 65536


def test_resolution_is_total():
    cfg = tasks.resolve_config({"task": "ct", "seed": 3})
    d = cfg.to_dict()
    assert d["network"]["init_seed"] == 3 and d["data"]["detectors"] == 95
    # a resolved config resolves to itself
    assert tasks.resolve_config(d).to_dict() == d


def test_overrides_and_aliases():
    cfg = tasks.resolve_config({"task": "sr"}, ["s0=10", "data.sr_factor=2", "width=64", "schedule=false"])
    assert cfg.network.s0 == 10 and cfg.data.sr_factor == 2
    assert cfg.network.hidden_width == 64 and cfg.schedule is False


@pytest.mark.parametrize("raw,overrides", [
    ({"task": "nope"}, []),
    ({"task": "fit", "method": "mfn"}, []),
    ({"task": "fit", "method": "siren", "ablation": "no_order"}, []),
    ({"task": "fit"}, ["network.depth=3"]),
    ({"task": "fit"}, ["no_equals"]),
    ({"task": "fit"}, ["precision=float16"]),
    ({"task": "fit", "network": 5}, []),
])
def test_config_errors(raw, overrides):
    with pytest.raises(ConfigError):
        tasks.resolve_config(raw, overrides)


def test_network_spec_per_method_and_ablation():
    def spec(**kw):
        cfg = tasks.resolve_config(dict(task="fit", **kw))
        return tasks.network_spec(cfg, 2, 1)

    assert isinstance(spec(method="trident").activation, Trident) and spec(method="trident").encoding
    s = spec(method="siren")
    assert isinstance(s.activation, Sine) and s.activation.omega0 == 10.0 and s.encoding is None
    assert isinstance(spec(method="gabor").activation, GaborReal)
    r = spec(method="relu_pe")
    assert isinstance(r.activation, Relu) and r.encoding is not None
    nf = spec(ablation="no_frequency")
    assert isinstance(nf.activation, Trident) and nf.encoding is None
    ns = spec(ablation="no_spatial")
    assert isinstance(ns.activation, Relu) and ns.encoding is not None
    no = spec(ablation="no_order")
    assert isinstance(no.activation, GaborReal) and no.encoding is None


def test_config_hash_ignores_output_dir():
    a = tasks.resolve_config({"task": "fit", "output_dir": "a"})
    b = tasks.resolve_config({"task": "fit", "output_dir": "b"})
    c = tasks.resolve_config({"task": "fit", "seed": 1})
    assert a.config_hash() == b.config_hash() != c.config_hash()


# -- tasks through the CLI -----------------------------------------------------------

@pytest.mark.parametrize("task", tasks.TASKS)
def test_every_task_runs(tmp_path, capsys, task):
    out = tmp_path / task
    argv = [task, "--out", str(out), "--iterations", "3", "--seed", "1"]
    for s in TINY:
        argv += ["--set", s]
    code, text = run(argv, capsys)
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["task"] == task and report["config"]["seed"] == 1
    for path in [report["history_path"], report["curve_path"], *report["artifacts"].values()]:
        assert Path(path).exists()
    rows = metrics.read_reports(out / "metrics.jsonl")
    assert {r.task for r in rows} == {task}
    name, _ = tasks.PRIMARY_METRIC[task]
    assert name in {r.metric for r in rows}
    assert json.loads(text)["output_dir"] == str(out)


def test_config_file_and_set(tmp_path, capsys):
    cfg = {"task": "fit", "method": "siren", "iterations": 2, "network": {"hidden_width": 8}, "data": {"size": 16}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    code, _ = run(["fit", "--config", str(tmp_path / "c.json"), "--set", "network.omega0=20",
                   "--out", str(tmp_path / "o")], capsys)
    assert code == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["config"]["method"] == "siren" and rep["config"]["network"]["omega0"] == 20
    assert rep["config"]["network"]["hidden_width"] == 8


def test_constant_image_fit(tmp_path):
    io.write_image(np.full((32, 32), 128 / 255), tmp_path / "flat.pgm")
    cfg = tasks.resolve_config({"task": "fit", "iterations": 100, "output_dir": str(tmp_path / "o"),
                                "data": {"input": str(tmp_path / "flat.pgm")}})
    rep = tasks.run_task(cfg)
    assert rep.metrics["psnr"] == math.inf or rep.metrics["psnr"] > 60


def test_rerun_embedded_config_is_bit_exact(tmp_path):
    cfg = tasks.resolve_config({"task": "denoise", "iterations": 5, "output_dir": str(tmp_path / "a")}, TINY)
    first = tasks.run_task(cfg)
    again = json.loads((tmp_path / "a" / "report.json").read_text())["config"]
    again["output_dir"] = str(tmp_path / "b")
    second = tasks.run_task(tasks.resolve_config(again))
    assert first.metrics == second.metrics
    assert (tmp_path / "a" / "loss.txt").read_bytes() == (tmp_path / "b" / "loss.txt").read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["fit", "--set", "bogus=1", "--out", str(tmp_path)]) == 2
    assert cli.main(["fit", "--method", "siren", "--ablation", "no_order", "--out", str(tmp_path)]) == 2
    assert cli.main(["fit", "--set", "data.input=" + str(tmp_path / "missing.pgm"), "--out", str(tmp_path)]) == 3
    (tmp_path / "bad.pgm").write_bytes(b"P5 4 4 255\n")
    assert cli.main(["fit", "--set", "data.input=" + str(tmp_path / "bad.pgm"), "--out", str(tmp_path)]) == 3
    (tmp_path / "bad.json").write_text("{not json")
    assert cli.main(["fit", "--config", str(tmp_path / "bad.json")]) == 2
    capsys.readouterr()


def test_divergence_exit_code_and_nan_report(tmp_path, capsys):
    out = tmp_path / "div"
    argv = ["fit", "--method", "relu_pe", "--iterations", "5", "--out", str(out),
            "--set", "lr=1e300", "--set", "schedule=false", "--set", "precision=float64"] + sum((["--set", s] for s in TINY), [])
    assert cli.main(argv) == 4
    assert "relu" in capsys.readouterr().err
    rows = metrics.read_reports(out / "metrics.jsonl")
    assert len(rows) == 1 and math.isnan(rows[0].value) and rows[0].method == "relu_pe"


def test_verify_theory(tmp_path, capsys):
    code, text = run(["verify-theory", "--out", str(tmp_path)], capsys)
    rep = json.loads(text)
    assert code == 0 and rep["residual"] < 1e-9 and rep["bound_violations"] == []
    assert json.loads((tmp_path / "theory.json").read_text()) == rep
    code, text = run(["verify-theory", "--order-cap", "2"], capsys)
    assert code == 0 and json.loads(text)["residual"] > 0.01
    code, text = run(["verify-theory", "--inner-cap", "1"], capsys)
    assert code != 0
    assert any(v["check"] == "closed_form" for v in json.loads(text)["bound_violations"])


def test_summarize(tmp_path, capsys):
    for m in ("trident", "relu_pe"):
        argv = ["fit", "--method", m, "--iterations", "2", "--out", str(tmp_path / m)]
        for s in TINY:
            argv += ["--set", s]
        assert cli.main(argv) == 0
    capsys.readouterr()
    code, text = run(["summarize", str(tmp_path)], capsys)
    assert code == 0
    lines = text.splitlines()
    assert lines[0].split() == ["method", "fit/psnr", "fit/ssim"]
    assert {lines[2].split()[0], lines[3].split()[0]} == {"relu_pe", "trident"}


# -- sweeps ----------------------------------------------------------------------------

def test_sweep_s0_sorted(tmp_path):
    template = tasks.resolve_config({"task": "sr", "iterations": 10, "output_dir": str(tmp_path)},
                                    ["width=16", "data.size=32"])
    reports = tasks.sweep(template, "s0", [1, 5, 10, 20])
    assert len(reports) == 4
    psnrs = [r.metrics["psnr"] for r in reports]
    assert psnrs == sorted(psnrs, reverse=True)
    assert sorted(r.config["network"]["s0"] for r in reports) == [1, 5, 10, 20]
    assert len({r.config["seed"] for r in reports}) == 1
    table = tasks.sweep_table(reports, "s0").splitlines()
    assert table[0].split() == ["s0", "psnr"] and len(table) == 5


def test_sweep_projections(tmp_path, capsys):
    argv = ["sweep", "--task", "ct", "--axis", "projections", "--values", "100,75,50",
            "--iterations", "2", "--out", str(tmp_path)] + sum((["--set", s] for s in TINY), [])
    assert cli.main(argv) == 0
    summary = json.loads((tmp_path / "sweep.json").read_text())
    assert sorted(s["value"] for s in summary) == [50, 75, 100]
    for s in summary:
        assert (tmp_path / f"projections={s['value']}" / "report.json").exists()
    capsys.readouterr()


def test_sweep_empty_and_unknown(tmp_path, capsys):
    template = tasks.resolve_config({"task": "fit", "output_dir": str(tmp_path)})
    assert tasks.sweep(template, "s0", []) == []
    assert cli.main(["sweep", "--task", "fit", "--axis", "s0", "--values", "", "--out", str(tmp_path)]) == 0
    with pytest.raises(ConfigError):
        tasks.sweep(template, "warp_factor", [1])
    with pytest.raises(ConfigError):
        tasks.sweep(template, "method", [1])
    assert cli.main(["sweep", "--task", "fit", "--axis", "nope", "--values", "1", "--out", str(tmp_path)]) == 2
    capsys.readouterr()


def test_sweep_parallel_matches_serial(tmp_path, monkeypatch):
    template = tasks.resolve_config({"task": "fit", "iterations": 3}, ["width=8", "data.size=16"])
    template.output_dir = str(tmp_path / "serial")
    serial = tasks.sweep(template, "sigma", [2, 4], workers=1)
    template.output_dir = str(tmp_path / "par")
    monkeypatch.setenv("INR_FORGE_THREADS", "2")
    par = tasks.sweep(template, "sigma", [2, 4])
    assert [r.metrics for r in serial] == [r.metrics for r in par]
