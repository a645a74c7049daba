import json

import pytest

from frugalzo.cli import main
from frugalzo.toytable import toy_run_config


def test_run_writes_named_outputs(tmp_path, capsys):
    code = main([
        "run", "--task", "f3", "--opt", "adamezo", "--steps", "120",
        "--seed", "1", "--out", str(tmp_path),
    ])
    assert code == 0
    assert (tmp_path / "f3_adamezo_seed1.csv").exists()
    meta = json.loads((tmp_path / "f3_adamezo_seed1.meta.json").read_text())
    assert meta["config"]["optimizer"] == "adamezo"
    assert meta["config"]["optimizer_config"]["h"] == 10
    assert meta["terminal_reason"] in ("budget", "plateau")
    assert meta["ledger"]["peak_aux_floats"] >= 0
    assert "wall_clock_seconds" in meta


def test_run_is_byte_deterministic(tmp_path):
    for sub in ("a", "b"):
        main([
            "run", "--task", "f3", "--opt", "mezo", "--steps", "100",
            "--seed", "3", "--out", str(tmp_path / sub),
        ])
    a = (tmp_path / "a" / "f3_mezo_seed3.csv").read_bytes()
    b = (tmp_path / "b" / "f3_mezo_seed3.csv").read_bytes()
    assert a == b


def test_run_reproducible_from_meta_alone(tmp_path):
    main([
        "run", "--task", "synthetic", "--opt", "hmezo", "--steps", "60",
        "--eval-every", "20", "--seed", "9", "--batch-size", "8", "--h", "3",
        "--eta", "0.002", "--out", str(tmp_path / "orig"),
    ])
    meta = json.loads((tmp_path / "orig" / "synthetic_hmezo_seed9.meta.json").read_text())
    cfg = meta["config"]
    opt = cfg["optimizer_config"]
    lines = [
        "[run]",
        f"task = {cfg['task']}",
        f"optimizer = {cfg['optimizer']}",
        f"steps = {cfg['max_steps']}",
        f"eval_every = {cfg['eval_interval']}",
        f"patience = {cfg['patience'] if cfg['patience'] is not None else 'none'}",
        f"seed = {cfg['seed']}",
        f"batch_size = {cfg['batch_size']}",
        f"d = {cfg['d']}",
        f"n = {cfg['n']}",
        f"dataset_seed = {cfg['dataset_seed']}",
        f"eta = {opt['eta']}",
        f"mu = {opt['mu']}",
        f"h = {opt['h']}",
        f"beta1 = {opt['beta1']}",
        f"beta2 = {opt['beta2']}",
        f"epsilon = {opt['epsilon']}",
        f"blocks = {opt['num_blocks']}",
        f"beta_v_mode = {opt['beta_v_mode']}",
    ]
    if opt["warmup_steps"] is not None:
        lines.append(f"warmup = {opt['warmup_steps']}")
    spec = tmp_path / "from_meta.ini"
    spec.write_text("\n".join(lines) + "\n")
    assert main(["run", str(spec), "--out", str(tmp_path / "redo")]) == 0
    a = (tmp_path / "orig" / "synthetic_hmezo_seed9.csv").read_bytes()
    b = (tmp_path / "redo" / "synthetic_hmezo_seed9.csv").read_bytes()
    assert a == b


def test_unknown_config_key_names_offender(tmp_path, capsys):
    spec = tmp_path / "bad.ini"
    spec.write_text("[run]\ntask = f3\noptimizer = mezo\nbetta1 = 0.5\n")
    code = main(["run", str(spec)])
    assert code == 2
    assert "betta1" in capsys.readouterr().err


def test_missing_task_is_config_error(capsys):
    assert main(["run", "--opt", "mezo"]) == 2
    assert "task" in capsys.readouterr().err


def test_file_config_with_flag_override(tmp_path):
    spec = tmp_path / "run.ini"
    spec.write_text(
        "[run]\ntask = f1\noptimizer = mezo\nsteps = 50\nseed = 2\n"
        f"out = {tmp_path}\neta = 0.005\n"
    )
    code = main(["run", str(spec), "--steps", "30"])
    assert code == 0
    meta = json.loads((tmp_path / "f1_mezo_seed2.meta.json").read_text())
    assert meta["config"]["max_steps"] == 30  # flag wins
    assert meta["config"]["optimizer_config"]["eta"] == 0.005


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_divergence_exit_code(tmp_path):
    # eta large enough that the squared loss overflows float64 on step two
    code = main([
        "run", "--task", "f3", "--opt", "mezo", "--eta", "1e200",
        "--steps", "200", "--seed", "1", "--out", str(tmp_path),
    ])
    assert code == 1
    meta = json.loads((tmp_path / "f3_mezo_seed1.meta.json").read_text())
    assert meta["terminal_reason"] == "divergence"


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FRUGALZO_OUT", str(tmp_path / "envout"))
    code = main(["run", "--task", "f3", "--opt", "mezo", "--steps", "20", "--seed", "0"])
    assert code == 0
    assert (tmp_path / "envout" / "f3_mezo_seed0.csv").exists()


def test_toytable_cells_use_table_settings():
    cfg = toy_run_config("f1", "first_order_adam")
    assert cfg.opt.eta == 0.01
    assert cfg.max_steps == 600
    assert tuple(cfg.init) == (0.2, 6.75)
    assert not cfg.toy_two_seed

    cfg = toy_run_config("f2", "mezo")
    assert cfg.opt.eta == 0.002
    assert cfg.max_steps == 2500
    assert tuple(cfg.init) == (-1.0, -1.0)
    assert cfg.toy_two_seed
    assert cfg.patience is None  # full step budget


def test_toytable_prints_all_cells_and_writes_files(tmp_path, capsys):
    code = main(["toytable", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    for task in ("f1", "f2", "f3"):
        for kind in ("first_order_adam", "mezo", "adamezo"):
            assert (tmp_path / f"{task}_{kind}_seed0.csv").exists()
    assert out.count("first_order_adam") == 3
    assert "ref_len" in out


def test_compare_runs_and_reports_median(tmp_path, capsys):
    spec = tmp_path / "cmp.ini"
    spec.write_text(
        "[compare]\n"
        "task = f3\n"
        "steps = 300\n"
        "eval_every = 100\n"
        "patience = none\n"
        "seeds = 1 2 3\n"
        "\n"
        "[optimizer.mezo]\n"
        "eta = 0.01\n"
        "\n"
        "[optimizer.adamezo]\n"
        "eta = 0.01\n"
        "h = 5\n"
    )
    code = main(["compare", str(spec), "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "comparison.json").read_text())
    assert "median_savings" in report
    assert "adamezo_vs_mezo" in report["median_savings"]
    assert len(report["terminal_losses"]) == 6  # 2 optimizers x 3 seeds
    labels = {p["a"] for p in report["pairs"]}
    assert any(l.startswith("mezo_seed") for l in labels)


def test_compare_requires_two_optimizers(tmp_path, capsys):
    spec = tmp_path / "single.ini"
    spec.write_text("[compare]\ntask = f3\nseeds = 1\n\n[optimizer.mezo]\neta = 0.01\n")
    assert main(["compare", str(spec)]) == 2
    assert "two" in capsys.readouterr().err


def test_compare_deterministic_report(tmp_path):
    spec = tmp_path / "cmp.ini"
    spec.write_text(
        "[compare]\ntask = f3\nsteps = 200\npatience = none\nseeds = 4 5\n\n"
        "[optimizer.mezo]\neta = 0.01\n\n[optimizer.adamezo]\neta = 0.01\n"
    )
    main(["compare", str(spec), "--out", str(tmp_path / "r1")])
    main(["compare", str(spec), "--out", str(tmp_path / "r2")])
    a = json.loads((tmp_path / "r1" / "comparison.json").read_text())
    b = json.loads((tmp_path / "r2" / "comparison.json").read_text())
    assert a == b


def test_compare_parallel_jobs_matches_serial(tmp_path):
    spec = tmp_path / "cmp.ini"
    spec.write_text(
        "[compare]\ntask = f3\nsteps = 150\npatience = none\nseeds = 1 2\n\n"
        "[optimizer.mezo]\neta = 0.01\n\n[optimizer.adamezo]\neta = 0.01\n"
    )
    main(["compare", str(spec), "--out", str(tmp_path / "serial")])
    main(["compare", str(spec), "--jobs", "2", "--out", str(tmp_path / "par")])
    a = json.loads((tmp_path / "serial" / "comparison.json").read_text())
    b = json.loads((tmp_path / "par" / "comparison.json").read_text())
    assert a == b


def test_unknown_compare_section_rejected(tmp_path, capsys):
    spec = tmp_path / "cmp.ini"
    spec.write_text(
        "[compare]\ntask = f3\nseeds = 1\n\n[optimizer.mezo]\neta = 0.01\n\n"
        "[optimizer.adamezo]\neta = 0.01\n\n[mystery]\nx = 1\n"
    )
    assert main(["compare", str(spec)]) == 2
    assert "mystery" in capsys.readouterr().err
