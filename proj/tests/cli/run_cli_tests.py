#!/usr/bin/env python3
"""End-to-end checks of the cnet executable on the bundled fixture.

usage: run_cli_tests.py <cnet executable> <data dir>
"""

import csv
import json
import os
import subprocess
import sys
import tempfile
from pathlib import Path

CNET = None
DATA = None
failures = []

# Keys whose values depend on the clock.
TIMING_KEYS = {"wall_time", "incremental_time"}


def run(*args, env=None, check=True):
    proc = subprocess.run([CNET, *map(str, args)], capture_output=True, text=True, env=env)
    if check and proc.returncode != 0:
        raise RuntimeError(f"cnet {' '.join(map(str, args))} exited {proc.returncode}:\n{proc.stderr}")
    return proc


def expect(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def strip_timing(v):
    if isinstance(v, dict):
        return {k: strip_timing(x) for k, x in v.items() if k not in TIMING_KEYS}
    if isinstance(v, list):
        return [strip_timing(x) for x in v]
    return v


def load(p):
    return json.loads(Path(p).read_text())


def write_config(path, **extra):
    cfg = {
        "network": {"initial_widths": [16, 4]},
        "runs": 2,
    }
    cfg.update(extra)
    Path(path).write_text(json.dumps(cfg))


def csv_oracle(path):
    """Row, duplicate and class counts computed directly from the CSV."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))[1:]
    seen, unique = set(), []
    for r in rows:
        key = tuple(float(x) for x in r)
        if key not in seen:
            seen.add(key)
            unique.append(r)
    positives = sum(1 for r in unique if float(r[-1]) != 0)
    return len(rows), len(rows) - len(unique), len(unique) - positives, positives


def pipeline(cfg, prepared, out):
    run("prepare", "-c", cfg, "--prepared", prepared)
    common = ["-c", cfg, "--prepared", prepared, "-o", out]
    run("train-initial", *common, "--chunk", "1")
    run("train-initial", *common, "--chunk", "2")
    run("refit", *common, "--initial", Path(out) / "initial-c1")
    run("grow-transfer", *common, "--initial", Path(out) / "initial-c1")
    for order in ("descending", "ascending", "none"):
        run("grow-groups", *common, "--order", order)


def main():
    global CNET, DATA
    CNET, DATA = sys.argv[1], Path(sys.argv[2])
    fixture = DATA / "synthetic_fraud.csv"
    tmp = Path(tempfile.mkdtemp(prefix="cnet_cli_"))

    # The bundled fixture is exactly what `synth` writes for its seed.
    run("synth", "--kind", "fraud", "--rows", 1000, "--features", 6, "--seed", 2024, "--out", tmp / "regen.csv")
    expect((tmp / "regen.csv").read_bytes() == fixture.read_bytes(), "bundled fixture regenerates byte-identically")

    cfg = tmp / "cfg.json"
    write_config(cfg, data={"csv": str(fixture)})

    pipeline(cfg, tmp / "prep-a", tmp / "out-a")
    pipeline(cfg, tmp / "prep-b", tmp / "out-b")

    summary = load(tmp / "prep-a" / "summary.json")
    rows, dups, neg, pos = csv_oracle(fixture)
    expect(summary["loaded"]["rows"] == rows, "prepare summary: loaded row count")
    expect(summary["duplicates_removed"] == dups, f"prepare summary: {dups} duplicates removed")
    expect(summary["after_dedup"] == {"rows": rows - dups, "class0": neg, "class1": pos},
           "prepare summary: class counts after dedup")
    parts = [p for c in summary["chunks"].values() for p in c["parts"].values()]
    expect(sum(p["rows"] for p in parts) == rows - dups, "prepare summary: parts cover every row once")

    # Determinism: every artifact matches between the two pipelines.
    files_a = sorted(p.relative_to(tmp / "out-a") for p in (tmp / "out-a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp / "out-b") for p in (tmp / "out-b").rglob("*") if p.is_file())
    expect(files_a == files_b and len(files_a) > 0, f"both runs write the same {len(files_a)} files")
    mismatched = []
    for rel in files_a:
        a, b = tmp / "out-a" / rel, tmp / "out-b" / rel
        if rel.name == "effective-config.json":
            same = {**load(a), "output_dir": "", "prepared_dir": ""} == {**load(b), "output_dir": "", "prepared_dir": ""}
        elif rel.name in ("metrics.json", "trace.json"):
            same = strip_timing(load(a)) == strip_timing(load(b))
        else:
            same = a.read_bytes() == b.read_bytes()
        if not same:
            mismatched.append(str(rel))
    expect(not mismatched, "re-runs are identical apart from timings" + (f" (differs: {mismatched})" if mismatched else ""))
    for chunk_file in sorted((tmp / "prep-a").glob("chunk*.json")):
        expect(chunk_file.read_bytes() == (tmp / "prep-b" / chunk_file.name).read_bytes(),
               f"prepared {chunk_file.name} is byte-identical")

    out = tmp / "out-a"
    for d in ("initial-c1", "initial-c2", "refit-c2", "final-c2", "groups-descending", "groups-ascending", "groups-none"):
        expect(all((out / d / f).exists() for f in ("run-0.cnet.json", "trace.json", "metrics.json", "run-0.series.csv")),
               f"{d}: model, trace, metrics and series written")
    expect(len(load(out / "groups-descending" / "trace.json")["runs"][0]["growth"]) == 3,
           "grow-groups keeps one growth trace per group")

    # Four reports give a four-row table; the same report twice gives zero deltas.
    reports = [out / d / "metrics.json" for d in ("initial-c1", "initial-c2", "refit-c2", "final-c2")]
    proc = run("compare", *reports, "--out", tmp / "cmp4.json")
    table = load(tmp / "cmp4.json")
    expect([r["name"] for r in table["rows"]] == ["initial@c1", "initial@c2", "refit@c2", "final@c2"],
           "compare lists four models in order")
    expect(all(name in proc.stdout for name in ("initial@c1", "final@c2", "fnr")), "compare prints the table")
    run("compare", reports[3], reports[3], "--out", tmp / "same.json")
    expect(all(d == 0.0 for row in load(tmp / "same.json")["rows"] for d in row["deltas"]),
           "same report twice gives zero deltas")

    # refit with no epochs leaves the parameters untouched.
    run("refit", "-c", cfg, "--prepared", tmp / "prep-a", "-o", tmp / "out-zero",
        "--initial", out / "initial-c1", "--set", "train.max_epochs=0")
    for k in (0, 1):
        a = load(out / "initial-c1" / f"run-{k}.cnet.json")
        b = load(tmp / "out-zero" / "refit-c2" / f"run-{k}.cnet.json")
        expect(a["blocks"] == b["blocks"] and a["output"] == b["output"], f"refit max_epochs 0 keeps run-{k} parameters")

    # Drift fixture: the saved transfer model reproduces its logged validation accuracy.
    run("synth", "--kind", "drift", "--rows", 3000, "--seed", 5, "--out", tmp / "drift.csv")
    dcfg = tmp / "drift.json"
    write_config(dcfg, data={"csv": str(tmp / "drift.csv")}, runs=1)
    run("prepare", "-c", dcfg, "--prepared", tmp / "prep-d")
    run("grow-transfer", "-c", dcfg, "--prepared", tmp / "prep-d", "-o", tmp / "out-d")
    logged = load(tmp / "out-d" / "final-c2" / "trace.json")["runs"][0]["final_validation_accuracy"]
    proc = run("evaluate", "-c", dcfg, "--prepared", tmp / "prep-d",
               "--model", tmp / "out-d" / "final-c2" / "run-0.cnet.json", "--data", "chunk2.valid")
    acc = json.loads(proc.stdout)["report"]["accuracy"]
    expect(abs(acc - logged) <= 1e-9, f"transfer model reloads with validation accuracy {acc} (logged {logged})")
    expect((tmp / "out-d" / "final-c2" / "run-0.initial.cnet.json").exists(), "grow-transfer saves its initial model")

    # The config path can come from the environment.
    env = dict(os.environ, CNET_CONFIG=str(dcfg))
    proc = run("train-initial", "--prepared", tmp / "prep-d", "-o", tmp / "out-env", env=env)
    expect(load(tmp / "out-env" / "initial-c1" / "effective-config.json")["data"]["csv"] == str(tmp / "drift.csv"),
           "CNET_CONFIG supplies the default config")

    # Error exits.
    proc = run("prepare", "-c", cfg, "--csv", tmp / "missing.csv", "--prepared", tmp / "p", check=False)
    expect(proc.returncode == 2 and "missing.csv" in proc.stderr, "missing CSV exits 2 naming the path")
    bad = tmp / "corrupt.json"
    bad.write_text('{"schema": "cnet-metrics", "schema_version": 1, "report": {"f1": ')
    proc = run("compare", bad, reports[0], check=False)
    expect(proc.returncode == 3 and "corrupt.json" in proc.stderr, "corrupted report exits 3 naming the file")
    proc = run("train-initial", "-c", cfg, "--set", "train.bogus=1", check=False)
    expect(proc.returncode == 2 and "train.bogus" in proc.stderr, "unknown config key exits 2")
    proc = run("refit", "-c", cfg, "--prepared", tmp / "nowhere", "--initial", out / "initial-c1", check=False)
    expect(proc.returncode == 2 and "refit[load]" in proc.stderr, "missing prepared data exits 2 with a stage tag")
    proc = run("compare", reports[0], check=False)
    expect(proc.returncode == 2, "compare with one report is a usage error")

    if failures:
        print(f"{len(failures)} check(s) failed")
        return 1
    print("all cli checks passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
