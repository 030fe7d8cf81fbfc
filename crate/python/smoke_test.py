#!/usr/bin/env python3
"""Smoke test for the hamlearn extension module.

Builds the cdylib if needed, imports it from the target directory, and runs
a miniature end-to-end pass: plan -> dataset -> model -> prediction, plus a
determinism check on the artifact pipeline.
"""

import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def ensure_extension() -> pathlib.Path:
    """Build the extension and return an importable module path."""
    subprocess.run(
        ["cargo", "build", "-p", "hamlearn-py"],
        cwd=ROOT,
        check=True,
    )
    built = ROOT / "target" / "debug" / "libhamlearn.so"
    if not built.exists():
        sys.exit(f"extension library not found at {built}")
    stage = ROOT / "target" / "pymod"
    stage.mkdir(parents=True, exist_ok=True)
    dest = stage / "hamlearn.so"
    if not dest.exists() or built.stat().st_mtime > dest.stat().st_mtime:
        shutil.copy2(built, dest)
    return stage


def check(label: str, ok: bool, detail: str = "") -> None:
    status = "ok" if ok else "FAIL"
    print(f"  {label}: {status}{' ' + detail if detail else ''}")
    if not ok:
        sys.exit(1)


def main() -> None:
    sys.path.insert(0, str(ensure_extension()))
    import hamlearn

    print("plan construction and round trip")
    plan = hamlearn.Plan.tfim_chain(3, 1.0, 0.8, 0.05)
    check("n", plan.n == 3)
    check("steps", plan.steps == 1)
    check("t_max", abs(plan.t_max - 0.05) < 1e-15)
    reparsed = hamlearn.Plan.from_json(plan.to_json())
    check("digest stable", reparsed.digest() == plan.digest())

    print("truncation order")
    m, t_star, regime, bound = plan.truncation(1e-3)
    check("order positive", m >= 1, f"m={m}")
    check("short-time plan", plan.t_max < t_star, f"t*={t_star:.4f}")
    check("regime", regime in ("ShortTime", "ConstantTime"), regime)
    check("bound positive", bound > 0.0, f"bound={bound:.3e}")

    print("single-qubit learning")
    single = hamlearn.Plan.single_qubit("Z", 1.0, 0.2)
    ds = single.simulate(40_000, seed=7)
    check("dataset length", len(ds) == 40_000)
    model = single.learn(ds, trunc_m=3)
    kept = dict()
    for word, alpha, _ in model.kept_terms(0, "X"):
        kept[word] = alpha
    # U†XU for H = Z over time t rotates X towards Y by 2t.
    expect_x = math.cos(0.4)
    expect_y = math.sin(0.4)
    check(
        "X coefficient",
        abs(kept.get("X", 0.0) - expect_x) < 0.05,
        f"alpha_X={kept.get('X', 0.0):+.4f}",
    )
    check(
        "Y coefficient",
        abs(kept.get("Y", 0.0) - expect_y) < 0.05,
        f"alpha_Y={kept.get('Y', 0.0):+.4f}",
    )

    print("mean-value prediction")
    plus = [1 / math.sqrt(2), 1 / math.sqrt(2)]
    predicted = model.predict(plus, [0], "X")
    check(
        "<+|U†XU|+> near cos(2t)",
        abs(predicted - expect_x) < 0.05,
        f"predicted={predicted:+.4f}",
    )

    print("dataset save/load round trip")
    with tempfile.TemporaryDirectory(prefix="hamlearn-py-") as tmp:
        ds_path = pathlib.Path(tmp) / "records.bin"
        ds.save(ds_path)
        again = hamlearn.Dataset.load(ds_path)
        check("record count", len(again) == len(ds))
        check("seed", again.seed == ds.seed)

    print("artifact pipeline determinism")
    plan_path = ROOT / "plans" / "zz_chain_n2.json"
    with tempfile.TemporaryDirectory(prefix="hamlearn-py-") as tmp:
        out_a = pathlib.Path(tmp) / "a"
        out_b = pathlib.Path(tmp) / "b"
        reports = []
        for out in (out_a, out_b):
            text = hamlearn.run_experiment(
                "full",
                plan_path,
                seed=11,
                out_dir=out,
                shots=4000,
                trunc_m=1,
            )
            reports.append(json.loads(text))
            check("report.json present", (out / "report.json").exists())
        check("reports identical", reports[0] == reports[1])
        check(
            "datasets byte-identical",
            (out_a / "dataset.bin").read_bytes() == (out_b / "dataset.bin").read_bytes(),
        )
        check(
            "dataset digest echoed",
            reports[0]["dataset_sha256"] is not None,
        )

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
