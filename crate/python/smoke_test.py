"""Quick end-to-end check of the Python bindings.

    maturin develop -m crates/python/Cargo.toml --release
    python python/smoke_test.py
"""

import math
import os
import tempfile

import pyhemanet as hn


def main():
    records = hn.synth_generate(120, mix=(30, 30, 30, 30), seed=7)
    assert len(records) == 120
    for r in records:
        features = {k: v for k, v in r.items() if k != "label"}
        assert hn.rule_label(features) == r["label"]

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.csv")
        hn.save_csv(records, path)
        assert len(hn.load_csv(path)) == 120

        diag = hn.train(records, family="ffnn", stage="diagnosis", hidden=20, epochs=400)
        cls = hn.train(records, family="elman", stage="classify", hidden=20, epochs=400)
        model_path = os.path.join(tmp, "diag.json")
        diag.save(model_path)
        again = hn.Model.load(model_path)
        print(again)

    unlabeled = [{k: v for k, v in r.items() if k != "label"} for r in records[:10]]
    assert diag.predict(unlabeled) == again.predict(unlabeled)

    reports = hn.run_pipeline(diag, cls, unlabeled)
    hits = 0
    for rep, r in zip(reports, records):
        label = "non_anemic" if rep["verdict"] == 0 else rep.get("subtype")
        hits += label == r["label"]
    print(f"pipeline: {hits}/10 correct on training records")

    m = hn.confusion_metrics([[50, 5], [10, 35]])
    assert abs(m["accuracy"] - 0.85) < 1e-12
    assert abs(m["f1"] - hn.f1_score(35 / 40, 35 / 45)) < 1e-12

    for name, err in hn.gradcheck("narx", configs=5):
        print(f"gradcheck {name}: {err:.2e}")
        assert err < 1e-4

    tables = hn.compare(records, seed=1, hidden=10, epochs=100)
    for row in tables["pipeline"]["models"]:
        assert not math.isnan(row["accuracy"])
        print(f"{row['name']:6} 4-way accuracy {row['accuracy']:.3f}")

    try:
        hn.train(records, family="lstm")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("unknown family accepted")
    print("ok")


if __name__ == "__main__":
    main()
