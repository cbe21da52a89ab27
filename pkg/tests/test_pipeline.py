import csv
import json

import numpy as np
import pytest

from topoc import cli, pipeline
from topoc.image_io import save_image
from topoc.mlkit import compute_metrics
from topoc.synthetic import synthetic_image
from topoc.vectorize import topo_feature_vector


def make_dataset(root, n_per_class=3, size=24, seed=0, test_every=3):
    rng = np.random.default_rng(seed)
    lines = ["path,label,split"]
    images = []
    for kind in ("blob", "ring"):
        for i in range(n_per_class):
            img = synthetic_image(kind, rng, size)
            name = f"{kind}_{i}.ppm"
            save_image(img, root / name)
            images.append(img)
            lines.append(f"{name},{kind},{'test' if i % test_every == 0 else 'train'}")
    (root / "manifest.csv").write_text("\n".join(lines) + "\n")
    return root / "manifest.csv", images


def test_manifest_parsing(tmp_path):
    manifest, _ = make_dataset(tmp_path, 2)
    m = pipeline.read_manifest(manifest)
    assert len(m) == 4
    assert m.entries[0].path == tmp_path / "blob_0.ppm"
    assert m.labels == ["blob", "blob", "ring", "ring"]
    pipeline.write_manifest(m, tmp_path / "copy.csv")
    assert pipeline.read_manifest(tmp_path / "copy.csv") == m


@pytest.mark.parametrize(
    "text, message",
    [
        ("path,label,split\na.ppm,x,train\na.ppm,y,test\n", "duplicate"),
        ("path,label,split\na.ppm,,train\n", "empty label"),
        ("path,label,split\na.ppm,x,validation\n", "split"),
        ("file,class\n", "header"),
        ("path,label,split\n", "no entries"),
    ],
)
def test_manifest_errors(tmp_path, text, message):
    (tmp_path / "m.csv").write_text(text)
    with pytest.raises(pipeline.InputError, match=message):
        pipeline.read_manifest(tmp_path / "m.csv")


def test_extract_three_images(tmp_path):
    manifest, images = make_dataset(tmp_path, 2)
    lines = manifest.read_text().splitlines()[:4]
    manifest.write_text("\n".join(lines) + "\n")
    out = tmp_path / "features.csv"
    assert cli.main(["extract", str(manifest), "-o", str(out), "--workers", "1"]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["label"] + [f"f{j:03d}" for j in range(400)]
    assert len(rows) == 4
    assert [int(v) for v in rows[1][1:]] == topo_feature_vector(images[0]).values.tolist()
    log = json.loads((tmp_path / "features.csv.log.json").read_text())
    assert log["failed"] == 0 and len(log["log"]) == 3
    assert all(rec["seconds"] >= 0 for rec in log["log"])


def test_extract_with_corrupt_image(tmp_path):
    manifest, _ = make_dataset(tmp_path, 2)
    lines = manifest.read_text().splitlines()[:4]
    manifest.write_text("\n".join(lines) + "\n")
    (tmp_path / "blob_1.ppm").write_bytes(b"P6 24 24 255\n\x00\x01")
    out = tmp_path / "features.csv"
    assert cli.main(["extract", str(manifest), "-o", str(out), "--workers", "1"]) == 2
    rows = list(csv.reader(out.open()))
    assert len(rows) == 3
    log = json.loads((tmp_path / "features.csv.log.json").read_text())
    failed = [r for r in log["log"] if r["status"] == "failed"]
    assert len(failed) == 1 and "blob_1.ppm" in failed[0]["path"] and "truncated" in failed[0]["error"]


def test_extract_all_failed(tmp_path):
    (tmp_path / "bad.pgm").write_bytes(b"P5 2 2 65535\n")
    (tmp_path / "m.csv").write_text("path,label,split\nbad.pgm,x,train\n")
    assert cli.main(["extract", str(tmp_path / "m.csv"), "-o", str(tmp_path / "f.csv")]) == 1


def test_extract_missing_manifest(tmp_path):
    assert cli.main(["extract", str(tmp_path / "nope.csv"), "-o", str(tmp_path / "f.csv")]) == 1


def test_extract_deterministic_across_runs_and_workers(tmp_path):
    manifest, _ = make_dataset(tmp_path, 4)
    outs = []
    for k, workers in enumerate((1, 1, 2)):
        out = tmp_path / f"f{k}.csv"
        pipeline.extract_dataset(manifest, out, workers=workers)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_extract_superlevel_columns(tmp_path):
    manifest, _ = make_dataset(tmp_path, 1)
    out = tmp_path / "f.csv"
    assert cli.main(["extract", str(manifest), "-o", str(out), "--superlevel", "--workers", "1"]) == 0
    header = next(csv.reader(out.open()))
    assert len(header) == 801 and header[-1] == "f799"


def test_feature_csv_errors(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    with pytest.raises(pipeline.InputError):
        pipeline.read_feature_csv(tmp_path / "x.csv")
    (tmp_path / "y.csv").write_text("label,f000,f001\nq,1\n")
    with pytest.raises(pipeline.InputError, match="expected 3 fields"):
        pipeline.read_feature_csv(tmp_path / "y.csv")


def _config(tmp_path, manifest, counts, **extra):
    cfg = {
        "manifest": str(manifest),
        "output_dir": str(tmp_path / "out"),
        "feature_counts": counts,
        "hyperparams": {"n_estimators": 15},
        "seed": 1,
        "workers": 1,
        **extra,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_experiment_single_k(tmp_path):
    manifest, _ = make_dataset(tmp_path, 6)
    cfg = _config(tmp_path, manifest, [400])
    assert cli.main(["experiment", str(cfg), "-o", str(tmp_path / "r.json")]) == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert len(report["rows"]) == 1
    assert report["task"] == "binary" and report["columns"] == ["Acc.", "Sen.", "Spec."]


def test_experiment_table_structure_and_determinism(tmp_path):
    manifest, _ = make_dataset(tmp_path, 6)
    cfg = _config(tmp_path, manifest, [50, 100, 200, 400])
    reports = []
    for k in range(2):
        assert cli.main(["experiment", str(cfg), "-o", str(tmp_path / f"r{k}.json")]) == 0
        reports.append((tmp_path / f"r{k}.json").read_bytes())
    assert reports[0] == reports[1]
    report = json.loads(reports[0])
    assert [r["model"] for r in report["rows"]] == ["50 Features", "100 Features", "200 Features", "400 Features"]
    assert all(len(r["table"]) == 3 for r in report["rows"])
    assert report["table_markdown"].splitlines()[0] == "| Models | Acc. | Sen. | Spec. |"
    # every row recomputes from its persisted predictions
    out = tmp_path / "out"
    for row in report["rows"]:
        labels, proba, classes = pipeline.read_predictions(out / row["predictions"])
        again = compute_metrics(labels, proba, classes, report["positive_class"])
        assert again.to_dict() == row["metrics"]
    ranking = list(csv.reader((out / "ranking.csv").open()))
    assert ranking[0] == ["rank", "feature", "gain"] and len(ranking) == 401


def test_experiment_multiclass_columns(tmp_path):
    rng = np.random.default_rng(3)
    lines = ["path,label,split"]
    for c in ("CC", "EC", "HGSC"):
        for i in range(5):
            save_image(synthetic_image("ring" if c == "EC" else "blob", rng, 20), tmp_path / f"{c}{i}.ppm")
            lines.append(f"{c}{i}.ppm,{c},{'test' if i < 2 else 'train'}")
    (tmp_path / "m.csv").write_text("\n".join(lines) + "\n")
    cfg = _config(tmp_path, tmp_path / "m.csv", [200, 400])
    report = pipeline.run_experiment(pipeline.ExperimentConfig.from_json(cfg))
    assert report["task"] == "multiclass" and report["columns"] == ["B. Acc.", "Acc.", "AUC"]
    assert len(report["rows"]) == 2


def test_experiment_uses_precomputed_features(tmp_path):
    manifest, _ = make_dataset(tmp_path, 6)
    pipeline.extract_dataset(manifest, tmp_path / "feat.csv", workers=1)
    cfg = _config(tmp_path, manifest, [100], features=str(tmp_path / "feat.csv"))
    a = pipeline.run_experiment(pipeline.ExperimentConfig.from_json(cfg))
    cfg = _config(tmp_path, manifest, [100])
    b = pipeline.run_experiment(pipeline.ExperimentConfig.from_json(cfg))
    assert a["rows"] == b["rows"]


def test_experiment_config_errors(tmp_path):
    manifest, _ = make_dataset(tmp_path, 2)
    with pytest.raises(pipeline.InputError):
        pipeline.ExperimentConfig(str(manifest), str(tmp_path), feature_counts=[])
    with pytest.raises(pipeline.InputError):
        pipeline.ExperimentConfig(str(manifest), str(tmp_path), feature_counts=[800])
    (tmp_path / "bad.json").write_text("{")
    assert cli.main(["experiment", str(tmp_path / "bad.json"), "-o", str(tmp_path / "r.json")]) == 1
    only_train = tmp_path / "train_only.csv"
    only_train.write_text(manifest.read_text().replace(",test", ",train"))
    cfg = _config(tmp_path, only_train, [400])
    assert cli.main(["experiment", str(cfg), "-o", str(tmp_path / "r.json")]) == 1


def test_cli_train_predict_metrics_plot(tmp_path):
    manifest, _ = make_dataset(tmp_path, 5)
    feats = tmp_path / "features.csv"
    assert cli.main(["extract", str(manifest), "-o", str(feats), "--workers", "1"]) == 0
    model = tmp_path / "model.json"
    args = ["train", str(feats), "--k", "200", "--n-estimators", "10", "-o", str(model)]
    assert cli.main(args + ["--ranking", str(tmp_path / "rank.csv")]) == 0
    m = json.loads(model.read_text())
    assert len(m["feature_map"]) == 200 and m["n_input_features"] == 400
    preds = tmp_path / "preds.csv"
    assert cli.main(["predict", str(model), str(feats), "-o", str(preds)]) == 0
    header = next(csv.reader(preds.open()))
    assert header == ["label", "pred", "p:blob", "p:ring"]
    report = tmp_path / "report.json"
    assert cli.main(["metrics", str(preds), "-o", str(report)]) == 0
    r = json.loads(report.read_text())
    assert r["positive_class"] == "ring"
    assert set(r) >= {"accuracy", "balanced_accuracy", "sensitivity", "specificity", "auc", "precision", "recall", "f1"}
    svg = tmp_path / "curves.svg"
    assert cli.main(["plot", str(feats), "--channel", "gray", "--dim", "0", "--band", "0.40", "-o", str(svg)]) == 0
    assert svg.read_text().count('class="median"') == 2
    assert cli.main(["predict", str(tmp_path / "missing.json"), str(feats), "-o", str(preds)]) == 1


def test_cli_diagram_and_vectorize(tmp_path):
    from topoc.image_io import RgbImage

    ring = np.zeros((3, 3), dtype=np.uint8)
    ring[1, 1] = 255
    save_image(RgbImage.from_gray(ring), tmp_path / "ring.pgm", "pgm-ascii")
    out = tmp_path / "pd.json"
    assert cli.main(["diagram", str(tmp_path / "ring.pgm"), "--oracle", "-o", str(out)]) == 0
    bars = json.loads(out.read_text())
    assert {"dim": 1, "birth": 0.0, "death": 255.0, "birth_exact": "0", "death_exact": "255"} in bars
    assert sum(b["death"] is None for b in bars) == 1
    assert cli.main(["diagram", str(tmp_path / "ring.pgm"), "--channel", "red", "--superlevel", "-o", str(out)]) == 0
    vec = tmp_path / "vec.csv"
    assert cli.main(["vectorize", str(tmp_path / "ring.pgm"), "-o", str(vec)]) == 0
    rows = list(csv.reader(vec.open()))
    assert len(rows) == 2 and len(rows[1]) == 401
    assert cli.main(["vectorize", str(tmp_path / "nope.pgm"), "-o", str(vec)]) == 1
