import csv
import json

import numpy as np
import pytest

from hdrmax.cli import main
from hdrmax.framio import LumaFrame, write_raw_yuv, write_y4m
from hdrmax.testkit import DistortionSpec, distort, gen_video


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture()
def small_manifest(tmp_path):
    entries = []
    for k, pattern in enumerate(("noise_texture", "moving_texture", "noise_texture")):
        ref = gen_video(pattern, 64, 64, 5, seed=k)
        write_y4m(tmp_path / f"ref{k}.y4m", ref)
        write_y4m(tmp_path / f"dist{k}.y4m", distort(ref, DistortionSpec("blur", 1.0 + k)))
        entries.append({"video_id": f"v{k}", "content_id": f"c{k}", "path": f"dist{k}.y4m",
                        "ref_path": f"ref{k}.y4m"})
    m = tmp_path / "manifest.json"
    m.write_text(json.dumps({"entries": entries}))
    return m


def test_extract_nr_shape_and_provenance(tmp_path, small_manifest):
    out = tmp_path / "nr.csv"
    assert main(["extract-nr", "--manifest", str(small_manifest), "--out", str(out), "--no-noise"]) == 0
    rows = _rows(out)
    assert len(rows) == 3
    assert len(rows[0]) == 1 + 72 + 5
    assert {r["noise_sigma"] for r in rows} == {"0.0"}
    assert {r["status"] for r in rows} == {"ok"}


def test_extract_nr_is_byte_reproducible(tmp_path, small_manifest):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["extract-nr", "--manifest", str(small_manifest), "--out", str(a), "--seed", "3"])
    main(["extract-nr", "--manifest", str(small_manifest), "--out", str(b), "--seed", "3"])
    assert a.read_bytes() == b.read_bytes()


def test_extract_nr_extra_features_join(tmp_path, small_manifest):
    extra = tmp_path / "brisque.csv"
    with open(extra, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", *[f"b{k:02d}" for k in range(36)]])
        for k in range(3):
            w.writerow([f"v{k}", *np.arange(36) * (k + 1)])
    out = tmp_path / "nr.csv"
    assert main(["extract-nr", "--manifest", str(small_manifest), "--out", str(out),
                 "--extra-features", str(extra)]) == 0
    header = list(_rows(out)[0])
    features = [c for c in header if c not in ("video_id", "delta", "patch_size", "noise_sigma", "seed", "status")]
    assert len(features) == 108


def test_extract_nr_partial_failure(tmp_path, small_manifest):
    doc = json.loads(small_manifest.read_text())
    doc["entries"].append({"video_id": "missing", "path": "nope.y4m"})
    small_manifest.write_text(json.dumps(doc))
    out = tmp_path / "nr.csv"
    assert main(["extract-nr", "--manifest", str(small_manifest), "--out", str(out)]) == 1
    rows = _rows(out)
    assert [r["status"] == "ok" for r in rows] == [True, True, True, False]
    assert rows[-1]["nr_hdrmax_000"] == ""


def test_config_precedence(tmp_path, small_manifest):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta": 2.0, "patch_size": 16}))
    out = tmp_path / "nr.csv"
    main(["extract-nr", "--manifest", str(small_manifest), "--out", str(out),
          "--config", str(cfg), "--delta", "3.0"])
    row = _rows(out)[0]
    assert (row["delta"], row["patch_size"], row["noise_sigma"]) == ("3.0", "16", "0.001")


def test_extract_fr_identity_and_subsets(tmp_path):
    ref = gen_video("moving_texture", 192, 192, 5, seed=1)
    write_y4m(tmp_path / "r.y4m", ref)
    m = tmp_path / "m.json"
    m.write_text(json.dumps([{"video_id": "same", "path": "r.y4m", "ref_path": "r.y4m"}]))
    out = tmp_path / "fr.csv"
    assert main(["extract-fr", "--manifest", str(m), "--out", str(out)]) == 0
    row = _rows(out)[0]
    assert float(row["psnr"]) == 100.0
    sims = [float(v) for k, v in row.items() if k.startswith(("ssim", "msssim", "frh"))]
    assert len(sims) == 3 + 11 + 5
    np.testing.assert_allclose(sims, 1.0, atol=1e-6)
    for groups, n in (("hdrmax", 5), ("ssim,hdrmax", 8)):
        main(["extract-fr", "--manifest", str(m), "--out", str(out), "--features", groups])
        assert len(_rows(out)[0]) - 4 == n


def test_extract_fr_shape_mismatch_is_per_pair(tmp_path):
    write_y4m(tmp_path / "a.y4m", gen_video("noise_texture", 64, 64, 5))
    write_y4m(tmp_path / "b.y4m", gen_video("noise_texture", 96, 64, 5))
    m = tmp_path / "m.json"
    m.write_text(json.dumps([
        {"video_id": "ok", "path": "a.y4m", "ref_path": "a.y4m"},
        {"video_id": "bad", "path": "b.y4m", "ref_path": "a.y4m"},
    ]))
    out = tmp_path / "fr.csv"
    assert main(["extract-fr", "--manifest", str(m), "--out", str(out), "--features", "psnr"]) == 1
    assert [r["status"] == "ok" for r in _rows(out)] == [True, False]


def test_raw_yuv_entry(tmp_path):
    frames = [LumaFrame.from_array(f.samples, 10) for f in gen_video("noise_texture", 64, 64, 5)]
    write_raw_yuv(tmp_path / "a.yuv", frames)
    m = tmp_path / "m.json"
    m.write_text(json.dumps([{"video_id": "raw", "path": "a.yuv", "width": 64, "height": 64,
                              "pixfmt": "yuv420p10le"}]))
    assert main(["extract-nr", "--manifest", str(m), "--out", str(tmp_path / "nr.csv")]) == 0


def _write_features(path, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", "f0"])
        for k, v in enumerate(values):
            w.writerow([f"v{k}", v])


def _write_scores(path, values, contents=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["video_id", "content_id", "mos"])
        for k, v in enumerate(values):
            w.writerow([f"v{k}", contents[k] if contents else f"c{k}", v])


def test_evaluate_perfect_feature_final_line(tmp_path, capsys):
    y = np.linspace(0, 90, 30)
    _write_features(tmp_path / "f.csv", y)
    _write_scores(tmp_path / "s.csv", y, [f"c{k // 3}" for k in range(30)])
    rc = main(["evaluate", "--features", str(tmp_path / "f.csv"), "--scores", str(tmp_path / "s.csv"),
               "--splits", "5", "--out", str(tmp_path / "r.json"), "--C", "10", "--gamma", "0.5"])
    assert rc == 0
    last = capsys.readouterr().out.strip().splitlines()[-1]
    assert last.startswith("median_srcc=1.0000 median_plcc=")
    assert len(json.loads((tmp_path / "r.json").read_text())["srcc"]) == 5


def test_train_predict_toy(tmp_path):
    _write_features(tmp_path / "f.csv", [0.0, 1.0, 2.0])
    _write_scores(tmp_path / "s.csv", [0.0, 1.0, 2.0])
    assert main(["train", "--features", str(tmp_path / "f.csv"), "--scores", str(tmp_path / "s.csv"),
                 "--out", str(tmp_path / "m.json"), "--C", "1000", "--gamma", "1"]) == 0
    assert main(["predict", "--model", str(tmp_path / "m.json"), "--features", str(tmp_path / "f.csv"),
                 "--out", str(tmp_path / "p.csv")]) == 0
    pred = [float(r["predicted"]) for r in _rows(tmp_path / "p.csv")]
    np.testing.assert_allclose(pred, [0, 1, 2], atol=0.1 + 1e-3)


def test_synth_small_suite(tmp_path):
    out = tmp_path / "suite"
    assert main(["synth", "--out-dir", str(out), "--width", "32", "--height", "32", "--frames", "5",
                 "--patterns", "ramp,zoneplate", "--kinds", "blur,white_clip"]) == 0
    entries = json.loads((out / "manifest.json").read_text())["entries"]
    assert len(entries) == 2 * (1 + 2 * 5)
    assert all((out / e["path"]).exists() for e in entries)
    assert len(_rows(out / "scores.csv")) == len(entries)


def test_synth_default_count():
    from hdrmax.testkit import suite_entries
    # the default suite: 4 patterns x 5 kinds x 5 levels + 4 pristine
    assert len(suite_entries()) == 104


def test_bad_inputs_exit_nonzero(tmp_path):
    assert main(["train", "--features", str(tmp_path / "none.csv"), "--scores", "x", "--out", "y"]) == 2
    with pytest.raises(SystemExit):
        main(["synth", "--out-dir", str(tmp_path), "--kinds", "jpeg"])
