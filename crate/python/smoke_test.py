"""Smoke test for the stackner Python bindings.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/stackner-*.whl
"""

import json
import math
import os
import subprocess
import sys
import tempfile

import stackner_py as sn


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok   {what}")


def main():
    spans = sn.decode_bio(["O", "B-ADE", "I-ADE", "O", "B-DRUG"])
    check(spans == [(1, 3, "ADE"), (4, 5, "DRUG")], "decode_bio")
    check(sn.encode_bio(spans, 5) == ["O", "B-ADE", "I-ADE", "O", "B-DRUG"], "encode_bio round trip")

    report = sn.ner_prf([spans], [[(1, 3, "ADE")]])
    check(report["micro"]["precision"] == 1.0 and report["micro"]["recall"] == 0.5, "ner_prf")
    check(sn.clf_prf([True, False], [True, True])["micro"]["precision"] == 0.5, "clf_prf")

    plan = json.loads(sn.make_folds(["a", "b", "c", "d"], ["e"], 7))
    check(plan["confident"] == 0 and plan["folds"][0] == {"train": ["a", "b", "c", "d"], "dev": ["e"]}, "make_folds")

    em = [[1.0, 0.0], [0.0, 2.0]]
    tr = [[0.0, 0.0], [0.0, 0.0]]
    log_z = sn.crf_log_z(em, tr, [0.0, 0.0], [0.0, 0.0])
    brute = math.log(sum(math.exp(em[0][a] + em[1][b]) for a in range(2) for b in range(2)))
    check(abs(log_z - brute) < 1e-12, "crf_log_z")
    check(sn.crf_viterbi(em, tr, [0.0, 0.0], [0.0, 0.0])[0] == [0, 1], "crf_viterbi")

    voted = sn.vote_ner([[["B-ADE", "O"]], [["B-ADE", "O"]], [["O", "I-ADE"]]])
    check(voted == [["B-ADE", "O"]], "vote_ner")

    try:
        sn.decode_bio(["X-ADE"])
    except sn.DataError:
        check(True, "bad tag raises DataError")
    else:
        check(False, "bad tag raises DataError")

    with tempfile.TemporaryDirectory() as tmp:
        ctx = os.path.join(tmp, "toy.ctxe")
        sn.write_ctx(ctx, 2, [[0.5, 1.0, -1.0, 0.25]])
        check(sn.read_ctx(ctx) == (2, [[0.5, 1.0, -1.0, 0.25]]), "CTXE round trip")
        sent = os.path.join(tmp, "toy.sent")
        sn.write_sent(sent, "ctx-cls", [[1.0, 2.0], [3.0, 4.0]])
        check(sn.read_sent(sent) == ("ctx-cls", [[1.0, 2.0], [3.0, 4.0]]), "SENT round trip")

        # Train a small tagger with the CLI when it is on PATH or given.
        exe = os.environ.get("STACKNER_BIN", "stackner")
        corpus = "\n\n".join(f"i\tO\ntook\tO\n{d}\tB-DRUG" for d in ["Aspirin", "Advil", "Xanax"] * 3) + "\n"
        for name in ("train.conll", "dev.conll"):
            with open(os.path.join(tmp, name), "w") as f:
                f.write(corpus)
        config = {
            "task": "ner",
            "train": "train.conll",
            "dev": "dev.conll",
            "tagger": {
                "hidden": 8,
                "epochs": 2,
                "stack": {"providers": [{"kind": "char", "char_dim": 4, "hidden": 4}], "features": True},
            },
        }
        with open(os.path.join(tmp, "run.json"), "w") as f:
            json.dump(config, f)
        model = os.path.join(tmp, "model")
        try:
            subprocess.run(
                [exe, "train-ner", "--config", os.path.join(tmp, "run.json"), "--model-dir", model],
                check=True,
                capture_output=True,
            )
        except (FileNotFoundError, subprocess.CalledProcessError) as e:
            print(f"skip tagger load ({e})")
        else:
            tagger = sn.Tagger.load(model)
            tags = tagger.predict([["i", "took", "Advil"]])
            check(len(tags) == 1 and len(tags[0]) == 3, "Tagger.load/predict")
            check(tagger.entity_types == ["DRUG"], "Tagger.entity_types")

    print("all smoke checks passed")


if __name__ == "__main__":
    sys.exit(main())
