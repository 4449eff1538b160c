import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from synthdata import build_synthetic_dataset  # noqa: E402

from testdrive import ingest  # noqa: E402
from testdrive.session import Session, SessionConfig  # noqa: E402

# Small enough that session prep stays around a couple of seconds.
SMALL_CFG = dict(gammas=[0.4], seed=0, oracle="simulated", metric_max_iter=25)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("smallds")
    info = build_synthetic_dataset(root, seed=7, n_images=10, img_size=128,
                                   objects_per_image=3, obj_w=16, obj_h=32,
                                   miss_count=2, fp_per_image=0.8)
    manifest = ingest.load_manifest(info["manifest"])
    dets = ingest.load_detections(info["detections"], manifest)
    gt = ingest.load_groundtruth(info["groundtruth"], manifest)
    return {"root": root, "info": info, "manifest": manifest,
            "detections": dets, "groundtruth": gt}


@pytest.fixture(scope="session")
def completed_session(small_dataset, tmp_path_factory):
    """A finished simulated session with an on-disk directory. Read-only for
    tests; replay/report tests work on copies."""
    out = tmp_path_factory.mktemp("sessdir") / "run"
    cfg = SessionConfig(**SMALL_CFG)
    sess = Session(small_dataset["manifest"], small_dataset["detections"], cfg,
                   groundtruth=small_dataset["groundtruth"], out_dir=out)
    sess.run_simulated()
    sess.export_report()
    sess.close()
    return {"session": sess, "out": out}
