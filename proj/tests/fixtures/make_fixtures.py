"""Regenerates the checked-in fixture archives used by the CLI tests."""

import json
import random
import shutil
import struct
from pathlib import Path

HERE = Path(__file__).parent
LAYERS = [("input", 0, (4, 4, 3)), ("conv1", 2, (2, 2, 4)), ("pool1", 3, (1, 1, 4))]


def write_archive(root, images, seed):
    rng = random.Random(seed)
    if root.exists():
        shutil.rmtree(root)
    root.mkdir(parents=True)
    for image in images:
        (root / image).mkdir()
        for name, _, (h, w, c) in LAYERS:
            values = [round(rng.uniform(-1, 1), 3) for _ in range(h * w * c)]
            (root / image / f"{name}.bin").write_bytes(struct.pack(f"<{len(values)}f", *values))
    manifest = {
        "model_id": "tiny-fixture",
        "preprocessing_note": "random values, not a real network",
        "dtype": "f32-le",
        "layout": "hwc",
        "layers": [{"name": n, "index": i, "shape": list(s)} for n, i, s in LAYERS],
        "images": [{"image_id": im, "source_file": f"{im}.bmp"} for im in images],
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def main():
    refs = ["i01", "i02"]
    distorted = [f"{r}_{t:02d}_{l}" for r in refs for t in (1, 2) for l in (1, 2, 3)]
    write_archive(HERE / "tiny_archive", refs + distorted, seed=1)

    rng = random.Random(2)
    lines = ["database,reference_id,distorted_id,mos,distortion_type,distortion_level"]
    for d in distorted:
        ref, t, l = d.split("_")
        lines.append(f"TID2013,{ref},{d},{round(rng.uniform(1, 7), 4)},{int(t)},{int(l)}")
    (HERE / "tiny_pairs.csv").write_text("\n".join(lines) + "\n")

    tid = [f"{round(rng.uniform(1, 7), 5)} {d}.bmp" for d in distorted]
    (HERE / "tiny_mos_with_names.txt").write_text("\n".join(tid) + "\n")

    corrupt = HERE / "corrupt_archive"
    write_archive(corrupt, refs + distorted, seed=1)
    payload = corrupt / "i02_02_3" / "conv1.bin"
    payload.write_bytes(payload.read_bytes()[:32])
    (corrupt / "i01" / "pool1.bin").unlink()


if __name__ == "__main__":
    main()
