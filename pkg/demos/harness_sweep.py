"""Run a small seeded sweep through the command-line entry point, then
replay it from its manifest and confirm the CSV is reproduced byte for byte."""

import json
import tempfile
from pathlib import Path

from wedgetc.cli import main

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    cfg = tmp / "sweep.json"
    cfg.write_text(json.dumps({"n": [60], "r": [1, 2], "s": [1.8, 1.4], "trials": 3, "seed": 5}))
    main(["subspace", "--config", str(cfg), "--out-dir", str(tmp / "run"), "--plots"])
    print(sorted(p.name for p in (tmp / "run").iterdir()))
    main(["replay", str(tmp / "run" / "manifest.json"), "--out-dir", str(tmp / "replayed")])
