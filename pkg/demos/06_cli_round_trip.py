"""
Command-line round trip
=======================

The same steps as the other demos, through the ``xfmnet`` command. Each
call writes its resolved settings to ``config.json`` next to its outputs.
"""

# %%
import tempfile
from pathlib import Path

from xfmnet.cli import main

work = Path(tempfile.mkdtemp(prefix="xfmnet-demo-"))
small = ["--n-stations", "3", "--length", "600", "--height", "4", "--width", "4"]
main(["synth", "--output-dir", str(work / "data"), "--seed", "1", *small])

inputs = ["--series-csv", str(work / "data/series.csv"), "--image-blob", str(work / "data/images.bin")]
toy = ["--lookback", "48", "--horizon", "12", "--levels", "1", "--window", "7", "--d", "8", "--kernels", "4",
       "--image-features", "4", "--d-ff", "8", "--epochs", "3", "--train-stride", "8"]
main(["train", *inputs, *toy, "--output-dir", str(work / "run")])
main(["eval", "--checkpoint", str(work / "run/checkpoint"), *inputs, "--output-dir", str(work / "eval")])
main(["diagnose", "--series-csv", str(work / "data/series.csv"), "--output-dir", str(work / "diag"), "--svg", "true"])
main(["probe", "--checkpoint", str(work / "run/checkpoint"), *inputs, "--output-dir", str(work / "probe")])

# %%
print((work / "eval/eval.csv").read_text())
print("a malformed request fails with one JSON line on stderr and exit code", main(["train", "--epochs", "zero"]))
