# Running experiments from Python the same way the command line does
import json
import tempfile
from pathlib import Path

from hoslab.harness import EXPERIMENTS, ExperimentConfig, run, run_directory

print("experiments:", ", ".join(EXPERIMENTS))

out = Path(tempfile.mkdtemp())
# defaults merged with dotted overrides, exactly like --set on the command line
cfg = ExperimentConfig.from_mapping({}, name="strichartz", overrides=["data.count=5", "seed=7"])
record = run(cfg, out=out)
for v in record.verdicts:
    print(v.status, v.criterion, v.value)

folder = run_directory(cfg, out)
print("files:", sorted(p.name for p in folder.rglob("*") if p.is_file()))
data = json.loads((folder / "record.json").read_text())
print("status:", data["status"], " config hash:", data["config_hash"])

# the same configuration always lands in the same folder with the same bytes
before = (folder / "strichartz.csv").read_bytes()
run(cfg, out=out)
print("rerun identical:", (folder / "strichartz.csv").read_bytes() == before)

# equivalent shell command:
#   hoslab strichartz --set data.count=5 --set seed=7 --out <dir>
