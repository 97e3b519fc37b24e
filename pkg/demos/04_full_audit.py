# A small audit end to end, then the numbers behind a grouped bar chart.
import tempfile
from pathlib import Path

import numpy as np

from fairaudit import runner

cfg = runner.AuditConfig.from_dict({
    "data": {"preset": "els-like", "n_rows": 5000, "seed": 0},
    "scenarios": ["RNA.rnd", "Imp.rnd", "Imp.prop.frac", "Imp.prop.frac.perturb-race", "Imp.prop.frac.perturb-all"],
    "imputers": [{"kind": "simple"}],
    "models": ["Log", "DT"],
    "run": {"trials": 10, "master_seed": 0},
})
records = runner.run_audit(cfg)
summary = runner.summarize(records)
print(len(records), "records,", len(summary), "summary cells")

# %% mean SP gap per group and scenario (logistic regression)
for s in summary:
    if s.model == "Log" and s.metric == "SP" and s.group in ("Black", "White"):
        print(f"{s.scenario:28s} {s.group:6s} mean {s.mean:+.3f} sd {s.std:.3f}")

# %% accuracy drops once predictors are perturbed
for s in summary:
    if s.metric == "accuracy" and s.group == "all":
        print(f"{s.model:4s} {s.scenario:28s} acc {s.mean:.3f}")

# %% write everything; plotdata/SP__Log.csv has one row per scenario, one column per group
out = Path(tempfile.mkdtemp())
runner.emit(records, summary, out)
print((out / "plotdata" / "SP__Log.csv").read_text())
