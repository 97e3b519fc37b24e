# Train/test scenarios: how much data each one keeps.
from fairaudit import impute, split, synth
from fairaudit.core import group_counts

ds = synth.make_dataset(synth.els_like(5000, seed=2))
print("rows", ds.n_rows, "complete cases", int((~ds.mask.any(axis=1)).sum()))

labels = ["RNA.rnd", "RNA.str", "Imp.rnd", "Imp.str", "Imp.prop", "Imp.prop.frac",
          "Imp.prop.frac.perturb-race", "Imp.prop.frac.perturb-all"]
for label in labels:
    scn = split.ScenarioSpec.from_dict(label)
    imp = impute.SimpleSpec() if scn.imputed else None
    train, test = split.build_scenario(scn, ds, imp, seed=7)
    counts = group_counts(test)
    per_group = " ".join(f"{g[:5]}={c}" for g, (c, _) in counts.items())
    print(f"{label:28s} train {train.n_rows:5d} test {test.n_rows:5d}  {per_group}")

# %% remove-NA keeps only the rows with nothing missing, so its test set is
# an order of magnitude smaller. perturb-race leaves the features alone and
# redraws every test row's group uniformly.
