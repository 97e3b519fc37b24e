# Three imputers on the same masked data.
#
# Fit on training rows only, then fill a held-out table. Observed cells pass
# through untouched.
import numpy as np

from fairaudit import impute, split, synth

cfg = synth.els_like(2000, seed=1)
ds = synth.make_dataset(cfg)
plan = split.split_random(ds.n_rows, 0.8, seed=0)
train, test = ds.take(plan.train), ds.take(plan.test)

print("masked cells: train", int(train.mask.sum()), "test", int(test.mask.sum()))
print("complete rows in test:", int((~test.mask.any(axis=1)).sum()), "of", test.n_rows)

# %% fit and apply
col = ds.feature_names.index("S-T relationship")
rows = test.mask[:, col]
truth = synth.generate(cfg).take(plan.test).X[rows, col]   # values before masking

for spec in (impute.SimpleSpec("mean"), impute.KNNSpec(5), impute.MultipleSpec(m=5, iters=5)):
    fitted = impute.fit(spec, train, seed=0)
    out, rep = fitted.transform_with_report(test, seed=0)
    err = out.X[rows, col] - truth
    print(f"{spec.label:12s} filled {rep.n_filled:5d}  RMSE on '{ds.feature_names[col]}' {np.sqrt((err ** 2).mean()):.3f}")

# %% features here are independent given the group, so no imputer can recover much
# of a missing value; the chained-equation fills shrink toward the column mean.
