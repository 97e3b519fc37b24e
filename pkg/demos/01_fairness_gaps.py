# Group fairness gaps from raw counts.
#
# Five groups with known test sizes and predicted-positive counts; each
# group is compared against everyone else pooled.
import numpy as np

from fairaudit import fairness

# %% counts per group: test size and how many got a positive prediction
names = ["Asian", "Black", "Hispanic", "Multiracial", "White"]
sizes = [123, 114, 90, 47, 730]
positives = [100, 66, 65, 36, 614]

groups = np.repeat(np.arange(5), sizes)
yhat = np.concatenate([[1] * k + [0] * (n - k) for n, k in zip(sizes, positives)])

# %% statistical parity, one group vs the rest
for k, name in enumerate(names):
    sp = fairness.statistical_parity(yhat, groups, k)
    print(f"{name:12s} P(yhat=1) {positives[k] / sizes[k]:.3f}  SP gap {sp:+.4f}")

# %% with labels we get the full report; draw labels that roughly track yhat
rng = np.random.default_rng(0)
y = np.where(rng.random(yhat.size) < 0.8, yhat, 1 - yhat)
report = fairness.one_vs_rest_report(y, yhat, groups, names)
for r in report:
    if r.group == "Black":
        print(f"  Black {r.metric:9s} {r.value:+.4f}")

# %% an empty denominator is reported as undefined, not zero
y_none = np.zeros_like(y)
print("EoP with no positives:", fairness.equal_opportunity(y_none, yhat, groups, 1))
