"""
Sweeping delays on a LIBSVM dataset
===================================

Pass a LIBSVM file on the command line (for example the full ijcnn1
training file); without one, the bundled 1,000-line stand-in in the ijcnn1
layout is used.  Results are written as CSV next to a config digest.
"""

import sys
from pathlib import Path

from delaystab import ExperimentConfig, emit_results, load_libsvm, run_gen_sweep

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parents[1] / "tests" / "data" / "ijcnn1_standin.libsvm"
ds = load_libsvm(path)
print(f"{path.name}: n={ds.n} d={ds.d} nnz={ds.X.nnz}")

# 80/20 seeded split, eta = 0.01, delays from 4 to 32, 16-sample batches.
cfg = ExperimentConfig(dataset=str(path), eta=0.01, delays=[4, 8, 16, 32], batch_size=16,
                       T=5000, seeds=[0, 1, 2], out="results/libsvm")
res = run_gen_sweep(cfg)
for k, v in res.summary["final_gen_error_mean"].items():
    print(f"tau={k:>2}: final gen error {v:+.6f}")
for p in emit_results(res):
    print("wrote", p)
