"""Kernel selection: compiled extension if available, numpy fallback otherwise.

Set AGGLOGIC_PURE_PYTHON=1 to force the fallback. Both kernels expose
eval_vec / bound_vec / eval_scalar / bound_scalar with identical semantics;
benchmarks/bench_kernels.py compares their speed and checks agreement.
"""

import os

from . import _kernel_py

if os.environ.get("AGGLOGIC_PURE_PYTHON"):
    impl = _kernel_py
else:
    try:
        from . import _kernel_cy as impl  # type: ignore[attr-defined]
    except ImportError:
        impl = _kernel_py

KERNEL_NAME = impl.KERNEL_NAME

eval_vec = impl.eval_vec
bound_vec = impl.bound_vec
eval_scalar = impl.eval_scalar
bound_scalar = impl.bound_scalar
