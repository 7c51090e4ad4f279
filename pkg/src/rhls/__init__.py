"""A small dynamic high-level synthesis flow.

Kernels written in the ``.rk`` language are parsed, converted to a
region-nested dataflow graph, lowered to an elastic netlist, optimized with
distributed memory disambiguation and buffer placement, and executed by a
cycle-accurate simulator that is checked against a reference interpreter.
"""

__version__ = "0.1.0"

from .parser import ParseError, parse  # noqa: E402
from .pipeline import CONFIGS, FULL, NOQ, Config, compile_kernel  # noqa: E402
from .sim import simulate  # noqa: E402
from .verify import check_equivalence, run_check  # noqa: E402

__all__ = ["CONFIGS", "FULL", "NOQ", "Config", "ParseError", "check_equivalence",
           "compile_kernel", "parse", "run_check", "simulate"]
