import runpy
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def test_benchmark_runs(capsys):
    mod = runpy.run_path(str(BENCH))
    mod["main"](["--N", "2000", "--repeat", "1"])
    out = capsys.readouterr().out
    for name in ("prefix_sum", "suffix_sum", "total_sum", "leindler_recurrence"):
        assert name in out
