// Placeholder; kernels are registered as the modules land.
#include <benchmark/benchmark.h>
BENCHMARK_MAIN();
