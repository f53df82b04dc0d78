// Benchmark: serial vs OpenMP batch subset evaluation on a case file.
// Prints per-kernel wall time and checks that both kernels agree bitwise.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pmuplace/batch_eval.hpp"
#include "pmuplace/power_system.hpp"
#include "pmuplace/rng.hpp"

using namespace pmuplace;

static double wall() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

int main(int argc, char** argv) {
  std::string path = argc > 1 ? argv[1] : "cases/bus3.json";
  int n_masks = argc > 2 ? std::atoi(argv[2]) : 64;
  int subset_size = argc > 3 ? std::atoi(argv[3]) : 0;

  CaseDefinition def = load_case(path);
  LinearizedModel lin = linearize(def);
  DescriptorSystem sys = discretize(lin, def);
  std::vector<MeasurementCandidate> cands = build_candidates(def, sys);
  const int M = static_cast<int>(cands.size());
  if (subset_size <= 0 || subset_size > M) subset_size = (M + 1) / 2;

  Rng rng(12345);
  std::vector<std::uint64_t> masks;
  for (int i = 0; i < n_masks; ++i) {
    std::uint64_t mask = 0;
    for (int j : sample_without_replacement(rng, M, subset_size))
      mask |= std::uint64_t{1} << j;
    masks.push_back(mask);
  }

  std::printf("case %s: M=%d, %d masks of size %d\n", path.c_str(), M,
              n_masks, subset_size);
#ifdef _OPENMP
  std::printf("OpenMP max threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP\n");
#endif

  double t0 = wall();
  auto serial = evaluate_subsets_serial(sys, cands, masks);
  double t_serial = wall() - t0;

  t0 = wall();
  auto parallel = evaluate_subsets_parallel(sys, cands, masks);
  double t_parallel = wall() - t0;

  bool identical = serial.size() == parallel.size();
  for (size_t i = 0; identical && i < serial.size(); ++i)
    identical = serial[i].mask == parallel[i].mask &&
                serial[i].trace == parallel[i].trace &&
                serial[i].condition_number == parallel[i].condition_number &&
                serial[i].iterations == parallel[i].iterations &&
                serial[i].converged == parallel[i].converged;

  std::printf("serial:   %.3f s  (%.2f ms/subset)\n", t_serial,
              1e3 * t_serial / n_masks);
  std::printf("parallel: %.3f s  (%.2f ms/subset)\n", t_parallel,
              1e3 * t_parallel / n_masks);
  std::printf("speedup:  %.2fx\n", t_serial / t_parallel);
  std::printf("results bitwise identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
