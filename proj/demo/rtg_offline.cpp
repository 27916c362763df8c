// Runs the reasoning-trajectory search over a task file with the simulated
// generator and prints each accepted trajectory.
// Usage: demo_rtg_offline <tasks.jsonl> [generator_accuracy] [seed]

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include "mentra/mentra.hpp"

int main(int argc, char** argv) {
  using namespace mentra;
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <tasks.jsonl> [accuracy] [seed]\n", argv[0]);
    return 2;
  }
  const double accuracy = argc > 2 ? std::atof(argv[2]) : 0.5;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1;
  try {
    const auto tasks = load_tasks(argv[1]);
    rtg::SimulatedSolver solver(0.5, seed);
    const auto hard = rtg::difficulty_filter(tasks, solver);
    std::printf("%zu of %zu tasks survive the difficulty filter\n\n", hard.size(), tasks.size());

    rtg::SimulatedGenerator gen(accuracy, seed);
    rtg::QualityVerifier verifier;
    std::size_t accepted = 0;
    for (const auto& t : hard) {
      const auto r = rtg::search_trajectory(t, gen, verifier, rtg::SearchConfig{});
      std::printf("== %s: %s after %zu generator calls\n", t.id.c_str(), r.accepted ? "accepted" : "discarded",
                  r.session.generator_calls);
      if (r.accepted) {
        ++accepted;
        std::cout << r.trajectory << "\n\n";
      }
    }
    std::printf("%zu accepted\n", accepted);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
