// Prints rubric averages and inter-annotator agreement for two rating files.
// Usage: demo_agreement_table <rater1.jsonl> <rater2.jsonl>

#include <cstdio>
#include <iostream>

#include "mentra/mentra.hpp"

int main(int argc, char** argv) {
  using namespace mentra;
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <rater1.jsonl> <rater2.jsonl>\n", argv[0]);
    return 2;
  }
  try {
    const auto a = load_rubric_sheets(argv[1]);
    const auto b = load_rubric_sheets(argv[2]);
    if (a.empty() || b.empty()) throw Error(Errc::EmptyInput, "no rubric sheets");
    std::vector<eval::RubricSheet> both = {a.front(), b.front()};

    const auto [h1, r1] = report::rubric_rows(eval::rubric_average(both), "mean");
    std::cout << report::render_table(h1, r1) << "\n";
    const auto [h2, r2] = report::agreement_rows(eval::rubric_agreement(a.front(), b.front()));
    std::cout << report::render_table(h2, r2);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
