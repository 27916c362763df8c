#include <gtest/gtest.h>

#include "mentra/error.hpp"
#include "mentra/task.hpp"
#include "mentra/text.hpp"

using namespace mentra;

TEST(Text, TrimAndBlank) {
  EXPECT_EQ(text::trim("  a b \n"), "a b");
  EXPECT_EQ(text::trim(""), "");
  EXPECT_TRUE(text::is_blank(" \t\r\n"));
  EXPECT_FALSE(text::is_blank(" x "));
}

TEST(Text, SplitLinesDropsCarriageReturn) {
  const auto lines = text::split_lines("a\r\nb\n\nc");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "a");
  EXPECT_EQ(lines[1], "b");
  EXPECT_EQ(lines[2], "");
  EXPECT_EQ(lines[3], "c");
}

TEST(Text, WhitespaceTokens) {
  EXPECT_EQ(text::count_whitespace_tokens(""), 0u);
  EXPECT_EQ(text::count_whitespace_tokens("  one\ttwo\n three  "), 3u);
  EXPECT_EQ(text::split_whitespace(" a  bb c ").size(), 3u);
}

TEST(Text, FoldForMatching) {
  EXPECT_EQ(text::fold_for_matching("Safety-Plan,  NOW!"), "safety plan now");
}

TEST(Text, SeedMixingIsDeterministicAndSpreads) {
  EXPECT_EQ(text::mix_seed(1, 2), text::mix_seed(1, 2));
  EXPECT_NE(text::mix_seed(1, 2), text::mix_seed(2, 1));
  EXPECT_NE(text::fnv1a("a"), text::fnv1a("b"));
}

TEST(Error, CarriesCodeAndPrefixedMessage) {
  const Error e(Errc::TagOrderViolation, "boom");
  EXPECT_EQ(e.code(), Errc::TagOrderViolation);
  EXPECT_NE(std::string(e.what()).find("TagOrderViolation"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("boom"), std::string::npos);
}

TEST(Task, NormalizeLabel) {
  EXPECT_EQ(normalize_label(" (b). "), "B");
  EXPECT_EQ(normalize_label("c"), "C");
  EXPECT_EQ(normalize_label("..."), "");
}

TEST(Task, OptionLabel) {
  EXPECT_EQ(option_label("A. Depression"), "A");
  EXPECT_EQ(option_label("(b) Anxiety"), "B");
  EXPECT_EQ(option_label("C: Other"), "C");
  EXPECT_EQ(option_label("d"), "D");
}

TEST(Task, KindRoundTrip) {
  for (auto k : {TaskKind::SingleChoice, TaskKind::MultiChoice, TaskKind::ShortAnswer})
    EXPECT_EQ(task_kind_from_string(to_string(k)), k);
  EXPECT_THROW(task_kind_from_string("essay"), Error);
}

TEST(Task, CheckTaskRejectsMismatchedGold) {
  TaskSpec t{"x", TaskKind::SingleChoice, "p", {"A. one", "B. two"}, SingleLabel{"C"}, "", ""};
  try {
    check_task(t);
    FAIL() << "expected DatasetError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DatasetError);
  }
  t.gold = SingleLabel{"B"};
  EXPECT_NO_THROW(check_task(t));
  t.kind = TaskKind::ShortAnswer;
  EXPECT_THROW(check_task(t), Error);
  t.gold = ScoringPoints{{"point"}};
  EXPECT_NO_THROW(check_task(t));
}
