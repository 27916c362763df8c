#include <gtest/gtest.h>

#include <cstdlib>
#include <future>
#include <thread>

#include "mentra/gateway.hpp"
#include "mentra/gateway_http.hpp"
#include "mentra/llm_roles.hpp"
#include "mentra/prompts.hpp"

using namespace mentra;
using namespace mentra::gateway;
using namespace std::chrono_literals;

namespace {

struct SleepLog {
  std::vector<std::chrono::milliseconds> waits;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { waits.push_back(d); };
  }
};

ClientPolicy fast_policy(std::size_t retries = 3) {
  ClientPolicy p;
  p.max_retries = retries;
  p.backoff_base = 10ms;
  p.timeout = 1000ms;
  return p;
}

template <class F>
void expect_code(Errc code, F&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TaskSpec mcq() {
  return {"q1", TaskKind::SingleChoice, "Which fits?", {"A. Depression", "B. Anxiety"}, SingleLabel{"B"}, "micro_f1", ""};
}

}  // namespace

TEST(Wire, EncodeDecodeRoundTrip) {
  ChatRequest req{"m", {{"system", "s"}, {"user", "hello"}}, 0.5, 64};
  const auto j = encode_request(req);
  EXPECT_EQ(j["model"], "m");
  EXPECT_EQ(j["messages"].size(), 2u);
  EXPECT_EQ(j["messages"][1]["content"], "hello");
  EXPECT_EQ(j["max_tokens"], 64);
  const auto r = decode_response(make_response_body("hi there", {3, 2, 5}));
  EXPECT_EQ(r.text, "hi there");
  EXPECT_EQ(r.usage.total_tokens, 5u);
}

TEST(Wire, MissingContentIsProtocolError) {
  for (const char* body : {"{}", "not json", R"({"choices":[]})", R"({"choices":[{"message":{}}]})",
                           R"({"choices":[{"message":{"content":3}}]})"})
    expect_code(Errc::ProtocolError, [&] { decode_response(body); });
}

TEST(Client, EchoesLastMessage) {
  auto t = std::make_shared<EchoTransport>();
  ChatClient c(t, fast_policy());
  EXPECT_EQ(c.ask("m", "system prompt", "ping pong"), "ping pong");
  EXPECT_EQ(t->calls(), 1u);
}

TEST(Client, RetriesTransientFailuresWithBackoff) {
  auto t = std::make_shared<ScriptedTransport>(
      std::vector<TransportReply>{ScriptedTransport::status(503), ScriptedTransport::timeout(), ScriptedTransport::ok("done")});
  SleepLog log;
  ChatClient c(t, fast_policy(3), log.sleeper());
  EXPECT_EQ(c.ask("m", "", "x"), "done");
  EXPECT_EQ(t->calls(), 3u);
  EXPECT_EQ(log.waits, (std::vector<std::chrono::milliseconds>{10ms, 20ms}));
}

TEST(Client, RateLimitIsRetried) {
  auto t = std::make_shared<ScriptedTransport>(
      std::vector<TransportReply>{ScriptedTransport::status(429), ScriptedTransport::ok("ok")});
  SleepLog log;
  ChatClient c(t, fast_policy(), log.sleeper());
  EXPECT_EQ(c.ask("m", "", "x"), "ok");
  EXPECT_EQ(t->calls(), 2u);
}

TEST(Client, ExhaustionReportsLastFailureKind) {
  {
    auto t = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{ScriptedTransport::status(500)});
    SleepLog log;
    ChatClient c(t, fast_policy(2), log.sleeper());
    expect_code(Errc::RetriesExhausted, [&] { c.ask("m", "", "x"); });
    EXPECT_EQ(t->calls(), 3u);
    EXPECT_EQ(log.waits.size(), 2u);
  }
  {
    auto t = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{ScriptedTransport::timeout()});
    SleepLog log;
    ChatClient c(t, fast_policy(1), log.sleeper());
    expect_code(Errc::Timeout, [&] { c.ask("m", "", "x"); });
    EXPECT_EQ(t->calls(), 2u);
  }
  {
    auto t = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{ScriptedTransport::unreachable()});
    SleepLog log;
    ChatClient c(t, fast_policy(0), log.sleeper());
    expect_code(Errc::RetriesExhausted, [&] { c.ask("m", "", "x"); });
    EXPECT_EQ(t->calls(), 1u);
    EXPECT_TRUE(log.waits.empty());
  }
}

TEST(Client, AuthAndClientErrorsAreNotRetried) {
  for (int code : {401, 403}) {
    auto t = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{ScriptedTransport::status(code)});
    SleepLog log;
    ChatClient c(t, fast_policy(), log.sleeper());
    expect_code(Errc::AuthError, [&] { c.ask("m", "", "x"); });
    EXPECT_EQ(t->calls(), 1u);
  }
  auto t = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{ScriptedTransport::status(400)});
  ChatClient c(t, fast_policy(), SleepLog{}.sleeper());
  expect_code(Errc::ProtocolError, [&] { c.ask("m", "", "x"); });
  EXPECT_EQ(t->calls(), 1u);

  auto bad = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{ScriptedTransport::status(200, "{}")});
  ChatClient c2(bad, fast_policy());
  expect_code(Errc::ProtocolError, [&] { c2.ask("m", "", "x"); });
  EXPECT_EQ(bad->calls(), 1u);
}

TEST(Client, ConcurrencyCapHolds) {
  auto t = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{ScriptedTransport::ok("x")}, 20ms);
  auto p = fast_policy();
  p.concurrency_cap = 3;
  ChatClient c(t, p);
  std::vector<std::future<std::string>> fs;
  for (int i = 0; i < 12; ++i) fs.push_back(std::async(std::launch::async, [&] { return c.ask("m", "", "q"); }));
  for (auto& f : fs) EXPECT_EQ(f.get(), "x");
  EXPECT_EQ(t->calls(), 12u);
  EXPECT_LE(t->peak_in_flight(), 3u);
  EXPECT_GE(t->peak_in_flight(), 2u);
  EXPECT_EQ(c.in_flight(), 0u);
}

TEST(Client, RejectsBadPolicyAndRequest) {
  auto p = fast_policy();
  p.concurrency_cap = 0;
  expect_code(Errc::ConfigError, [&] { ChatClient(std::make_shared<EchoTransport>(), p); });
  ChatClient c(std::make_shared<EchoTransport>(), fast_policy());
  expect_code(Errc::ConfigError, [&] { c.complete(ChatRequest{}); });
}

TEST(Prompts, FillTemplate) {
  EXPECT_EQ(fill_template("a {{x}} b {{y}}", {{"x", "1"}, {"y", "2"}}), "a 1 b 2");
  EXPECT_EQ(fill_template("{{x}}{{x}}", {{"x", "{{y}}"}}), "{{y}}{{y}}");
  expect_code(Errc::ConfigError, [] { fill_template("{{missing}}", {}); });
  expect_code(Errc::ConfigError, [] { fill_template("{{open", {{"open", "x"}}); });
}

TEST(Prompts, AllShippedTemplatesLoad) {
  PromptLibrary lib;
  for (auto name : {"generator", "refine", "verifier", "consistency_judge", "rewrite", "solver", "point_matcher"})
    EXPECT_FALSE(lib.get(name).empty()) << name;
  expect_code(Errc::ConfigError, [&] { lib.get("nope"); });
}

TEST(Roles, ParseStep) {
  auto s = llm::detail::parse_step("REASONING: because.\nANSWER: B");
  EXPECT_EQ(s.reasoning, "because.");
  EXPECT_EQ(s.answer, "B");
  s = llm::detail::parse_step("line one\nline two\nC\n\n");
  EXPECT_EQ(s.answer, "C");
  EXPECT_EQ(s.reasoning, "line one\nline two");
  expect_code(Errc::ClientProtocolError, [] { llm::detail::parse_step("  \n "); });
}

TEST(Roles, VerifierJudgeAndSolverOverScriptedTransport) {
  PromptLibrary lib;
  auto t = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{
      ScriptedTransport::ok("CORRECT"), ScriptedTransport::ok("incorrect."), ScriptedTransport::ok("maybe"),
      ScriptedTransport::ok("INCONSISTENT\nStep two contradicts step one."), ScriptedTransport::ok("CONSISTENT"),
      ScriptedTransport::ok("\n B \n"), ScriptedTransport::ok("YES"), ScriptedTransport::ok("no"),
      ScriptedTransport::ok("REASONING: fits.\nANSWER: B")});
  ChatClient c(t, fast_policy());
  llm::LlmVerifier ver(c, lib, "m");
  EXPECT_TRUE(ver.verify(mcq(), {"r", "B"}));
  EXPECT_FALSE(ver.verify(mcq(), {"r", "A"}));
  expect_code(Errc::ClientProtocolError, [&] { ver.verify(mcq(), {"r", "A"}); });

  llm::LlmConsistencyJudge judge(c, lib, "m");
  const auto v = judge.judge({"p", "trace"});
  EXPECT_FALSE(v.consistent);
  EXPECT_EQ(v.rationale, "Step two contradicts step one.");
  EXPECT_TRUE(judge.judge({"p", "trace"}).consistent);

  llm::LlmSolver solver(c, lib, "m");
  EXPECT_EQ(solver.solve(mcq()), "B");

  const auto matcher = llm::make_llm_point_matcher(c, lib, "m");
  EXPECT_TRUE(matcher("resp", "point"));
  EXPECT_FALSE(matcher("resp", "point"));

  llm::LlmGenerator gen(c, lib, "m");
  const auto step = gen.generate(mcq(), {}, std::nullopt);
  EXPECT_EQ(step.answer, "B");

  const auto bodies = t->bodies();
  ASSERT_EQ(bodies.size(), 9u);
  const auto first = nlohmann::json::parse(bodies[0])["messages"].back()["content"].get<std::string>();
  EXPECT_NE(first.find("Which fits?"), std::string::npos);
  EXPECT_NE(first.find("B. Anxiety"), std::string::npos);
  EXPECT_EQ(first.find("{{"), std::string::npos);
}

TEST(Roles, JudgeMapsGatewayFailureToUnavailable) {
  PromptLibrary lib;
  auto t = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{ScriptedTransport::status(500)});
  ChatClient c(t, fast_policy(1), SleepLog{}.sleeper());
  llm::LlmConsistencyJudge judge(c, lib, "m");
  expect_code(Errc::JudgeUnavailable, [&] { judge.judge({"p", "x"}); });
}

TEST(Roles, LiveSearchUsesGeneratorAndVerifierThroughGateway) {
  PromptLibrary lib;
  auto t = std::make_shared<ScriptedTransport>(std::vector<TransportReply>{
      ScriptedTransport::ok("REASONING: The worry is constant.\nANSWER: A"), ScriptedTransport::ok("INCORRECT"),
      ScriptedTransport::ok("REASONING: Actually, duration matters. The worry spans months.\nANSWER: B"),
      ScriptedTransport::ok("CORRECT"), ScriptedTransport::ok("garbage rewrite")});
  ChatClient c(t, fast_policy());
  llm::LlmGenerator gen(c, lib, "m");
  llm::LlmVerifier ver(c, lib, "m");
  const auto res = rtg::search_trajectory(mcq(), gen, ver, rtg::SearchConfig{});
  ASSERT_TRUE(res.accepted);
  EXPECT_EQ(res.session.generator_calls, 2u);
  EXPECT_EQ(res.session.rewrite_requests, 2u);
  EXPECT_EQ(t->calls(), 6u);
  EXPECT_TRUE(validate_text(res.trajectory, {}).format_valid);
  EXPECT_EQ(parse_trajectory(res.trajectory).answer_literal, "B");
}

TEST(Http, LoopbackServerRoundTrip) {
  httplib::Server srv;
  std::string seen_auth;
  int hits = 0;
  srv.Post(std::string(kChatPath), [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    if (++hits == 1) {
      res.status = 503;
      return;
    }
    const auto j = nlohmann::json::parse(req.body);
    res.set_content(make_response_body("echo:" + j["messages"].back()["content"].get<std::string>()),
                    "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  ChatClient c(std::make_shared<HttpTransport>("http://127.0.0.1:" + std::to_string(port), "secret"), fast_policy(),
               SleepLog{}.sleeper());
  EXPECT_EQ(c.ask("m", "", "hi"), "echo:hi");
  EXPECT_EQ(hits, 2);
  EXPECT_EQ(seen_auth, "Bearer secret");
  srv.stop();
  th.join();
}

TEST(Http, UnreachableEndpointExhaustsRetries) {
  httplib::Server probe;
  const int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  ChatClient c(std::make_shared<HttpTransport>("http://127.0.0.1:" + std::to_string(port), "k"), fast_policy(1),
               SleepLog{}.sleeper());
  try {
    c.ask("m", "", "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == Errc::RetriesExhausted || e.code() == Errc::Timeout) << e.what();
  }
}

TEST(Http, LiveClientNeedsCredential) {
  GatewaySettings s;
  s.api_key_env = "MENTRA_TEST_UNSET_KEY_VARIABLE";
  ::unsetenv(s.api_key_env.c_str());
  expect_code(Errc::AuthError, [&] { make_live_client(s); });
  ::setenv(s.api_key_env.c_str(), "k", 1);
  EXPECT_NO_THROW(make_live_client(s));
  ::unsetenv(s.api_key_env.c_str());
}
