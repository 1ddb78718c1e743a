#include <gtest/gtest.h>

#include <ngym/agent.hpp>
#include <ngym/extraction.hpp>
#include <ngym/scripted_negotiation.hpp>
#include <ngym/utility.hpp>

namespace ngym {
namespace {

AgentSpec buyer_spec(double budget = 1250) {
  AgentSpec spec;
  spec.name = "Buyer";
  spec.description = "Buys a laptop";
  spec.prompt = "You are buying a laptop.";
  spec.utility_class = "BuyerAgent";
  spec.strategy = {{"budget", budget}};
  spec.self_improve = true;
  return spec;
}

AgentSpec seller_spec() {
  AgentSpec spec;
  spec.name = "Seller";
  spec.prompt = "You are selling a laptop.";
  spec.utility_class = "SellerAgent";
  spec.strategy = {{"floor", 1000.0}, {"public_ask", 1200.0}};
  return spec;
}

UtilityAgent make(const AgentSpec& spec) { return UtilityAgent(spec, UtilityRegistry::defaults()); }

CompletionParams params() {
  CompletionParams p;
  p.model_id = "test";
  return p;
}

EpisodeRecord episode(int index, std::optional<double> price, bool deal) {
  EpisodeRecord e;
  e.index = index;
  e.transcript = {{1, "Buyer", "I offer 900."}, {2, "Seller", "Fine."}};
  e.extracted.emplace("deal_reached", TypedValue::boolean(deal));
  if (price) e.extracted.emplace("final_price", TypedValue::number(*price));
  e.utilities["Buyer"] = 0.25;
  return e;
}

ScriptedBackend replying(std::string reply) {
  ScriptedBackend backend;
  backend.otherwise([reply = std::move(reply)](const ScriptContext&) { return reply; });
  return backend;
}

TEST(Agent, PromptIsBasePlusStrategiesInOrder) {
  auto agent = make(buyer_spec());
  EXPECT_EQ(agent.system_prompt(), agent.base_prompt());
  agent.append_strategy("Anchor low.");
  agent.append_strategy("Concede slowly.");
  const auto& prompt = agent.system_prompt();
  EXPECT_TRUE(prompt.starts_with(agent.base_prompt()));
  const auto first = prompt.find("Anchor low.");
  const auto second = prompt.find("Concede slowly.");
  ASSERT_NE(first, std::string::npos);
  ASSERT_NE(second, std::string::npos);
  EXPECT_LT(first, second);
  EXPECT_TRUE(prompt.ends_with("Concede slowly."));
  EXPECT_EQ(agent.base_prompt(), "You are buying a laptop.");
}

TEST(Agent, ViewShowsOwnConstraintsOnly) {
  const auto buyer = make(buyer_spec());
  const auto seller = make(seller_spec());
  const Transcript transcript{{1, "Buyer", "I offer 1000."}, {2, "Seller", "I can do 1190."}};

  const auto buyer_view = agent_view(buyer, transcript);
  ASSERT_EQ(buyer_view.size(), 3u);
  EXPECT_EQ(buyer_view[0].role, Role::system);
  EXPECT_NE(buyer_view[0].content.find("budget: 1250"), std::string::npos);
  EXPECT_EQ(buyer_view[0].content.find("1000"), std::string::npos);
  EXPECT_EQ(buyer_view[1].role, Role::assistant);
  EXPECT_EQ(buyer_view[2].role, Role::user);
  EXPECT_EQ(buyer_view[2].author_name, "Seller");

  const auto seller_view = agent_view(seller, transcript);
  EXPECT_EQ(seller_view[0].content.find("1250"), std::string::npos);
  EXPECT_NE(seller_view[0].content.find("floor: 1000"), std::string::npos);
  EXPECT_NE(seller_view[0].content.find("Public facts:\n- ask: 1200"), std::string::npos);
}

TEST(Agent, PrivateValuesExcludePublicFacts) {
  EXPECT_EQ(make(seller_spec()).private_values(), std::vector<std::string>{"1000"});
  EXPECT_EQ(make(buyer_spec()).private_values(), std::vector<std::string>{"1250"});
}

TEST(Agent, EmptyTranscriptGetsTheOpeningCue) {
  const auto view = agent_view(make(buyer_spec()), {});
  ASSERT_EQ(view.size(), 2u);
  EXPECT_EQ(view[1].content, kOpeningCue);
}

TEST(Agent, ScriptedBuyerOpensAtEightyPercent) {
  const auto buyer = make(buyer_spec(1250));
  auto backend = make_negotiation_backend();
  const auto view = agent_view(buyer, {{1, "Seller", "Asking 1200."}});
  const auto reply = act(buyer, view, *backend, params());
  EXPECT_EQ(reply.content, "I offer 1000.");
  EXPECT_EQ(reply.author_name, "Buyer");
}

TEST(Agent, ActPreconditions) {
  const auto buyer = make(buyer_spec());
  auto backend = make_negotiation_backend();
  EXPECT_THROW(act(buyer, {}, *backend, params()), PreconditionError);
  const std::vector<ChatMessage> foreign{ChatMessage::system("Someone else's prompt")};
  EXPECT_THROW(act(buyer, foreign, *backend, params()), PreconditionError);
}

TEST(Agent, EmptyActReplyIsABackendError) {
  const auto buyer = make(buyer_spec());
  auto backend = replying("   ");
  EXPECT_THROW(act(buyer, agent_view(buyer, {}), backend, params()), BackendError);
}

TEST(Agent, SilentReflectionIsOneScriptedSentence) {
  const auto buyer = make(buyer_spec());
  auto backend = make_negotiation_backend();
  EXPECT_EQ(silent_reflection(buyer, "Asking 1200.", *backend, params()), "I believe the seller will concede soon.");
  EXPECT_THROW(silent_reflection(buyer, "  ", *backend, params()), PreconditionError);
  EXPECT_TRUE(reflection_prompt("Buyer", "hi").starts_with("You are thinking silently as Buyer"));
}

TEST(Agent, ComputeUtilityEvaluatesTheBinding) {
  AgentSpec spec = buyer_spec(1000);
  const auto buyer = make(spec);
  Environment env;
  env.runs.push_back(episode(0, 900, true));
  EXPECT_NEAR(compute_utility(buyer, env), 0.1, 1e-12);

  env.runs.push_back(episode(1, std::nullopt, false));
  EXPECT_EQ(compute_utility(buyer, env), 0.0);
}

TEST(Agent, DefaultBindingIsZero) {
  AgentSpec spec = buyer_spec();
  spec.utility_class.reset();
  Environment env;
  env.runs.push_back(episode(0, 900, true));
  EXPECT_EQ(compute_utility(make(spec), env), 0.0);
}

TEST(Agent, MissingVariableNamesIt) {
  const auto buyer = make(buyer_spec());
  EpisodeRecord e = episode(0, std::nullopt, true);
  try {
    compute_utility(buyer, e);
    FAIL() << "expected UtilityError";
  } catch (const UtilityError& err) {
    EXPECT_EQ(err.variable(), "final_price");
  }
  EXPECT_THROW(compute_utility(buyer, Environment{}), PreconditionError);
}

TEST(Feedback, ScriptedSentenceIsAppended) {
  auto buyer = make(buyer_spec());
  auto backend = replying("Anchor high before conceding.");
  Environment env;
  env.runs.push_back(episode(0, 900, true));
  FeedbackOptions options;
  options.params = params();
  const auto revision = learn_from_feedback(buyer, env, backend, options);
  ASSERT_TRUE(revision.has_value());
  EXPECT_EQ(buyer.strategy_log(), std::vector<std::string>{"Anchor high before conceding."});
  EXPECT_TRUE(buyer.system_prompt().ends_with("Anchor high before conceding."));
  EXPECT_EQ(revision->old_prompt, buyer.base_prompt());
  EXPECT_EQ(revision->new_prompt, buyer.system_prompt());
  EXPECT_EQ(env.agent_strategies["Buyer"], buyer.strategy_log());
  ASSERT_EQ(env.revisions.size(), 1u);
}

TEST(Feedback, PromptCoversTheLastTenEpisodes) {
  auto buyer = make(buyer_spec());
  Environment env;
  for (int i = 0; i < 12; ++i) env.runs.push_back(episode(i, 900, true));
  std::string seen;
  ScriptedBackend backend;
  backend.otherwise([&seen](const ScriptContext& ctx) {
    seen = ctx.last().content;
    return std::string("Ask about constraints first.");
  });
  FeedbackOptions options;
  options.params = params();
  learn_from_feedback(buyer, env, backend, options);
  EXPECT_EQ(seen.find("### Episode 1\n"), std::string::npos);
  EXPECT_EQ(seen.find("### Episode 2\n"), std::string::npos);
  for (int n = 3; n <= 12; ++n) {
    EXPECT_NE(seen.find("### Episode " + std::to_string(n) + "\n"), std::string::npos) << n;
  }
  EXPECT_LT(seen.find("### Episode 3\n"), seen.find("### Episode 12\n"));
}

TEST(Feedback, WindowShrinksToAvailableRuns) {
  auto buyer = make(buyer_spec());
  Environment env;
  env.runs.push_back(episode(0, 900, true));
  const auto messages = feedback_messages(buyer, env, std::nullopt, 10);
  EXPECT_NE(messages[1].content.find("### Episode 1\n"), std::string::npos);
  const auto custom = feedback_messages(buyer, env, std::string("Be a coach."), 10);
  EXPECT_EQ(custom[0].content, "Be a coach.");
}

TEST(Feedback, TimeoutLeavesPromptByteIdentical) {
  auto buyer = make(buyer_spec());
  buyer.append_strategy("Keep calm.");
  const auto before = buyer.system_prompt();
  const auto log_before = buyer.strategy_log();
  ScriptedBackend backend;
  backend.otherwise([](const ScriptContext&) -> std::string { throw TimeoutError("timed out", 0); });
  Environment env;
  env.runs.push_back(episode(0, 900, true));
  FeedbackOptions options;
  options.params = params();
  EXPECT_THROW(learn_from_feedback(buyer, env, backend, options), TimeoutError);
  EXPECT_EQ(buyer.system_prompt(), before);
  EXPECT_EQ(buyer.strategy_log(), log_before);
  EXPECT_TRUE(env.revisions.empty());
  EXPECT_TRUE(env.agent_strategies.empty());
}

TEST(Feedback, EmptyReplyIsSkippedWithWarning) {
  auto buyer = make(buyer_spec());
  const auto before = buyer.system_prompt();
  auto backend = replying("  ");
  Environment env;
  env.runs.push_back(episode(0, 900, true));
  std::vector<Event> events;
  FeedbackOptions options;
  options.params = params();
  options.events = [&events](const Event& e) { events.push_back(e); };
  EXPECT_FALSE(learn_from_feedback(buyer, env, backend, options).has_value());
  EXPECT_EQ(buyer.system_prompt(), before);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].type, "warning");
}

TEST(Feedback, DuplicateGetsOneReAsk) {
  auto buyer = make(buyer_spec());
  buyer.append_strategy("Keep calm.");
  auto calls = std::make_shared<int>(0);
  ScriptedBackend backend;
  backend.otherwise([calls](const ScriptContext&) {
    return std::string(++*calls == 1 ? "Keep calm." : "Ask open questions.");
  });
  Environment env;
  env.runs.push_back(episode(0, 900, true));
  FeedbackOptions options;
  options.params = params();
  ASSERT_TRUE(learn_from_feedback(buyer, env, backend, options).has_value());
  EXPECT_EQ(*calls, 2);
  EXPECT_EQ(buyer.strategy_log().back(), "Ask open questions.");
}

TEST(Feedback, RequiresSelfImproveAndRuns) {
  auto seller = make(seller_spec());
  auto backend = replying("x.");
  Environment env;
  env.runs.push_back(episode(0, 900, true));
  EXPECT_THROW(learn_from_feedback(seller, env, backend, FeedbackOptions{}), PreconditionError);
  auto buyer = make(buyer_spec());
  Environment empty;
  EXPECT_THROW(learn_from_feedback(buyer, empty, backend, FeedbackOptions{}), PreconditionError);
}

}  // namespace
}  // namespace ngym
