#include <gtest/gtest.h>

#include <ngym/extraction.hpp>
#include <ngym/scripted_negotiation.hpp>

namespace ngym {
namespace {

CompletionParams params() {
  CompletionParams p;
  p.model_id = "test";
  return p;
}

const std::vector<OutputVariableSpec> kDealSpecs{
    {"final_price", "Number", "Agreed price", false},
    {"deal_reached", "Boolean", "Whether a deal was made", false},
};

Transcript deal_transcript() {
  return {{1, "Buyer", "I offer 880."}, {2, "Seller", "Asking 1200."}, {3, "Buyer", "I offer 1,100."},
          {4, "Seller", "1,100 then. Yes, deal! STOP_NEGOTIATION"}};
}

TEST(ParseTyped, NumbersDropThousandsSeparators) {
  EXPECT_EQ(parse_typed("1,100", VariableKind::Number).as_number(), 1100.0);
  EXPECT_EQ(parse_typed(" 99.5 ", VariableKind::Number).as_number(), 99.5);
  EXPECT_EQ(parse_typed("+7", VariableKind::Number).as_number(), 7.0);
  EXPECT_EQ(parse_typed("-3", VariableKind::Number).as_number(), -3.0);
}

TEST(ParseTyped, NonNumericRawIsATypedParseError) {
  try {
    parse_typed("abc", VariableKind::Number);
    FAIL() << "expected TypedParseError";
  } catch (const TypedParseError& e) {
    EXPECT_EQ(e.raw(), "abc");
    EXPECT_EQ(e.kind(), "Number");
  }
  EXPECT_THROW(parse_typed("12 dollars", VariableKind::Number), TypedParseError);
  EXPECT_THROW(parse_typed("inf", VariableKind::Number), TypedParseError);
}

TEST(ParseTyped, BooleansAcceptTheStrictSet) {
  EXPECT_EQ(parse_typed("true", VariableKind::Boolean).as_boolean(), true);
  EXPECT_EQ(parse_typed("True", VariableKind::Boolean).as_boolean(), true);
  EXPECT_EQ(parse_typed("yes", VariableKind::Boolean).as_boolean(), true);
  EXPECT_EQ(parse_typed("NO", VariableKind::Boolean).as_boolean(), false);
  EXPECT_EQ(parse_typed("false", VariableKind::Boolean).as_boolean(), false);
  EXPECT_THROW(parse_typed("maybe", VariableKind::Boolean), TypedParseError);
  EXPECT_THROW(parse_typed("1", VariableKind::Boolean), TypedParseError);
}

TEST(ParseTyped, StringsAreTrimmed) {
  EXPECT_EQ(parse_typed("  calm  ", VariableKind::String).as_string(), "calm");
  EXPECT_THROW(parse_typed("", VariableKind::String), PreconditionError);
}

TEST(ParseTyped, PayloadMatchesKind) {
  const auto n = parse_typed("5", VariableKind::Number);
  EXPECT_EQ(n.kind(), VariableKind::Number);
  EXPECT_FALSE(n.as_boolean().has_value());
  EXPECT_FALSE(n.as_string().has_value());
  EXPECT_EQ(format_typed(n), "5");
  EXPECT_EQ(format_typed(TypedValue::boolean(false)), "false");
}

TEST(Extract, ScriptedExtractorReadsTheDealLine) {
  auto backend = make_negotiation_backend();
  const auto transcript = deal_transcript();
  const auto out = extract_variables(transcript, kDealSpecs, *backend, params());
  EXPECT_EQ(out.values.at("final_price"), TypedValue::number(1100));
  EXPECT_EQ(out.values.at("deal_reached"), TypedValue::boolean(true));
  EXPECT_EQ(out.raw.at("deal_reached"), "true");
}

TEST(Extract, NoDealLeavesPriceAbsentWhichFailsUnlessOptional) {
  auto backend = make_negotiation_backend();
  const Transcript transcript{{1, "Buyer", "I offer 880."}, {2, "Seller", "Asking 1200."}};
  EXPECT_THROW(extract_variables(transcript, kDealSpecs, *backend, params()), ExtractionError);

  auto specs = kDealSpecs;
  specs[0].optional = true;
  const auto out = extract_variables(transcript, specs, *backend, params());
  EXPECT_EQ(out.values.at("deal_reached"), TypedValue::boolean(false));
  EXPECT_FALSE(out.values.contains("final_price"));
}

TEST(Extract, UnparseableValueFailsExtraction) {
  ScriptedBackend backend;
  backend.otherwise([](const ScriptContext&) { return std::string(R"({"final_price":"cheap","deal_reached":"yes"})"); });
  const auto transcript = deal_transcript();
  EXPECT_THROW(extract_variables(transcript, kDealSpecs, backend, params()), ExtractionError);
}

TEST(Extract, BackendFailureBecomesExtractionError) {
  ScriptedBackend backend;
  backend.otherwise([](const ScriptContext&) -> std::string { throw BackendError("down"); });
  const auto transcript = deal_transcript();
  EXPECT_THROW(extract_variables(transcript, kDealSpecs, backend, params()), ExtractionError);
}

TEST(Extract, RequestListsTranscriptAndVariables) {
  const auto transcript = deal_transcript();
  const auto messages = extraction_messages(transcript, kDealSpecs);
  ASSERT_EQ(messages.size(), 2u);
  EXPECT_EQ(messages[0].role, Role::system);
  EXPECT_NE(messages[1].content.find("[3] Buyer: I offer 1,100."), std::string::npos);
  EXPECT_NE(messages[1].content.find("- final_price (Number): Agreed price"), std::string::npos);
}

TEST(Extract, EmptyInputsArePreconditionErrors) {
  auto backend = make_negotiation_backend();
  EXPECT_THROW(extract_variables({}, kDealSpecs, *backend, params()), PreconditionError);
  const auto transcript = deal_transcript();
  EXPECT_THROW(extract_variables(transcript, {}, *backend, params()), PreconditionError);
}

}  // namespace
}  // namespace ngym
