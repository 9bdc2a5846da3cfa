#include <gtest/gtest.h>

#include "oneshot/instance.hpp"
#include "support/fixtures.hpp"

using namespace oneshot;

class BundledInstances : public ::testing::TestWithParam<std::string> {};

TEST_P(BundledInstances, LoadValidateAndRoundTrip) {
  const std::string path = fixtures::instance(GetParam());
  const std::string text = read_file(path);
  const Instance in = load_instance(path);
  EXPECT_NO_THROW(in.validate());
  EXPECT_EQ(dump_canonical(instance_to_json(in)), text);
  const Instance again = instance_from_json(nlohmann::json::parse(dump_canonical(instance_to_json(in))));
  EXPECT_EQ(again.state, in.state);
  EXPECT_EQ(again.povm.elements, in.povm.elements);
}

INSTANTIATE_TEST_SUITE_P(All, BundledInstances,
                         ::testing::Values("trivial", "classical", "qubit_cq", "entangled", "instrument", "ratesplit"));

TEST(Instance, InstrumentMatchesItsPOVM) {
  const Instance in = load_instance(fixtures::instance("instrument"));
  ASSERT_TRUE(in.instrument.has_value());
  for (const auto& [key, k] : in.instrument->kraus) {
    const Matrix e = k.adjoint() * k;
    EXPECT_LT((e - in.povm.element(key.first, key.second)).norm(), 1e-12);
  }
}

namespace {
nlohmann::json minimal() {
  return nlohmann::json::parse(R"({"dims": {"A": 2},
    "state": [[0.5,0],[0,0],[0,0],[0.5,0]],
    "povm": {"alphabetX": ["0","1"], "alphabetY": ["0"],
             "elements": {"0|0": [[1,0],[0,0],[0,0],[0,0]], "1|0": [[0,0],[0,0],[0,0],[1,0]]}}})");
}
}  // namespace

TEST(Instance, MinimalLoads) {
  const Instance in = instance_from_json(minimal());
  EXPECT_EQ(in.dB, 1u);
  EXPECT_EQ(in.povm.nx(), 2u);
}

TEST(Instance, NestedMatricesAccepted) {
  auto j = minimal();
  j["state"] = nlohmann::json::parse("[[[0.5,0],[0,0]],[[0,0],[0.5,0]]]");
  EXPECT_NO_THROW(instance_from_json(j));
}

TEST(Instance, InvalidInputsRejected) {
  auto bad = [](auto mutate) {
    auto j = minimal();
    mutate(j);
    EXPECT_THROW(instance_from_json(j), InvalidInstance) << j.dump();
  };
  bad([](nlohmann::json& j) { j["state"][0][0] = 0.7; });                              // trace
  bad([](nlohmann::json& j) { j["state"][1] = {0.3, 0.0}; });                          // not Hermitian
  bad([](nlohmann::json& j) { j["state"][0][0] = 1.5, j["state"][3][0] = -0.5; });     // not PSD
  bad([](nlohmann::json& j) { j["povm"]["elements"].erase("1|0"); });                 // incomplete
  bad([](nlohmann::json& j) { j["povm"]["elements"]["2|0"] = j["povm"]["elements"]["1|0"]; });  // unknown symbol
  bad([](nlohmann::json& j) { j["dims"]["A"] = 3; });                                  // size mismatch
  bad([](nlohmann::json& j) { j.erase("povm"); });                                    // no measurement
  bad([](nlohmann::json& j) { j["povm"]["alphabetX"] = {"0|1", "1"}; });             // separator in symbol
  EXPECT_THROW(load_instance("/nonexistent/instance.json"), InvalidInstance);
}

TEST(Errors, ExitCodes) {
  EXPECT_EQ(InvalidInstance("x").exit_code(), 1);
  EXPECT_EQ(RateInfeasible("x").exit_code(), 2);
  EXPECT_EQ(SolverFailure("x", 1, 1).exit_code(), 3);
  EXPECT_EQ(RetryBudgetExhausted("x").exit_code(), 4);
}
