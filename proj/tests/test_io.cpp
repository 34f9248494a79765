#include <gtest/gtest.h>

#include <random>

#include "cptensor/io.hpp"
#include "support.hpp"

using namespace cptensor;

namespace {

std::string fixture_path(const std::string& name) { return std::string(CPT_FIXTURE_DIR) + "/" + name; }

void expect_format_error(const std::string& text) {
  EXPECT_THROW(parse_tensor_file(text), FormatError) << text;
}

}  // namespace

TEST(TensorFile, ParsesLabelsOneBased) {
  const auto tf = parse_tensor_file(std::string(R"({"n":2,"d":2,"entries":[{"idx":[1,2],"val":3.5},{"idx":[2,2],"val":-1}]})"));
  EXPECT_EQ(tf.tensor.n(), 2);
  EXPECT_EQ(tf.tensor.d(), 2);
  EXPECT_DOUBLE_EQ(tf.tensor.at({0, 1}), 3.5);
  EXPECT_DOUBLE_EQ(tf.tensor.at({1, 1}), -1.0);
  EXPECT_DOUBLE_EQ(tf.tensor.at({0, 0}), 0.0);
  EXPECT_FALSE(tf.unknown.has_value());
}

TEST(TensorFile, RejectsMalformedInput) {
  expect_format_error("{");
  expect_format_error("[]");
  expect_format_error(R"({"n":2,"entries":[]})");
  expect_format_error(R"({"n":2.5,"d":2,"entries":[]})");
  expect_format_error(R"({"n":0,"d":2,"entries":[]})");
  expect_format_error(R"({"n":2,"d":2,"entries":{}})");
  expect_format_error(R"({"n":2,"d":2,"entries":[{"idx":[1],"val":1}]})");
  expect_format_error(R"({"n":2,"d":2,"entries":[{"idx":[1,3],"val":1}]})");
  expect_format_error(R"({"n":2,"d":2,"entries":[{"idx":[0,1],"val":1}]})");
  expect_format_error(R"({"n":2,"d":2,"entries":[{"idx":[2,1],"val":1}]})");
  expect_format_error(R"({"n":2,"d":2,"entries":[{"idx":[1,2],"val":"x"}]})");
  expect_format_error(R"({"n":2,"d":2,"entries":[{"idx":[1,2],"val":1},{"idx":[1,2],"val":2}]})");
  expect_format_error(R"({"n":2,"d":2,"entries":[{"idx":[1,2],"val":1}],"unknown":[[1,2]]})");
  expect_format_error(R"({"n":2,"d":2,"entries":[],"unknown":[[3,3]]})");
}

TEST(TensorFile, MissingFileIsFormatError) {
  EXPECT_THROW(load_tensor_file("/nonexistent/cptensor.json"), FormatError);
}

TEST(TensorFile, UnknownListIsZeroBased) {
  const auto tf = load_tensor_file(fixture_path("completion_tensor.json"));
  ASSERT_TRUE(tf.unknown.has_value());
  const std::vector<std::vector<int>> expect = {{0, 0, 0}, {0, 1, 2}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  EXPECT_EQ(*tf.unknown, expect);
}

TEST(TensorFile, RoundTripPreservesValues) {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 3;
    const int d = 1 + trial % 4;
    SymTensor t(n, d);
    const auto v = cpt_test::random_vector(g, static_cast<int>(t.size()), -5.0, 5.0);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = v[k];
    const auto back = parse_tensor_file(tensor_to_json(t).dump());
    ASSERT_EQ(back.tensor.size(), t.size());
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_EQ(back.tensor[k], t[k]);
  }
}

TEST(TensorFile, RoundTripKeepsUnknowns) {
  const auto tf = load_tensor_file(fixture_path("completion_matrix.json"));
  const auto back = parse_tensor_file(tensor_to_json(tf.tensor, tf.unknown).dump());
  EXPECT_EQ(back.unknown, tf.unknown);
  for (std::size_t k = 0; k < tf.tensor.size(); ++k) EXPECT_EQ(back.tensor[k], tf.tensor[k]);
}

TEST(TensorFile, EveryFixtureParses) {
  for (const char* name : {"dehomogenization_small.json", "membership_matrix_A.json", "membership_matrix_B.json",
                           "membership_matrix_C.json", "membership_tensor_order6.json",
                           "membership_tensor_order4.json", "membership_tensor_n5_d3.json",
                           "membership_tensor_n4_d6.json", "membership_tensor_order10.json",
                           "approximation_matrix.json", "approximation_tensor.json", "completion_matrix.json",
                           "completion_tensor.json", "copositive_horn.json"}) {
    EXPECT_NO_THROW(load_tensor_file(fixture_path(name))) << name;
  }
}

TEST(Reports, MembershipReportIsReproducible) {
  const auto t = load_tensor_file(fixture_path("membership_matrix_B.json")).tensor;
  const auto a = membership_report_json(check_cp(t)).dump(2);
  const auto b = membership_report_json(check_cp(t)).dump(2);
  EXPECT_EQ(a, b);
  const auto j = nlohmann::json::parse(a);
  EXPECT_EQ(j["schema"], kReportSchema);
  EXPECT_EQ(j["verdict"], "CP");
  EXPECT_FALSE(j.contains("timings"));
  EXPECT_GE(j["decomposition"].size(), 1u);
}

TEST(Reports, TimingsAreOptIn) {
  const auto t = load_tensor_file(fixture_path("membership_matrix_C.json")).tensor;
  const auto r = check_cp(t);
  EXPECT_TRUE(membership_report_json(r, {20231, true}).contains("timings"));
  const auto j = membership_report_json(r);
  EXPECT_EQ(j["verdict"], "NotCP");
  EXPECT_TRUE(j["certificate"]["valid"].get<bool>());
}

TEST(Reports, ConicAndCopositivityReports) {
  const auto tf = load_tensor_file(fixture_path("completion_matrix.json"));
  const auto r = solve_cp_conic(build_completion(tf.tensor, *tf.unknown));
  const auto j = conic_report_json(r, "complete");
  EXPECT_EQ(j["command"], "complete");
  EXPECT_EQ(j["status"], "Optimal");
  EXPECT_EQ(j["w"].size(), 5u);
  EXPECT_EQ(j.dump(), conic_report_json(solve_cp_conic(build_completion(tf.tensor, *tf.unknown)), "complete").dump());

  const auto id = SymTensor::from_matrix(Eigen::MatrixXd::Identity(3, 3));
  const auto c = copositivity_report_json(check_copositive(id, 2));
  EXPECT_EQ(c["verdict"], "CertifiedCopositive");
  EXPECT_TRUE(c["certificate"]["valid"].get<bool>());
}
