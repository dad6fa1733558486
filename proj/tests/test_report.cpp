#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "linopen/report.hpp"

namespace linopen {
namespace {

std::vector<std::string> fixture_paths() {
  std::vector<std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(LINOPEN_SYSTEMS_DIR)) {
    if (entry.path().extension() == ".stab") out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Report, RoundTripsEveryFixture) {
  auto paths = fixture_paths();
  ASSERT_GE(paths.size(), 8u);
  for (const auto& path : paths) {
    auto s = load_system(path);
    auto doc = make_report(s, analyze_full(s), 3);
    auto text = to_json(doc).dump(2);
    auto back = report_from_json(Json::parse(text));
    EXPECT_TRUE(back == doc) << path;
    EXPECT_EQ(to_json(back).dump(2), text) << path;
  }
}

TEST(Report, NonFiniteValuesAreStrings) {
  auto s = load_system(LINOPEN_SYSTEMS_DIR "/cubic.stab");
  auto j = to_json(make_report(s, analyze_full(s), 0));
  EXPECT_EQ(j["openness"]["reg"], "inf");
  EXPECT_EQ(j["openness"]["cov"], 0.0);
  EXPECT_EQ(j["verdict"]["decision"], "NOT_SMOOTHLY_EXP_STABILIZABLE");
  EXPECT_TRUE(j["control_affine"]["span_dimension"].is_null());
  auto stable = load_system(LINOPEN_SYSTEMS_DIR "/shifted.stab");
  auto k = to_json(make_report(stable, analyze_full(stable), 0));
  EXPECT_EQ(k["spectrum"]["eta"], "-inf");
}

TEST(Report, KeyOrderIsStable) {
  auto s = load_system(LINOPEN_SYSTEMS_DIR "/three_state.stab");
  auto j = to_json(make_report(s, analyze_full(s), 0));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  std::vector<std::string> expected{"tool",     "version",        "seed",           "system",
                                    "linearization", "openness",  "spectrum",       "hautus",
                                    "control_affine", "perturbation_margin", "verdict"};
  EXPECT_EQ(keys, expected);
  EXPECT_EQ(j["spectrum"]["eigenvalues"][0].size(), 2u);
}

TEST(Report, GainAndValidationRoundTrip) {
  auto s = load_system(LINOPEN_SYSTEMS_DIR "/planar_cubic.stab");
  auto doc = make_report(s, analyze_full(s), 9);
  auto g = synthesize(s);
  doc.gain = summarize_gain(s, g);
  Horizon h;
  h.T = 5.0;
  h.dt = 1e-2;
  doc.validation = summarize_validation(verify_local_stability(s, Feedback::linear(g.K), 0.05, 4, h));
  auto back = report_from_json(Json::parse(to_json(doc).dump()));
  EXPECT_TRUE(back == doc);
  EXPECT_EQ(back.gain->convention, "u = u* + K (x - x*)");
  EXPECT_EQ(back.validation->status, "empirically certified");
}

TEST(Report, RejectsUnknownDecision) {
  auto s = load_system(LINOPEN_SYSTEMS_DIR "/planar_cubic.stab");
  auto j = to_json(make_report(s, analyze_full(s), 0));
  j["verdict"]["decision"] = "MAYBE";
  EXPECT_ANY_THROW(report_from_json(j));
}

TEST(Report, IdenticalInputsGiveIdenticalBytes) {
  for (const auto& path : fixture_paths()) {
    auto s1 = load_system(path);
    auto s2 = load_system(path);
    EXPECT_EQ(to_json(make_report(s1, analyze_full(s1), 5)).dump(2),
              to_json(make_report(s2, analyze_full(s2), 5)).dump(2));
  }
}

}  // namespace
}  // namespace linopen
