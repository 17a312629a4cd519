// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "taxon/errors.hpp"
#include "taxon/grpo.hpp"

using namespace taxon;
using namespace taxon::grpo;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("config validation") {
  GrpoConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = [&](auto mutate) {
    GrpoConfig x;
    mutate(x);
    CHECK(code_of([&] { x.validate(); }) == ErrorCode::kConfig);
  };
  bad([](GrpoConfig& x) { x.group_size = 1; });
  bad([](GrpoConfig& x) { x.clip_eps = 0.0; });
  bad([](GrpoConfig& x) { x.clip_eps = 1.0; });
  bad([](GrpoConfig& x) { x.beta = -0.1; });
  bad([](GrpoConfig& x) { x.std_floor = -1.0; });
  bad([](GrpoConfig& x) { x.learning_rate = INFINITY; });
  bad([](GrpoConfig& x) { x.contexts = 0; });
  bad([](GrpoConfig& x) { x.inner_steps = 0; });
}

TEST_CASE("rewards") {
  CHECK(format_reward("<think>x</think><answer>B</answer>") == 1);
  CHECK(format_reward("<answer>B</answer>") == 0);

  const std::vector<Option> opts{{'A', "Rosa"}, {'B', "Prunus"}, {'C', "Malus"}, {'D', "Pyrus"}};
  CHECK(accuracy_reward(parse_tagged("<think></think><answer>B</answer>"), "B", 2, opts) == 1);
  CHECK(accuracy_reward(parse_tagged("<think></think><answer>Prunus</answer>"), "B", 2, opts) == 1);
  CHECK(accuracy_reward(parse_tagged("<think></think><answer>C</answer>"), "B", 2, opts) == 0);
  // Accuracy ignores structure; format is rewarded separately.
  CHECK(accuracy_reward(parse_tagged("<answer>B</answer>"), "B", 2, opts) == 1);
  CHECK(accuracy_reward(parse_tagged("<think></think><answer> heteromeles  ARBUTIFOLIA </answer>"),
                        "Heteromeles arbutifolia", 1, {}) == 1);
  CHECK(accuracy_reward(parse_tagged("<think></think><answer>Heteromeles</answer>"), "Heteromeles arbutifolia", 1,
                        {}) == 0);
  CHECK(code_of([&] { accuracy_reward(parse_tagged("x"), "B", 3, opts); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { accuracy_reward(parse_tagged("x"), "B", 2, {}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("advantage examples") {
  const std::vector<double> two{1, 0};
  CHECK(advantages(two, 1e-8) == std::vector<double>{1.0, -1.0});

  const std::vector<double> same{0.7, 0.7, 0.7, 0.7};
  CHECK(advantages(same, 1e-8) == std::vector<double>(4, 0.0));

  // Two successes among eight: mean 1/4, std sqrt(3)/4.
  const std::vector<double> eight{1, 1, 0, 0, 0, 0, 0, 0};
  const auto a = advantages(eight, 1e-8);
  CHECK(a[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  CHECK(a[1] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  for (std::size_t i = 2; i < 8; ++i) CHECK(a[i] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-14));

  // The floor bounds the scale of tiny spreads.
  const std::vector<double> tiny{1e-12, 0};
  const auto f = advantages(tiny, 1e-3);
  CHECK(f[0] == doctest::Approx(5e-10));

  const std::vector<double> one{1.0};
  CHECK(code_of([&] { advantages(one, 1e-8); }) == ErrorCode::kGroupTooSmall);
}

TEST_CASE("advantages are standardized") {
  testing::Gen g(101);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> r(g.range(2, 16));
    for (auto& x : r) x = g.coin(0.3) ? static_cast<double>(g.range(0, 2)) : g.real(-5, 5);
    const auto a = advantages(r, 1e-8);
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / r.size();
    double var = 0;
    for (double x : r) var += (x - mean) * (x - mean);
    if (std::sqrt(var / r.size()) <= 1e-8) continue;
    double am = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
    double av = 0;
    for (double x : a) av += (x - am) * (x - am);
    CHECK(std::abs(am) < 1e-12);
    CHECK(std::abs(std::sqrt(av / a.size()) - 1.0) < 1e-9);
  }
}

TEST_CASE("toy action space") {
  for (std::size_t a = 0; a < kActions; ++a) {
    CHECK(action_id(action_format_ok(a), static_cast<std::size_t>(action_letter(a) - 'A')) == a);
    CHECK(format_reward(render_action(a)) == (action_format_ok(a) ? 1 : 0));
  }
  CHECK(action_reward(action_id(true, 2), 'C') == 2.0);
  CHECK(action_reward(action_id(false, 2), 'C') == 1.0);
  CHECK(action_reward(action_id(true, 1), 'C') == 1.0);
  CHECK(action_reward(action_id(false, 1), 'C') == 0.0);
  // Uniform policy: half the mass is well-formed, a quarter picks the right letter.
  const SyntheticTask task = make_task(5, 9);
  CHECK(expected_reward(PolicyParams(5), task) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("categorical kl") {
  testing::Gen g(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> z1(kActions), z2(kActions);
    for (auto& x : z1) x = g.normal();
    for (auto& x : z2) x = g.normal();
    const auto p = PolicyParams(1, z1).probs(0);
    const auto q = PolicyParams(1, z2).probs(0);
    CHECK(categorical_kl(p, q) > 0.0);
    CHECK(categorical_kl(p, p) == 0.0);
  }
  const std::vector<double> p{0.5, 0.5}, q{1.0, 0.0};
  CHECK(code_of([&] { categorical_kl(p, q); }) == ErrorCode::kZeroProbability);
  const std::vector<double> r{0.0, 1.0};
  CHECK(categorical_kl(r, std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("objective matches the reference and vanishes at identity") {
  testing::Gen g(31);
  GrpoConfig c;
  for (int trial = 0; trial < 500; ++trial) {
    auto in = testing::random_grpo_instance(g, g.real(0.0, 1.0));
    c.beta = g.real(0.0, 1.0);
    c.clip_eps = g.real(0.05, 0.5);
    const double got = grpo_objective(in.theta, in.old, in.ref, in.groups, c);
    const double want = testing::reference_objective(in.theta, in.old, in.ref, in.groups, c.clip_eps, c.beta);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(std::abs(grpo_objective(in.theta, in.theta, in.theta, in.groups, c)) < 1e-12);
  }
}

TEST_CASE("clip example") {
  // One context, old uniform; theta doubles the weight of action 0 relative
  // to the rest, so its ratio is 16/9 and is clipped at 1.2 for a positive
  // advantage.
  std::vector<double> z(kActions, 0.0);
  z[0] = std::log(2.0);
  const PolicyParams theta(1, z), old(1), ref(1);
  Group grp{0, {{0, 1.0}, {1, 0.0}}, {1.0, -1.0}};
  GrpoConfig c;
  c.beta = 0.0;
  const double s0 = (2.0 / 9.0) / (1.0 / 8.0);
  const double s1 = (1.0 / 9.0) / (1.0 / 8.0);
  CHECK(s0 > 1.2);
  const double want = (1.2 * 1.0 + std::min(s1 * -1.0, 0.8 * -1.0)) / 2.0;
  CHECK(grpo_objective(theta, old, ref, std::span(&grp, 1), c) == doctest::Approx(want).epsilon(1e-14));

  // The clipped sample contributes no gradient; only sample 1 moves theta.
  const PolicyParams grad = grpo_gradient(theta, old, ref, std::span(&grp, 1), c);
  const auto pt = theta.probs(0);
  for (std::size_t b = 0; b < kActions; ++b) {
    const double want_b = 0.5 * -1.0 * s1 * ((b == 1 ? 1.0 : 0.0) - pt[b]);
    CHECK(grad.data()[b] == doctest::Approx(want_b).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches finite differences") {
  testing::Gen g(43);
  GrpoConfig c;
  int checked = 0;
  while (checked < 200) {
    auto in = testing::random_grpo_instance(g, g.real(0.0, 0.6));
    c.beta = g.real(0.0, 1.0);
    if (!testing::away_from_breakpoints(in, c.clip_eps, 1e-3)) continue;
    const auto analytic = grpo_gradient(in.theta, in.old, in.ref, in.groups, c).data();
    const auto numeric = testing::fd_gradient(in, c.clip_eps, c.beta, 1e-5);
    CHECK(testing::max_relative_error(analytic, numeric) < 1e-5);
    ++checked;
  }
}

TEST_CASE("kl-only gradient has the closed form") {
  testing::Gen g(47);
  GrpoConfig c;
  c.beta = 0.4;
  for (int trial = 0; trial < 100; ++trial) {
    auto in = testing::random_grpo_instance(g);
    for (auto& grp : in.groups) std::fill(grp.advantages.begin(), grp.advantages.end(), 0.0);
    const auto grad = grpo_gradient(in.theta, in.old, in.ref, in.groups, c);
    std::vector<double> want(grad.data().size(), 0.0);
    for (const auto& grp : in.groups) {
      const auto p = in.theta.probs(grp.context);
      const auto r = in.ref.probs(grp.context);
      double kl = 0;
      for (std::size_t b = 0; b < kActions; ++b) kl += p[b] * std::log(p[b] / r[b]);
      for (std::size_t b = 0; b < kActions; ++b) {
        want[grp.context * kActions + b] -= c.beta * p[b] * (std::log(p[b] / r[b]) - kl) / in.groups.size();
      }
    }
    CHECK(testing::max_relative_error(grad.data(), want, 1e-12) < 1e-10);
  }
}

TEST_CASE("at theta == old the surrogate gradient is the policy gradient") {
  testing::Gen g(53);
  GrpoConfig c;
  c.beta = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto in = testing::random_grpo_instance(g);
    in.theta = in.old;
    const auto grad = grpo_gradient(in.theta, in.old, in.ref, in.groups, c);
    std::vector<double> want(grad.data().size(), 0.0);
    for (const auto& grp : in.groups) {
      const auto p = in.theta.probs(grp.context);
      for (std::size_t i = 0; i < grp.samples.size(); ++i) {
        for (std::size_t b = 0; b < kActions; ++b) {
          const double score = (grp.samples[i].output_id == b ? 1.0 : 0.0) - p[b];
          want[grp.context * kActions + b] += grp.advantages[i] * score / grp.samples.size() / in.groups.size();
        }
      }
    }
    CHECK(testing::max_relative_error(grad.data(), want, 1e-12) < 1e-10);
  }
}

TEST_CASE("objective input errors") {
  GrpoConfig c;
  const PolicyParams p(1);
  Group small{0, {{0, 1.0}}, {0.0}};
  CHECK(code_of([&] { grpo_objective(p, p, p, std::span(&small, 1), c); }) == ErrorCode::kGroupTooSmall);
  Group outside{3, {{0, 1.0}, {1, 0.0}}, {1.0, -1.0}};
  CHECK(code_of([&] { grpo_objective(p, p, p, std::span(&outside, 1), c); }) == ErrorCode::kInvalidArgument);
  std::vector<double> z(kActions, 0.0);
  z[0] = -1e6;
  const PolicyParams collapsed(1, z);
  Group ok{0, {{1, 1.0}, {2, 0.0}}, {1.0, -1.0}};
  CHECK(code_of([&] { grpo_objective(p, p, collapsed, std::span(&ok, 1), c); }) == ErrorCode::kZeroProbability);
  CHECK(code_of([&] { PolicyParams(2, std::vector<double>(3)); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("toy training") {
  GrpoConfig c;
  c.steps = 300;
  c.seed = 0;
  const SyntheticTask task = make_task(c.contexts, c.seed);
  const TrainResult r = train_toy(c, task);
  REQUIRE(r.curve.size() == 301);
  CHECK(r.curve.front().mean_reward == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(r.curve.front().mean_kl == 0.0);
  CHECK(r.curve.back().mean_reward >= 1.8);
  CHECK(r.curve.back().mean_kl > 0.0);
  for (std::size_t i = 0; i < r.curve.size(); ++i) CHECK(r.curve[i].step == i);

  const TrainResult again = train_toy(c, task);
  CHECK(again.curve == r.curve);

  GrpoConfig other = c;
  other.seed = 1;
  CHECK(train_toy(other, task).curve != r.curve);

  std::ostringstream csv;
  write_curve_csv(csv, r.curve);
  CHECK(csv.str().rfind("step,mean_reward,mean_kl,objective\n0,0.75,0,", 0) == 0);
}

TEST_CASE("zero steps and a strong kl anchor") {
  GrpoConfig c;
  c.steps = 0;
  const SyntheticTask task = make_task(c.contexts, 0);
  const TrainResult idle = train_toy(c, task);
  REQUIRE(idle.curve.size() == 1);
  CHECK(idle.curve[0].mean_reward == doctest::Approx(0.75));

  c.steps = 300;
  c.beta = 100.0;
  const TrainResult anchored = train_toy(c, task);
  double tv = 0;
  for (std::size_t k = 0; k < c.contexts; ++k) {
    double d = 0;
    for (double x : anchored.policy.probs(k)) d += 0.5 * std::abs(x - 1.0 / kActions);
    tv = std::max(tv, d);
  }
  CHECK(tv < 0.05);
}

TEST_CASE("training errors") {
  GrpoConfig c;
  c.contexts = 3;
  CHECK(code_of([&] { train_toy(c, make_task(2, 0)); }) == ErrorCode::kInvalidArgument);
  c.learning_rate = 1e6;
  c.steps = 50;
  CHECK(code_of([&] { train_toy(c, make_task(3, 0)); }) == ErrorCode::kDivergence);
}
