// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "taxon/dataset.hpp"
#include "taxon/response.hpp"

namespace taxon::grpo {

struct GrpoConfig {
  std::size_t group_size = 8;
  double clip_eps = 0.2;
  double beta = 0.4;
  double std_floor = 1e-8;
  double learning_rate = 1.0;
  std::size_t steps = 300;
  std::uint64_t seed = 0;
  std::size_t contexts = 8;
  // Gradient steps per sampled batch; values above 1 move the ratio off 1 and
  // engage the clip.
  std::size_t inner_steps = 1;

  // Throws Error(kConfig) unless G >= 2, 0 < eps < 1, beta >= 0, std_floor >= 0.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Rewards

// 1 iff the response has exactly one think block followed by one answer block.
int format_reward(std::string_view raw);

// Stage 1: the generated name matches `ground_truth` (case-insensitive,
// whitespace-normalized). Stage 2: the extracted option letter equals
// `ground_truth`, which holds the correct letter. Uses the answer block even
// when the overall structure is malformed; format is rewarded separately.
int accuracy_reward(const ParsedResponse& parsed, std::string_view ground_truth, int stage,
                    std::span<const Option> options);

// (r_i - mean) / max(population std, std_floor); all zeros when every reward
// is equal. Throws Error(kGroupTooSmall) for fewer than two rewards.
std::vector<double> advantages(std::span<const double> rewards, double std_floor);

// ---------------------------------------------------------------------------
// Toy policy: per context, a softmax over {malformed, well-formed} x {A,B,C,D}.

inline constexpr std::size_t kLetters = 4;
inline constexpr std::size_t kActions = 2 * kLetters;

std::size_t action_id(bool format_ok, std::size_t letter);
bool action_format_ok(std::size_t action);
char action_letter(std::size_t action);
// Well-formed think/answer text iff the action's format bit is set.
std::string render_action(std::size_t action);
const std::vector<Option>& toy_options();

using Distribution = std::array<double, kActions>;

class PolicyParams {
 public:
  explicit PolicyParams(std::size_t contexts = 0) : logits_(contexts * kActions, 0.0) {}
  PolicyParams(std::size_t contexts, std::vector<double> logits);

  std::size_t contexts() const { return logits_.size() / kActions; }
  std::span<double> logits(std::size_t context) { return std::span(logits_).subspan(context * kActions, kActions); }
  std::span<const double> logits(std::size_t context) const {
    return std::span(logits_).subspan(context * kActions, kActions);
  }
  std::vector<double>& data() { return logits_; }
  const std::vector<double>& data() const { return logits_; }

  Distribution probs(std::size_t context) const;

 private:
  std::vector<double> logits_;
};

double categorical_kl(std::span<const double> p, std::span<const double> q);

struct RewardedSample {
  std::size_t output_id = 0;
  double reward = 0.0;
  double prob_theta = 0.0;
  double prob_old = 0.0;
  double prob_ref = 0.0;
};

struct Group {
  std::size_t context = 0;
  std::vector<RewardedSample> samples;
  std::vector<double> advantages;
};

// Fills prob_theta/prob_old/prob_ref of every sample.
void annotate(std::span<Group> groups, const PolicyParams& theta, const PolicyParams& old, const PolicyParams& ref);

/**
 * Mean over groups of
 *   (1/G) sum_i min(s_i A_i, clip(s_i, 1-eps, 1+eps) A_i) - beta KL(pi_theta || pi_ref)
 * with s_i = pi_theta(o_i|q) / pi_old(o_i|q) and the exact categorical KL of
 * the group's context. Advantages are taken as constants.
 */
double grpo_objective(const PolicyParams& theta, const PolicyParams& old, const PolicyParams& ref,
                      std::span<const Group> groups, const GrpoConfig& config);

// Exact gradient of grpo_objective w.r.t. theta's logits. Where the two
// branches of the min tie, the unclipped branch is differentiated.
PolicyParams grpo_gradient(const PolicyParams& theta, const PolicyParams& old, const PolicyParams& ref,
                           std::span<const Group> groups, const GrpoConfig& config);

// ---------------------------------------------------------------------------
// Training demo

struct SyntheticTask {
  std::vector<char> correct_letter;  // one per context
};

SyntheticTask make_task(std::size_t contexts, std::uint64_t seed);

double action_reward(std::size_t action, char correct_letter);
double expected_reward(const PolicyParams& policy, const SyntheticTask& task);

struct CurvePoint {
  std::size_t step = 0;
  double mean_reward = 0.0;  // exact expectation under the current policy
  double mean_kl = 0.0;      // exact KL to the reference, averaged over contexts
  double objective = 0.0;    // on the groups sampled from the current policy

  bool operator==(const CurvePoint&) const = default;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  PolicyParams policy;
};

/**
 * Per step: snapshot theta as theta_old, sample G actions per context from
 * theta_old, score them, normalize advantages per group, then take
 * `inner_steps` gradient-ascent steps. The reference policy is the uniform
 * initial policy. Row k of the curve describes the policy after k updates.
 * Throws Error(kDivergence) when a logit turns non-finite or a probability
 * underflows to zero.
 */
TrainResult train_toy(const GrpoConfig& config, const SyntheticTask& task);

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);

}  // namespace taxon::grpo
