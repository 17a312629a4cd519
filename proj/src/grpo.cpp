// Copyright 2026 The Taxon Authors
// SPDX-License-Identifier: Apache-2.0

#include "taxon/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "taxon/errors.hpp"
#include "taxon/rng.hpp"
#include "taxon/text.hpp"

namespace taxon::grpo {

void GrpoConfig::validate() const {
  if (group_size < 2) throw Error(ErrorCode::kConfig, "group_size must be at least 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw Error(ErrorCode::kConfig, "clip_eps must lie in (0, 1)");
  if (!(beta >= 0.0)) throw Error(ErrorCode::kConfig, "beta must be non-negative");
  if (!(std_floor >= 0.0)) throw Error(ErrorCode::kConfig, "std_floor must be non-negative");
  if (!std::isfinite(learning_rate)) throw Error(ErrorCode::kConfig, "learning_rate must be finite");
  if (contexts < 1) throw Error(ErrorCode::kConfig, "contexts must be at least 1");
  if (inner_steps < 1) throw Error(ErrorCode::kConfig, "inner_steps must be at least 1");
}

// ---------------------------------------------------------------------------
// Rewards

int format_reward(std::string_view raw) { return parse_tagged(raw).well_formed ? 1 : 0; }

int accuracy_reward(const ParsedResponse& parsed, std::string_view ground_truth, int stage,
                    std::span<const Option> options) {
  if (stage == 1) return names_match(parsed.answer, ground_truth) ? 1 : 0;
  if (stage != 2) throw Error(ErrorCode::kInvalidArgument, "stage must be 1 or 2");
  if (options.empty()) throw Error(ErrorCode::kInvalidArgument, "stage-2 accuracy needs options");
  const auto letter = extract_choice(parsed.answer, options);
  const std::string_view truth = text::trim(ground_truth);
  return letter && truth.size() == 1 && *letter == truth[0] ? 1 : 0;
}

std::vector<double> advantages(std::span<const double> rewards, double std_floor) {
  if (rewards.size() < 2) throw Error(ErrorCode::kGroupTooSmall, "a group needs at least two rewards");
  const double n = static_cast<double>(rewards.size());
  std::vector<double> out(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) return out;
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  const double denom = std::max(sd, std_floor);
  if (!(denom > 0.0)) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / denom;
  return out;
}

// ---------------------------------------------------------------------------
// Toy policy

std::size_t action_id(bool format_ok, std::size_t letter) { return (format_ok ? kLetters : 0) + letter; }
bool action_format_ok(std::size_t action) { return action >= kLetters; }
char action_letter(std::size_t action) { return static_cast<char>('A' + action % kLetters); }

std::string render_action(std::size_t action) {
  const std::string letter(1, action_letter(action));
  if (action_format_ok(action)) return serialize_tagged("considered each option", letter);
  return "<answer>" + letter + "</answer>";
}

const std::vector<Option>& toy_options() {
  static const std::vector<Option> options{{'A', "first"}, {'B', "second"}, {'C', "third"}, {'D', "fourth"}};
  return options;
}

PolicyParams::PolicyParams(std::size_t contexts, std::vector<double> logits) : logits_(std::move(logits)) {
  if (logits_.size() != contexts * kActions) {
    throw Error(ErrorCode::kInvalidArgument, "expected " + std::to_string(contexts * kActions) + " logits, got " +
                                                 std::to_string(logits_.size()));
  }
}

Distribution PolicyParams::probs(std::size_t context) const {
  const auto z = logits(context);
  const double zmax = *std::max_element(z.begin(), z.end());
  Distribution p{};
  double total = 0.0;
  for (std::size_t a = 0; a < kActions; ++a) {
    p[a] = std::exp(z[a] - zmax);
    total += p[a];
  }
  for (double& x : p) x /= total;
  return p;
}

double categorical_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error(ErrorCode::kDimMismatch, "distributions differ in size");
  double kl = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] == 0.0) continue;
    if (q[a] <= 0.0) throw Error(ErrorCode::kZeroProbability, "reference assigns zero probability to a supported action");
    kl += p[a] * (std::log(p[a]) - std::log(q[a]));
  }
  return kl;
}

void annotate(std::span<Group> groups, const PolicyParams& theta, const PolicyParams& old, const PolicyParams& ref) {
  for (auto& g : groups) {
    const auto pt = theta.probs(g.context);
    const auto po = old.probs(g.context);
    const auto pr = ref.probs(g.context);
    for (auto& s : g.samples) {
      s.prob_theta = pt[s.output_id];
      s.prob_old = po[s.output_id];
      s.prob_ref = pr[s.output_id];
    }
  }
}

namespace {

void check_group(const Group& g, const PolicyParams& theta) {
  if (g.context >= theta.contexts()) throw Error(ErrorCode::kInvalidArgument, "group context out of range");
  if (g.samples.size() != g.advantages.size() || g.samples.size() < 2) {
    throw Error(ErrorCode::kGroupTooSmall, "group needs at least two samples with one advantage each");
  }
  for (const auto& s : g.samples) {
    if (s.output_id >= kActions) throw Error(ErrorCode::kInvalidArgument, "action id out of range");
  }
}

void check_positive(const Distribution& p, const char* which) {
  for (double x : p) {
    if (!(x > 0.0)) throw Error(ErrorCode::kZeroProbability, std::string(which) + " has a zero probability");
  }
}

struct GroupTerms {
  Distribution theta;
  Distribution old;
  Distribution ref;
};

GroupTerms group_terms(const Group& g, const PolicyParams& theta, const PolicyParams& old, const PolicyParams& ref) {
  check_group(g, theta);
  GroupTerms t{theta.probs(g.context), old.probs(g.context), ref.probs(g.context)};
  check_positive(t.theta, "pi_theta");
  check_positive(t.old, "pi_old");
  check_positive(t.ref, "pi_ref");
  return t;
}

void check_shapes(const PolicyParams& theta, const PolicyParams& old, const PolicyParams& ref,
                  std::span<const Group> groups) {
  if (old.contexts() != theta.contexts() || ref.contexts() != theta.contexts()) {
    throw Error(ErrorCode::kInvalidArgument, "policies differ in context count");
  }
  if (groups.empty()) throw Error(ErrorCode::kInvalidArgument, "no groups");
}

}  // namespace

double grpo_objective(const PolicyParams& theta, const PolicyParams& old, const PolicyParams& ref,
                      std::span<const Group> groups, const GrpoConfig& config) {
  check_shapes(theta, old, ref, groups);
  double total = 0.0;
  for (const auto& g : groups) {
    const GroupTerms t = group_terms(g, theta, old, ref);
    double surrogate = 0.0;
    for (std::size_t i = 0; i < g.samples.size(); ++i) {
      const std::size_t o = g.samples[i].output_id;
      const double a = g.advantages[i];
      const double s = t.theta[o] / t.old[o];
      const double c = std::clamp(s, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
      surrogate += std::min(s * a, c * a);
    }
    total += surrogate / static_cast<double>(g.samples.size()) - config.beta * categorical_kl(t.theta, t.ref);
  }
  return total / static_cast<double>(groups.size());
}

PolicyParams grpo_gradient(const PolicyParams& theta, const PolicyParams& old, const PolicyParams& ref,
                           std::span<const Group> groups, const GrpoConfig& config) {
  check_shapes(theta, old, ref, groups);
  PolicyParams grad(theta.contexts());
  const double scale = 1.0 / static_cast<double>(groups.size());
  for (const auto& g : groups) {
    const GroupTerms t = group_terms(g, theta, old, ref);
    auto out = grad.logits(g.context);
    const double per_sample = scale / static_cast<double>(g.samples.size());
    for (std::size_t i = 0; i < g.samples.size(); ++i) {
      const std::size_t o = g.samples[i].output_id;
      const double a = g.advantages[i];
      const double s = t.theta[o] / t.old[o];
      const double c = std::clamp(s, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
      if (s * a > c * a) continue;  // clipped branch is active and constant in theta
      // d s / d z_b = s (1[o == b] - pi_theta(b))
      for (std::size_t b = 0; b < kActions; ++b) {
        out[b] += per_sample * a * s * ((o == b ? 1.0 : 0.0) - t.theta[b]);
      }
    }
    if (config.beta != 0.0) {
      const double kl = categorical_kl(t.theta, t.ref);
      // d KL / d z_b = pi(b) (log pi(b) - log ref(b) - KL)
      for (std::size_t b = 0; b < kActions; ++b) {
        out[b] -= scale * config.beta * t.theta[b] * (std::log(t.theta[b]) - std::log(t.ref[b]) - kl);
      }
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Training demo

SyntheticTask make_task(std::size_t contexts, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "task"));
  SyntheticTask task;
  for (std::size_t c = 0; c < contexts; ++c) task.correct_letter.push_back(static_cast<char>('A' + rng.below(kLetters)));
  return task;
}

double action_reward(std::size_t action, char correct_letter) {
  const std::string text = render_action(action);
  const ParsedResponse parsed = parse_tagged(text);
  return format_reward(text) + accuracy_reward(parsed, std::string(1, correct_letter), 2, toy_options());
}

double expected_reward(const PolicyParams& policy, const SyntheticTask& task) {
  double total = 0.0;
  for (std::size_t c = 0; c < policy.contexts(); ++c) {
    const auto p = policy.probs(c);
    for (std::size_t a = 0; a < kActions; ++a) total += p[a] * action_reward(a, task.correct_letter[c]);
  }
  return total / static_cast<double>(policy.contexts());
}

namespace {

double mean_kl(const PolicyParams& policy, const PolicyParams& ref) {
  double total = 0.0;
  for (std::size_t c = 0; c < policy.contexts(); ++c) total += categorical_kl(policy.probs(c), ref.probs(c));
  return total / static_cast<double>(policy.contexts());
}

std::size_t sample_action(const Distribution& p, Rng& rng) {
  const double u = rng.uniform();
  double cdf = 0.0;
  for (std::size_t a = 0; a < kActions; ++a) {
    cdf += p[a];
    if (u < cdf) return a;
  }
  return kActions - 1;
}

std::vector<Group> sample_groups(const PolicyParams& old, const SyntheticTask& task, const GrpoConfig& config,
                                 Rng& rng) {
  std::vector<Group> groups;
  groups.reserve(old.contexts());
  for (std::size_t c = 0; c < old.contexts(); ++c) {
    const auto p = old.probs(c);
    Group g;
    g.context = c;
    std::vector<double> rewards;
    for (std::size_t i = 0; i < config.group_size; ++i) {
      RewardedSample s;
      s.output_id = sample_action(p, rng);
      s.reward = action_reward(s.output_id, task.correct_letter[c]);
      rewards.push_back(s.reward);
      g.samples.push_back(s);
    }
    g.advantages = advantages(rewards, config.std_floor);
    groups.push_back(std::move(g));
  }
  return groups;
}

void check_finite(const PolicyParams& policy, std::size_t step) {
  for (std::size_t c = 0; c < policy.contexts(); ++c) {
    for (double z : policy.logits(c)) {
      if (!std::isfinite(z)) {
        throw Error(ErrorCode::kDivergence,
                    "non-finite logit at step " + std::to_string(step) + ", context " + std::to_string(c));
      }
    }
  }
}

}  // namespace

namespace {

void train_loop(const GrpoConfig& config, const SyntheticTask& task, const PolicyParams& ref, PolicyParams& theta,
                Rng& rng, TrainResult& result, std::size_t& step) {
  for (step = 0;; ++step) {
    const PolicyParams old = theta;
    auto groups = sample_groups(old, task, config, rng);
    annotate(groups, theta, old, ref);
    result.curve.push_back(CurvePoint{step, expected_reward(theta, task), mean_kl(theta, ref),
                                      grpo_objective(theta, old, ref, groups, config)});
    if (step == config.steps) return;
    for (std::size_t inner = 0; inner < config.inner_steps; ++inner) {
      const PolicyParams grad = grpo_gradient(theta, old, ref, groups, config);
      for (std::size_t k = 0; k < theta.data().size(); ++k) theta.data()[k] += config.learning_rate * grad.data()[k];
      check_finite(theta, step + 1);
    }
  }
}

}  // namespace

TrainResult train_toy(const GrpoConfig& config, const SyntheticTask& task) {
  config.validate();
  if (task.correct_letter.size() != config.contexts) {
    throw Error(ErrorCode::kInvalidArgument, "task has " + std::to_string(task.correct_letter.size()) +
                                                 " contexts, config has " + std::to_string(config.contexts));
  }
  Rng rng(derive_seed(config.seed, "grpo"));
  const PolicyParams ref(config.contexts);
  PolicyParams theta(config.contexts);
  TrainResult result;
  std::size_t step = 0;
  try {
    train_loop(config, task, ref, theta, rng, result, step);
  } catch (const Error& e) {
    // A probability underflowing to zero means the logits ran away.
    if (e.code() != ErrorCode::kZeroProbability) throw;
    throw Error(ErrorCode::kDivergence, "policy collapsed at step " + std::to_string(step));
  }
  result.policy = std::move(theta);
  return result;
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "step,mean_reward,mean_kl,objective\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", p.step, p.mean_reward, p.mean_kl, p.objective);
    out << buf;
  }
}

}  // namespace taxon::grpo
