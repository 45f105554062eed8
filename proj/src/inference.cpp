#include "varsel/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "varsel/errors.hpp"

namespace varsel {

namespace {

constexpr double kMinVariance = 1e-12;

void check_mse(double value) {
  if (!std::isfinite(value) || value < 0.0)
    raise(Errc::NonFiniteInput, "error metric must be finite and non-negative");
}

}  // namespace

double likelihood(double mse_value, LikelihoodMode mode) {
  check_mse(mse_value);
  return mode == LikelihoodMode::Increasing ? 1.0 / (1.0 + std::exp(-mse_value))
                                            : 1.0 / (1.0 + std::exp(mse_value));
}

double log_likelihood(double mse_value, LikelihoodMode mode) {
  check_mse(mse_value);
  // ln(1/(1+e^x)) = -(x + log1p(e^-x)) for x >= 0; both modes reduce to this
  // shape because mse >= 0.
  if (mode == LikelihoodMode::Increasing) return -std::log1p(std::exp(-mse_value));
  return -mse_value - std::log1p(std::exp(-mse_value));
}

double mle_score(double residual_mse, std::size_t sample_count) {
  check_mse(residual_mse);
  if (sample_count == 0) raise(Errc::RangeError, "sample_count must be positive");
  const double variance = std::max(residual_mse, kMinVariance);
  return -0.5 * static_cast<double>(sample_count) *
         (std::log(2.0 * std::numbers::pi * variance) + residual_mse / variance);
}

const PosteriorEntry* PosteriorDistribution::find(const std::string& id) const {
  for (const PosteriorEntry& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

PosteriorDistribution posterior(std::span<const WeightInput> inputs, PosteriorMode mode) {
  PosteriorDistribution dist;
  dist.mode = mode;
  dist.entries.reserve(inputs.size());

  double max_log = -std::numeric_limits<double>::infinity();
  for (const WeightInput& in : inputs) {
    PosteriorEntry e;
    e.id = in.id;
    e.ok = in.ok;
    e.error = in.error;
    if (in.ok) {
      switch (mode) {
        case PosteriorMode::PlainK:
          e.log_weight = -in.k_bits * std::numbers::ln2 + in.log_lik;
          e.tie_bits = in.k_bits;
          break;
        case PosteriorMode::ConditionalK:
          e.log_weight = -in.k_cond_bits * std::numbers::ln2 + in.log_lik;
          e.tie_bits = in.k_cond_bits;
          break;
        case PosteriorMode::MleWeighted:
          e.log_weight = in.mle_log + in.log_lik;
          e.tie_bits = in.k_bits;
          break;
      }
      max_log = std::max(max_log, e.log_weight);
    }
    dist.entries.push_back(std::move(e));
  }

  if (!std::isfinite(max_log))
    raise(Errc::EmptySupport, "no program ran successfully");

  double sum = 0.0;
  for (const PosteriorEntry& e : dist.entries) {
    if (e.ok) sum += std::exp(e.log_weight - max_log);
  }
  const double log_norm = max_log + std::log(sum);
  for (PosteriorEntry& e : dist.entries) {
    if (e.ok) e.probability = std::exp(e.log_weight - log_norm);
  }
  return dist;
}

std::vector<double> predict_row(
    const PosteriorDistribution& post,
    const std::vector<std::pair<std::string, std::vector<double>>>& outputs) {
  std::size_t width = 0;
  bool width_known = false;
  for (const auto& [id, row] : outputs) {
    const PosteriorEntry* e = post.find(id);
    if (!e || e->probability <= 0.0) continue;
    if (!width_known) {
      width = row.size();
      width_known = true;
    } else if (row.size() != width) {
      raise(Errc::ShapeMismatch, "program '" + id + "' supplied a row of width " +
                                     std::to_string(row.size()) + ", expected " +
                                     std::to_string(width));
    }
  }
  if (!width_known) raise(Errc::EmptySupport, "no program with positive posterior");

  for (const PosteriorEntry& e : post.entries) {
    if (e.probability > 0.0 &&
        std::none_of(outputs.begin(), outputs.end(),
                     [&](const auto& o) { return o.first == e.id; })) {
      raise(Errc::ShapeMismatch, "program '" + e.id + "' has positive posterior but no output row");
    }
  }

  std::vector<double> cells(width, 0.0);
  for (const auto& [id, row] : outputs) {
    const PosteriorEntry* e = post.find(id);
    if (!e || e->probability <= 0.0) continue;
    for (std::size_t c = 0; c < width; ++c) cells[c] += row[c] * e->probability;
  }
  return cells;
}

std::string decide(const PosteriorDistribution& post) {
  const PosteriorEntry* best = nullptr;
  for (const PosteriorEntry& e : post.entries) {
    if (!e.ok) continue;
    if (!best || e.probability > best->probability ||
        (e.probability == best->probability &&
         (e.tie_bits < best->tie_bits ||
          (e.tie_bits == best->tie_bits && e.id < best->id)))) {
      best = &e;
    }
  }
  if (!best) raise(Errc::EmptySupport, "posterior has no successful entries");
  return best->id;
}

}  // namespace varsel
