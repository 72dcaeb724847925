// Copyright 2026 The promptlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "promptlab/metrics.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "promptlab/errors.h"
#include "promptlab/strings.h"

namespace promptlab::metrics {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Symmetric PSD square root; small negative eigenvalues from roundoff are
// treated as zero.
MatrixXd psd_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition failed");
  }
  VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Tr((A B)^{1/2}) computed as Tr((A^{1/2} B A^{1/2})^{1/2}), which shares
// its eigenvalues with A B but is symmetric.
double trace_sqrt_product(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd ra = psd_sqrt(a);
  MatrixXd m = ra * b * ra;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition failed");
  }
  return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

void fit_gaussian(const MatrixXd& x, VectorXd& mu, MatrixXd& cov) {
  mu = x.colwise().mean().transpose();
  MatrixXd c = x.rowwise() - mu.transpose();
  cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
  cov = 0.5 * (cov + cov.transpose());
}

double frechet_from_moments(const VectorXd& mu_a, const MatrixXd& cov_a,
                            const VectorXd& mu_b, const MatrixXd& cov_b) {
  // Averaging both orders keeps the result exactly symmetric in (a, b).
  const double ts =
      0.5 * (trace_sqrt_product(cov_a, cov_b) + trace_sqrt_product(cov_b, cov_a));
  return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * ts;
}

}  // namespace

EmbeddingSet::EmbeddingSet(const std::vector<std::vector<double>>& rows,
                           std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  if (!rows.empty()) {
    const std::size_t d = rows.front().size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != d) {
        throw InputError("embedding " + std::to_string(i) + " has dimension " +
                         std::to_string(rows[i].size()) + ", expected " +
                         std::to_string(d));
      }
    }
    data_.resize(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        data_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            rows[i][j];
      }
    }
  }
  validate();
}

EmbeddingSet::EmbeddingSet(MatrixXd rows, std::vector<std::string> labels)
    : data_(std::move(rows)), labels_(std::move(labels)) {
  validate();
}

void EmbeddingSet::validate() const {
  if (data_.rows() > 0 && data_.cols() == 0) {
    throw InputError("embeddings must have dimension >= 1");
  }
  if (!labels_.empty() && labels_.size() != size()) {
    throw InputError("got " + std::to_string(labels_.size()) +
                     " labels for " + std::to_string(size()) + " embeddings");
  }
  for (Eigen::Index i = 0; i < data_.rows(); ++i) {
    if (!data_.row(i).allFinite()) {
      throw InputError("embedding " + std::to_string(i) +
                       " has a non-finite entry");
    }
  }
}

MatrixXd cosine_similarity_matrix(const EmbeddingSet& e) {
  const MatrixXd& x = e.matrix();
  VectorXd norms = x.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms(i) > 0.0)) {
      throw InputError("embedding " + std::to_string(i) +
                       " is a zero vector");
    }
  }
  MatrixXd u = norms.cwiseInverse().asDiagonal() * x;
  MatrixXd k = u * u.transpose();
  k = 0.5 * (k + k.transpose());
  k.diagonal().setOnes();
  return k;
}

double vendi_score(const EmbeddingSet& e) {
  if (e.empty()) throw InputError("vendi score needs at least one vector");
  const double n = static_cast<double>(e.size());
  MatrixXd k = cosine_similarity_matrix(e) / n;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(k, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition of the similarity kernel failed");
  }
  VectorXd lambda = es.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < kVendiClip) lambda(i) = 0.0;
  }
  const double total = lambda.sum();
  if (!(std::abs(total - 1.0) <= kVendiDriftTolerance)) {
    throw NumericalError("kernel eigenvalues sum to " + std::to_string(total) +
                         " instead of 1");
  }
  lambda /= total;
  double h = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > 0.0) h -= lambda(i) * std::log(lambda(i));
  }
  return std::exp(h);
}

double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw InputError("frechet distance needs at least 2 vectors per set, got " +
                     std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  if (a.dim() != b.dim()) {
    throw InputError("embedding dimensions differ: " + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()));
  }
  VectorXd mu_a, mu_b;
  MatrixXd cov_a, cov_b;
  fit_gaussian(a.matrix(), mu_a, cov_a);
  fit_gaussian(b.matrix(), mu_b, cov_b);

  double d = frechet_from_moments(mu_a, cov_a, mu_b, cov_b);
  if (!std::isfinite(d)) {
    const MatrixXd eps =
        kFrechetEpsilon * MatrixXd::Identity(cov_a.rows(), cov_a.cols());
    d = frechet_from_moments(mu_a, cov_a + eps, mu_b, cov_b + eps);
    if (!std::isfinite(d)) throw NumericalError("frechet distance is not finite");
  }
  // Roundoff scales with the magnitude of the traces being cancelled.
  const double tol =
      kFrechetEpsilon * std::max(1.0, cov_a.trace() + cov_b.trace());
  if (d < -tol) {
    throw NumericalError("frechet distance came out negative: " +
                         std::to_string(d));
  }
  return std::max(d, 0.0);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile level outside [0, 1]");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ScoreSummary summarize(std::span<const double> scores, std::size_t bins) {
  if (scores.empty()) throw InputError("cannot summarize an empty score list");
  if (bins == 0) throw InputError("histogram needs at least one bin");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw InputError("score " + std::to_string(i) + " is not finite");
    }
  }
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());

  ScoreSummary out;
  out.count = s.size();
  const double n = static_cast<double>(s.size());
  out.mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  if (s.size() > 1) {
    double ss = 0.0;
    for (double v : s) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  out.min = s.front();
  out.max = s.back();
  out.q1 = quantile_sorted(s, 0.25);
  out.median = quantile_sorted(s, 0.5);
  out.q3 = quantile_sorted(s, 0.75);

  Histogram& h = out.histogram;
  if (out.min == out.max) {
    // Zero range: one degenerate bin holds everything.
    h.edges = {out.min, out.max};
    h.counts = {s.size()};
    return out;
  }
  const double width = (out.max - out.min) / static_cast<double>(bins);
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    h.edges[i] = out.min + width * static_cast<double>(i);
  }
  h.edges.back() = out.max;
  h.counts.assign(bins, 0);
  for (double v : s) {
    auto idx = static_cast<std::size_t>((v - out.min) / width);
    h.counts[std::min(idx, bins - 1)]++;
  }
  return out;
}

std::vector<ScoreOutcome> HttpScorerClient::score_batch(
    std::span<const std::string> refs) {
  nlohmann::json body = {{"images", std::vector<std::string>(refs.begin(),
                                                             refs.end())}};
  nlohmann::json reply = client_.post(body);
  auto malformed = [](const std::string& why) {
    return BackendError(BackendError::Kind::kMalformedReply,
                        "scorer reply " + why);
  };
  if (!reply.is_object() || !reply.contains("scores") ||
      !reply["scores"].is_array()) {
    throw malformed("has no \"scores\" array");
  }
  const auto& scores = reply["scores"];
  if (scores.size() != refs.size()) {
    throw malformed("has " + std::to_string(scores.size()) + " scores for " +
                    std::to_string(refs.size()) + " images");
  }
  const nlohmann::json* errors = nullptr;
  if (reply.contains("errors") && reply["errors"].is_array() &&
      reply["errors"].size() == refs.size()) {
    errors = &reply["errors"];
  }
  std::vector<ScoreOutcome> out(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (scores[i].is_number() && std::isfinite(scores[i].get<double>())) {
      out[i].score = scores[i].get<double>();
    } else if (errors && (*errors)[i].is_string()) {
      out[i].reason = (*errors)[i].get<std::string>();
    } else {
      out[i].reason = "scorer returned no score";
    }
  }
  return out;
}

std::vector<ScoreOutcome> score_images(ScorerClient& client,
                                       std::span<const std::string> refs,
                                       std::size_t batch_size) {
  if (batch_size == 0) throw InputError("batch_size must be >= 1");
  std::vector<ScoreOutcome> out;
  out.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); i += batch_size) {
    auto batch = refs.subspan(i, std::min(batch_size, refs.size() - i));
    auto got = client.score_batch(batch);
    if (got.size() != batch.size()) {
      throw BackendError(BackendError::Kind::kMalformedReply,
                         "scorer returned " + std::to_string(got.size()) +
                             " outcomes for " + std::to_string(batch.size()) +
                             " images");
    }
    for (auto& o : got) out.push_back(std::move(o));
  }
  return out;
}

EmbeddingSet read_embeddings(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  bool any_label = false;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    return InputError("embeddings line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = trim(line);
    if (t.empty()) continue;
    std::vector<double> v;
    std::string label;
    if (t.front() == '[' || t.front() == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(t);
      } catch (const nlohmann::json::exception& e) {
        throw fail(e.what());
      }
      const nlohmann::json* arr = &j;
      if (j.is_object()) {
        if (j.contains("vector")) {
          arr = &j["vector"];
        } else if (j.contains("embedding")) {
          arr = &j["embedding"];
        } else {
          throw fail("object has no \"vector\" or \"embedding\" field");
        }
        if (j.contains("id")) {
          label = j["id"].is_string() ? j["id"].get<std::string>()
                                      : j["id"].dump();
          any_label = true;
        }
      }
      if (!arr->is_array()) throw fail("vector is not an array");
      for (const auto& x : *arr) {
        if (!x.is_number()) throw fail("vector entry is not a number");
        v.push_back(x.get<double>());
      }
    } else {
      auto fields = split(t, ',');
      std::size_t first = 0;
      if (!fields.empty() && !parse_number(fields[0])) {
        // All-text first line is a header.
        if (rows.empty() &&
            std::none_of(fields.begin(), fields.end(),
                         [](std::string_view f) { return parse_number(f).has_value(); })) {
          continue;
        }
        label = std::string(trim(fields[0]));
        any_label = true;
        first = 1;
      }
      for (std::size_t i = first; i < fields.size(); ++i) {
        auto x = parse_number(fields[i]);
        if (!x) throw fail("'" + std::string(fields[i]) + "' is not a number");
        v.push_back(*x);
      }
    }
    if (v.empty()) throw fail("empty vector");
    rows.push_back(std::move(v));
    labels.push_back(std::move(label));
  }
  if (!any_label) labels.clear();
  return EmbeddingSet(rows, std::move(labels));
}

EmbeddingSet read_embeddings_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open embeddings file '" + path + "'");
  return read_embeddings(f);
}

std::vector<ScoredItem> read_scores(std::istream& in) {
  std::vector<ScoredItem> out;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    return InputError("scores line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = trim(line);
    if (t.empty()) continue;
    ScoredItem item;
    item.id = std::to_string(out.size());
    if (t.front() == '{') {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(t);
      } catch (const nlohmann::json::exception& e) {
        throw fail(e.what());
      }
      if (!j.contains("score") || !j["score"].is_number()) {
        throw fail("object has no numeric \"score\"");
      }
      item.score = j["score"].get<double>();
      if (j.contains("id")) {
        item.id = j["id"].is_string() ? j["id"].get<std::string>()
                                      : j["id"].dump();
      }
    } else {
      auto fields = split(t, ',');
      if (fields.size() == 1) {
        auto x = parse_number(fields[0]);
        if (!x) throw fail("'" + std::string(fields[0]) + "' is not a number");
        item.score = *x;
      } else if (fields.size() == 2) {
        auto x = parse_number(fields[1]);
        if (!x) {
          if (out.empty()) continue;  // header
          throw fail("'" + std::string(fields[1]) + "' is not a number");
        }
        item.id = std::string(trim(fields[0]));
        item.score = *x;
      } else {
        throw fail("expected 'id,score' or a bare score");
      }
    }
    if (!std::isfinite(item.score)) throw fail("score is not finite");
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<ScoredItem> read_scores_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open scores file '" + path + "'");
  return read_scores(f);
}

}  // namespace promptlab::metrics
