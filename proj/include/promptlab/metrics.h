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

#ifndef PROMPTLAB_METRICS_H_
#define PROMPTLAB_METRICS_H_

#include <cstddef>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "promptlab/http_client.h"

namespace promptlab::metrics {

// Row-major set of n vectors of dimension d. Entries are finite and every row
// has the same dimension; labels are either empty or one per row.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  // Throws InputError on ragged rows, d == 0, non-finite entries or a label
  // count that does not match.
  explicit EmbeddingSet(const std::vector<std::vector<double>>& rows,
                        std::vector<std::string> labels = {});
  explicit EmbeddingSet(Eigen::MatrixXd rows,
                        std::vector<std::string> labels = {});

  std::size_t size() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data_.cols()); }
  bool empty() const { return data_.rows() == 0; }
  const Eigen::MatrixXd& matrix() const { return data_; }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  void validate() const;

  Eigen::MatrixXd data_;
  std::vector<std::string> labels_;
};

// K_ij = <v_i, v_j> / (|v_i| |v_j|). Exactly symmetric with a unit diagonal.
// Throws InputError naming the first zero vector.
Eigen::MatrixXd cosine_similarity_matrix(const EmbeddingSet& e);

// exp of the entropy of the eigenvalues of K/n. Throws InputError for an
// empty set and NumericalError if the eigenvalues drift from summing to 1.
double vendi_score(const EmbeddingSet& e);

inline constexpr double kVendiClip = 1e-10;
inline constexpr double kVendiDriftTolerance = 1e-6;

// Squared 2-Wasserstein distance between Gaussians fitted to each set, with
// unbiased covariances. Needs at least two vectors per set.
double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b);

inline constexpr double kFrechetEpsilon = 1e-6;

struct Histogram {
  std::vector<double> edges;  // bins + 1 ascending edges
  std::vector<std::size_t> counts;
};

struct ScoreSummary {
  std::size_t count = 0;
  double mean = 0;
  double std = 0;  // sample standard deviation, 0 for a single score
  double min = 0;
  double q1 = 0;
  double median = 0;
  double q3 = 0;
  double max = 0;
  Histogram histogram;
};

// Quantiles interpolate linearly between order statistics at (n-1)p.
// Throws InputError on empty or non-finite input.
ScoreSummary summarize(std::span<const double> scores, std::size_t bins = 10);

// p in [0, 1]; `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

// --- external scorers -------------------------------------------------------

// A missing score carries the reason reported for that item.
struct ScoreOutcome {
  std::optional<double> score;
  std::string reason;
};

class ScorerClient {
 public:
  virtual ~ScorerClient() = default;
  // Returns exactly one outcome per ref, in order. Throws BackendError when
  // the whole batch failed.
  virtual std::vector<ScoreOutcome> score_batch(
      std::span<const std::string> refs) = 0;
};

// POSTs {"images": [...]} and expects {"scores": [number|null, ...]} with an
// optional parallel "errors" array of reasons.
class HttpScorerClient : public ScorerClient {
 public:
  explicit HttpScorerClient(HttpOptions options) : client_(std::move(options)) {}

  std::vector<ScoreOutcome> score_batch(
      std::span<const std::string> refs) override;

 private:
  JsonHttpClient client_;
};

// Splits refs into batches of at most batch_size and concatenates results.
std::vector<ScoreOutcome> score_images(ScorerClient& client,
                                       std::span<const std::string> refs,
                                       std::size_t batch_size = 16);

// --- file formats -----------------------------------------------------------

// Reads either CSV (one vector per row, optional leading non-numeric label
// column) or line-delimited JSON (arrays, or objects with "vector" or
// "embedding" plus optional "id"). Blank lines are skipped.
EmbeddingSet read_embeddings(std::istream& in);
EmbeddingSet read_embeddings_file(const std::string& path);

struct ScoredItem {
  std::string id;
  double score = 0;
};

// Reads "id,score" or bare-number lines, or JSON objects {"id", "score"}.
// Ids default to the zero-based line index among data lines.
std::vector<ScoredItem> read_scores(std::istream& in);
std::vector<ScoredItem> read_scores_file(const std::string& path);

}  // namespace promptlab::metrics

#endif  // PROMPTLAB_METRICS_H_
