#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "othx/features.hpp"
#include "othx/model.hpp"

namespace othx::align {

enum class Mode : uint8_t { Supervised = 0, Unsupervised = 1 };

struct AlignOptions {
  int csls_k = 10;               // CSLS neighborhood size
  int64_t dict_max_rows = 8000;  // rows used when rebuilding the dictionary
  double holdout_fraction = 0.1; // strided holdout when no explicit rows given
  std::vector<int64_t> fit_rows;   // optional explicit fit/score partition
  std::vector<int64_t> score_rows;
  uint64_t seed = 0;
  // adversarial phase
  int adv_batch = 32;
  double adv_lr = 0.1;
  double label_smoothing = 0.1;
  int adv_restarts = 4;          // best restart wins by the CSLS criterion
  int collapse_patience = 5000;  // consecutive >=99.9%-accurate D batches
  bool verbose = false;
};

// Linear map between two feature spaces, constrained orthogonal. Row
// convention: a source row x maps to x * W.
struct AlignmentMap {
  Eigen::MatrixXd W;
  Mode mode = Mode::Supervised;
  int refinement_iters = 0;
  int adversarial_iters = 0;
  std::string source_id, target_id;
  int source_layer = -1, target_layer = -1;
  std::string preprocessing;
};

struct SimilarityReport {
  double mean_cosine = 0.0;           // over held-out pairs, after mapping
  double baseline_mean_cosine = 0.0;  // identity map, no alignment
  int64_t pair_count = 0;
  std::vector<double> per_pair;
};

struct PairDictionary {
  enum class Construction : uint8_t { Given = 0, CslsMutualNn = 1 };
  Construction construction = Construction::Given;
  std::vector<std::pair<int32_t, int32_t>> pairs;  // (source row, target row)
};

Eigen::MatrixXd to_eigen(const nn::FeatureMatrix& fm);

// Rows mean-centered then scaled to unit norm, iterated to convergence so
// the output is simultaneously centered and row-normalized.
Eigen::MatrixXd preprocess(const Eigen::MatrixXd& F);

// Closed-form orthogonal Procrustes over the given pairs: W = U V^T from the
// SVD of the paired cross-covariance F1_paired^T F2_paired.
Eigen::MatrixXd procrustes_fit(const Eigen::MatrixXd& F1,
                               const Eigen::MatrixXd& F2,
                               const PairDictionary& pairs);

// Mutual nearest neighbors under CSLS (cosine corrected by mean similarity
// to each point's csls_k nearest cross-domain neighbors). Rows must be
// preprocessed. Deterministic tie-break by lowest index.
PairDictionary build_dictionary(const Eigen::MatrixXd& F1_mapped,
                                const Eigen::MatrixXd& F2, int csls_k = 10);

// Iterative Procrustes: iteration 1 uses the index pairing (provenance),
// iterations 2..r rebuild the dictionary from the current aligned rows.
// Similarity is scored on held-out rows never used for fitting.
std::pair<AlignmentMap, SimilarityReport> align_supervised(
    const Eigen::MatrixXd& F1, const Eigen::MatrixXd& F2, int r,
    const AlignOptions& opts = {});

// Adversarial initialization (k rounds of discriminator/mapping updates with
// SVD re-orthogonalization) followed by r refinement rounds. No pairing is
// used in fitting; provenance pairing is used for scoring only.
std::pair<AlignmentMap, SimilarityReport> align_unsupervised(
    const Eigen::MatrixXd& F1, const Eigen::MatrixXd& F2, int k, int r,
    const AlignOptions& opts = {});

// FeatureMatrix wrappers; rows must be provenance-aligned.
std::pair<AlignmentMap, SimilarityReport> align_supervised(
    const nn::FeatureMatrix& F1, const nn::FeatureMatrix& F2, int r,
    const AlignOptions& opts = {});
std::pair<AlignmentMap, SimilarityReport> align_unsupervised(
    const nn::FeatureMatrix& F1, const nn::FeatureMatrix& F2, int k, int r,
    const AlignOptions& opts = {});

// Feed-forward origin classifier used by the adversarial phase: input dim h,
// two hidden layers, scalar probability that the input is a mapped source row.
class Discriminator {
 public:
  Discriminator(int in_dim, int hidden, uint64_t seed);

  double predict(const Eigen::VectorXd& x) const;        // in (0, 1)
  double forward_cached(const Eigen::VectorXd& x);       // caches activations
  // dL/dz for the cached sample (z = pre-sigmoid); returns dL/dx and
  // accumulates parameter gradients.
  Eigen::VectorXd backward(double dz);
  void zero_grads();
  void sgd_step(double lr, double scale);

 private:
  int in_dim_, hidden_;
  Eigen::MatrixXd w1_, w2_;
  Eigen::VectorXd b1_, b2_, w3_;
  double b3_ = 0.0;
  Eigen::MatrixXd gw1_, gw2_;
  Eigen::VectorXd gb1_, gb2_, gw3_;
  double gb3_ = 0.0;
  // caches
  Eigen::VectorXd x_, h1_, a1_, h2_, a2_;
  double p_ = 0.5;
};

// Pairwise layer-alignment similarities between two models (decoder layers).
struct HeatmapGrid {
  int rows_a = 0, cols_b = 0;
  Eigen::MatrixXd values;   // NaN marks failed cells
  Mode mode = Mode::Supervised;
  std::vector<std::string> cell_errors;  // "l,m: message"
};

HeatmapGrid layer_similarity_matrix(const nn::Model<float>& model_a,
                                    const nn::Model<float>& model_b,
                                    const oth::Dataset& games, Mode mode,
                                    int r, int k, const AlignOptions& opts = {});

void save_alignment(const AlignmentMap& map, const std::string& path);
AlignmentMap load_alignment(const std::string& path);

}  // namespace othx::align
