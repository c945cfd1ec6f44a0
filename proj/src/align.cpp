#include "othx/align.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <queue>

#include "json.hpp"
#include "othx/rng.hpp"

namespace othx::align {

namespace {

constexpr double kLeakySlope = 0.2;

Eigen::MatrixXd orthogonal_projection(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

// Projection onto the nearest orthogonal matrix (the polar factor, identical
// to the SVD projection) via Newton-Schulz, which converges quadratically for
// near-orthogonal inputs; one adversarial step barely perturbs W, so two or
// three iterations reach machine precision at a fraction of an SVD's cost.
Eigen::MatrixXd orthogonalize_near(Eigen::MatrixXd w) {
  const int64_t h = w.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(h, h);
  for (int iter = 0; iter < 8; ++iter) {
    const Eigen::MatrixXd gram = w.transpose() * w;
    const double defect = (gram - eye).cwiseAbs().maxCoeff();
    if (defect < 1e-12) return w;
    if (defect > 0.5) return orthogonal_projection(w);  // too far: exact SVD
    w = 0.5 * w * (3.0 * eye - gram);
  }
  return w;
}

// Deterministic strided subsample of `rows` down to at most `cap` entries.
std::vector<int64_t> subsample(const std::vector<int64_t>& rows, int64_t cap) {
  const int64_t n = static_cast<int64_t>(rows.size());
  if (n <= cap) return rows;
  std::vector<int64_t> out;
  out.reserve(static_cast<size_t>(cap));
  const double stride = static_cast<double>(n) / static_cast<double>(cap);
  for (int64_t i = 0; i < cap; ++i)
    out.push_back(rows[static_cast<size_t>(static_cast<int64_t>(i * stride))]);
  return out;
}

struct RowPartition {
  std::vector<int64_t> fit, score;
};

RowPartition partition_rows(int64_t n, const AlignOptions& opts) {
  RowPartition p;
  if (!opts.fit_rows.empty() || !opts.score_rows.empty()) {
    p.fit = opts.fit_rows;
    p.score = opts.score_rows;
  } else {
    const int64_t stride =
        std::max<int64_t>(2, static_cast<int64_t>(std::llround(1.0 / opts.holdout_fraction)));
    for (int64_t i = 0; i < n; ++i)
      (i % stride == stride - 1 ? p.score : p.fit).push_back(i);
  }
  if (p.fit.empty()) throw ConfigError("alignment: empty fit row set");
  if (p.score.empty()) throw ConfigError("alignment: empty scoring row set");
  for (int64_t i : p.fit)
    if (i < 0 || i >= n) throw ConfigError("alignment: fit row index out of range");
  for (int64_t i : p.score)
    if (i < 0 || i >= n) throw ConfigError("alignment: score row index out of range");
  return p;
}

SimilarityReport score_rows(const Eigen::MatrixXd& F1_aligned,
                            const Eigen::MatrixXd& F1_base,
                            const Eigen::MatrixXd& F2,
                            const std::vector<int64_t>& rows) {
  SimilarityReport rep;
  rep.pair_count = static_cast<int64_t>(rows.size());
  rep.per_pair.reserve(rows.size());
  double sum = 0.0, base = 0.0;
  for (int64_t i : rows) {
    // preprocessed rows are unit norm and the map is orthogonal, but divide
    // by the norms anyway so the score is a true cosine
    const auto a = F1_aligned.row(i);
    const auto b = F2.row(i);
    const double c = a.dot(b) / std::max(1e-30, a.norm() * b.norm());
    rep.per_pair.push_back(c);
    sum += c;
    const auto a0 = F1_base.row(i);
    base += a0.dot(b) / std::max(1e-30, a0.norm() * b.norm());
  }
  rep.mean_cosine = sum / static_cast<double>(rep.pair_count);
  rep.baseline_mean_cosine = base / static_cast<double>(rep.pair_count);
  return rep;
}

// Shared refinement loop: BuildDic on the current aligned rows, Procrustes,
// remap. `first_label` names the iteration in error messages.
void refine_iterations(Eigen::MatrixXd& F1_cur, const Eigen::MatrixXd& F2,
                       Eigen::MatrixXd& W_total,
                       const std::vector<int64_t>& fit_rows, int rounds,
                       const AlignOptions& opts, int first_label) {
  if (rounds <= 0) return;
  const auto dict_rows = subsample(fit_rows, opts.dict_max_rows);
  const int64_t m = static_cast<int64_t>(dict_rows.size());
  Eigen::MatrixXd sub1(m, F1_cur.cols()), sub2(m, F2.cols());
  for (int round = 0; round < rounds; ++round) {
    const int label = first_label + round;
    for (int64_t i = 0; i < m; ++i) {
      sub1.row(i) = F1_cur.row(dict_rows[static_cast<size_t>(i)]);
      sub2.row(i) = F2.row(dict_rows[static_cast<size_t>(i)]);
    }
    PairDictionary dict;
    try {
      dict = build_dictionary(sub1, sub2, opts.csls_k);
    } catch (const EmptyDictionary& e) {
      throw EmptyDictionary("iteration " + std::to_string(label) + ": " + e.what());
    }
    // remap dictionary indices to full-matrix rows
    PairDictionary full;
    full.construction = PairDictionary::Construction::CslsMutualNn;
    full.pairs.reserve(dict.pairs.size());
    for (auto [s, t] : dict.pairs)
      full.pairs.emplace_back(static_cast<int32_t>(dict_rows[static_cast<size_t>(s)]),
                              static_cast<int32_t>(dict_rows[static_cast<size_t>(t)]));
    Eigen::MatrixXd w;
    try {
      w = procrustes_fit(F1_cur, F2, full);
    } catch (const RankError& e) {
      throw RankError("iteration " + std::to_string(label) + ": " + e.what());
    }
    F1_cur = F1_cur * w;
    W_total = W_total * w;
  }
}

}  // namespace

Eigen::MatrixXd to_eigen(const nn::FeatureMatrix& fm) {
  Eigen::MatrixXd out(fm.n, fm.h);
  for (int64_t i = 0; i < fm.n; ++i)
    for (int j = 0; j < fm.h; ++j)
      out(i, j) = static_cast<double>(fm.rows[static_cast<size_t>(i) * fm.h + j]);
  return out;
}

Eigen::MatrixXd preprocess(const Eigen::MatrixXd& F) {
  if (F.rows() < 2) throw ConfigError("preprocess: need at least 2 rows");
  Eigen::MatrixXd out = F;
  for (int pass = 0; pass < 64; ++pass) {
    const Eigen::RowVectorXd mean = out.colwise().mean();
    if (pass > 0 && mean.norm() < 1e-10) break;
    out.rowwise() -= mean;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double norm = out.row(i).norm();
      if (norm < 1e-12)
        throw DegenerateRow("row " + std::to_string(i) + " is zero after centering");
      out.row(i) /= norm;
    }
  }
  return out;
}

Eigen::MatrixXd procrustes_fit(const Eigen::MatrixXd& F1,
                               const Eigen::MatrixXd& F2,
                               const PairDictionary& pairs) {
  if (F1.cols() != F2.cols())
    throw ConfigError("procrustes_fit: feature dimensions differ");
  if (pairs.pairs.empty()) throw RankError("procrustes_fit: no pairs");
  const int64_t h = F1.cols();
  if (static_cast<int64_t>(pairs.pairs.size()) < h)
    std::fprintf(stderr,
                 "warning: procrustes with %zu pairs < feature dim %lld\n",
                 pairs.pairs.size(), static_cast<long long>(h));

  const int64_t m = static_cast<int64_t>(pairs.pairs.size());
  Eigen::MatrixXd a(m, h), b(m, h);
  for (int64_t i = 0; i < m; ++i) {
    const auto [s, t] = pairs.pairs[static_cast<size_t>(i)];
    if (s < 0 || s >= F1.rows() || t < 0 || t >= F2.rows())
      throw ConfigError("procrustes_fit: pair index out of range");
    a.row(i) = F1.row(s);
    b.row(i) = F2.row(t);
  }
  const Eigen::MatrixXd cross = a.transpose() * b;
  if (cross.norm() < 1e-12)
    throw RankError("procrustes_fit: degenerate cross-covariance");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

PairDictionary build_dictionary(const Eigen::MatrixXd& F1_mapped,
                                const Eigen::MatrixXd& F2, int csls_k) {
  if (F1_mapped.cols() != F2.cols())
    throw ConfigError("build_dictionary: feature dimensions differ");
  const int64_t n1 = F1_mapped.rows();
  const int64_t n2 = F2.rows();
  const int k1 = static_cast<int>(std::min<int64_t>(csls_k, n2));
  const int k2 = static_cast<int>(std::min<int64_t>(csls_k, n1));

  // cosine similarities in float, in source-row blocks
  using RowMajorF =
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::MatrixXf f1 = F1_mapped.cast<float>();
  const Eigen::MatrixXf f2t = F2.cast<float>().transpose();
  const int64_t block = 512;

  std::vector<double> r1(static_cast<size_t>(n1), 0.0);
  std::vector<double> r2(static_cast<size_t>(n2), 0.0);
  {
    // top-k means per source row, and per-column top-k via small min-heaps
    std::vector<std::priority_queue<float, std::vector<float>, std::greater<>>>
        col_heaps(static_cast<size_t>(n2));
    std::vector<float> row_buf;
    for (int64_t i0 = 0; i0 < n1; i0 += block) {
      const int64_t bs = std::min(block, n1 - i0);
      const RowMajorF s = f1.middleRows(i0, bs) * f2t;
      for (int64_t bi = 0; bi < bs; ++bi) {
        row_buf.assign(s.row(bi).data(), s.row(bi).data() + n2);
        std::partial_sort(row_buf.begin(), row_buf.begin() + k1, row_buf.end(),
                          std::greater<>());
        double sum = 0.0;
        for (int t = 0; t < k1; ++t) sum += row_buf[static_cast<size_t>(t)];
        r1[static_cast<size_t>(i0 + bi)] = sum / k1;
        for (int64_t j = 0; j < n2; ++j) {
          auto& heap = col_heaps[static_cast<size_t>(j)];
          const float v = s(bi, j);
          if (static_cast<int>(heap.size()) < k2)
            heap.push(v);
          else if (v > heap.top()) {
            heap.pop();
            heap.push(v);
          }
        }
      }
    }
    for (int64_t j = 0; j < n2; ++j) {
      auto& heap = col_heaps[static_cast<size_t>(j)];
      double sum = 0.0;
      const int cnt = static_cast<int>(heap.size());
      while (!heap.empty()) {
        sum += heap.top();
        heap.pop();
      }
      r2[static_cast<size_t>(j)] = sum / std::max(1, cnt);
    }
  }

  // best target per source and best source per target under CSLS
  std::vector<int64_t> best_t(static_cast<size_t>(n1), -1);
  std::vector<int64_t> best_s(static_cast<size_t>(n2), -1);
  std::vector<double> best_t_val(static_cast<size_t>(n1),
                                 -std::numeric_limits<double>::infinity());
  std::vector<double> best_s_val(static_cast<size_t>(n2),
                                 -std::numeric_limits<double>::infinity());
  for (int64_t i0 = 0; i0 < n1; i0 += block) {
    const int64_t bs = std::min(block, n1 - i0);
    const RowMajorF s = f1.middleRows(i0, bs) * f2t;
    for (int64_t bi = 0; bi < bs; ++bi) {
      const int64_t i = i0 + bi;
      for (int64_t j = 0; j < n2; ++j) {
        const double csls = 2.0 * static_cast<double>(s(bi, j)) -
                            r1[static_cast<size_t>(i)] - r2[static_cast<size_t>(j)];
        if (csls > best_t_val[static_cast<size_t>(i)]) {
          best_t_val[static_cast<size_t>(i)] = csls;
          best_t[static_cast<size_t>(i)] = j;
        }
        if (csls > best_s_val[static_cast<size_t>(j)]) {
          best_s_val[static_cast<size_t>(j)] = csls;
          best_s[static_cast<size_t>(j)] = i;
        }
      }
    }
  }

  PairDictionary dict;
  dict.construction = PairDictionary::Construction::CslsMutualNn;
  for (int64_t i = 0; i < n1; ++i) {
    const int64_t j = best_t[static_cast<size_t>(i)];
    if (j >= 0 && best_s[static_cast<size_t>(j)] == i)
      dict.pairs.emplace_back(static_cast<int32_t>(i), static_cast<int32_t>(j));
  }
  if (dict.pairs.empty())
    throw EmptyDictionary("no mutual nearest-neighbor pairs (alignment collapse)");
  return dict;
}

std::pair<AlignmentMap, SimilarityReport> align_supervised(
    const Eigen::MatrixXd& F1, const Eigen::MatrixXd& F2, int r,
    const AlignOptions& opts) {
  if (r < 1) throw ConfigError("align_supervised: r must be >= 1");
  if (F1.rows() != F2.rows())
    throw ConfigError("align_supervised: row counts differ");
  const Eigen::MatrixXd F1p = preprocess(F1);
  const Eigen::MatrixXd F2p = preprocess(F2);
  const auto part = partition_rows(F1p.rows(), opts);

  // iteration 1: the given (provenance) pairing over fit rows
  PairDictionary given;
  given.construction = PairDictionary::Construction::Given;
  given.pairs.reserve(part.fit.size());
  for (int64_t i : part.fit)
    given.pairs.emplace_back(static_cast<int32_t>(i), static_cast<int32_t>(i));

  Eigen::MatrixXd w_total;
  Eigen::MatrixXd f1_cur;
  try {
    w_total = procrustes_fit(F1p, F2p, given);
  } catch (const RankError& e) {
    throw RankError(std::string("iteration 1: ") + e.what());
  }
  f1_cur = F1p * w_total;
  refine_iterations(f1_cur, F2p, w_total, part.fit, r - 1, opts, 2);

  AlignmentMap map;
  map.W = w_total;
  map.mode = Mode::Supervised;
  map.refinement_iters = r;
  map.adversarial_iters = 0;
  map.preprocessing = "center_unit";
  return {std::move(map), score_rows(f1_cur, F1p, F2p, part.score)};
}

// ---- discriminator -----------------------------------------------------------

Discriminator::Discriminator(int in_dim, int hidden, uint64_t seed)
    : in_dim_(in_dim), hidden_(hidden) {
  SplitMix64 rng(seed);
  const double s1 = std::sqrt(2.0 / in_dim);
  const double s2 = std::sqrt(2.0 / hidden);
  w1_.resize(hidden, in_dim);
  w2_.resize(hidden, hidden);
  w3_.resize(hidden);
  for (auto& v : w1_.reshaped()) v = rng.normal() * s1;
  for (auto& v : w2_.reshaped()) v = rng.normal() * s2;
  for (auto& v : w3_.reshaped()) v = rng.normal() * s2;
  b1_ = Eigen::VectorXd::Zero(hidden);
  b2_ = Eigen::VectorXd::Zero(hidden);
  b3_ = 0.0;
  zero_grads();
}

void Discriminator::zero_grads() {
  gw1_ = Eigen::MatrixXd::Zero(hidden_, in_dim_);
  gw2_ = Eigen::MatrixXd::Zero(hidden_, hidden_);
  gw3_ = Eigen::VectorXd::Zero(hidden_);
  gb1_ = Eigen::VectorXd::Zero(hidden_);
  gb2_ = Eigen::VectorXd::Zero(hidden_);
  gb3_ = 0.0;
}

double Discriminator::forward_cached(const Eigen::VectorXd& x) {
  x_ = x;
  h1_ = w1_ * x + b1_;
  a1_ = h1_.unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
  h2_ = w2_ * a1_ + b2_;
  a2_ = h2_.unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
  const double z = w3_.dot(a2_) + b3_;
  p_ = 1.0 / (1.0 + std::exp(-z));
  return p_;
}

double Discriminator::predict(const Eigen::VectorXd& x) const {
  Eigen::VectorXd a1 =
      (w1_ * x + b1_).unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
  Eigen::VectorXd a2 =
      (w2_ * a1 + b2_).unaryExpr([](double v) { return v > 0 ? v : kLeakySlope * v; });
  const double z = w3_.dot(a2) + b3_;
  return 1.0 / (1.0 + std::exp(-z));
}

Eigen::VectorXd Discriminator::backward(double dz) {
  gw3_ += dz * a2_;
  gb3_ += dz;
  Eigen::VectorXd da2 = dz * w3_;
  Eigen::VectorXd dh2 = da2.array() *
                        h2_.unaryExpr([](double v) { return v > 0 ? 1.0 : kLeakySlope; }).array();
  gw2_ += dh2 * a1_.transpose();
  gb2_ += dh2;
  Eigen::VectorXd da1 = w2_.transpose() * dh2;
  Eigen::VectorXd dh1 = da1.array() *
                        h1_.unaryExpr([](double v) { return v > 0 ? 1.0 : kLeakySlope; }).array();
  gw1_ += dh1 * x_.transpose();
  gb1_ += dh1;
  return w1_.transpose() * dh1;
}

void Discriminator::sgd_step(double lr, double scale) {
  const double f = lr * scale;
  w1_ -= f * gw1_;
  b1_ -= f * gb1_;
  w2_ -= f * gw2_;
  b2_ -= f * gb2_;
  w3_ -= f * gw3_;
  b3_ -= f * gb3_;
}

std::pair<AlignmentMap, SimilarityReport> align_unsupervised(
    const Eigen::MatrixXd& F1, const Eigen::MatrixXd& F2, int k, int r,
    const AlignOptions& opts) {
  if (k < 1) throw ConfigError("align_unsupervised: k must be >= 1");
  if (r < 0) throw ConfigError("align_unsupervised: r must be >= 0");
  if (F1.rows() != F2.rows())
    throw ConfigError("align_unsupervised: row counts differ");
  const int64_t h = F1.cols();
  const Eigen::MatrixXd F1p = preprocess(F1);
  const Eigen::MatrixXd F2p = preprocess(F2);
  const auto part = partition_rows(F1p.rows(), opts);
  const double smooth = opts.label_smoothing;
  const int64_t n_fit = static_cast<int64_t>(part.fit.size());

  // Unsupervised model selection (as in the cited method): score a candidate
  // map by the mean cosine of its CSLS mutual-NN pairs over a fixed row
  // subset, counting unmatched rows as zero. Coverage matters: a permuted
  // cluster assignment can score high on its few mutual pairs but leaves
  // most rows unmatched.
  const auto criterion_rows =
      subsample(part.fit, std::min<int64_t>(1500, opts.dict_max_rows));
  Eigen::MatrixXd crit1(static_cast<int64_t>(criterion_rows.size()), h);
  Eigen::MatrixXd crit2(static_cast<int64_t>(criterion_rows.size()), h);
  for (size_t i = 0; i < criterion_rows.size(); ++i) {
    crit1.row(static_cast<int64_t>(i)) = F1p.row(criterion_rows[i]);
    crit2.row(static_cast<int64_t>(i)) = F2p.row(criterion_rows[i]);
  }
  const auto csls_criterion = [&](const Eigen::MatrixXd& map) {
    const Eigen::MatrixXd mapped = crit1 * map;
    PairDictionary dict;
    try {
      dict = build_dictionary(mapped, crit2, opts.csls_k);
    } catch (const EmptyDictionary&) {
      return -2.0;
    }
    double sum = 0.0;
    for (auto [s, t] : dict.pairs) sum += mapped.row(s).dot(crit2.row(t));
    return sum / static_cast<double>(crit1.rows());
  };

  // One adversarial phase: alternate discriminator and mapping updates,
  // re-orthogonalizing W after every step; returns the best W seen under
  // the unsupervised criterion.
  const auto run_adversarial = [&](uint64_t restart_seed) {
    SplitMix64 rng(restart_seed ^ 0xad7e0001u);
    Eigen::MatrixXd gauss(h, h);
    for (auto& v : gauss.reshaped()) v = rng.normal();
    Eigen::MatrixXd w = orthogonal_projection(gauss);
    Discriminator disc(static_cast<int>(h), 128, restart_seed ^ 0xd15c0000u);

    auto draw_fit_row = [&](const Eigen::MatrixXd& m) {
      return m.row(
          part.fit[static_cast<size_t>(rng.below(static_cast<uint64_t>(n_fit)))]);
    };

    const int check_every = std::max(250, k / 25);
    Eigen::MatrixXd best_w = w;
    double best_crit = -3.0;
    int collapse_run = 0;
    Eigen::MatrixXd dw(h, h);
    for (int it = 1; it <= k; ++it) {
      const double lr = std::max(opts.adv_lr / 20.0,
                                 opts.adv_lr * std::pow(0.95, (25.0 * (it - 1)) / k));

      // discriminator step: mapped source rows vs target rows, 1:1
      disc.zero_grads();
      int correct = 0;
      for (int b = 0; b < opts.adv_batch; ++b) {
        const Eigen::VectorXd xs = (draw_fit_row(F1p) * w).transpose();
        const double ps = disc.forward_cached(xs);
        disc.backward(ps - (1.0 - smooth));  // mapped source labeled 1 (smoothed)
        correct += ps > 0.5;
        const Eigen::VectorXd xt = draw_fit_row(F2p).transpose();
        const double pt = disc.forward_cached(xt);
        disc.backward(pt - smooth);          // target labeled 0 (smoothed)
        correct += pt < 0.5;
      }
      disc.sgd_step(lr, 1.0 / (2.0 * opts.adv_batch));
      const double acc = static_cast<double>(correct) / (2.0 * opts.adv_batch);
      collapse_run = acc >= 0.999 ? collapse_run + 1 : 0;
      if (collapse_run >= opts.collapse_patience)
        throw CollapseError("discriminator stayed at >= 99.9% accuracy for " +
                            std::to_string(opts.collapse_patience) + " steps");

      // mapping step: make mapped source rows look like targets
      disc.zero_grads();
      dw.setZero();
      for (int b = 0; b < opts.adv_batch; ++b) {
        const Eigen::RowVectorXd x = draw_fit_row(F1p);
        const Eigen::VectorXd xw = (x * w).transpose();
        const double p = disc.forward_cached(xw);
        const Eigen::VectorXd dx = disc.backward(p - smooth);  // fool: label 0
        dw += x.transpose() * dx.transpose();
      }
      w -= (lr / opts.adv_batch) * dw;
      w = orthogonalize_near(w);  // keep W in the orthogonal group

      if (it % check_every == 0 || it == k) {
        const double crit = csls_criterion(w);
        if (crit > best_crit) {
          best_crit = crit;
          best_w = w;
        }
        if (opts.verbose)
          std::fprintf(stderr,
                       "[adv] iter=%d acc=%.3f lr=%.4f crit=%.4f best=%.4f\n", it,
                       acc, lr, crit, best_crit);
      }
    }
    return std::make_pair(best_w, best_crit);
  };

  // Several adversarial restarts; the unsupervised criterion picks the winner.
  Eigen::MatrixXd w;
  double w_crit = -4.0;
  for (int restart = 0; restart < std::max(1, opts.adv_restarts); ++restart) {
    const auto [cand, crit] =
        run_adversarial(opts.seed + 0x9e3779b9ull * static_cast<uint64_t>(restart));
    if (opts.verbose)
      std::fprintf(stderr, "[adv] restart=%d crit=%.4f\n", restart, crit);
    if (crit > w_crit) {
      w_crit = crit;
      w = cand;
    }
  }

  Eigen::MatrixXd f1_cur = F1p * w;
  Eigen::MatrixXd w_total = w;
  refine_iterations(f1_cur, F2p, w_total, part.fit, r, opts, 1);

  AlignmentMap map;
  map.W = w_total;
  map.mode = Mode::Unsupervised;
  map.refinement_iters = r;
  map.adversarial_iters = k;
  map.preprocessing = "center_unit";
  return {std::move(map), score_rows(f1_cur, F1p, F2p, part.score)};
}

// ---- FeatureMatrix wrappers ---------------------------------------------------

namespace {
void check_provenance(const nn::FeatureMatrix& a, const nn::FeatureMatrix& b) {
  if (a.n != b.n || a.h != b.h)
    throw ConfigError("feature matrices have different shapes");
  if (a.prov != b.prov)
    throw ConfigError("feature matrices are not provenance-aligned");
}
}  // namespace

std::pair<AlignmentMap, SimilarityReport> align_supervised(
    const nn::FeatureMatrix& F1, const nn::FeatureMatrix& F2, int r,
    const AlignOptions& opts) {
  check_provenance(F1, F2);
  auto out = align_supervised(to_eigen(F1), to_eigen(F2), r, opts);
  out.first.source_id = F1.model_id;
  out.first.target_id = F2.model_id;
  out.first.source_layer = F1.layer;
  out.first.target_layer = F2.layer;
  return out;
}

std::pair<AlignmentMap, SimilarityReport> align_unsupervised(
    const nn::FeatureMatrix& F1, const nn::FeatureMatrix& F2, int k, int r,
    const AlignOptions& opts) {
  check_provenance(F1, F2);
  auto out = align_unsupervised(to_eigen(F1), to_eigen(F2), k, r, opts);
  out.first.source_id = F1.model_id;
  out.first.target_id = F2.model_id;
  out.first.source_layer = F1.layer;
  out.first.target_layer = F2.layer;
  return out;
}

HeatmapGrid layer_similarity_matrix(const nn::Model<float>& model_a,
                                    const nn::Model<float>& model_b,
                                    const oth::Dataset& games, Mode mode,
                                    int r, int k, const AlignOptions& opts) {
  const int la = model_a.config().layers;
  const int lb = model_b.config().layers;
  if (la < 2 || lb < 2)
    throw ConfigError("layer_similarity_matrix: both models need >= 2 decoder layers");

  std::vector<Eigen::MatrixXd> feats_a, feats_b;
  feats_a.reserve(la);
  feats_b.reserve(lb);
  for (int l = 0; l < la; ++l)
    feats_a.push_back(to_eigen(nn::extract_features(model_a, games, l)));
  for (int l = 0; l < lb; ++l)
    feats_b.push_back(to_eigen(nn::extract_features(model_b, games, l)));

  HeatmapGrid grid;
  grid.rows_a = la;
  grid.cols_b = lb;
  grid.mode = mode;
  grid.values = Eigen::MatrixXd::Constant(
      la, lb, std::numeric_limits<double>::quiet_NaN());
  for (int l = 0; l < la; ++l) {
    for (int m = 0; m < lb; ++m) {
      try {
        const auto [map, rep] =
            mode == Mode::Supervised
                ? align_supervised(feats_a[l], feats_b[m], r, opts)
                : align_unsupervised(feats_a[l], feats_b[m], k, r, opts);
        (void)map;
        grid.values(l, m) = rep.mean_cosine;
      } catch (const std::exception& e) {
        grid.cell_errors.push_back(std::to_string(l) + "," + std::to_string(m) +
                                   ": " + e.what());
      }
    }
  }
  return grid;
}

// ---- alignment map container ---------------------------------------------------

namespace {
constexpr char kAlignMagic[8] = {'O', 'T', 'H', 'X', 'A', 'L', 'G', 'N'};
}

void save_alignment(const AlignmentMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(kAlignMagic, sizeof(kAlignMagic));
  const uint32_t h = static_cast<uint32_t>(map.W.rows());
  const uint8_t mode = static_cast<uint8_t>(map.mode);
  const uint32_t r = static_cast<uint32_t>(map.refinement_iters);
  const uint32_t k = static_cast<uint32_t>(map.adversarial_iters);
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  out.write(reinterpret_cast<const char*>(&mode), sizeof(mode));
  out.write(reinterpret_cast<const char*>(&r), sizeof(r));
  out.write(reinterpret_cast<const char*>(&k), sizeof(k));
  nlohmann::json prov = {{"source_id", map.source_id},
                         {"target_id", map.target_id},
                         {"source_layer", map.source_layer},
                         {"target_layer", map.target_layer},
                         {"preprocessing", map.preprocessing}};
  const std::string js = prov.dump();
  const uint32_t jlen = static_cast<uint32_t>(js.size());
  out.write(reinterpret_cast<const char*>(&jlen), sizeof(jlen));
  out.write(js.data(), jlen);
  for (Eigen::Index i = 0; i < map.W.rows(); ++i)
    for (Eigen::Index j = 0; j < map.W.cols(); ++j) {
      const float v = static_cast<float>(map.W(i, j));
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  if (!out) throw IoError("write failed: " + path);
}

AlignmentMap load_alignment(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::string_view(magic, 8) != std::string_view(kAlignMagic, 8))
    throw IoError("not an alignment file: " + path);
  uint32_t h = 0, r = 0, k = 0;
  uint8_t mode = 0;
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  in.read(reinterpret_cast<char*>(&mode), sizeof(mode));
  in.read(reinterpret_cast<char*>(&r), sizeof(r));
  in.read(reinterpret_cast<char*>(&k), sizeof(k));
  uint32_t jlen = 0;
  in.read(reinterpret_cast<char*>(&jlen), sizeof(jlen));
  std::string js(jlen, '\0');
  in.read(js.data(), jlen);
  const auto prov = nlohmann::json::parse(js);
  AlignmentMap map;
  map.mode = static_cast<Mode>(mode);
  map.refinement_iters = static_cast<int>(r);
  map.adversarial_iters = static_cast<int>(k);
  map.source_id = prov.at("source_id").get<std::string>();
  map.target_id = prov.at("target_id").get<std::string>();
  map.source_layer = prov.at("source_layer").get<int>();
  map.target_layer = prov.at("target_layer").get<int>();
  map.preprocessing = prov.at("preprocessing").get<std::string>();
  map.W.resize(h, h);
  for (uint32_t i = 0; i < h; ++i)
    for (uint32_t j = 0; j < h; ++j) {
      float v = 0.0f;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      map.W(i, j) = v;
    }
  if (!in) throw IoError("truncated alignment file: " + path);
  return map;
}

}  // namespace othx::align
