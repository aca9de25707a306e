#include "llmvs/kts.hpp"

#include "llmvs/dataset.hpp"
#include "llmvs/error.hpp"

#include <cmath>
#include <limits>

namespace llmvs {

void ShotSegmentation::validate(std::size_t T) const { validate_partition(boundaries, T); }

std::string to_string(KtsKernel k) { return k == KtsKernel::linear ? "linear" : "rbf"; }

KtsKernel kts_kernel_from_string(const std::string& s) {
  if (s == "linear") return KtsKernel::linear;
  if (s == "rbf") return KtsKernel::rbf;
  throw ConfigError("unknown KTS kernel '" + s + "'");
}

namespace {

// scatter(i, j) for the half-open frame range [i, j), stored row-major in the
// upper triangle.
class ScatterTable {
 public:
  ScatterTable(const Matrix& x, KtsKernel kernel, double sigma) : T_(x.rows()) {
    data_.assign(static_cast<std::size_t>((T_ + 1) * (T_ + 1)), 0.0);
    if (kernel == KtsKernel::linear) {
      Matrix prefix = Matrix::Zero(T_ + 1, x.cols());
      Vector sq = Vector::Zero(T_ + 1);
      for (Eigen::Index t = 0; t < T_; ++t) {
        prefix.row(t + 1) = prefix.row(t) + x.row(t);
        sq(t + 1) = sq(t) + x.row(t).squaredNorm();
      }
      for (Eigen::Index i = 0; i < T_; ++i)
        for (Eigen::Index j = i + 1; j <= T_; ++j) {
          const double n = static_cast<double>(j - i);
          const double v = sq(j) - sq(i) - (prefix.row(j) - prefix.row(i)).squaredNorm() / n;
          at(i, j) = std::max(v, 0.0);
        }
    } else {
      if (!(sigma > 0.0)) throw PreconditionError("RBF bandwidth must be > 0");
      // Two-dimensional cumulative Gram matrix.
      Matrix cum = Matrix::Zero(T_ + 1, T_ + 1);
      for (Eigen::Index a = 0; a < T_; ++a)
        for (Eigen::Index b = 0; b < T_; ++b) {
          const double k = std::exp(-(x.row(a) - x.row(b)).squaredNorm() / (2.0 * sigma * sigma));
          cum(a + 1, b + 1) = k + cum(a, b + 1) + cum(a + 1, b) - cum(a, b);
        }
      for (Eigen::Index i = 0; i < T_; ++i)
        for (Eigen::Index j = i + 1; j <= T_; ++j) {
          const double n = static_cast<double>(j - i);
          const double block = cum(j, j) - cum(i, j) - cum(j, i) + cum(i, i);
          at(i, j) = std::max(n - block / n, 0.0);
        }
    }
  }

  double operator()(Eigen::Index i, Eigen::Index j) const {
    return data_[static_cast<std::size_t>(i * (T_ + 1) + j)];
  }

 private:
  double& at(Eigen::Index i, Eigen::Index j) { return data_[static_cast<std::size_t>(i * (T_ + 1) + j)]; }

  Eigen::Index T_;
  std::vector<double> data_;
};

double count_penalty(std::size_t segments, std::size_t T) {
  if (segments <= 1) return 0.0;
  const double c = static_cast<double>(segments - 1);
  const double n = static_cast<double>(T);
  return c / (2.0 * n) * (std::log(n / c) + 1.0);
}

}  // namespace

ShotSegmentation kts_segment(const Matrix& features, std::size_t max_segments, double penalty,
                             KtsKernel kernel, double rbf_sigma) {
  const auto T = static_cast<std::size_t>(features.rows());
  if (T < 1 || features.cols() < 1) throw PreconditionError("KTS needs a non-empty T x d matrix");
  if (max_segments < 1) throw PreconditionError("max_segments must be >= 1");
  if (max_segments > T)
    throw PreconditionError("max_segments " + std::to_string(max_segments) + " exceeds T = " +
                            std::to_string(T));
  if (!features.allFinite()) throw PreconditionError("KTS features must be finite");
  if (!(penalty >= 0.0)) throw PreconditionError("KTS penalty must be >= 0");

  const ScatterTable scatter(features, kernel, rbf_sigma);
  const double inf = std::numeric_limits<double>::infinity();
  const std::size_t K = max_segments;
  // cost[k][j]: best scatter of frames [0, j) in k + 1 segments.
  std::vector<std::vector<double>> cost(K, std::vector<double>(T + 1, inf));
  std::vector<std::vector<std::size_t>> split(K, std::vector<std::size_t>(T + 1, 0));
  for (std::size_t j = 1; j <= T; ++j) cost[0][j] = scatter(0, static_cast<Eigen::Index>(j));
  for (std::size_t k = 1; k < K; ++k)
    for (std::size_t j = k + 1; j <= T; ++j)
      for (std::size_t i = k; i < j; ++i) {
        const double c = cost[k - 1][i] + scatter(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (c < cost[k][j]) {
          cost[k][j] = c;
          split[k][j] = i;
        }
      }

  std::size_t best_k = 0;
  double best = inf;
  for (std::size_t k = 0; k < K; ++k) {
    const double c = cost[k][T] / static_cast<double>(T) + penalty * count_penalty(k + 1, T);
    if (c < best) {
      best = c;
      best_k = k;
    }
  }

  ShotSegmentation seg;
  std::size_t end = T;
  for (std::size_t k = best_k + 1; k-- > 0;) {
    const std::size_t start = k == 0 ? 0 : split[k][end];
    seg.boundaries.insert(seg.boundaries.begin(), Shot{start, end - 1});
    end = start;
  }
  seg.validate(T);
  return seg;
}

ShotSegmentation kts_segment(const Matrix& features, const KtsOptions& o) {
  const auto T = static_cast<std::size_t>(features.rows());
  return kts_segment(features, std::min(o.max_segments, std::max<std::size_t>(T, 1)), o.penalty,
                     o.kernel, o.rbf_sigma);
}

}  // namespace llmvs
