#include "llmvs/aggregator.hpp"

#include "llmvs/dataset.hpp"
#include "llmvs/rng.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

namespace llmvs {

std::string to_string(PositionalEncoding p) {
  return p == PositionalEncoding::none ? "none" : "sinusoidal";
}
std::string to_string(HeadKind h) { return h == HeadKind::attention ? "attention" : "mlp-only"; }

PositionalEncoding positional_encoding_from_string(const std::string& s) {
  if (s == "none") return PositionalEncoding::none;
  if (s == "sinusoidal") return PositionalEncoding::sinusoidal;
  throw ConfigError("unknown positional encoding '" + s + "'");
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "attention") return HeadKind::attention;
  if (s == "mlp-only") return HeadKind::mlp_only;
  throw ConfigError("unknown head kind '" + s + "'");
}

void AggregatorConfig::validate() const {
  if (projection_width < 1) throw ConfigError("projection width must be >= 1");
  if (num_blocks < 0) throw ConfigError("number of blocks must be >= 0");
  if (num_heads < 1) throw ConfigError("number of heads must be >= 1");
  if (projection_width % num_heads != 0)
    throw ConfigError(fmt::format("num_heads={} must divide projection width {}", num_heads,
                                  projection_width));
  if (ffn_width < 0) throw ConfigError("ffn width must be >= 0");
  if (!use_query && !use_answer) throw ConfigError("at least one of use_query/use_answer must be set");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  if (!(layer_norm_epsilon > 0.0)) throw ConfigError("layer-norm epsilon must be > 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

template <typename Params, typename Out>
void collect(Params& p, Out& out) {
  auto add = [&out](std::string name, auto& m) {
    if (m.size() > 0) out.emplace_back(std::move(name), &m);
  };
  add("pool.w1", p.pool_w1);
  add("pool.b1", p.pool_b1);
  add("pool.w2", p.pool_w2);
  add("pool.b2", p.pool_b2);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string k = "block" + std::to_string(i) + ".";
    add(k + "ln1.gain", b.ln1_gain);
    add(k + "ln1.bias", b.ln1_bias);
    add(k + "attn.wq", b.wq);
    add(k + "attn.bq", b.bq);
    add(k + "attn.wk", b.wk);
    add(k + "attn.bk", b.bk);
    add(k + "attn.wv", b.wv);
    add(k + "attn.bv", b.bv);
    add(k + "attn.wo", b.wo);
    add(k + "attn.bo", b.bo);
    add(k + "ln2.gain", b.ln2_gain);
    add(k + "ln2.bias", b.ln2_bias);
    add(k + "ff.w1", b.ff_w1);
    add(k + "ff.b1", b.ff_b1);
    add(k + "ff.w2", b.ff_w2);
    add(k + "ff.b2", b.ff_b2);
  }
  add("final.gain", p.final_gain);
  add("final.bias", p.final_bias);
  add("head.w", p.head_w);
  add("head.b", p.head_b);
}

}  // namespace

std::vector<std::pair<std::string, Matrix*>> AggregatorParams::named_tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  collect(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> AggregatorParams::named_tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  collect(*this, out);
  return out;
}

std::size_t AggregatorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, m] : named_tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

bool AggregatorParams::all_finite() const {
  for (const auto& [name, m] : named_tensors())
    if (!m->allFinite()) return false;
  return true;
}

AggregatorParams AggregatorParams::zeros_like() const {
  AggregatorParams z = *this;
  for (auto& [name, m] : z.named_tensors()) m->setZero();
  return z;
}

namespace {

Matrix xavier(Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Matrix m(fan_in, fan_out);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

Matrix zeros(Eigen::Index n) { return Matrix::Zero(1, n); }
Matrix ones(Eigen::Index n) { return Matrix::Ones(1, n); }

}  // namespace

AggregatorParams init_params(int input_width, const AggregatorConfig& config, std::uint64_t seed) {
  config.validate();
  if (input_width < 1) throw ShapeError("input width must be >= 1");
  Rng rng(seed);
  const Eigen::Index D = input_width;
  const Eigen::Index M = config.projection_width;
  const Eigen::Index F = config.feed_forward_width();
  AggregatorParams p;
  p.input_width = input_width;
  p.pool_w1 = xavier(rng, D, M);
  p.pool_b1 = zeros(M);
  if (config.pool_hidden_layer) {
    p.pool_w2 = xavier(rng, M, M);
    p.pool_b2 = zeros(M);
  }
  if (config.uses_attention()) {
    for (int b = 0; b < config.num_blocks; ++b) {
      AttentionBlockParams blk;
      blk.ln1_gain = ones(M);
      blk.ln1_bias = zeros(M);
      blk.wq = xavier(rng, M, M);
      blk.bq = zeros(M);
      blk.wk = xavier(rng, M, M);
      blk.bk = zeros(M);
      blk.wv = xavier(rng, M, M);
      blk.bv = zeros(M);
      blk.wo = xavier(rng, M, M);
      blk.bo = zeros(M);
      blk.ln2_gain = ones(M);
      blk.ln2_bias = zeros(M);
      blk.ff_w1 = xavier(rng, M, F);
      blk.ff_b1 = zeros(F);
      blk.ff_w2 = xavier(rng, F, M);
      blk.ff_b2 = zeros(M);
      p.blocks.push_back(std::move(blk));
    }
    p.final_gain = ones(M);
    p.final_bias = zeros(M);
  }
  p.head_w = xavier(rng, M, 1);
  p.head_b = zeros(1);
  return p;
}

// ---------------------------------------------------------------------------
// Pooling

RowVector max_pool(const EmbeddingPair& pair, const AggregatorConfig& config) {
  if (!config.use_query && !config.use_answer)
    throw ShapeError("max_pool needs at least one of query/answer");
  if (config.use_query && pair.q.rows() < 1) throw ShapeError("query embedding has no rows");
  if (config.use_answer && pair.a.rows() < 1) throw ShapeError("answer embedding has no rows");
  if (pair.q.rows() > 0 && pair.a.rows() > 0 && pair.q.cols() != pair.a.cols())
    throw ShapeError("query and answer widths differ");
  RowVector out;
  if (config.use_query) out = pair.q.colwise().maxCoeff();
  if (config.use_answer) {
    const RowVector a = pair.a.colwise().maxCoeff();
    out = config.use_query ? RowVector(out.cwiseMax(a)) : a;
  }
  return out;
}

Matrix max_pool_video(std::span<const EmbeddingPair> pairs, const AggregatorConfig& config) {
  if (pairs.empty()) throw ShapeError("video has no embedding pairs");
  const Eigen::Index D = pairs.front().width();
  Matrix out(static_cast<Eigen::Index>(pairs.size()), D);
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    if (pairs[t].width() != D) throw ShapeError("inconsistent hidden width across frames");
    out.row(static_cast<Eigen::Index>(t)) = max_pool(pairs[t], config);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_grad(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix out = x * w;
  out.rowwise() += b.row(0);
  return out;
}

struct LayerNormCache {
  Matrix xhat;
  Vector rstd;
};

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double eps,
                  LayerNormCache& cache) {
  const Eigen::Index n = x.cols();
  cache.xhat.resize(x.rows(), n);
  cache.rstd.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().sum() / static_cast<double>(n);
    const double rstd = 1.0 / std::sqrt(var + eps);
    cache.rstd(r) = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mean) * rstd;
  }
  Matrix y = cache.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain, const LayerNormCache& cache,
                           Matrix& dgain, Matrix& dbias) {
  dgain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).mean();
    const double m2 = dxhat.row(r).cwiseProduct(cache.xhat.row(r)).mean();
    dx.row(r) = cache.rstd(r) * (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2);
  }
  return dx;
}

void softmax_rows(Matrix& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

struct BlockCache {
  LayerNormCache ln1, ln2;
  Matrix u1, q, k, v, o;
  std::vector<Matrix> attn;
  Matrix u2, g, h;
};

struct ForwardCache {
  Matrix z1, h1;  // pool MLP hidden (pre / post activation) when present
  std::vector<BlockCache> blocks;
  LayerNormCache final_ln;
  Matrix y;  // input to the scalar head
  Vector scores;
};

Matrix project_cached(const Matrix& pooled, const AggregatorParams& p, const AggregatorConfig& cfg,
                      ForwardCache* cache) {
  if (pooled.cols() != p.input_width)
    throw ShapeError(fmt::format("embedding width {} does not match model input width {}",
                                 pooled.cols(), p.input_width));
  Matrix z1 = affine(pooled, p.pool_w1, p.pool_b1);
  if (!cfg.pool_hidden_layer) return z1;
  Matrix h1 = z1.unaryExpr(&gelu);
  Matrix x0 = affine(h1, p.pool_w2, p.pool_b2);
  if (cache) {
    cache->z1 = std::move(z1);
    cache->h1 = std::move(h1);
  }
  return x0;
}

Vector aggregate_cached(Matrix x, const AggregatorParams& p, const AggregatorConfig& cfg,
                        ForwardCache* cache) {
  const Eigen::Index T = x.rows();
  const Eigen::Index M = cfg.projection_width;
  if (T < 1) throw ShapeError("forward needs at least one frame");
  if (x.cols() != M) throw ShapeError("projected width does not match configuration");
  Matrix y;
  if (cfg.uses_attention()) {
    if (cfg.positional_encoding == PositionalEncoding::sinusoidal) x += sinusoidal_encoding(T, M);
    const Eigen::Index H = cfg.num_heads;
    const Eigen::Index dh = M / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (const auto& blk : p.blocks) {
      BlockCache bc;
      bc.u1 = layer_norm(x, blk.ln1_gain, blk.ln1_bias, cfg.layer_norm_epsilon, bc.ln1);
      bc.q = affine(bc.u1, blk.wq, blk.bq);
      bc.k = affine(bc.u1, blk.wk, blk.bk);
      bc.v = affine(bc.u1, blk.wv, blk.bv);
      bc.o.resize(T, M);
      for (Eigen::Index h = 0; h < H; ++h) {
        Matrix s = bc.q.middleCols(h * dh, dh) * bc.k.middleCols(h * dh, dh).transpose() * scale;
        softmax_rows(s);
        bc.o.middleCols(h * dh, dh).noalias() = s * bc.v.middleCols(h * dh, dh);
        bc.attn.push_back(std::move(s));
      }
      x += affine(bc.o, blk.wo, blk.bo);
      bc.u2 = layer_norm(x, blk.ln2_gain, blk.ln2_bias, cfg.layer_norm_epsilon, bc.ln2);
      bc.g = affine(bc.u2, blk.ff_w1, blk.ff_b1);
      bc.h = bc.g.unaryExpr(&gelu);
      x += affine(bc.h, blk.ff_w2, blk.ff_b2);
      if (cache) cache->blocks.push_back(std::move(bc));
    }
    LayerNormCache fl;
    y = layer_norm(x, p.final_gain, p.final_bias, cfg.layer_norm_epsilon, fl);
    if (cache) cache->final_ln = std::move(fl);
  } else {
    y = std::move(x);
  }
  Vector scores = (y * p.head_w).col(0).array() + p.head_b(0, 0);
  if (!scores.allFinite()) throw DivergenceError("non-finite score in forward pass");
  if (cache) {
    cache->y = std::move(y);
    cache->scores = scores;
  }
  return scores;
}

ScoreSeries to_series(const Vector& v) {
  return ScoreSeries{std::vector<double>(v.data(), v.data() + v.size()), false};
}

// Accumulates d(loss)/d(params) for one video into `g`, scaled by `weight`.
double backward_one(const TrainingExample& ex, const AggregatorParams& p, const AggregatorConfig& cfg,
                    double weight, AggregatorParams& g) {
  const Eigen::Index T = ex.pooled.rows();
  if (static_cast<Eigen::Index>(ex.target.size()) != T)
    throw ShapeError("target length does not match frame count");
  ForwardCache c;
  const Matrix x0 = project_cached(ex.pooled, p, cfg, &c);
  const Vector s = aggregate_cached(x0, p, cfg, &c);
  const Eigen::Map<const Vector> target(ex.target.data(), T);
  const Vector diff = s - target;
  const double loss = diff.squaredNorm() / static_cast<double>(T);

  // d loss / d s, scaled by the batch weight.
  const Matrix ds = (2.0 * weight / static_cast<double>(T)) * diff;
  g.head_w += c.y.transpose() * ds;
  g.head_b(0, 0) += ds.sum();
  Matrix dx = ds * p.head_w.transpose();

  if (cfg.uses_attention()) {
    dx = layer_norm_backward(dx, p.final_gain, c.final_ln, g.final_gain, g.final_bias);
    const Eigen::Index M = cfg.projection_width;
    const Eigen::Index H = cfg.num_heads;
    const Eigen::Index dh = M / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t bi = p.blocks.size(); bi-- > 0;) {
      const auto& blk = p.blocks[bi];
      const auto& bc = c.blocks[bi];
      auto& gb = g.blocks[bi];

      // Feed-forward residual branch.
      gb.ff_w2 += bc.h.transpose() * dx;
      gb.ff_b2 += dx.colwise().sum();
      Matrix dg = (dx * blk.ff_w2.transpose()).cwiseProduct(bc.g.unaryExpr(&gelu_grad));
      gb.ff_w1 += bc.u2.transpose() * dg;
      gb.ff_b1 += dg.colwise().sum();
      const Matrix du2 = dg * blk.ff_w1.transpose();
      dx += layer_norm_backward(du2, blk.ln2_gain, bc.ln2, gb.ln2_gain, gb.ln2_bias);

      // Attention residual branch.
      gb.wo += bc.o.transpose() * dx;
      gb.bo += dx.colwise().sum();
      const Matrix d_o = dx * blk.wo.transpose();
      Matrix dq(T, M), dk(T, M), dv(T, M);
      for (Eigen::Index h = 0; h < H; ++h) {
        const Matrix& a = bc.attn[static_cast<std::size_t>(h)];
        const auto doh = d_o.middleCols(h * dh, dh);
        const Matrix da = doh * bc.v.middleCols(h * dh, dh).transpose();
        dv.middleCols(h * dh, dh).noalias() = a.transpose() * doh;
        const Vector row_dot = da.cwiseProduct(a).rowwise().sum();
        const Matrix dsc = a.cwiseProduct(da.colwise() - row_dot) * scale;
        dq.middleCols(h * dh, dh).noalias() = dsc * bc.k.middleCols(h * dh, dh);
        dk.middleCols(h * dh, dh).noalias() = dsc.transpose() * bc.q.middleCols(h * dh, dh);
      }
      gb.wq += bc.u1.transpose() * dq;
      gb.bq += dq.colwise().sum();
      gb.wk += bc.u1.transpose() * dk;
      gb.bk += dk.colwise().sum();
      gb.wv += bc.u1.transpose() * dv;
      gb.bv += dv.colwise().sum();
      const Matrix du1 = dq * blk.wq.transpose() + dk * blk.wk.transpose() + dv * blk.wv.transpose();
      dx += layer_norm_backward(du1, blk.ln1_gain, bc.ln1, gb.ln1_gain, gb.ln1_bias);
    }
  }

  // Pool MLP.
  if (cfg.pool_hidden_layer) {
    g.pool_w2 += c.h1.transpose() * dx;
    g.pool_b2 += dx.colwise().sum();
    const Matrix dz1 = (dx * p.pool_w2.transpose()).cwiseProduct(c.z1.unaryExpr(&gelu_grad));
    g.pool_w1 += ex.pooled.transpose() * dz1;
    g.pool_b1 += dz1.colwise().sum();
  } else {
    g.pool_w1 += ex.pooled.transpose() * dx;
    g.pool_b1 += dx.colwise().sum();
  }
  return loss;
}

}  // namespace

Matrix sinusoidal_encoding(Eigen::Index T, Eigen::Index width) {
  Matrix pe(T, width);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < width; ++i) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(width));
      pe(t, i) = i % 2 == 0 ? std::sin(static_cast<double>(t) * freq)
                            : std::cos(static_cast<double>(t) * freq);
    }
  }
  return pe;
}

Matrix project(const Matrix& pooled, const AggregatorParams& params, const AggregatorConfig& config) {
  return project_cached(pooled, params, config, nullptr);
}

RowVector pool_embed(const EmbeddingPair& pair, const AggregatorParams& params,
                     const AggregatorConfig& config) {
  const Matrix pooled = max_pool(pair, config);
  return project(pooled, params, config).row(0);
}

ScoreSeries forward(const Matrix& projected, const AggregatorParams& params,
                    const AggregatorConfig& config) {
  return to_series(aggregate_cached(projected, params, config, nullptr));
}

double mse_loss(const ScoreSeries& predicted, std::span<const double> target) {
  if (predicted.size() != target.size())
    throw ShapeError(fmt::format("prediction length {} != target length {}", predicted.size(),
                                 target.size()));
  if (target.empty()) throw ShapeError("loss of an empty series");
  double sum = 0.0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    const double d = predicted.scores[t] - target[t];
    sum += d * d;
  }
  return sum / static_cast<double>(target.size());
}

Gradients backward(std::span<const TrainingExample> batch, const AggregatorParams& params,
                   const AggregatorConfig& config) {
  if (batch.empty()) throw PreconditionError("empty batch");
  Gradients out;
  out.grads = params.zeros_like();
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) out.loss += weight * backward_one(ex, params, config, weight, out.grads);
  if (!out.grads.all_finite()) throw DivergenceError("non-finite gradient");
  return out;
}

double batch_loss(std::span<const TrainingExample> batch, const AggregatorParams& params,
                  const AggregatorConfig& config) {
  if (batch.empty()) throw PreconditionError("empty batch");
  double loss = 0.0;
  for (const auto& ex : batch) {
    const auto s = forward(project(ex.pooled, params, config), params, config);
    loss += mse_loss(s, ex.target) / static_cast<double>(batch.size());
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(std::span<const TrainingExample> examples, const AggregatorConfig& config) {
  config.validate();
  if (examples.empty()) throw PreconditionError("training set is empty");
  const auto D = examples.front().pooled.cols();
  for (const auto& ex : examples) {
    if (ex.pooled.cols() != D) throw ShapeError("training examples disagree on hidden width");
    if (static_cast<Eigen::Index>(ex.target.size()) != ex.pooled.rows())
      throw ShapeError("training target length does not match frame count");
  }

  TrainResult result;
  result.params = init_params(static_cast<int>(D), config, config.seed);
  auto& params = result.params;
  AggregatorParams m = params.zeros_like();
  AggregatorParams v = params.zeros_like();
  auto p_t = params.named_tensors();
  auto m_t = m.named_tensors();
  auto v_t = v.named_tensors();

  Rng order_rng(config.seed ^ 0x5eedf00dULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> per_video(examples.size());
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (const std::size_t idx : order) {
      Gradients g;
      try {
        g = backward(examples.subspan(idx, 1), params, config);
      } catch (const DivergenceError& e) {
        throw TrainingDivergedError(std::string("training diverged: ") + e.what(),
                                    result.loss_history);
      }
      if (!std::isfinite(g.loss))
        throw TrainingDivergedError("training diverged: non-finite loss", result.loss_history);
      per_video[idx] = g.loss;

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      auto g_t = g.grads.named_tensors();
      for (std::size_t i = 0; i < p_t.size(); ++i) {
        Matrix& w = *p_t[i].second;
        const Matrix& grad = *g_t[i].second;
        Matrix& mi = *m_t[i].second;
        Matrix& vi = *v_t[i].second;
        mi = config.beta1 * mi + (1.0 - config.beta1) * grad;
        vi = config.beta2 * vi + (1.0 - config.beta2) * grad.cwiseProduct(grad);
        w *= 1.0 - config.learning_rate * config.weight_decay;
        w.array() -= config.learning_rate * (mi.array() / bc1) /
                     ((vi.array() / bc2).sqrt() + config.adam_epsilon);
      }
    }
    // Summed in index order so the history does not depend on the shuffle.
    double total = 0.0;
    for (double l : per_video) total += l;
    result.loss_history.push_back(total / static_cast<double>(examples.size()));
  }
  if (!params.all_finite())
    throw TrainingDivergedError("training diverged: non-finite parameters", result.loss_history);
  return result;
}

ScoreSeries predict_pooled(const Matrix& pooled, const AggregatorParams& params,
                           const AggregatorConfig& config, bool normalize) {
  auto s = forward(project(pooled, params, config), params, config);
  return normalize ? normalize_min_max(s) : s;
}

ScoreSeries predict(std::span<const EmbeddingPair> pairs, const AggregatorParams& params,
                    const AggregatorConfig& config, bool normalize) {
  return predict_pooled(max_pool_video(pairs, config), params, config, normalize);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const AggregatorParams& params, const AggregatorConfig& c,
                     const std::filesystem::path& path) {
  const auto tensors = params.named_tensors();
  std::string out = fmt::format(
      "#llmvs-checkpoint v1 input_width={} projection_width={} num_blocks={} num_heads={} "
      "ffn_width={} use_query={} use_answer={} positional_encoding={} head={} "
      "pool_hidden_layer={} layer_norm_epsilon={} learning_rate={} weight_decay={} beta1={} "
      "beta2={} adam_epsilon={} epochs={} seed={} tensors={}\n",
      params.input_width, c.projection_width, c.num_blocks, c.num_heads, c.ffn_width,
      int{c.use_query}, int{c.use_answer}, to_string(c.positional_encoding), to_string(c.head),
      int{c.pool_hidden_layer}, c.layer_norm_epsilon, c.learning_rate, c.weight_decay, c.beta1,
      c.beta2, c.adam_epsilon, c.epochs, c.seed, tensors.size());
  for (const auto& [name, m] : tensors) {
    out += fmt::format("{} {} {}\n", name, m->rows(), m->cols());
    out.append(reinterpret_cast<const char*>(m->data()),
               static_cast<std::size_t>(m->size()) * sizeof(double));
  }
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  const auto nl = data.find('\n');
  if (nl == std::string::npos) throw SchemaError("truncated checkpoint", "header");
  std::istringstream header(data.substr(0, nl));
  std::string magic, version;
  header >> magic >> version;
  if (magic != "#llmvs-checkpoint") throw SchemaError("not a checkpoint file", "header");
  if (version != "v1") throw VersionError("unsupported checkpoint version '" + version + "'");
  std::map<std::string, std::string> f;
  std::string tok;
  while (header >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw SchemaError("bad checkpoint header token", tok);
    f[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  auto get = [&f](const std::string& k) {
    auto it = f.find(k);
    if (it == f.end()) throw SchemaError("missing checkpoint field", k);
    return it->second;
  };
  Checkpoint ck;
  auto& c = ck.config;
  try {
    c.projection_width = std::stoi(get("projection_width"));
    c.num_blocks = std::stoi(get("num_blocks"));
    c.num_heads = std::stoi(get("num_heads"));
    c.ffn_width = std::stoi(get("ffn_width"));
    c.use_query = get("use_query") == "1";
    c.use_answer = get("use_answer") == "1";
    c.positional_encoding = positional_encoding_from_string(get("positional_encoding"));
    c.head = head_kind_from_string(get("head"));
    c.pool_hidden_layer = get("pool_hidden_layer") == "1";
    c.layer_norm_epsilon = std::stod(get("layer_norm_epsilon"));
    c.learning_rate = std::stod(get("learning_rate"));
    c.weight_decay = std::stod(get("weight_decay"));
    c.beta1 = std::stod(get("beta1"));
    c.beta2 = std::stod(get("beta2"));
    c.adam_epsilon = std::stod(get("adam_epsilon"));
    c.epochs = std::stoi(get("epochs"));
    c.seed = std::stoull(get("seed"));
  } catch (const std::logic_error& e) {
    throw SchemaError(std::string("bad checkpoint header value: ") + e.what(), "header");
  }
  const int D = std::stoi(get("input_width"));
  ck.params = init_params(D, c, 0);
  auto tensors = ck.params.named_tensors();
  if (std::stoul(get("tensors")) != tensors.size())
    throw SchemaError("checkpoint tensor count does not match its configuration", "tensors");
  std::size_t pos = nl + 1;
  for (auto& [name, m] : tensors) {
    const auto line_end = data.find('\n', pos);
    if (line_end == std::string::npos) throw SchemaError("truncated checkpoint", name);
    std::istringstream th(data.substr(pos, line_end - pos));
    std::string tname;
    Eigen::Index rows = 0, cols = 0;
    th >> tname >> rows >> cols;
    if (tname != name || rows != m->rows() || cols != m->cols())
      throw SchemaError("checkpoint tensor '" + tname + "' does not match expected '" + name + "'",
                        name);
    pos = line_end + 1;
    const std::size_t bytes = static_cast<std::size_t>(m->size()) * sizeof(double);
    if (pos + bytes > data.size()) throw SchemaError("truncated checkpoint payload", name);
    std::memcpy(m->data(), data.data() + pos, bytes);
    pos += bytes;
  }
  if (pos != data.size()) throw SchemaError("trailing bytes in checkpoint", "payload");
  return ck;
}

void save_loss_history(std::span<const double> history, const std::filesystem::path& path) {
  std::string out = "epoch,mse\n";
  for (std::size_t i = 0; i < history.size(); ++i) out += fmt::format("{},{}\n", i + 1, history[i]);
  write_file_atomic(path, out);
}

}  // namespace llmvs
