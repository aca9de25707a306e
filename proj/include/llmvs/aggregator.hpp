#pragma once

#include "llmvs/error.hpp"
#include "llmvs/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace llmvs {

enum class PositionalEncoding { none, sinusoidal };
enum class HeadKind {
  attention,  // pooled embeddings -> self-attention blocks -> linear head
  mlp_only    // self-attention bypassed
};

std::string to_string(PositionalEncoding p);
std::string to_string(HeadKind h);
PositionalEncoding positional_encoding_from_string(const std::string& s);
HeadKind head_kind_from_string(const std::string& s);

struct AggregatorConfig {
  int projection_width = 2048;
  int num_blocks = 3;
  int num_heads = 2;
  /// Hidden width of each block's feed-forward layer; 0 means projection_width.
  int ffn_width = 0;
  bool use_query = true;
  bool use_answer = true;
  PositionalEncoding positional_encoding = PositionalEncoding::none;
  HeadKind head = HeadKind::attention;
  /// Pool MLP with one hidden layer of projection_width; false gives a single linear map.
  bool pool_hidden_layer = true;
  double layer_norm_epsilon = 1e-5;

  // AdamW
  double learning_rate = 1.19e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 200;
  std::uint64_t seed = 0;

  int feed_forward_width() const { return ffn_width > 0 ? ffn_width : projection_width; }
  bool uses_attention() const { return head == HeadKind::attention && num_blocks > 0; }
  void validate() const;
};

struct AttentionBlockParams {
  Matrix ln1_gain, ln1_bias;
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln2_gain, ln2_bias;
  Matrix ff_w1, ff_b1, ff_w2, ff_b2;
};

/// All trainable tensors. Biases and gains are stored as 1 x n matrices.
struct AggregatorParams {
  int input_width = 0;
  Matrix pool_w1, pool_b1, pool_w2, pool_b2;
  std::vector<AttentionBlockParams> blocks;
  Matrix final_gain, final_bias;
  Matrix head_w, head_b;

  /// Stable-ordered (name, tensor) view over every allocated tensor.
  std::vector<std::pair<std::string, Matrix*>> named_tensors();
  std::vector<std::pair<std::string, const Matrix*>> named_tensors() const;

  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Same shapes, all zeros.
  AggregatorParams zeros_like() const;
};

AggregatorParams init_params(int input_width, const AggregatorConfig& config, std::uint64_t seed);

/// Column-wise max over the rows selected by use_query / use_answer.
RowVector max_pool(const EmbeddingPair& pair, const AggregatorConfig& config);
/// T x D matrix of max-pooled rows, one per frame.
Matrix max_pool_video(std::span<const EmbeddingPair> pairs, const AggregatorConfig& config);

/// Pool MLP over max-pooled rows: T x D -> T x M.
Matrix project(const Matrix& pooled, const AggregatorParams& params, const AggregatorConfig& config);
/// max_pool followed by the pool MLP, width M.
RowVector pool_embed(const EmbeddingPair& pair, const AggregatorParams& params,
                     const AggregatorConfig& config);

/// Global aggregation over projected rows (T x M) and the scalar head.
ScoreSeries forward(const Matrix& projected, const AggregatorParams& params,
                    const AggregatorConfig& config);

/// Mean squared error over frames.
double mse_loss(const ScoreSeries& predicted, std::span<const double> target);

struct TrainingExample {
  /// Max-pooled embeddings, T x D.
  Matrix pooled;
  std::vector<double> target;
};

struct Gradients {
  AggregatorParams grads;
  /// Batch-mean loss at the evaluated parameters.
  double loss = 0.0;
};

/// Exact gradients of the batch-mean MSE with respect to every parameter.
Gradients backward(std::span<const TrainingExample> batch, const AggregatorParams& params,
                   const AggregatorConfig& config);

/// Loss only, via the same path as backward (for gradient checking).
double batch_loss(std::span<const TrainingExample> batch, const AggregatorParams& params,
                  const AggregatorConfig& config);

class TrainingDivergedError : public DivergenceError {
 public:
  TrainingDivergedError(const std::string& m, std::vector<double> history)
      : DivergenceError(m), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

struct TrainResult {
  AggregatorParams params;
  /// Mean per-video training loss for every epoch.
  std::vector<double> loss_history;
};

/// AdamW, one video per step, video order reshuffled every epoch.
TrainResult train(std::span<const TrainingExample> examples, const AggregatorConfig& config);

/// Scores for one video's embedding pairs. `normalize` is for display only.
ScoreSeries predict(std::span<const EmbeddingPair> pairs, const AggregatorParams& params,
                    const AggregatorConfig& config, bool normalize = false);
ScoreSeries predict_pooled(const Matrix& pooled, const AggregatorParams& params,
                           const AggregatorConfig& config, bool normalize = false);

Matrix sinusoidal_encoding(Eigen::Index T, Eigen::Index width);

struct Checkpoint {
  AggregatorConfig config;
  AggregatorParams params;
};

void save_checkpoint(const AggregatorParams& params, const AggregatorConfig& config,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// CSV with header `epoch,mse`, epochs numbered from 1.
void save_loss_history(std::span<const double> history, const std::filesystem::path& path);

}  // namespace llmvs
