#pragma once

// Three-branch attention bookkeeping and a small deterministic attention
// layer that makes row replacement and Q/K/V routing observable.
//
// The toy layer has two parts per branch:
//   cross-attention: prompt tokens query the latent cells; the token-major
//     map (tokens x cells) is softmax-normalized over cells, so every row is
//     a distribution over the grid. Rows are what gets replaced.
//   self-attention: Q, K and V are projections of the latent; these triples
//     are what gets routed between branches.

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dragwarp/grid.hpp"

namespace dragwarp {

inline constexpr int kEmbeddingDim = 8;

struct PromptTokens {
  std::vector<std::string> tokens;
  Eigen::MatrixXd embeddings;  // tokens x kEmbeddingDim, unit rows
};

/// Lowercased, whitespace-split.
std::vector<std::string> tokenize(std::string_view text);

/// Unit-norm vector per token from a seeded hash of the token string.
PromptTokens encode_prompt(std::string_view text, int dim = kEmbeddingDim);

/// Indexed by target token; holds the matched source token, if any.
using AlignmentMap = std::vector<std::optional<std::size_t>>;

/// Greedy left-to-right exact matching; each source token is used once.
AlignmentMap align_tokens(const PromptTokens& src, const PromptTokens& tgt);

struct AttentionMap {
  Eigen::MatrixXd rows;  // tokens x cells
};

/// Row j becomes m_src row A(j) for mapped j when t >= t_c; otherwise m_ref.
/// Throws DimensionMismatch.
AttentionMap replace_attention(const AttentionMap& m_src, const AttentionMap& m_ref,
                               const AlignmentMap& align, int t, int t_c);

using MatrixPtr = std::shared_ptr<const Eigen::MatrixXd>;

struct QkvTriple {
  MatrixPtr q;
  MatrixPtr k;
  MatrixPtr v;
};

struct BranchState {
  FeatureGrid latent;
  QkvTriple qkv;  // self-attention projections of `latent`
};

struct RoutedQkv {
  QkvTriple src;
  QkvTriple ref;
  QkvTriple tgt;
};

/// ref <- (Q_src, K_src, V_ref) when t >= t_s, else its own triple;
/// tgt <- (Q_tgt, K_ref, V_ref) always; src keeps its own.
/// Routed triples share the original matrices. Throws DimensionMismatch.
RoutedQkv route_qkv(const BranchState& src, const BranchState& ref, const BranchState& tgt, int t,
                    int t_s);

/// Inside the mask keep z_tgt, outside take z_ref, for denoising iterations
/// 1..fuse_steps; later iterations return z_tgt. Throws ShapeMismatch.
FeatureGrid masked_fuse(const FeatureGrid& z_tgt, const FeatureGrid& z_ref, const Mask& mask,
                        int iteration, int fuse_steps);

/// Fixed random projections for the toy layer.
class ToyAttention {
 public:
  ToyAttention(int channels, std::uint64_t seed, int embed_dim = kEmbeddingDim);

  int channels() const { return channels_; }
  int embed_dim() const { return embed_dim_; }

  /// Self-attention projections of a latent (cells x embed_dim each).
  QkvTriple project(const FeatureGrid& latent) const;
  BranchState make_branch(FeatureGrid latent) const;

  /// Token-major cross-attention map of `prompt` over the cells of `latent`.
  AttentionMap cross_map(const FeatureGrid& latent, const PromptTokens& prompt) const;

  /// latent + cross readout (from `cross` and the prompt values) + self
  /// readout (from the given triple).
  FeatureGrid apply(const FeatureGrid& latent, const PromptTokens& prompt,
                    const AttentionMap& cross, const QkvTriple& self) const;

 private:
  int channels_;
  int embed_dim_;
  Eigen::MatrixXd cell_key_, token_query_, token_value_, cross_out_;
  Eigen::MatrixXd self_q_, self_k_, self_v_, self_out_;
};

struct ToyForward {
  AttentionMap cross;
  FeatureGrid latent;
};

/// Cross map from the branch latent, then apply() with the branch's triple.
ToyForward toy_attention_forward(const BranchState& branch, const PromptTokens& prompt,
                                 const ToyAttention& layer);

/// Row-wise softmax.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores);

}  // namespace dragwarp
