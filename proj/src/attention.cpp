#include "dragwarp/attention.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

#include "dragwarp/error.hpp"
#include "dragwarp/rng.hpp"

namespace dragwarp {
namespace {

using RowMajorGrid = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

RowMajorGrid as_matrix(const FeatureGrid& grid) {
  return RowMajorGrid(grid.data.data(), static_cast<Eigen::Index>(grid.cell_count()),
                      grid.depth_dim);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Scaled so projections stay O(1) for unit-scale inputs.
Eigen::MatrixXd random_matrix(const CounterRng& rng, std::uint64_t& cursor, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.normal(cursor++);
  }
  return m;
}

void check_triple(const QkvTriple& t, const char* name) {
  if (!t.q || !t.k || !t.v) {
    throw Error(ErrorCode::DimensionMismatch, std::string(name) + " triple is incomplete");
  }
  if (t.q->cols() != t.k->cols() || t.k->rows() != t.v->rows()) {
    throw Error(ErrorCode::DimensionMismatch, std::string(name) + " Q/K/V dimensions disagree");
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) {
    for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(word);
  }
  return out;
}

PromptTokens encode_prompt(std::string_view text, int dim) {
  PromptTokens p;
  p.tokens = tokenize(text);
  p.embeddings.resize(static_cast<Eigen::Index>(p.tokens.size()), dim);
  for (std::size_t i = 0; i < p.tokens.size(); ++i) {
    const CounterRng rng(fnv1a(p.tokens[i]), stream_id(NoiseStream::ToyWeights));
    Eigen::VectorXd v(dim);
    for (int c = 0; c < dim; ++c) v(c) = rng.normal(static_cast<std::uint64_t>(c));
    p.embeddings.row(static_cast<Eigen::Index>(i)) = v.normalized().transpose();
  }
  return p;
}

AlignmentMap align_tokens(const PromptTokens& src, const PromptTokens& tgt) {
  AlignmentMap map(tgt.tokens.size());
  std::vector<bool> used(src.tokens.size(), false);
  for (std::size_t j = 0; j < tgt.tokens.size(); ++j) {
    for (std::size_t i = 0; i < src.tokens.size(); ++i) {
      if (!used[i] && src.tokens[i] == tgt.tokens[j]) {
        used[i] = true;
        map[j] = i;
        break;
      }
    }
  }
  return map;
}

AttentionMap replace_attention(const AttentionMap& m_src, const AttentionMap& m_ref,
                               const AlignmentMap& align, int t, int t_c) {
  if (m_src.rows.cols() != m_ref.rows.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "source and reference maps cover different cells");
  }
  if (align.size() > static_cast<std::size_t>(m_ref.rows.rows())) {
    throw Error(ErrorCode::DimensionMismatch, "alignment is longer than the reference prompt");
  }
  AttentionMap out = m_ref;
  if (t < t_c) return out;
  for (std::size_t j = 0; j < align.size(); ++j) {
    if (!align[j]) continue;
    const auto i = static_cast<Eigen::Index>(*align[j]);
    if (i >= m_src.rows.rows()) {
      throw Error(ErrorCode::DimensionMismatch, "alignment points past the source prompt");
    }
    out.rows.row(static_cast<Eigen::Index>(j)) = m_src.rows.row(i);
  }
  return out;
}

RoutedQkv route_qkv(const BranchState& src, const BranchState& ref, const BranchState& tgt, int t,
                    int t_s) {
  check_triple(src.qkv, "source");
  check_triple(ref.qkv, "reference");
  check_triple(tgt.qkv, "target");
  const auto& s = src.qkv;
  const auto& r = ref.qkv;
  if (s.q->cols() != r.k->cols() || s.k->rows() != r.v->rows() || tgt.qkv.q->cols() != r.k->cols()) {
    throw Error(ErrorCode::DimensionMismatch, "branches have incompatible attention shapes");
  }
  RoutedQkv out;
  out.src = s;
  out.ref = t >= t_s ? QkvTriple{s.q, s.k, r.v} : r;
  out.tgt = QkvTriple{tgt.qkv.q, r.k, r.v};
  return out;
}

FeatureGrid masked_fuse(const FeatureGrid& z_tgt, const FeatureGrid& z_ref, const Mask& mask,
                        int iteration, int fuse_steps) {
  if (!z_tgt.same_shape(z_ref) || mask.height != z_tgt.height || mask.width != z_tgt.width) {
    throw Error(ErrorCode::ShapeMismatch, "fusion inputs differ in shape");
  }
  if (iteration > fuse_steps) return z_tgt;
  FeatureGrid out = z_tgt;
  for (int y = 0; y < z_tgt.height; ++y) {
    for (int x = 0; x < z_tgt.width; ++x) {
      if (mask.at(x, y)) continue;
      const auto from = z_ref.cell(x, y);
      std::copy(from.begin(), from.end(), out.cell(x, y).begin());
    }
  }
  return out;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
  Eigen::MatrixXd out(scores.rows(), scores.cols());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    const double peak = scores.row(r).maxCoeff();
    out.row(r) = (scores.row(r).array() - peak).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

ToyAttention::ToyAttention(int channels, std::uint64_t seed, int embed_dim)
    : channels_(channels), embed_dim_(embed_dim) {
  if (channels <= 0 || embed_dim <= 0) {
    throw Error(ErrorCode::DimensionMismatch, "toy attention needs positive widths");
  }
  const CounterRng rng(seed, stream_id(NoiseStream::ToyWeights, 1));
  std::uint64_t cursor = 0;
  // Readouts are damped so repeated application stays a small perturbation.
  cell_key_ = random_matrix(rng, cursor, channels, embed_dim);
  token_query_ = random_matrix(rng, cursor, embed_dim, embed_dim);
  token_value_ = random_matrix(rng, cursor, embed_dim, embed_dim);
  cross_out_ = 0.1 * random_matrix(rng, cursor, embed_dim, channels);
  self_q_ = random_matrix(rng, cursor, channels, embed_dim);
  self_k_ = random_matrix(rng, cursor, channels, embed_dim);
  self_v_ = random_matrix(rng, cursor, channels, embed_dim);
  self_out_ = 0.1 * random_matrix(rng, cursor, embed_dim, channels);
}

QkvTriple ToyAttention::project(const FeatureGrid& latent) const {
  if (latent.depth_dim != channels_) {
    throw Error(ErrorCode::DimensionMismatch, "latent channel count does not match the layer");
  }
  const auto z = as_matrix(latent);
  return {std::make_shared<const Eigen::MatrixXd>(z * self_q_),
          std::make_shared<const Eigen::MatrixXd>(z * self_k_),
          std::make_shared<const Eigen::MatrixXd>(z * self_v_)};
}

BranchState ToyAttention::make_branch(FeatureGrid latent) const {
  auto qkv = project(latent);
  return {std::move(latent), std::move(qkv)};
}

AttentionMap ToyAttention::cross_map(const FeatureGrid& latent, const PromptTokens& prompt) const {
  if (latent.depth_dim != channels_ || prompt.embeddings.cols() != embed_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "cross-attention inputs do not match the layer");
  }
  const Eigen::MatrixXd queries = prompt.embeddings * token_query_;  // tokens x e
  const Eigen::MatrixXd keys = as_matrix(latent) * cell_key_;        // cells x e
  const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim_));
  return {softmax_rows(scale * queries * keys.transpose())};
}

FeatureGrid ToyAttention::apply(const FeatureGrid& latent, const PromptTokens& prompt,
                                const AttentionMap& cross, const QkvTriple& self) const {
  check_triple(self, "self-attention");
  const auto cells = static_cast<Eigen::Index>(latent.cell_count());
  if (latent.depth_dim != channels_ || cross.rows.cols() != cells ||
      self.q->rows() != cells || self.k->rows() != cells) {
    throw Error(ErrorCode::DimensionMismatch, "attention inputs do not match the latent");
  }
  // Cross readout: each cell gathers token values weighted by its column of
  // the token-major map.
  if (cross.rows.rows() != static_cast<Eigen::Index>(prompt.tokens.size())) {
    throw Error(ErrorCode::DimensionMismatch, "cross map rows do not match the prompt tokens");
  }
  const Eigen::MatrixXd token_values = prompt.embeddings * token_value_;
  const Eigen::MatrixXd cross_read = cross.rows.transpose() * token_values * cross_out_;

  const double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim_));
  const Eigen::MatrixXd weights = softmax_rows(scale * (*self.q) * self.k->transpose());
  const Eigen::MatrixXd self_read = weights * (*self.v) * self_out_;

  FeatureGrid out = latent;
  for (Eigen::Index i = 0; i < cells; ++i) {
    for (int c = 0; c < channels_; ++c) {
      out.data[static_cast<std::size_t>(i) * channels_ + c] += cross_read(i, c) + self_read(i, c);
    }
  }
  return out;
}

ToyForward toy_attention_forward(const BranchState& branch, const PromptTokens& prompt,
                                 const ToyAttention& layer) {
  auto cross = layer.cross_map(branch.latent, prompt);
  auto latent = layer.apply(branch.latent, prompt, cross, branch.qkv);
  return {std::move(cross), std::move(latent)};
}

}  // namespace dragwarp
