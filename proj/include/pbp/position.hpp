#ifndef PBP_POSITION_HPP
#define PBP_POSITION_HPP

#include <Eigen/Core>

#include "pbp/common.hpp"
#include "pbp/corpus.hpp"

namespace pbp {

// Mask-relative position ids for one anchor span: 0 across the anchor,
// negative counting up to it, positive counting away from it.
struct PositionIdSequence {
  std::vector<int> ids;
  int anchor_span_index = 0;
};

inline PositionIdSequence mask_relative_ids(int n,
                                            const std::vector<MaskSpan>& mask_spans,
                                            int anchor_span_index) {
  detail::check_spans(mask_spans, n);
  if (anchor_span_index < 0 ||
      anchor_span_index >= static_cast<int>(mask_spans.size()))
    throw std::out_of_range("invalid anchor span index");
  const MaskSpan& anchor =
      mask_spans[static_cast<std::size_t>(anchor_span_index)];
  PositionIdSequence seq;
  seq.anchor_span_index = anchor_span_index;
  seq.ids.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    int id;
    if (j < anchor.start) {
      id = j - anchor.start;
    } else if (j <= anchor.end) {
      id = 0;
    } else {
      id = j - anchor.end;
    }
    seq.ids[static_cast<std::size_t>(j)] = id;
  }
  return seq;
}

// Used for no_blank prompts: anchor the sequence at position 0 so they can
// flow through the same attention path (no loss is ever taken on them).
inline PositionIdSequence virtual_anchor_ids(int n) {
  PositionIdSequence seq;
  seq.anchor_span_index = -1;
  seq.ids.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) seq.ids[static_cast<std::size_t>(j)] = j;
  return seq;
}

// One sequence per mask span, in span order.
inline std::vector<PositionIdSequence> all_mask_position_sequences(
    const PromptInstance& prompt) {
  if (prompt.mask_spans.empty())
    throw std::invalid_argument("no_blank prompt has no position sequences");
  const int n = static_cast<int>(prompt.tokens.size());
  std::vector<PositionIdSequence> out;
  for (int i = 0; i < static_cast<int>(prompt.mask_spans.size()); ++i)
    out.push_back(mask_relative_ids(n, prompt.mask_spans, i));
  return out;
}

struct PositionEmbeddingTable {
  Eigen::MatrixXd matrix;  // 2*n_max rows x k_p cols
  int n_max = 0;

  PositionEmbeddingTable() = default;
  PositionEmbeddingTable(int n_max_, int k_p)
      : matrix(Eigen::MatrixXd::Zero(2 * n_max_, k_p)), n_max(n_max_) {}

  void randomize(Rng& rng, double scale = 0.05) {
    for (Eigen::Index r = 0; r < matrix.rows(); ++r)
      for (Eigen::Index c = 0; c < matrix.cols(); ++c)
        matrix(r, c) = rng.uniform_real(-scale, scale);
  }

  int row_index(int id) const {
    if (id < -n_max || id > n_max - 1)
      throw std::out_of_range("position id outside table; sequence longer than n_max");
    return id + n_max;
  }
};

// P_s: row j is the table row for ids[j].
inline Eigen::MatrixXd lookup_embeddings(const PositionEmbeddingTable& table,
                                         const PositionIdSequence& seq) {
  const int n = static_cast<int>(seq.ids.size());
  Eigen::MatrixXd out(n, table.matrix.cols());
  for (int j = 0; j < n; ++j)
    out.row(j) = table.matrix.row(table.row_index(seq.ids[static_cast<std::size_t>(j)]));
  return out;
}

}  // namespace pbp

#endif  // PBP_POSITION_HPP
