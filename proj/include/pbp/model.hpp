#ifndef PBP_MODEL_HPP
#define PBP_MODEL_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "pbp/corpus.hpp"
#include "pbp/encoder.hpp"
#include "pbp/nn.hpp"
#include "pbp/position.hpp"
#include "pbp/vocab.hpp"

namespace pbp {

enum class PredictionMode { baseline, pbc, contextual_pbc };
enum class LayerMode { last_layer, mean_pool_all_layers };
// How the attention vector combines with the token states: row_scaled keeps
// one scaled state per token (M_j = A_j * h'_j); pooled gives every row the
// attention-weighted mean (an alternate reading kept for comparison).
enum class RepForm { row_scaled, pooled };

inline PredictionMode prediction_mode_from_string(const std::string& s) {
  if (s == "baseline") return PredictionMode::baseline;
  if (s == "pbc") return PredictionMode::pbc;
  if (s == "contextual-pbc" || s == "contextual_pbc")
    return PredictionMode::contextual_pbc;
  throw std::invalid_argument("unknown prediction mode: " + s);
}

inline const char* to_string(PredictionMode m) {
  switch (m) {
    case PredictionMode::baseline: return "baseline";
    case PredictionMode::pbc: return "pbc";
    case PredictionMode::contextual_pbc: return "contextual-pbc";
  }
  throw std::logic_error("bad mode");
}

inline LayerMode layer_mode_from_string(const std::string& s) {
  if (s == "last" || s == "last_layer") return LayerMode::last_layer;
  if (s == "meanpool" || s == "mean_pool_all_layers")
    return LayerMode::mean_pool_all_layers;
  throw std::invalid_argument("unknown layer mode: " + s);
}

inline const char* to_string(LayerMode m) {
  return m == LayerMode::last_layer ? "last" : "meanpool";
}

struct PbpConfig {
  int hidden = 64;   // k, encoder hidden size
  int d_t = 50;      // query type embedding size
  int k_a = 200;     // attention layer size
  int k_p = 300;     // position embedding size
  int n_max = 64;
  int vocab_size = 0;  // v*
  Activation activation = Activation::gelu;
  LayerMode layer_mode = LayerMode::last_layer;
  RepForm rep_form = RepForm::row_scaled;
  bool mixed_mean = true;  // mean (vs plain sum) over per-anchor representations

  int kprime() const { return hidden + d_t; }
};

inline int type_index(PromptType t) { return static_cast<int>(t); }

struct PbpParameters {
  Eigen::MatrixXd W;   // k_a x k'
  Eigen::MatrixXd U;   // k_a x k_p
  Eigen::VectorXd V;   // k_a
  PositionEmbeddingTable table;
  Eigen::MatrixXd Z;   // 5 x d_t, one query type embedding per prompt type
  Eigen::MatrixXd Wv;  // v* x k'
  Eigen::MatrixXd Wc;  // 5 x k', auxiliary prompt-type classifier
  Eigen::VectorXd bc;  // 5

  PbpParameters() = default;

  PbpParameters(const PbpConfig& cfg, Rng& rng) {
    W = Eigen::MatrixXd(cfg.k_a, cfg.kprime());
    U = Eigen::MatrixXd(cfg.k_a, cfg.k_p);
    V = Eigen::VectorXd(cfg.k_a);
    table = PositionEmbeddingTable(cfg.n_max, cfg.k_p);
    Z = Eigen::MatrixXd(kNumPromptTypes, cfg.d_t);
    Wv = Eigen::MatrixXd(cfg.vocab_size, cfg.kprime());
    Wc = Eigen::MatrixXd(kNumPromptTypes, cfg.kprime());
    bc = Eigen::VectorXd::Zero(kNumPromptTypes);
    nn::randomize(W, rng, 0.05);
    nn::randomize(U, rng, 0.05);
    for (Eigen::Index i = 0; i < V.size(); ++i) V(i) = rng.uniform_real(-0.05, 0.05);
    table.randomize(rng);
    nn::randomize(Z, rng, 0.05);
    nn::randomize(Wv, rng, 0.05);
    nn::randomize(Wc, rng, 0.05);
  }

  static PbpParameters zeros_like(const PbpParameters& o) {
    PbpParameters z;
    z.W = Eigen::MatrixXd::Zero(o.W.rows(), o.W.cols());
    z.U = Eigen::MatrixXd::Zero(o.U.rows(), o.U.cols());
    z.V = Eigen::VectorXd::Zero(o.V.size());
    z.table.n_max = o.table.n_max;
    z.table.matrix = Eigen::MatrixXd::Zero(o.table.matrix.rows(), o.table.matrix.cols());
    z.Z = Eigen::MatrixXd::Zero(o.Z.rows(), o.Z.cols());
    z.Wv = Eigen::MatrixXd::Zero(o.Wv.rows(), o.Wv.cols());
    z.Wc = Eigen::MatrixXd::Zero(o.Wc.rows(), o.Wc.cols());
    z.bc = Eigen::VectorXd::Zero(o.bc.size());
    return z;
  }
};

// ---------------------------------------------------------------------------
// Prompt encoding (token ids + gold ids)
// ---------------------------------------------------------------------------

struct EncodedPrompt {
  std::vector<int> ids;
  std::vector<MaskSpan> mask_spans;
  std::vector<std::vector<int>> gold_ids;
  PromptType type = PromptType::no_blank;
  std::string source_id;

  int length() const { return static_cast<int>(ids.size()); }
  int masked_token_count() const {
    int c = 0;
    for (const auto& g : gold_ids) c += static_cast<int>(g.size());
    return c;
  }
};

// Gold tokens outside the vocabulary are a hard error here (corpus-build
// time), never during loss computation.
inline EncodedPrompt encode_prompt(const PromptInstance& p,
                                   const Vocabulary& vocab) {
  EncodedPrompt ep;
  ep.ids = vocab.encode(p.tokens);
  ep.mask_spans = p.mask_spans;
  for (const auto& ans : p.gold_answers) {
    std::vector<int> g;
    for (const auto& t : ans) g.push_back(vocab.require_id(t));
    ep.gold_ids.push_back(std::move(g));
  }
  ep.type = p.prompt_type;
  ep.source_id = p.source_id;
  return ep;
}

// ---------------------------------------------------------------------------
// Forward operations
// ---------------------------------------------------------------------------

struct HiddenStates {
  Eigen::MatrixXd H;  // n x k
  LayerMode layer_mode = LayerMode::last_layer;
};

// Runs the encoder; last_layer takes the final block's states, meanpool the
// arithmetic mean over all blocks' states.
inline HiddenStates encode(const EncodedPrompt& prompt, const ToyEncoder& encoder,
                           LayerMode layer_mode, EncoderCache* cache = nullptr) {
  if (prompt.length() > encoder.config().max_len)
    throw std::runtime_error("prompt too long for encoder: " + prompt.source_id);
  const auto states = encoder.forward(prompt.ids, cache);
  HiddenStates hs;
  hs.layer_mode = layer_mode;
  if (layer_mode == LayerMode::last_layer) {
    hs.H = states.back();
  } else {
    hs.H = Eigen::MatrixXd::Zero(states.back().rows(), states.back().cols());
    for (const auto& s : states) hs.H += s;
    hs.H /= static_cast<double>(states.size());
  }
  return hs;
}

// [z_t ; h_i] per row; the query type embedding fills the first d_t columns.
inline Eigen::MatrixXd attach_query_type(const Eigen::MatrixXd& H,
                                         const Eigen::MatrixXd& Z,
                                         PromptType type) {
  const Eigen::Index n = H.rows();
  const Eigen::Index d_t = Z.cols();
  Eigen::MatrixXd out(n, d_t + H.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i).head(d_t) = Z.row(type_index(type));
    out.row(i).tail(H.cols()) = H.row(i);
  }
  return out;
}

// softmax(V^T tanh(W H'^T + U P_s^T)) over the n positions.
inline Eigen::VectorXd position_attention(const Eigen::MatrixXd& Hp,
                                          const Eigen::MatrixXd& Ps,
                                          const PbpParameters& params,
                                          Eigen::MatrixXd* tanh_out = nullptr) {
  Eigen::MatrixXd pre = params.W * Hp.transpose() + params.U * Ps.transpose();
  Eigen::MatrixXd T = pre.array().tanh();
  Eigen::VectorXd logits = T.transpose() * params.V;
  if (!logits.allFinite())
    throw std::runtime_error("non-finite attention logits");
  if (tanh_out != nullptr) *tanh_out = T;
  return nn::softmax(logits);
}

inline Eigen::MatrixXd prompt_representation(const Eigen::VectorXd& A,
                                             const Eigen::MatrixXd& Hp,
                                             RepForm form = RepForm::row_scaled) {
  if (form == RepForm::row_scaled) return A.asDiagonal() * Hp;
  Eigen::RowVectorXd pooled = A.transpose() * Hp;
  return pooled.replicate(Hp.rows(), 1);
}

// Mean (or sum) of per-anchor representations across position id sequences.
inline Eigen::MatrixXd mixed_representation(
    const Eigen::MatrixXd& Hp, const std::vector<PositionIdSequence>& sequences,
    const PbpParameters& params, const PbpConfig& cfg) {
  if (sequences.empty())
    throw std::invalid_argument("mixed_representation: no position sequences");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(Hp.rows(), Hp.cols());
  for (const auto& seq : sequences) {
    const Eigen::MatrixXd Ps = lookup_embeddings(params.table, seq);
    const Eigen::VectorXd A = position_attention(Hp, Ps, params);
    M += prompt_representation(A, Hp, cfg.rep_form);
  }
  if (cfg.mixed_mean) M /= static_cast<double>(sequences.size());
  return M;
}

inline Eigen::MatrixXd select_representation(PredictionMode mode,
                                             const Eigen::MatrixXd& Hp,
                                             const Eigen::MatrixXd& M) {
  switch (mode) {
    case PredictionMode::baseline: return Hp;
    case PredictionMode::pbc: return M;
    case PredictionMode::contextual_pbc: return 0.5 * (Hp + M);
  }
  throw std::logic_error("bad mode");
}

// Per-position vocabulary distributions: softmax(f(W_v rep_j)).
inline Eigen::MatrixXd predict_tokens(const Eigen::MatrixXd& rep,
                                      const Eigen::MatrixXd& Wv, Activation f,
                                      Eigen::MatrixXd* pre_out = nullptr) {
  Eigen::MatrixXd u = rep * Wv.transpose();  // n x v*
  if (pre_out != nullptr) *pre_out = u;
  Eigen::MatrixXd probs = nn::apply(f, u);
  nn::softmax_rows_inplace(probs);
  return probs;
}

// Parallel argmax fill of every masked position; ties go to the lowest
// vocabulary index. Returns one id sequence per mask span, in span order.
inline std::vector<std::vector<int>> decode_spans(
    const Eigen::MatrixXd& distributions,
    const std::vector<MaskSpan>& mask_spans) {
  std::vector<std::vector<int>> out;
  for (const auto& sp : mask_spans) {
    std::vector<int> span;
    for (int j = sp.start; j <= sp.end; ++j) {
      int best = 0;
      double best_p = distributions(j, 0);
      for (Eigen::Index v = 1; v < distributions.cols(); ++v) {
        if (distributions(j, v) > best_p) {
          best_p = distributions(j, v);
          best = static_cast<int>(v);
        }
      }
      span.push_back(best);
    }
    out.push_back(std::move(span));
  }
  return out;
}

inline std::vector<std::vector<std::string>> decode_span_tokens(
    const Eigen::MatrixXd& distributions,
    const std::vector<MaskSpan>& mask_spans, const Vocabulary& vocab) {
  std::vector<std::vector<std::string>> out;
  for (const auto& span : decode_spans(distributions, mask_spans)) {
    std::vector<std::string> toks;
    for (int id : span) toks.push_back(vocab.token(id));
    out.push_back(std::move(toks));
  }
  return out;
}

// Position id sequences used by the pipeline: one per mask span, or a
// single virtual anchor at position 0 for no_blank prompts.
inline std::vector<PositionIdSequence> pipeline_sequences(
    const EncodedPrompt& prompt) {
  if (prompt.mask_spans.empty()) return {virtual_anchor_ids(prompt.length())};
  std::vector<PositionIdSequence> out;
  for (int i = 0; i < static_cast<int>(prompt.mask_spans.size()); ++i)
    out.push_back(mask_relative_ids(prompt.length(), prompt.mask_spans, i));
  return out;
}

// ---------------------------------------------------------------------------
// Combined forward/backward for training and gradient checks
// ---------------------------------------------------------------------------

struct HeadForwardCache {
  Eigen::MatrixXd Hp;                       // n x k'
  std::vector<PositionIdSequence> seqs;
  std::vector<Eigen::MatrixXd> Ps;          // per anchor, n x k_p
  std::vector<Eigen::MatrixXd> T;           // per anchor, k_a x n
  std::vector<Eigen::VectorXd> A;           // per anchor, n
  Eigen::MatrixXd M;                        // n x k'
  Eigen::MatrixXd rep;                      // selected representation
  Eigen::MatrixXd u;                        // pre-activation logits, n x v*
  Eigen::MatrixXd probs;                    // n x v*
  Eigen::VectorXd pooled;                   // k'
  Eigen::VectorXd aux_probs;                // 5
};

inline void head_forward(const Eigen::MatrixXd& H, const EncodedPrompt& prompt,
                         const PbpParameters& params, const PbpConfig& cfg,
                         PredictionMode mode, HeadForwardCache& c) {
  c.Hp = attach_query_type(H, params.Z, prompt.type);
  c.seqs = pipeline_sequences(prompt);
  c.Ps.clear();
  c.T.clear();
  c.A.clear();
  c.M = Eigen::MatrixXd::Zero(c.Hp.rows(), c.Hp.cols());
  for (const auto& seq : c.seqs) {
    Eigen::MatrixXd Ps = lookup_embeddings(params.table, seq);
    Eigen::MatrixXd T;
    Eigen::VectorXd A = position_attention(c.Hp, Ps, params, &T);
    c.M += prompt_representation(A, c.Hp, cfg.rep_form);
    c.Ps.push_back(std::move(Ps));
    c.T.push_back(std::move(T));
    c.A.push_back(std::move(A));
  }
  if (cfg.mixed_mean) c.M /= static_cast<double>(c.seqs.size());
  c.rep = select_representation(mode, c.Hp, c.M);
  c.probs = predict_tokens(c.rep, params.Wv, cfg.activation, &c.u);
  c.pooled = c.rep.colwise().mean().transpose();
  c.aux_probs = nn::softmax(params.Wc * c.pooled + params.bc);
}

struct HeadLoss {
  double l_plm = 0.0;
  double l_tc = 0.0;
  double total = 0.0;
  int masked_tokens = 0;
};

// Computes both losses from a populated cache and, when grads/dH are given,
// accumulates analytic gradients of every head parameter and of H.
inline HeadLoss head_loss_backward(const EncodedPrompt& prompt,
                                   const PbpParameters& params,
                                   const PbpConfig& cfg, PredictionMode mode,
                                   double lambda, const HeadForwardCache& c,
                                   PbpParameters* grads = nullptr,
                                   Eigen::MatrixXd* dH = nullptr) {
  const int n = prompt.length();
  const Eigen::Index kp = c.Hp.cols();
  HeadLoss loss;

  // Masked-position NLL.
  std::vector<std::pair<int, int>> targets;  // (position, gold id)
  for (std::size_t s = 0; s < prompt.mask_spans.size(); ++s) {
    const MaskSpan& sp = prompt.mask_spans[s];
    for (int j = sp.start; j <= sp.end; ++j)
      targets.emplace_back(j, prompt.gold_ids[s][static_cast<std::size_t>(j - sp.start)]);
  }
  loss.masked_tokens = static_cast<int>(targets.size());
  for (const auto& [j, g] : targets)
    loss.l_plm -= std::log(std::max(c.probs(j, g), 1e-300));

  const int t = type_index(prompt.type);
  loss.l_tc = -std::log(std::max(c.aux_probs(t), 1e-300));
  loss.total = loss.l_plm + lambda * loss.l_tc;

  if (grads == nullptr && dH == nullptr) return loss;

  Eigen::MatrixXd dRep = Eigen::MatrixXd::Zero(n, kp);

  // Vocabulary head.
  for (const auto& [j, g] : targets) {
    Eigen::VectorXd dlogits = c.probs.row(j).transpose();
    dlogits(g) -= 1.0;
    Eigen::VectorXd du = dlogits.cwiseProduct(
        c.u.row(j).transpose().unaryExpr([&](double v) {
          return nn::activate_grad(cfg.activation, v);
        }));
    if (grads != nullptr) grads->Wv += du * c.rep.row(j);
    dRep.row(j) += (params.Wv.transpose() * du).transpose();
  }

  // Auxiliary classifier.
  {
    Eigen::VectorXd dq = c.aux_probs;
    dq(t) -= 1.0;
    dq *= lambda;
    if (grads != nullptr) {
      grads->Wc += dq * c.pooled.transpose();
      grads->bc += dq;
    }
    Eigen::RowVectorXd dpooled =
        (params.Wc.transpose() * dq).transpose() / static_cast<double>(n);
    dRep.rowwise() += dpooled;
  }

  // select_representation.
  Eigen::MatrixXd dHp = Eigen::MatrixXd::Zero(n, kp);
  Eigen::MatrixXd dM = Eigen::MatrixXd::Zero(n, kp);
  switch (mode) {
    case PredictionMode::baseline: dHp = dRep; break;
    case PredictionMode::pbc: dM = dRep; break;
    case PredictionMode::contextual_pbc:
      dHp = 0.5 * dRep;
      dM = 0.5 * dRep;
      break;
  }

  // Per-anchor attention path.
  const double anchor_scale =
      cfg.mixed_mean ? 1.0 / static_cast<double>(c.seqs.size()) : 1.0;
  for (std::size_t a = 0; a < c.seqs.size(); ++a) {
    const Eigen::VectorXd& A = c.A[a];
    const Eigen::MatrixXd& T = c.T[a];
    Eigen::MatrixXd dMa = anchor_scale * dM;

    Eigen::VectorXd dA(n);
    if (cfg.rep_form == RepForm::row_scaled) {
      for (int j = 0; j < n; ++j) {
        dA(j) = dMa.row(j).dot(c.Hp.row(j));
        dHp.row(j) += A(j) * dMa.row(j);
      }
    } else {
      const Eigen::RowVectorXd drow = dMa.colwise().sum();
      for (int j = 0; j < n; ++j) {
        dA(j) = drow.dot(c.Hp.row(j));
        dHp.row(j) += A(j) * drow;
      }
    }

    Eigen::VectorXd dlogits = nn::softmax_backward(A, dA);
    Eigen::MatrixXd dT = params.V * dlogits.transpose();          // k_a x n
    Eigen::MatrixXd dpre = dT.cwiseProduct((1.0 - T.array().square()).matrix());
    if (grads != nullptr) {
      grads->V += T * dlogits;
      grads->W += dpre * c.Hp;
      grads->U += dpre * c.Ps[a];
      Eigen::MatrixXd dPs = dpre.transpose() * params.U;  // n x k_p
      for (int j = 0; j < n; ++j)
        grads->table.matrix.row(params.table.row_index(
            c.seqs[a].ids[static_cast<std::size_t>(j)])) += dPs.row(j);
    }
    dHp += dpre.transpose() * params.W;
  }

  // Split the concatenation back into z_t and H gradients.
  const Eigen::Index d_t = params.Z.cols();
  if (grads != nullptr && d_t > 0)
    grads->Z.row(t) += dHp.leftCols(d_t).colwise().sum();
  if (dH != nullptr) *dH = dHp.rightCols(kp - d_t);

  return loss;
}

// ---------------------------------------------------------------------------
// Full model bundle
// ---------------------------------------------------------------------------

struct PbpModel {
  ToyEncoder encoder;
  PbpConfig cfg;
  PbpParameters params;
  Vocabulary vocab;

  // Forward-only pipeline to per-position vocabulary distributions.
  Eigen::MatrixXd distributions(const EncodedPrompt& prompt,
                                PredictionMode mode) const {
    const HiddenStates hs = encode(prompt, encoder, cfg.layer_mode);
    HeadForwardCache c;
    head_forward(hs.H, prompt, params, cfg, mode, c);
    return c.probs;
  }

  std::vector<std::vector<std::string>> predict_spans(
      const PromptInstance& p, PredictionMode mode) const {
    EncodedPrompt ep;
    ep.ids = vocab.encode(p.tokens);
    ep.mask_spans = p.mask_spans;
    ep.type = p.prompt_type;
    ep.source_id = p.source_id;
    const Eigen::MatrixXd dist = distributions(ep, mode);
    return decode_span_tokens(dist, p.mask_spans, vocab);
  }
};

}  // namespace pbp

#endif  // PBP_MODEL_HPP
