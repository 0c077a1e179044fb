#ifndef PBP_TRAINING_HPP
#define PBP_TRAINING_HPP

#include <chrono>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "pbp/evaluation.hpp"
#include "pbp/model.hpp"

namespace pbp {

enum class Optimizer { adam, sgd };

inline Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam" || s == "adaptive-moment") return Optimizer::adam;
  if (s == "sgd" || s == "plain-sgd") return Optimizer::sgd;
  throw std::invalid_argument("unknown optimizer: " + s);
}

inline const char* to_string(Optimizer o) {
  return o == Optimizer::adam ? "adam" : "sgd";
}

struct TrainingConfig {
  double learning_rate = 5e-5;
  int train_batch_size = 16;
  int eval_batch_size = 8;
  double lambda_aux = 0.1;  // 0 permitted for ablation only
  int max_epochs = 50;
  double target_perplexity = 1.0;
  double target_epsilon = 0.05;
  int patience = 5;
  double saturation_delta = 0.1;  // min val-EM improvement that counts
  std::uint64_t seed = 42;
  Optimizer optimizer = Optimizer::adam;
  bool freeze_encoder = false;

  void validate() const {
    if (lambda_aux < 0.0) throw std::invalid_argument("lambda_aux must be >= 0");
    if (train_batch_size < 1 || eval_batch_size < 1)
      throw std::invalid_argument("batch sizes must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Loss primitives
// ---------------------------------------------------------------------------

// Negative log-likelihood of the gold token at each masked position,
// summed. Unmasked positions contribute nothing.
inline double mlm_loss(const Eigen::MatrixXd& distributions,
                       const EncodedPrompt& prompt) {
  double loss = 0.0;
  for (std::size_t s = 0; s < prompt.mask_spans.size(); ++s) {
    const MaskSpan& sp = prompt.mask_spans[s];
    for (int j = sp.start; j <= sp.end; ++j) {
      const int g = prompt.gold_ids[s][static_cast<std::size_t>(j - sp.start)];
      loss -= std::log(std::max(distributions(j, g), 1e-300));
    }
  }
  return loss;
}

// Cross entropy of the 5-way prompt type classifier on the mean-pooled
// representation.
inline double aux_classification_loss(const Eigen::VectorXd& pooled_rep,
                                      PromptType prompt_type,
                                      const Eigen::MatrixXd& Wc,
                                      const Eigen::VectorXd& bc) {
  const Eigen::VectorXd probs = nn::softmax(Wc * pooled_rep + bc);
  return -std::log(std::max(probs(type_index(prompt_type)), 1e-300));
}

inline double total_loss(double l_plm, double l_tc, double lambda_aux) {
  return l_plm + lambda_aux * l_tc;
}

inline double perplexity(double mean_nll) { return std::exp(mean_nll); }

// ---------------------------------------------------------------------------
// Train log
// ---------------------------------------------------------------------------

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_perplexity = 0.0;
  double val_em = 0.0;
  double val_pm = 0.0;
  double seconds = 0.0;
};

enum class StopReason { max_epochs, reached_perplexity, saturated, aborted, no_op };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::reached_perplexity: return "reached_perplexity";
    case StopReason::saturated: return "validation_saturated";
    case StopReason::aborted: return "aborted";
    case StopReason::no_op: return "no_op";
  }
  throw std::logic_error("bad stop reason");
}

struct TrainLog {
  std::vector<EpochRecord> epochs;
  StopReason stop_reason = StopReason::no_op;
  // First epoch whose train perplexity hit target+epsilon, or -1.
  int epochs_to_target = -1;
};

// Delimited text table; the timestamp lives only in the header line so the
// data rows stay comparable across runs.
inline std::string write_train_log(const TrainLog& log,
                                   const std::string& timestamp = "") {
  std::ostringstream os;
  os << "# pbp train log";
  if (!timestamp.empty()) os << "  " << timestamp;
  os << "\n";
  os << "epoch\tloss\tperplexity\tval_em\tval_pm\tseconds\n";
  for (const auto& e : log.epochs) {
    os << e.epoch << '\t' << e.train_loss << '\t' << e.train_perplexity << '\t'
       << e.val_em << '\t' << e.val_pm << '\t' << e.seconds << '\n';
  }
  os << "# stop_reason=" << to_string(log.stop_reason)
     << " epochs_to_target=" << log.epochs_to_target << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Optimizer state
// ---------------------------------------------------------------------------

namespace detail {

struct AdamState {
  std::vector<Eigen::MatrixXd> m, v;
  long step = 0;

  void init(const std::vector<Eigen::MatrixXd*>& params) {
    for (const auto* p : params) {
      m.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }

  void apply(std::vector<Eigen::MatrixXd*>& params,
             const std::vector<Eigen::MatrixXd*>& grads, double lr,
             Optimizer opt) {
    if (opt == Optimizer::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i)
        *params[i] -= lr * *grads[i];
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++step;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * *grads[i];
      v[i] = b2 * v[i] + (1.0 - b2) * grads[i]->cwiseProduct(*grads[i]);
      params[i]->array() -=
          lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + eps);
    }
  }
};

inline std::vector<Eigen::MatrixXd*> head_blocks(PbpParameters& p,
                                                 Eigen::MatrixXd& v_mat,
                                                 Eigen::MatrixXd& bc_mat) {
  // V and bc are vectors; the block list works on matrices, so the caller
  // provides matrix views that are synced before/after.
  return {&p.W, &p.U, &v_mat, &p.table.matrix, &p.Z, &p.Wv, &p.Wc, &bc_mat};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Validation metrics during training
// ---------------------------------------------------------------------------

inline std::vector<SpanPrediction> predict_set(const PbpModel& model,
                                               const std::vector<EncodedPrompt>& set,
                                               PredictionMode mode) {
  std::vector<SpanPrediction> preds;
  for (const auto& ep : set) {
    if (ep.mask_spans.empty()) continue;
    const Eigen::MatrixXd dist = model.distributions(ep, mode);
    const auto decoded = decode_spans(dist, ep.mask_spans);
    for (std::size_t s = 0; s < decoded.size(); ++s) {
      SpanPrediction sp;
      for (int id : decoded[s]) sp.predicted.push_back(model.vocab.token(id));
      for (int id : ep.gold_ids[s]) sp.gold.push_back(model.vocab.token(id));
      sp.prompt_type = ep.type;
      sp.prompt_length = ep.length();
      preds.push_back(std::move(sp));
    }
  }
  return preds;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

// Fine-tunes encoder (unless frozen) and head parameters on seeded-shuffled
// mini-batches. Stops once train perplexity reaches target+epsilon, when
// validation EM stops improving for `patience` epochs, or at max_epochs.
// The model is left at the best-validation-EM state seen.
inline TrainLog train(PbpModel& model, const std::vector<EncodedPrompt>& train_set,
                      const std::vector<EncodedPrompt>& val_set,
                      const TrainingConfig& tc) {
  tc.validate();
  if (train_set.empty()) throw std::invalid_argument("empty training corpus");
  TrainLog log;
  if (tc.max_epochs <= 0) return log;

  // Matrix views of the two vector-shaped blocks.
  Eigen::MatrixXd v_mat = model.params.V;
  Eigen::MatrixXd bc_mat = model.params.bc;
  std::vector<Eigen::MatrixXd*> params =
      detail::head_blocks(model.params, v_mat, bc_mat);
  if (!tc.freeze_encoder) {
    for (auto* b : model.encoder.parameter_blocks()) params.push_back(b);
  }
  detail::AdamState opt;
  opt.init(params);

  Rng order_rng(tc.seed);
  PbpModel best = model;
  double best_val_em = -1.0;
  int epochs_since_improvement = 0;
  bool have_best = false;
  log.stop_reason = StopReason::max_epochs;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    order_rng.shuffle(order);
    double epoch_loss = 0.0;
    double epoch_nll = 0.0;
    long epoch_masked = 0;
    bool aborted = false;

    for (std::size_t b0 = 0; b0 < order.size() && !aborted;
         b0 += static_cast<std::size_t>(tc.train_batch_size)) {
      const std::size_t b1 =
          std::min(order.size(), b0 + static_cast<std::size_t>(tc.train_batch_size));

      PbpParameters hg = PbpParameters::zeros_like(model.params);
      ToyEncoder eg = ToyEncoder::zeros_like(model.encoder);

      for (std::size_t bi = b0; bi < b1; ++bi) {
        const EncodedPrompt& ep = train_set[order[bi]];
        EncoderCache cache;
        const auto states = model.encoder.forward(ep.ids, &cache);
        Eigen::MatrixXd H;
        if (model.cfg.layer_mode == LayerMode::last_layer) {
          H = states.back();
        } else {
          H = Eigen::MatrixXd::Zero(states.back().rows(), states.back().cols());
          for (const auto& s : states) H += s;
          H /= static_cast<double>(states.size());
        }

        HeadForwardCache fc;
        head_forward(H, ep, model.params, model.cfg, PredictionMode::pbc, fc);
        Eigen::MatrixXd dH;
        const HeadLoss loss = head_loss_backward(ep, model.params, model.cfg,
                                                 PredictionMode::pbc,
                                                 tc.lambda_aux, fc, &hg, &dH);
        if (!std::isfinite(loss.total)) {
          aborted = true;
          break;
        }
        epoch_loss += loss.total;
        epoch_nll += loss.l_plm;
        epoch_masked += loss.masked_tokens;

        if (!tc.freeze_encoder) {
          std::vector<Eigen::MatrixXd> d_states(states.size());
          if (model.cfg.layer_mode == LayerMode::last_layer) {
            d_states.back() = dH;
          } else {
            for (auto& d : d_states) d = dH / static_cast<double>(states.size());
          }
          model.encoder.backward(cache, d_states, eg);
        }
      }
      if (aborted) break;

      Eigen::MatrixXd gv = hg.V;
      Eigen::MatrixXd gbc = hg.bc;
      std::vector<Eigen::MatrixXd*> grads = detail::head_blocks(hg, gv, gbc);
      if (!tc.freeze_encoder) {
        for (auto* b : eg.parameter_blocks()) grads.push_back(b);
      }
      opt.apply(params, grads, tc.learning_rate, tc.optimizer);
      model.params.V = v_mat;
      model.params.bc = bc_mat;
    }

    if (aborted) {
      log.stop_reason = StopReason::aborted;
      break;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss;
    rec.train_perplexity =
        perplexity(epoch_masked > 0 ? epoch_nll / static_cast<double>(epoch_masked)
                                    : 0.0);

    const auto preds = predict_set(model, val_set.empty() ? train_set : val_set,
                                   PredictionMode::pbc);
    if (!preds.empty()) {
      rec.val_em = exact_match(preds);
      rec.val_pm = partial_match(preds);
    }
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    log.epochs.push_back(rec);

    if (rec.val_em >= best_val_em) {
      best = model;
      have_best = true;
    }
    if (rec.val_em > best_val_em + tc.saturation_delta) {
      best_val_em = rec.val_em;
      epochs_since_improvement = 0;
    } else {
      best_val_em = std::max(best_val_em, rec.val_em);
      ++epochs_since_improvement;
    }

    if (log.epochs_to_target < 0 &&
        rec.train_perplexity <= tc.target_perplexity + tc.target_epsilon) {
      log.epochs_to_target = epoch;
      log.stop_reason = StopReason::reached_perplexity;
      break;
    }
    if (epochs_since_improvement >= tc.patience) {
      log.stop_reason = StopReason::saturated;
      break;
    }
  }

  if (have_best) model = best;
  return log;
}

}  // namespace pbp

#endif  // PBP_TRAINING_HPP
