#ifndef PBP_ENCODER_HPP
#define PBP_ENCODER_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "pbp/nn.hpp"

namespace pbp {

// A small trainable bidirectional masked-LM encoder: token + absolute
// position embeddings followed by single-head self-attention blocks with
// gelu feed-forward sublayers and residual connections. Written in float64
// with hand-rolled backward passes; sized for desk-scale experiments, not
// for production pretraining.
struct EncoderConfig {
  int vocab_size = 0;
  int hidden = 64;
  int n_layers = 2;
  int ffn = 128;
  int max_len = 64;
  std::string identifier() const { return "toy-transformer-v1"; }
};

struct EncoderLayerParams {
  Eigen::MatrixXd Wq, Wk, Wv, Wo;  // hidden x hidden
  Eigen::MatrixXd W1;              // hidden x ffn
  Eigen::MatrixXd b1;              // 1 x ffn
  Eigen::MatrixXd W2;              // ffn x hidden
  Eigen::MatrixXd b2;              // 1 x hidden
};

struct EncoderCacheLayer {
  Eigen::MatrixXd Xin, Q, K, V, A, C, X1, F1, Fh, Xout;
};

struct EncoderCache {
  std::vector<int> ids;
  Eigen::MatrixXd X0;                    // embeddings, n x hidden
  std::vector<EncoderCacheLayer> layers; // per-layer intermediates
};

class ToyEncoder {
 public:
  ToyEncoder() = default;

  ToyEncoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg) {
    tok_emb = Eigen::MatrixXd(cfg.vocab_size, cfg.hidden);
    pos_emb = Eigen::MatrixXd(cfg.max_len, cfg.hidden);
    nn::randomize(tok_emb, rng, 0.08);
    nn::randomize(pos_emb, rng, 0.08);
    layers.resize(static_cast<std::size_t>(cfg.n_layers));
    const double ws = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    for (auto& l : layers) {
      l.Wq = Eigen::MatrixXd(cfg.hidden, cfg.hidden);
      l.Wk = Eigen::MatrixXd(cfg.hidden, cfg.hidden);
      l.Wv = Eigen::MatrixXd(cfg.hidden, cfg.hidden);
      l.Wo = Eigen::MatrixXd(cfg.hidden, cfg.hidden);
      l.W1 = Eigen::MatrixXd(cfg.hidden, cfg.ffn);
      l.b1 = Eigen::MatrixXd::Zero(1, cfg.ffn);
      l.W2 = Eigen::MatrixXd(cfg.ffn, cfg.hidden);
      l.b2 = Eigen::MatrixXd::Zero(1, cfg.hidden);
      nn::randomize(l.Wq, rng, ws);
      nn::randomize(l.Wk, rng, ws);
      nn::randomize(l.Wv, rng, ws);
      nn::randomize(l.Wo, rng, ws);
      nn::randomize(l.W1, rng, ws);
      nn::randomize(l.W2, rng, 1.0 / std::sqrt(static_cast<double>(cfg.ffn)));
    }
  }

  const EncoderConfig& config() const { return cfg_; }

  // Per-layer output states; cache (when given) retains everything the
  // backward pass needs.
  std::vector<Eigen::MatrixXd> forward(const std::vector<int>& ids,
                                       EncoderCache* cache = nullptr) const {
    const int n = static_cast<int>(ids.size());
    if (n > cfg_.max_len)
      throw std::runtime_error("sequence longer than encoder max length");
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden));

    Eigen::MatrixXd x(n, cfg_.hidden);
    for (int j = 0; j < n; ++j)
      x.row(j) = tok_emb.row(ids[static_cast<std::size_t>(j)]) + pos_emb.row(j);
    if (cache != nullptr) {
      cache->ids = ids;
      cache->X0 = x;
      cache->layers.clear();
    }

    std::vector<Eigen::MatrixXd> states;
    for (const auto& l : layers) {
      EncoderCacheLayer c;
      c.Xin = x;
      c.Q = x * l.Wq;
      c.K = x * l.Wk;
      c.V = x * l.Wv;
      c.A = scale * c.Q * c.K.transpose();
      nn::softmax_rows_inplace(c.A);
      c.C = c.A * c.V;
      c.X1 = x + c.C * l.Wo;
      c.F1 = (c.X1 * l.W1).rowwise() + l.b1.row(0);
      c.Fh = nn::apply(Activation::gelu, c.F1);
      c.Xout = c.X1 + ((c.Fh * l.W2).rowwise() + l.b2.row(0)).eval();
      x = c.Xout;
      states.push_back(x);
      if (cache != nullptr) cache->layers.push_back(std::move(c));
    }
    return states;
  }

  // Accumulates gradients into `grads` (an encoder with zeroed weights).
  // d_states holds dL/d(layer output) for every layer; entries may be
  // empty (size 0) when a layer output receives no direct gradient.
  void backward(const EncoderCache& cache,
                const std::vector<Eigen::MatrixXd>& d_states,
                ToyEncoder& grads) const {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.hidden));
    const int n = static_cast<int>(cache.ids.size());
    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(n, cfg_.hidden);

    for (int li = cfg_.n_layers - 1; li >= 0; --li) {
      const auto lu = static_cast<std::size_t>(li);
      if (d_states[lu].size() > 0) dx += d_states[lu];
      const EncoderLayerParams& l = layers[lu];
      EncoderLayerParams& g = grads.layers[lu];
      const EncoderCacheLayer& c = cache.layers[lu];

      // Feed-forward sublayer.
      Eigen::MatrixXd dFh = dx * l.W2.transpose();
      g.W2 += c.Fh.transpose() * dx;
      g.b2.row(0) += dx.colwise().sum();
      Eigen::MatrixXd dF1 =
          dFh.cwiseProduct(nn::apply_grad(Activation::gelu, c.F1));
      g.W1 += c.X1.transpose() * dF1;
      g.b1.row(0) += dF1.colwise().sum();
      Eigen::MatrixXd dX1 = dx + dF1 * l.W1.transpose();

      // Attention sublayer.
      g.Wo += c.C.transpose() * dX1;
      Eigen::MatrixXd dC = dX1 * l.Wo.transpose();
      Eigen::MatrixXd dA = dC * c.V.transpose();
      Eigen::MatrixXd dV = c.A.transpose() * dC;
      Eigen::MatrixXd dS(n, n);
      for (int i = 0; i < n; ++i) {
        const double dot = c.A.row(i).dot(dA.row(i));
        dS.row(i) = c.A.row(i).cwiseProduct((dA.row(i).array() - dot).matrix());
      }
      Eigen::MatrixXd dQ = scale * dS * c.K;
      Eigen::MatrixXd dK = scale * dS.transpose() * c.Q;
      g.Wq += c.Xin.transpose() * dQ;
      g.Wk += c.Xin.transpose() * dK;
      g.Wv += c.Xin.transpose() * dV;
      dx = dX1 + dQ * l.Wq.transpose() + dK * l.Wk.transpose() +
           dV * l.Wv.transpose();
    }

    for (int j = 0; j < n; ++j) {
      grads.tok_emb.row(cache.ids[static_cast<std::size_t>(j)]) += dx.row(j);
      grads.pos_emb.row(j) += dx.row(j);
    }
  }

  static ToyEncoder zeros_like(const ToyEncoder& other) {
    ToyEncoder z;
    z.cfg_ = other.cfg_;
    z.tok_emb = Eigen::MatrixXd::Zero(other.tok_emb.rows(), other.tok_emb.cols());
    z.pos_emb = Eigen::MatrixXd::Zero(other.pos_emb.rows(), other.pos_emb.cols());
    z.layers.resize(other.layers.size());
    for (std::size_t i = 0; i < other.layers.size(); ++i) {
      const auto& o = other.layers[i];
      auto& l = z.layers[i];
      l.Wq = Eigen::MatrixXd::Zero(o.Wq.rows(), o.Wq.cols());
      l.Wk = Eigen::MatrixXd::Zero(o.Wk.rows(), o.Wk.cols());
      l.Wv = Eigen::MatrixXd::Zero(o.Wv.rows(), o.Wv.cols());
      l.Wo = Eigen::MatrixXd::Zero(o.Wo.rows(), o.Wo.cols());
      l.W1 = Eigen::MatrixXd::Zero(o.W1.rows(), o.W1.cols());
      l.b1 = Eigen::MatrixXd::Zero(o.b1.rows(), o.b1.cols());
      l.W2 = Eigen::MatrixXd::Zero(o.W2.rows(), o.W2.cols());
      l.b2 = Eigen::MatrixXd::Zero(o.b2.rows(), o.b2.cols());
    }
    return z;
  }

  std::vector<Eigen::MatrixXd*> parameter_blocks() {
    std::vector<Eigen::MatrixXd*> out{&tok_emb, &pos_emb};
    for (auto& l : layers) {
      out.push_back(&l.Wq);
      out.push_back(&l.Wk);
      out.push_back(&l.Wv);
      out.push_back(&l.Wo);
      out.push_back(&l.W1);
      out.push_back(&l.b1);
      out.push_back(&l.W2);
      out.push_back(&l.b2);
    }
    return out;
  }

  Eigen::MatrixXd tok_emb;
  Eigen::MatrixXd pos_emb;
  std::vector<EncoderLayerParams> layers;

 private:
  EncoderConfig cfg_;
};

}  // namespace pbp

#endif  // PBP_ENCODER_HPP
