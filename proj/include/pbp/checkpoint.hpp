#ifndef PBP_CHECKPOINT_HPP
#define PBP_CHECKPOINT_HPP

#include <fstream>
#include <string>

#include <json.hpp>

#include "pbp/model.hpp"

namespace pbp {

inline constexpr const char* kCheckpointFormat = "pbp-ckpt-v1";

namespace detail {

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw std::runtime_error("checkpoint matrix shape mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++];
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return matrix_to_json(v);
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  return matrix_from_json(j).col(0);
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const PbpModel& model) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;

  nlohmann::json enc;
  const EncoderConfig& ec = model.encoder.config();
  enc["id"] = ec.identifier();
  enc["vocab_size"] = ec.vocab_size;
  enc["hidden"] = ec.hidden;
  enc["n_layers"] = ec.n_layers;
  enc["ffn"] = ec.ffn;
  enc["max_len"] = ec.max_len;
  nlohmann::json weights;
  weights["tok_emb"] = detail::matrix_to_json(model.encoder.tok_emb);
  weights["pos_emb"] = detail::matrix_to_json(model.encoder.pos_emb);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.encoder.layers) {
    nlohmann::json lj;
    lj["Wq"] = detail::matrix_to_json(l.Wq);
    lj["Wk"] = detail::matrix_to_json(l.Wk);
    lj["Wv"] = detail::matrix_to_json(l.Wv);
    lj["Wo"] = detail::matrix_to_json(l.Wo);
    lj["W1"] = detail::matrix_to_json(l.W1);
    lj["b1"] = detail::matrix_to_json(l.b1);
    lj["W2"] = detail::matrix_to_json(l.W2);
    lj["b2"] = detail::matrix_to_json(l.b2);
    layers.push_back(std::move(lj));
  }
  weights["layers"] = std::move(layers);
  enc["weights"] = std::move(weights);
  j["encoder"] = std::move(enc);

  nlohmann::json pbp;
  pbp["W"] = detail::matrix_to_json(model.params.W);
  pbp["U"] = detail::matrix_to_json(model.params.U);
  pbp["V"] = detail::vector_to_json(model.params.V);
  pbp["P"] = detail::matrix_to_json(model.params.table.matrix);
  pbp["Z"] = detail::matrix_to_json(model.params.Z);
  pbp["Wv"] = detail::matrix_to_json(model.params.Wv);
  pbp["Wc"] = detail::matrix_to_json(model.params.Wc);
  pbp["bc"] = detail::vector_to_json(model.params.bc);
  j["pbp"] = std::move(pbp);

  nlohmann::json cfg;
  cfg["hidden"] = model.cfg.hidden;
  cfg["d_t"] = model.cfg.d_t;
  cfg["k_a"] = model.cfg.k_a;
  cfg["k_p"] = model.cfg.k_p;
  cfg["n_max"] = model.cfg.n_max;
  cfg["vocab_size"] = model.cfg.vocab_size;
  cfg["activation"] = to_string(model.cfg.activation);
  cfg["layer_mode"] = to_string(model.cfg.layer_mode);
  cfg["mixed_mean"] = model.cfg.mixed_mean;
  cfg["rep_form"] =
      model.cfg.rep_form == RepForm::row_scaled ? "row_scaled" : "pooled";
  j["config"] = std::move(cfg);

  j["vocab"] = model.vocab.tokens();
  return j;
}

inline PbpModel checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat)
    throw std::runtime_error("unsupported checkpoint format");

  PbpModel model;
  const auto& cfg = j.at("config");
  model.cfg.hidden = cfg.at("hidden").get<int>();
  model.cfg.d_t = cfg.at("d_t").get<int>();
  model.cfg.k_a = cfg.at("k_a").get<int>();
  model.cfg.k_p = cfg.at("k_p").get<int>();
  model.cfg.n_max = cfg.at("n_max").get<int>();
  model.cfg.vocab_size = cfg.at("vocab_size").get<int>();
  model.cfg.activation = activation_from_string(cfg.at("activation"));
  model.cfg.layer_mode = layer_mode_from_string(cfg.at("layer_mode"));
  model.cfg.mixed_mean = cfg.at("mixed_mean").get<bool>();
  model.cfg.rep_form = cfg.at("rep_form").get<std::string>() == "pooled"
                           ? RepForm::pooled
                           : RepForm::row_scaled;

  const auto& enc = j.at("encoder");
  EncoderConfig ec;
  ec.vocab_size = enc.at("vocab_size").get<int>();
  ec.hidden = enc.at("hidden").get<int>();
  ec.n_layers = enc.at("n_layers").get<int>();
  ec.ffn = enc.at("ffn").get<int>();
  ec.max_len = enc.at("max_len").get<int>();
  if (enc.at("id").get<std::string>() != ec.identifier())
    throw std::runtime_error("unknown encoder identifier in checkpoint");
  Rng dummy(0);
  model.encoder = ToyEncoder(ec, dummy);
  const auto& w = enc.at("weights");
  model.encoder.tok_emb = detail::matrix_from_json(w.at("tok_emb"));
  model.encoder.pos_emb = detail::matrix_from_json(w.at("pos_emb"));
  const auto& layers = w.at("layers");
  if (layers.size() != model.encoder.layers.size())
    throw std::runtime_error("checkpoint layer count mismatch");
  for (std::size_t i = 0; i < model.encoder.layers.size(); ++i) {
    auto& l = model.encoder.layers[i];
    const auto& lj = layers[i];
    l.Wq = detail::matrix_from_json(lj.at("Wq"));
    l.Wk = detail::matrix_from_json(lj.at("Wk"));
    l.Wv = detail::matrix_from_json(lj.at("Wv"));
    l.Wo = detail::matrix_from_json(lj.at("Wo"));
    l.W1 = detail::matrix_from_json(lj.at("W1"));
    l.b1 = detail::matrix_from_json(lj.at("b1"));
    l.W2 = detail::matrix_from_json(lj.at("W2"));
    l.b2 = detail::matrix_from_json(lj.at("b2"));
  }

  const auto& pbp = j.at("pbp");
  model.params.W = detail::matrix_from_json(pbp.at("W"));
  model.params.U = detail::matrix_from_json(pbp.at("U"));
  model.params.V = detail::vector_from_json(pbp.at("V"));
  model.params.table.matrix = detail::matrix_from_json(pbp.at("P"));
  model.params.table.n_max = model.cfg.n_max;
  model.params.Z = detail::matrix_from_json(pbp.at("Z"));
  model.params.Wv = detail::matrix_from_json(pbp.at("Wv"));
  model.params.Wc = detail::matrix_from_json(pbp.at("Wc"));
  model.params.bc = detail::vector_from_json(pbp.at("bc"));

  model.vocab =
      Vocabulary::from_token_list(j.at("vocab").get<std::vector<std::string>>());
  if (model.vocab.size() != model.cfg.vocab_size)
    throw std::runtime_error("checkpoint vocabulary size mismatch");
  return model;
}

inline void save_checkpoint(const PbpModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << checkpoint_to_json(model).dump() << "\n";
}

inline PbpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  return checkpoint_from_json(j);
}

}  // namespace pbp

#endif  // PBP_CHECKPOINT_HPP
