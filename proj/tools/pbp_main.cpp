// pbp: prepare / train / eval / probe / ablate-masking / synth over the
// position-based prompting pipeline.
//
// Exit codes: 0 success, 2 usage or input error, 3 runtime abort.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "pbp/checkpoint.hpp"
#include "pbp/training.hpp"

namespace fs = std::filesystem;
using namespace pbp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitAbort = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

std::string timestamp_utc() {
  char buf[32];
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared option bundles
// ---------------------------------------------------------------------------

struct TrainFlags {
  double lr = 5e-5;
  double lambda = 0.1;
  int train_batch = 16;
  int eval_batch = 8;
  int max_epochs = 50;
  std::uint64_t seed = 42;
  std::string optimizer = "adam";
  std::string layer_mode = "last";
  double target_perplexity = 1.0;
  double target_epsilon = 0.05;
  int patience = 5;
  bool freeze_encoder = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--lr", lr, "learning rate");
    cmd->add_option("--lambda", lambda, "auxiliary loss weight");
    cmd->add_option("--train-batch", train_batch, "training batch size");
    cmd->add_option("--eval-batch", eval_batch, "evaluation batch size");
    cmd->add_option("--max-epochs", max_epochs, "maximum training epochs");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--optimizer", optimizer, "adam or sgd");
    cmd->add_option("--layer-mode", layer_mode, "last or meanpool")
        ->check(CLI::IsMember({"last", "meanpool"}));
    cmd->add_option("--target-perplexity", target_perplexity,
                    "training perplexity target");
    cmd->add_option("--target-epsilon", target_epsilon, "target tolerance");
    cmd->add_option("--patience", patience, "validation patience (epochs)");
    cmd->add_flag("--freeze-encoder", freeze_encoder,
                  "train the head only, keep encoder weights fixed");
  }

  TrainingConfig to_config() const {
    TrainingConfig tc;
    tc.learning_rate = lr;
    tc.lambda_aux = lambda;
    tc.train_batch_size = train_batch;
    tc.eval_batch_size = eval_batch;
    tc.max_epochs = max_epochs;
    tc.seed = seed;
    tc.optimizer = optimizer_from_string(optimizer);
    tc.target_perplexity = target_perplexity;
    tc.target_epsilon = target_epsilon;
    tc.patience = patience;
    tc.freeze_encoder = freeze_encoder;
    return tc;
  }

  void print_effective(const std::string& cmd) const {
    std::cout << "effective-config: command=" << cmd << " lr=" << lr
              << " lambda=" << lambda << " train-batch=" << train_batch
              << " eval-batch=" << eval_batch << " max-epochs=" << max_epochs
              << " seed=" << seed << " optimizer=" << optimizer
              << " layer-mode=" << layer_mode
              << " target-perplexity=" << target_perplexity
              << " target-epsilon=" << target_epsilon
              << " patience=" << patience
              << " freeze-encoder=" << (freeze_encoder ? "1" : "0") << "\n";
  }
};

// ---------------------------------------------------------------------------
// Model construction (with the PBP_CACHE_DIR encoder-init cache)
// ---------------------------------------------------------------------------

ToyEncoder init_encoder(const EncoderConfig& ec, std::uint64_t seed) {
  const char* cache_dir = std::getenv("PBP_CACHE_DIR");
  std::string cache_path;
  if (cache_dir != nullptr && *cache_dir != '\0') {
    std::ostringstream name;
    name << ec.identifier() << "-v" << ec.vocab_size << "-h" << ec.hidden
         << "-l" << ec.n_layers << "-f" << ec.ffn << "-m" << ec.max_len
         << "-s" << seed << ".json";
    cache_path = (fs::path(cache_dir) / name.str()).string();
    std::ifstream in(cache_path);
    if (in) {
      nlohmann::json j;
      in >> j;
      Rng rng(seed);
      ToyEncoder enc(ec, rng);  // shapes, then overwrite
      enc.tok_emb = detail::matrix_from_json(j.at("tok_emb"));
      enc.pos_emb = detail::matrix_from_json(j.at("pos_emb"));
      for (std::size_t l = 0; l < enc.layers.size(); ++l) {
        const auto& lj = j.at("layers").at(l);
        enc.layers[l].Wq = detail::matrix_from_json(lj.at("Wq"));
        enc.layers[l].Wk = detail::matrix_from_json(lj.at("Wk"));
        enc.layers[l].Wv = detail::matrix_from_json(lj.at("Wv"));
        enc.layers[l].Wo = detail::matrix_from_json(lj.at("Wo"));
        enc.layers[l].W1 = detail::matrix_from_json(lj.at("W1"));
        enc.layers[l].b1 = detail::matrix_from_json(lj.at("b1"));
        enc.layers[l].W2 = detail::matrix_from_json(lj.at("W2"));
        enc.layers[l].b2 = detail::matrix_from_json(lj.at("b2"));
      }
      return enc;
    }
  }
  Rng rng(seed);
  ToyEncoder enc(ec, rng);
  if (!cache_path.empty()) {
    nlohmann::json j;
    j["tok_emb"] = detail::matrix_to_json(enc.tok_emb);
    j["pos_emb"] = detail::matrix_to_json(enc.pos_emb);
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : enc.layers) {
      layers.push_back({{"Wq", detail::matrix_to_json(l.Wq)},
                        {"Wk", detail::matrix_to_json(l.Wk)},
                        {"Wv", detail::matrix_to_json(l.Wv)},
                        {"Wo", detail::matrix_to_json(l.Wo)},
                        {"W1", detail::matrix_to_json(l.W1)},
                        {"b1", detail::matrix_to_json(l.b1)},
                        {"W2", detail::matrix_to_json(l.W2)},
                        {"b2", detail::matrix_to_json(l.b2)}});
    }
    j["layers"] = std::move(layers);
    write_file(cache_path, j.dump() + "\n");
  }
  return enc;
}

PbpModel make_model(const Vocabulary& vocab, std::uint64_t seed,
                    LayerMode layer_mode) {
  EncoderConfig ec;
  ec.vocab_size = vocab.size();
  ec.hidden = 64;
  ec.n_layers = 2;
  ec.ffn = 128;
  ec.max_len = 64;

  PbpModel m;
  m.vocab = vocab;
  m.encoder = init_encoder(ec, seed);
  m.cfg.hidden = ec.hidden;
  m.cfg.d_t = 50;
  m.cfg.k_a = 200;
  m.cfg.k_p = 300;
  m.cfg.n_max = ec.max_len;
  m.cfg.vocab_size = vocab.size();
  m.cfg.layer_mode = layer_mode;
  Rng rng(seed + 1);
  m.params = PbpParameters(m.cfg, rng);
  return m;
}

// ---------------------------------------------------------------------------
// Prompt file IO
// ---------------------------------------------------------------------------

struct TaggedPrompt {
  PromptInstance instance;
  std::vector<int> span_frequencies;  // empty when untagged
};

std::vector<TaggedPrompt> read_tagged_prompts(const std::string& path) {
  const std::string text = read_file(path);
  if (!valid_utf8(text))
    throw UsageError("prompt file is not valid UTF-8: " + path);
  std::vector<TaggedPrompt> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line);
    TaggedPrompt tp;
    tp.instance = prompt_from_json(j);
    if (j.contains("span_frequencies"))
      tp.span_frequencies = j.at("span_frequencies").get<std::vector<int>>();
    out.push_back(std::move(tp));
  }
  return out;
}

std::vector<EncodedPrompt> encode_all(const std::vector<PromptInstance>& ps,
                                      const Vocabulary& vocab) {
  std::vector<EncodedPrompt> out;
  out.reserve(ps.size());
  for (const auto& p : ps) out.push_back(encode_prompt(p, vocab));
  return out;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

int cmd_synth(std::uint64_t seed, int sentences, int vocab,
              const std::string& out_path) {
  const auto corpus = generate_synthetic_corpus(seed, sentences, vocab);
  std::string body;
  for (const auto& s : corpus) {
    body += to_json(s).dump();
    body += '\n';
  }
  write_file(out_path, body);
  std::cout << "wrote " << corpus.size() << " sentences to " << out_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

int cmd_prepare(const std::string& corpus_path, const std::string& out_dir,
                const std::string& masking, double rate, std::uint64_t seed,
                double train_fraction) {
  const auto sentences = parse_annotations(read_file(corpus_path), "c");
  if (sentences.empty())
    throw UsageError("no sentences parsed from: " + corpus_path);

  std::vector<PromptInstance> prompts;
  long masked_tokens = 0;
  long total_tokens = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    PromptInstance p =
        masking == "custom"
            ? apply_custom_masking(sentences[i])
            : apply_random_masking(sentences[i], rate,
                                   seed + static_cast<std::uint64_t>(i));
    total_tokens += static_cast<long>(sentences[i].tokens.size());
    for (const auto& sp : p.mask_spans) masked_tokens += sp.end - sp.start + 1;
    prompts.push_back(std::move(p));
  }

  SplitSpec spec;
  spec.train_fraction = train_fraction;
  spec.seed = seed;
  const auto [train, test] = split_dataset(prompts, spec);
  const auto general = build_generalisation_testset(train, test, spec);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  write_file((dir / "train.jsonl").string(), write_prompt_records(train));
  write_file((dir / "test.jsonl").string(), write_prompt_records(test));

  std::string gen_body;
  for (const auto& g : general) {
    nlohmann::json j = to_json(g.instance);
    j["span_frequencies"] = g.span_frequencies;
    gen_body += j.dump();
    gen_body += '\n';
  }
  write_file((dir / "general.jsonl").string(), gen_body);

  std::map<PromptType, int> counts;
  for (const auto& p : prompts) ++counts[p.prompt_type];
  std::ostringstream summary;
  summary << "masking=" << masking << " seed=" << seed
          << " sentences=" << sentences.size() << " train=" << train.size()
          << " test=" << test.size() << " general=" << general.size() << "\n";
  for (PromptType t : {PromptType::no_blank, PromptType::postfix,
                       PromptType::prefix, PromptType::cloze,
                       PromptType::mixed})
    summary << to_string(t) << "\t" << counts[t] << "\n";
  if (masking == "random") {
    summary << "masked_token_fraction\t"
            << static_cast<double>(masked_tokens) /
                   static_cast<double>(total_tokens)
            << "\n";
  }
  write_file((dir / "summary.txt").string(), summary.str());
  std::cout << summary.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const std::string& prompts_dir, const std::string& ckpt_path,
              const std::string& log_path, const TrainFlags& flags) {
  flags.print_effective("train");
  const fs::path dir(prompts_dir);
  const auto train_tagged = read_tagged_prompts((dir / "train.jsonl").string());
  std::vector<PromptInstance> train_prompts;
  for (const auto& tp : train_tagged) train_prompts.push_back(tp.instance);

  std::vector<PromptInstance> val_prompts;
  const fs::path test_path = dir / "test.jsonl";
  if (fs::exists(test_path)) {
    for (const auto& tp : read_tagged_prompts(test_path.string()))
      val_prompts.push_back(tp.instance);
  }

  std::vector<PromptInstance> all = train_prompts;
  all.insert(all.end(), val_prompts.begin(), val_prompts.end());
  const Vocabulary vocab = Vocabulary::from_prompts(all);

  PbpModel model = make_model(vocab, flags.seed,
                              layer_mode_from_string(flags.layer_mode));
  const auto train_set = encode_all(train_prompts, vocab);
  const auto val_set = encode_all(val_prompts, vocab);
  const TrainingConfig tc = flags.to_config();

  const TrainLog log = train(model, train_set, val_set, tc);
  for (const auto& e : log.epochs)
    std::cout << "epoch " << e.epoch << "  loss=" << e.train_loss
              << "  ppl=" << e.train_perplexity << "  val_em=" << e.val_em
              << "  val_pm=" << e.val_pm << "\n";
  std::cout << "stop_reason=" << to_string(log.stop_reason)
            << " epochs_to_target=" << log.epochs_to_target << "\n";

  const std::string actual_log =
      log_path.empty() ? ckpt_path + ".trainlog" : log_path;
  write_file(actual_log, write_train_log(log, timestamp_utc()));
  if (log.stop_reason == StopReason::aborted) {
    std::cerr << "error: training aborted on non-finite loss; partial log in "
              << actual_log << "\n";
    return kExitAbort;
  }
  save_checkpoint(model, ckpt_path);
  std::cout << "checkpoint written to " << ckpt_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const std::string& ckpt_path, const std::string& prompts_path,
             const std::string& report_path, const std::string& mode_str) {
  const PredictionMode mode = prediction_mode_from_string(mode_str);
  const PbpModel model = load_checkpoint(ckpt_path);
  const auto tagged = read_tagged_prompts(prompts_path);
  if (tagged.empty()) throw UsageError("empty test file: " + prompts_path);

  std::vector<SpanPrediction> preds;
  double entropy_sum = 0.0;
  long entropy_count = 0;
  for (const auto& tp : tagged) {
    const PromptInstance& p = tp.instance;
    if (p.mask_spans.empty()) continue;
    EncodedPrompt ep;
    ep.ids = model.vocab.encode(p.tokens);
    ep.mask_spans = p.mask_spans;
    ep.type = p.prompt_type;
    ep.source_id = p.source_id;

    const HiddenStates hs = encode(ep, model.encoder, model.cfg.layer_mode);
    HeadForwardCache c;
    head_forward(hs.H, ep, model.params, model.cfg, mode, c);
    if (mode != PredictionMode::baseline) {
      for (const auto& A : c.A) {
        double h = 0.0;
        for (Eigen::Index i = 0; i < A.size(); ++i)
          h -= A(i) * std::log(std::max(A(i), 1e-300));
        entropy_sum += h;
        ++entropy_count;
      }
    }
    const auto decoded = decode_span_tokens(c.probs, p.mask_spans, model.vocab);
    for (std::size_t s = 0; s < decoded.size(); ++s) {
      SpanPrediction sp;
      sp.predicted = decoded[s];
      sp.gold = p.gold_answers[s];
      sp.prompt_type = p.prompt_type;
      sp.prompt_length = static_cast<int>(p.tokens.size());
      sp.outcome_train_frequency =
          s < tp.span_frequencies.size() ? tp.span_frequencies[s] : 0;
      preds.push_back(std::move(sp));
    }
  }
  if (preds.empty()) throw UsageError("no masked spans in: " + prompts_path);

  const EvalReport report = build_report(preds);
  std::ostringstream text;
  text << "mode=" << to_string(mode) << "\n";
  if (mode != PredictionMode::baseline && entropy_count > 0) {
    text << "attention: mean_entropy="
         << entropy_sum / static_cast<double>(entropy_count)
         << " anchors=" << entropy_count << "\n";
  }
  text << render_report_text(report);
  write_file(report_path, text.str());
  write_file(report_path + ".jsonl", render_report_records(report));
  std::cout << "EM=" << report.em << " PM=" << report.pm
            << " spans=" << report.total_spans << "\n";
  std::cout << "report written to " << report_path << " (+.jsonl)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

int cmd_probe(const std::string& ckpt_path, const std::string& text, int topk,
              const std::string& mode_str) {
  const PredictionMode mode = prediction_mode_from_string(mode_str);
  const PbpModel model = load_checkpoint(ckpt_path);

  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  if (tokens.empty()) throw UsageError("empty prompt text");

  std::vector<MaskSpan> spans;
  for (int j = 0; j < static_cast<int>(tokens.size()); ++j) {
    if (tokens[static_cast<std::size_t>(j)] != kMaskToken) continue;
    if (!spans.empty() && spans.back().end == j - 1)
      spans.back().end = j;
    else
      spans.push_back({j, j});
  }
  if (spans.empty())
    throw UsageError(std::string("prompt contains no ") + kMaskToken +
                     " sentinel");

  EncodedPrompt ep;
  ep.ids = model.vocab.encode(tokens);
  ep.mask_spans = spans;
  ep.type = classify_prompt_type(spans, tokens);
  ep.source_id = "probe";

  const Eigen::MatrixXd dist = model.distributions(ep, mode);
  std::cout << "type=" << to_string(ep.type) << " mode=" << to_string(mode)
            << "\n";
  for (std::size_t s = 0; s < spans.size(); ++s) {
    for (int j = spans[s].start; j <= spans[s].end; ++j) {
      std::vector<int> order(static_cast<std::size_t>(dist.cols()));
      for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = static_cast<int>(i);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return dist(j, a) > dist(j, b);
      });
      std::cout << "mask[" << s << "] pos=" << j << ":";
      for (int r = 0; r < topk && r < static_cast<int>(order.size()); ++r)
        std::cout << " " << model.vocab.token(order[static_cast<std::size_t>(r)])
                  << "=" << dist(j, order[static_cast<std::size_t>(r)]);
      std::cout << "\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate-masking
// ---------------------------------------------------------------------------

struct AblationRun {
  TrainLog log;
  bool reached = false;
};

AblationRun run_masking_mode(const std::vector<AnnotatedSentence>& sentences,
                             const std::string& masking, double rate,
                             const TrainFlags& flags) {
  std::vector<PromptInstance> prompts;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    prompts.push_back(masking == "custom"
                          ? apply_custom_masking(sentences[i])
                          : apply_random_masking(
                                sentences[i], rate,
                                flags.seed + static_cast<std::uint64_t>(i)));
  }
  const Vocabulary vocab = Vocabulary::from_prompts(prompts);
  PbpModel model = make_model(vocab, flags.seed,
                              layer_mode_from_string(flags.layer_mode));
  const auto set = encode_all(prompts, vocab);
  TrainingConfig tc = flags.to_config();
  tc.patience = tc.max_epochs + 1;  // run to target or max, never saturate

  AblationRun run;
  run.log = train(model, set, {}, tc);
  run.reached = run.log.epochs_to_target >= 0;
  return run;
}

int cmd_ablate(const std::string& corpus_path, const std::string& report_path,
               double rate, const TrainFlags& flags) {
  flags.print_effective("ablate-masking");
  const auto sentences = parse_annotations(read_file(corpus_path), "c");
  if (sentences.empty())
    throw UsageError("no sentences parsed from: " + corpus_path);

  const AblationRun custom = run_masking_mode(sentences, "custom", rate, flags);
  const AblationRun random = run_masking_mode(sentences, "random", rate, flags);

  auto cell = [&](const AblationRun& r) {
    if (r.reached) return std::to_string(r.log.epochs_to_target);
    return "not reached (>" + std::to_string(flags.max_epochs) + ")";
  };
  std::ostringstream os;
  os << "# masking ablation  seed=" << flags.seed
     << " target=" << flags.target_perplexity << "+" << flags.target_epsilon
     << " max_epochs=" << flags.max_epochs << "\n";
  os << "mode\tepochs_to_target\tfinal_perplexity\n";
  os << "custom\t" << cell(custom) << "\t"
     << custom.log.epochs.back().train_perplexity << "\n";
  os << "random\t" << cell(random) << "\t"
     << random.log.epochs.back().train_perplexity << "\n";
  for (const auto* pair : {&custom, &random}) {
    os << "# series " << (pair == &custom ? "custom" : "random") << ":";
    for (const auto& e : pair->log.epochs) os << " " << e.train_perplexity;
    os << "\n";
  }
  write_file(report_path, os.str());
  std::cout << os.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"position-based prompting pipeline"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::uint64_t synth_seed = 7;
  int synth_sentences = 100;
  int synth_vocab = 200;
  std::string synth_out;
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--sentences", synth_sentences, "number of sentences");
  synth->add_option("--vocab", synth_vocab, "vocabulary size");
  synth->add_option("--corpus", synth_out, "output corpus path")->required();
  synth->set_config("--config");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "build prompt files");
  std::string prep_corpus, prep_out, prep_masking = "custom";
  double prep_rate = 0.15, prep_train_fraction = 0.8;
  std::uint64_t prep_seed = 42;
  prepare->add_option("--corpus", prep_corpus, "annotated corpus path")
      ->required();
  prepare->add_option("--prompts", prep_out, "output directory")->required();
  prepare->add_option("--masking", prep_masking, "custom or random")
      ->check(CLI::IsMember({"custom", "random"}));
  prepare->add_option("--rate", prep_rate, "random masking rate");
  prepare->add_option("--seed", prep_seed, "random seed");
  prepare->add_option("--train-fraction", prep_train_fraction,
                      "train split fraction");
  prepare->set_config("--config");

  // train
  auto* train_cmd = app.add_subcommand("train", "fine-tune on prompt files");
  std::string train_prompts, train_ckpt, train_log;
  TrainFlags train_flags;
  train_cmd->add_option("--prompts", train_prompts, "prepared prompt directory")
      ->required();
  train_cmd->add_option("--checkpoint", train_ckpt, "checkpoint output path")
      ->required();
  train_cmd->add_option("--report", train_log, "train log output path");
  train_flags.attach(train_cmd);
  train_cmd->set_config("--config");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_prompts, eval_report, eval_mode = "pbc";
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--prompts", eval_prompts, "prompt file to evaluate")
      ->required();
  eval_cmd->add_option("--report", eval_report, "report output path")
      ->required();
  eval_cmd->add_option("--mode", eval_mode,
                       "baseline, pbc, or contextual-pbc");
  eval_cmd->set_config("--config");

  // probe
  auto* probe = app.add_subcommand("probe", "rank candidates for one prompt");
  std::string probe_ckpt, probe_text, probe_mode = "contextual-pbc";
  int probe_topk = 5;
  probe->add_option("--checkpoint", probe_ckpt, "checkpoint path")->required();
  probe->add_option("--text", probe_text, "prompt text with [MASK] sentinels")
      ->required();
  probe->add_option("--topk", probe_topk, "candidates per mask");
  probe->add_option("--mode", probe_mode, "prediction mode");
  probe->set_config("--config");

  // ablate-masking
  auto* ablate = app.add_subcommand("ablate-masking",
                                    "compare custom vs random masking");
  std::string abl_corpus, abl_report;
  double abl_rate = 0.15;
  TrainFlags abl_flags;
  ablate->add_option("--corpus", abl_corpus, "annotated corpus path")
      ->required();
  ablate->add_option("--report", abl_report, "comparison output path")
      ->required();
  ablate->add_option("--rate", abl_rate, "random masking rate");
  abl_flags.attach(ablate);
  ablate->set_config("--config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_seed, synth_sentences, synth_vocab, synth_out);
    if (prepare->parsed())
      return cmd_prepare(prep_corpus, prep_out, prep_masking, prep_rate,
                         prep_seed, prep_train_fraction);
    if (train_cmd->parsed())
      return cmd_train(train_prompts, train_ckpt, train_log, train_flags);
    if (eval_cmd->parsed())
      return cmd_eval(eval_ckpt, eval_prompts, eval_report, eval_mode);
    if (probe->parsed())
      return cmd_probe(probe_ckpt, probe_text, probe_topk, probe_mode);
    if (ablate->parsed())
      return cmd_ablate(abl_corpus, abl_report, abl_rate, abl_flags);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitAbort;
  }
  return kExitUsage;
}
