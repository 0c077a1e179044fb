#ifndef PBP_CORPUS_HPP
#define PBP_CORPUS_HPP

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbp/common.hpp"

namespace pbp {

struct OutcomeSpan {
  int start = 0;
  int end = 0;  // inclusive
  std::string label;
};

struct AnnotatedSentence {
  std::vector<std::string> tokens;
  std::vector<OutcomeSpan> outcome_spans;  // non-overlapping, sorted by start
  std::string source_id;
};

struct MaskSpan {
  int start = 0;
  int end = 0;  // inclusive
  bool operator==(const MaskSpan&) const = default;
};

struct PromptInstance {
  std::vector<std::string> tokens;  // masked positions hold kMaskToken
  std::vector<MaskSpan> mask_spans;
  std::vector<std::vector<std::string>> gold_answers;  // aligned with mask_spans
  PromptType prompt_type = PromptType::no_blank;
  std::string source_id;
};

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  double context_overlap_threshold = 0.5;
};

namespace detail {

inline void check_spans(const std::vector<MaskSpan>& spans, int n) {
  int prev_end = -1;
  for (const auto& sp : spans) {
    if (sp.start < 0 || sp.end < sp.start || sp.end >= n)
      throw std::out_of_range("mask span out of bounds");
    if (sp.start <= prev_end)
      throw std::invalid_argument("mask spans overlap or unsorted");
    prev_end = sp.end;
  }
}

inline bool terminal_punct(const std::string& tok) {
  return tok == "." || tok == "?" || tok == "!";
}

}  // namespace detail

// Five-way prompt type from mask span layout alone. A span that covers
// the whole sequence is a degenerate case the classification rules do
// not otherwise pin down; it goes to cloze with a warning on stderr.
// `tokens` (when given) lets a single trailing ".", "?" or "!" be
// ignored for prefix detection.
inline PromptType classify_prompt_type(const std::vector<MaskSpan>& mask_spans,
                                       int n,
                                       const std::vector<std::string>* tokens = nullptr) {
  detail::check_spans(mask_spans, n);
  if (mask_spans.empty()) return PromptType::no_blank;
  if (mask_spans.size() >= 2) return PromptType::mixed;
  const MaskSpan& sp = mask_spans.front();
  if (sp.start == 0 && sp.end == n - 1) {
    std::cerr << "[pbp] warning: mask span covers the whole sequence, "
                 "classifying as cloze\n";
    return PromptType::cloze;
  }
  if (sp.start == 0) return PromptType::postfix;
  int effective_end = n - 1;
  if (tokens != nullptr && n >= 2 && detail::terminal_punct(tokens->back()) &&
      sp.end < n - 1) {
    effective_end = n - 2;
  }
  if (sp.end >= effective_end) return PromptType::prefix;
  return PromptType::cloze;
}

inline PromptType classify_prompt_type(const std::vector<MaskSpan>& mask_spans,
                                       const std::vector<std::string>& tokens) {
  return classify_prompt_type(mask_spans, static_cast<int>(tokens.size()),
                              &tokens);
}

// ---------------------------------------------------------------------------
// Annotation parsing
// ---------------------------------------------------------------------------

// Token-per-line BIO text: "token<TAB>tag", blank line between sentences,
// tags in {O, B-<label>, I-<label>}. An I without a preceding B of the same
// label opens a new span (recoverable, warned). Non-UTF8 input is fatal.
inline std::vector<AnnotatedSentence> parse_bio(const std::string& raw_text,
                                                const std::string& source_prefix = "bio") {
  if (!valid_utf8(raw_text))
    throw std::runtime_error("annotation input is not valid UTF-8");

  std::vector<AnnotatedSentence> out;
  AnnotatedSentence cur;
  std::string open_label;
  int open_start = -1;
  int sentence_no = 0;

  auto close_span = [&](int end_exclusive) {
    if (open_start >= 0) {
      cur.outcome_spans.push_back({open_start, end_exclusive - 1, open_label});
      open_start = -1;
      open_label.clear();
    }
  };
  auto flush_sentence = [&]() {
    close_span(static_cast<int>(cur.tokens.size()));
    if (!cur.tokens.empty()) {
      cur.source_id = source_prefix + ":" + std::to_string(sentence_no++);
      out.push_back(std::move(cur));
    }
    cur = AnnotatedSentence{};
  };

  std::istringstream in(raw_text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush_sentence();
      continue;
    }
    std::string token, tag;
    const auto tab = line.find('\t');
    if (tab != std::string::npos) {
      token = line.substr(0, tab);
      tag = line.substr(tab + 1);
    } else {
      const auto ws = line.find_last_of(" \t");
      if (ws == std::string::npos)
        throw std::runtime_error("malformed BIO line: " + line);
      token = line.substr(0, ws);
      tag = line.substr(ws + 1);
    }
    const int pos = static_cast<int>(cur.tokens.size());
    if (tag == "O") {
      close_span(pos);
    } else if (tag.rfind("B-", 0) == 0) {
      close_span(pos);
      open_label = tag.substr(2);
      open_start = pos;
    } else if (tag.rfind("I-", 0) == 0) {
      const std::string label = tag.substr(2);
      if (open_start < 0 || open_label != label) {
        std::cerr << "[pbp] warning: I-" << label
                  << " without preceding B, starting new span at token "
                  << pos << "\n";
        close_span(pos);
        open_label = label;
        open_start = pos;
      }
    } else {
      std::cerr << "[pbp] warning: unknown tag '" << tag << "', treated as O\n";
      close_span(pos);
    }
    cur.tokens.push_back(token);
  }
  flush_sentence();
  return out;
}

// Line-delimited structured records: {"tokens": [...], "spans": [[s,e,label],...]}.
inline std::vector<AnnotatedSentence> parse_sentence_records(
    const std::string& raw_text, const std::string& source_prefix = "rec") {
  if (!valid_utf8(raw_text))
    throw std::runtime_error("annotation input is not valid UTF-8");
  std::vector<AnnotatedSentence> out;
  std::istringstream in(raw_text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    AnnotatedSentence s;
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("spans")) {
      for (const auto& sp : j.at("spans")) {
        OutcomeSpan o;
        o.start = sp.at(0).get<int>();
        o.end = sp.at(1).get<int>();
        if (sp.size() > 2) o.label = sp.at(2).get<std::string>();
        s.outcome_spans.push_back(o);
      }
    }
    s.source_id = j.value("source_id",
                          source_prefix + ":" + std::to_string(lineno - 1));
    out.push_back(std::move(s));
  }
  return out;
}

// Dispatches on content: JSON records start with '{', anything else is BIO.
inline std::vector<AnnotatedSentence> parse_annotations(
    const std::string& raw_text, const std::string& source_prefix = "in") {
  const auto first = raw_text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && raw_text[first] == '{')
    return parse_sentence_records(raw_text, source_prefix);
  return parse_bio(raw_text, source_prefix);
}

// ---------------------------------------------------------------------------
// Masking
// ---------------------------------------------------------------------------

inline PromptInstance apply_custom_masking(const AnnotatedSentence& sentence) {
  PromptInstance p;
  p.tokens = sentence.tokens;
  p.source_id = sentence.source_id;
  for (const auto& sp : sentence.outcome_spans) {
    std::vector<std::string> gold;
    for (int j = sp.start; j <= sp.end; ++j) {
      gold.push_back(sentence.tokens[static_cast<std::size_t>(j)]);
      p.tokens[static_cast<std::size_t>(j)] = kMaskToken;
    }
    p.mask_spans.push_back({sp.start, sp.end});
    p.gold_answers.push_back(std::move(gold));
  }
  p.prompt_type = classify_prompt_type(p.mask_spans, p.tokens);
  return p;
}

// Masks round(rate*n) distinct positions chosen uniformly; contiguous
// masked positions merge into one span.
inline PromptInstance apply_random_masking(const AnnotatedSentence& sentence,
                                           double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate > 1.0)
    throw std::invalid_argument("masking rate outside [0,1]");
  const int n = static_cast<int>(sentence.tokens.size());
  const int count = round_half_up(rate * n);
  Rng rng(seed);
  const std::vector<int> positions = rng.sample_without_replacement(n, count);

  PromptInstance p;
  p.tokens = sentence.tokens;
  p.source_id = sentence.source_id;
  std::size_t i = 0;
  while (i < positions.size()) {
    std::size_t j = i;
    while (j + 1 < positions.size() && positions[j + 1] == positions[j] + 1) ++j;
    MaskSpan sp{positions[i], positions[j]};
    std::vector<std::string> gold;
    for (int t = sp.start; t <= sp.end; ++t) {
      gold.push_back(sentence.tokens[static_cast<std::size_t>(t)]);
      p.tokens[static_cast<std::size_t>(t)] = kMaskToken;
    }
    p.mask_spans.push_back(sp);
    p.gold_answers.push_back(std::move(gold));
    i = j + 1;
  }
  p.prompt_type = classify_prompt_type(p.mask_spans, p.tokens);
  return p;
}

// Inverse of masking: write gold answers back over the sentinels.
inline std::vector<std::string> unmask(const PromptInstance& p) {
  std::vector<std::string> tokens = p.tokens;
  for (std::size_t s = 0; s < p.mask_spans.size(); ++s) {
    const MaskSpan& sp = p.mask_spans[s];
    for (int j = sp.start; j <= sp.end; ++j)
      tokens[static_cast<std::size_t>(j)] =
          p.gold_answers[s][static_cast<std::size_t>(j - sp.start)];
  }
  return tokens;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_dataset(
    const std::vector<T>& instances, const SplitSpec& spec) {
  if (spec.train_fraction < 0.0 || spec.train_fraction > 1.0)
    throw std::invalid_argument("train_fraction outside [0,1]");
  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(order);
  const std::size_t cut = static_cast<std::size_t>(round_half_up(
      spec.train_fraction * static_cast<double>(instances.size())));
  std::pair<std::vector<T>, std::vector<T>> out;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < cut ? out.first : out.second).push_back(instances[order[i]]);
  return out;
}

struct GeneralisationInstance {
  PromptInstance instance;
  // Per mask span: number of train prompts containing that gold answer.
  std::vector<int> span_frequencies;
};

namespace detail {

inline std::string answer_key(const std::vector<std::string>& answer) {
  std::string key;
  for (const auto& t : answer) {
    key += lowercase(t);
    key += '\x1f';
  }
  return key;
}

inline std::map<std::string, int> context_multiset(const PromptInstance& p) {
  std::map<std::string, int> ms;
  for (const auto& t : p.tokens)
    if (t != kMaskToken) ++ms[lowercase(t)];
  return ms;
}

inline double multiset_jaccard(const std::map<std::string, int>& a,
                               const std::map<std::string, int>& b) {
  int inter = 0, uni = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == a.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace detail

// Filters the test split down to prompts whose contexts differ from every
// train prompt sharing a gold answer, and tags each span with how often
// its answer occurred in training. Frequency 0 marks a zero-shot span.
inline std::vector<GeneralisationInstance> build_generalisation_testset(
    const std::vector<PromptInstance>& train,
    const std::vector<PromptInstance>& test, const SplitSpec& spec) {
  // Answer -> train prompt indices containing it.
  std::map<std::string, std::vector<std::size_t>> train_by_answer;
  for (std::size_t i = 0; i < train.size(); ++i) {
    std::set<std::string> keys;
    for (const auto& ans : train[i].gold_answers)
      keys.insert(detail::answer_key(ans));
    for (const auto& k : keys) train_by_answer[k].push_back(i);
  }

  std::vector<std::map<std::string, int>> train_contexts(train.size());
  for (std::size_t i = 0; i < train.size(); ++i)
    train_contexts[i] = detail::context_multiset(train[i]);

  std::vector<GeneralisationInstance> out;
  for (const auto& t : test) {
    if (t.mask_spans.empty()) continue;
    const auto ctx = detail::context_multiset(t);
    bool keep = true;
    std::set<std::size_t> related;
    for (const auto& ans : t.gold_answers) {
      auto it = train_by_answer.find(detail::answer_key(ans));
      if (it != train_by_answer.end())
        related.insert(it->second.begin(), it->second.end());
    }
    for (std::size_t idx : related) {
      if (detail::multiset_jaccard(ctx, train_contexts[idx]) >
          spec.context_overlap_threshold) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    GeneralisationInstance g;
    g.instance = t;
    for (const auto& ans : t.gold_answers) {
      auto it = train_by_answer.find(detail::answer_key(ans));
      g.span_frequencies.push_back(
          it == train_by_answer.end() ? 0 : static_cast<int>(it->second.size()));
    }
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus
// ---------------------------------------------------------------------------

namespace detail {

inline std::string vocab_token(int id, int vocab_size) {
  std::size_t width = 1;
  for (int v = vocab_size - 1; v >= 10; v /= 10) ++width;
  std::string digits = std::to_string(id);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "w" + digits;
}

}  // namespace detail

// Random sentences over a closed vocabulary. Outcome spans are drawn from
// a small pool of reusable phrases (built from a reserved slice of the
// vocabulary) so that gold answers recur across sentences the way outcome
// mentions recur in a real corpus. Every pooled phrase travels with its own
// trigger word written next to the span, the way an outcome mention follows
// a cue like "reported" or "assessed"; a small fraction of spans get a
// fresh one-off phrase behind a shared generic trigger so zero-shot answers
// exist. Guaranteed to cover all five prompt types under custom masking
// when n_sentences >= 10, via deterministic regeneration with a derived
// seed.
inline std::vector<AnnotatedSentence> generate_synthetic_corpus(
    std::uint64_t seed, int n_sentences, int vocab_size) {
  if (vocab_size < 20) throw std::invalid_argument("vocab_size must be >= 20");
  if (n_sentences < 1) throw std::invalid_argument("n_sentences must be >= 1");

  const int outcome_hi = std::max(8, vocab_size / 8);  // [0, outcome_hi) = outcome words
  // One trigger word per pooled phrase plus a generic one; the rest of the
  // vocabulary is ordinary context.
  const int pool_size =
      std::min(15, std::max(2, (vocab_size - outcome_hi) / 2 - 1));
  const int trigger_lo = outcome_hi;
  const int context_lo = outcome_hi + pool_size + 1;

  for (int attempt = 0;; ++attempt) {
    if (attempt > 100)
      throw std::runtime_error("could not cover all prompt types");
    Rng rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt));

    // Shared outcome phrase pool; pool index doubles as the trigger index.
    std::vector<std::vector<std::string>> pool;
    for (int i = 0; i < pool_size; ++i) {
      std::vector<std::string> phrase;
      const int len = rng.uniform_int(1, 2);
      for (int j = 0; j < len; ++j)
        phrase.push_back(detail::vocab_token(rng.uniform_int(0, outcome_hi - 1),
                                             vocab_size));
      pool.push_back(std::move(phrase));
    }
    // Returns the phrase and the trigger written beside it; pool_size is
    // the generic trigger used by one-off phrases.
    auto draw_phrase = [&]() -> std::pair<std::vector<std::string>, int> {
      if (rng.uniform_int(0, 9) == 0) {  // one-off phrase
        std::vector<std::string> phrase;
        const int len = rng.uniform_int(1, 2);
        for (int j = 0; j < len; ++j)
          phrase.push_back(detail::vocab_token(
              rng.uniform_int(0, outcome_hi - 1), vocab_size));
        return {phrase, pool_size};
      }
      const int k = rng.uniform_int(0, pool_size - 1);
      return {pool[static_cast<std::size_t>(k)], k};
    };

    std::vector<AnnotatedSentence> corpus;
    for (int si = 0; si < n_sentences; ++si) {
      const int n = rng.uniform_int(16, 40);
      AnnotatedSentence s;
      s.source_id = "synth:" + std::to_string(si);
      s.tokens.resize(static_cast<std::size_t>(n));
      for (auto& t : s.tokens)
        t = detail::vocab_token(rng.uniform_int(context_lo, vocab_size - 1),
                                vocab_size);

      // 0 spans -> no_blank, 1 span -> prefix/cloze/postfix by placement,
      // 2 spans -> mixed.
      const int roll = rng.uniform_int(0, 99);
      int n_spans;
      if (roll < 15) {
        n_spans = 0;
      } else if (roll < 80) {
        n_spans = 1;
      } else {
        n_spans = 2;
      }

      std::vector<OutcomeSpan> spans;
      // Writes the phrase at `start` and its trigger word on the side of
      // the span that stays unmasked (before it, or after when start==0).
      auto try_place = [&](int start, const std::vector<std::string>& phrase,
                           int trigger) {
        const int end = start + static_cast<int>(phrase.size()) - 1;
        if (start < 0 || end >= n) return false;
        const int trig_pos = start >= 1 ? start - 1 : end + 1;
        if (trig_pos < 0 || trig_pos >= n) return false;
        for (const auto& sp : spans)
          if (!(end < sp.start - 2 || start > sp.end + 2)) return false;
        spans.push_back({start, end, "Outcome"});
        for (std::size_t j = 0; j < phrase.size(); ++j)
          s.tokens[static_cast<std::size_t>(start) + j] = phrase[j];
        s.tokens[static_cast<std::size_t>(trig_pos)] =
            detail::vocab_token(trigger_lo + trigger, vocab_size);
        return true;
      };

      if (n_spans == 1) {
        const auto [phrase, trigger] = draw_phrase();
        const int plen = static_cast<int>(phrase.size());
        const int place = rng.uniform_int(0, 2);
        if (place == 0) {
          try_place(0, phrase, trigger);  // postfix
        } else if (place == 1 && n - plen >= 1) {
          try_place(n - plen, phrase, trigger);  // prefix
        } else if (n - plen - 1 >= 1) {
          try_place(rng.uniform_int(1, n - plen - 1), phrase, trigger);  // cloze
        } else {
          try_place(0, phrase, trigger);
        }
      } else {
        for (int k = 0; k < n_spans; ++k) {
          const auto [phrase, trigger] = draw_phrase();
          for (int tries = 0; tries < 20; ++tries) {
            const int start =
                rng.uniform_int(0, n - static_cast<int>(phrase.size()));
            if (try_place(start, phrase, trigger)) break;
          }
        }
      }

      std::sort(spans.begin(), spans.end(),
                [](const OutcomeSpan& a, const OutcomeSpan& b) {
                  return a.start < b.start;
                });
      s.outcome_spans = std::move(spans);
      corpus.push_back(std::move(s));
    }
    // Coverage check under custom masking.
    std::set<PromptType> seen;
    for (const auto& s : corpus) seen.insert(apply_custom_masking(s).prompt_type);
    const bool want_all = n_sentences >= 10;
    if (!want_all || seen.size() == static_cast<std::size_t>(kNumPromptTypes)) {
      if (attempt > 0)
        std::cerr << "[pbp] note: synthetic corpus regenerated " << attempt
                  << " time(s) to cover all prompt types\n";
      return corpus;
    }
  }
}

// ---------------------------------------------------------------------------
// Serialization (line-delimited structured records)
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const PromptInstance& p) {
  nlohmann::json j;
  j["tokens"] = p.tokens;
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& sp : p.mask_spans) spans.push_back({sp.start, sp.end});
  j["mask_spans"] = spans;
  j["gold_answers"] = p.gold_answers;
  j["prompt_type"] = to_string(p.prompt_type);
  j["source_id"] = p.source_id;
  return j;
}

inline PromptInstance prompt_from_json(const nlohmann::json& j) {
  PromptInstance p;
  p.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& sp : j.at("mask_spans"))
    p.mask_spans.push_back({sp.at(0).get<int>(), sp.at(1).get<int>()});
  p.gold_answers =
      j.at("gold_answers").get<std::vector<std::vector<std::string>>>();
  p.prompt_type = prompt_type_from_string(j.at("prompt_type").get<std::string>());
  p.source_id = j.value("source_id", "");
  return p;
}

inline nlohmann::json to_json(const AnnotatedSentence& s) {
  nlohmann::json j;
  j["tokens"] = s.tokens;
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& sp : s.outcome_spans)
    spans.push_back({sp.start, sp.end, sp.label});
  j["spans"] = spans;
  j["source_id"] = s.source_id;
  return j;
}

inline std::string write_prompt_records(const std::vector<PromptInstance>& ps) {
  std::string out;
  for (const auto& p : ps) {
    out += to_json(p).dump();
    out += '\n';
  }
  return out;
}

inline std::vector<PromptInstance> read_prompt_records(const std::string& text) {
  if (!valid_utf8(text)) throw std::runtime_error("prompt file is not valid UTF-8");
  std::vector<PromptInstance> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(prompt_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace pbp

#endif  // PBP_CORPUS_HPP
