#ifndef PBP_EVALUATION_HPP
#define PBP_EVALUATION_HPP

#include <array>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbp/common.hpp"
#include "pbp/corpus.hpp"

namespace pbp {

struct SpanPrediction {
  std::vector<std::string> predicted;
  std::vector<std::string> gold;
  PromptType prompt_type = PromptType::cloze;
  int outcome_train_frequency = 0;
  int prompt_length = 0;  // tokens in the source prompt
};

namespace detail {

inline bool spans_equal_ci(const std::vector<std::string>& a,
                           const std::vector<std::string>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (lowercase(a[i]) != lowercase(b[i])) return false;
  return true;
}

// |multiset intersection| / max(|predicted|, |gold|), case-insensitive.
inline double span_partial_match(const std::vector<std::string>& predicted,
                                 const std::vector<std::string>& gold) {
  std::map<std::string, int> bag;
  for (const auto& t : gold) ++bag[lowercase(t)];
  int inter = 0;
  for (const auto& t : predicted) {
    auto it = bag.find(lowercase(t));
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++inter;
    }
  }
  const std::size_t denom = std::max(predicted.size(), gold.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(denom);
}

}  // namespace detail

inline double exact_match(const std::vector<SpanPrediction>& predictions) {
  if (predictions.empty())
    throw std::invalid_argument("exact_match: empty prediction list");
  int hits = 0;
  for (const auto& p : predictions)
    if (detail::spans_equal_ci(p.predicted, p.gold)) ++hits;
  return 100.0 * hits / static_cast<double>(predictions.size());
}

inline double partial_match(const std::vector<SpanPrediction>& predictions) {
  if (predictions.empty())
    throw std::invalid_argument("partial_match: empty prediction list");
  double sum = 0.0;
  for (const auto& p : predictions)
    sum += detail::span_partial_match(p.predicted, p.gold);
  return 100.0 * sum / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------
// Breakdowns
// ---------------------------------------------------------------------------

struct TypeRow {
  int count = 0;
  double avg_prompt_length = 0.0;
  double em = 0.0;
  double pm = 0.0;
  bool defined = false;
};

inline std::map<PromptType, TypeRow> report_by_prompt_type(
    const std::vector<SpanPrediction>& predictions) {
  std::map<PromptType, TypeRow> table;
  for (PromptType t : {PromptType::postfix, PromptType::prefix,
                       PromptType::cloze, PromptType::mixed})
    table[t] = TypeRow{};
  std::map<PromptType, std::vector<SpanPrediction>> groups;
  for (const auto& p : predictions) groups[p.prompt_type].push_back(p);
  for (auto& [t, preds] : groups) {
    TypeRow row;
    row.count = static_cast<int>(preds.size());
    double len = 0.0;
    for (const auto& p : preds) len += p.prompt_length;
    row.avg_prompt_length = len / row.count;
    row.em = exact_match(preds);
    row.pm = partial_match(preds);
    row.defined = true;
    table[t] = row;
  }
  return table;
}

// Gold-length buckets: short <=7 tokens, medium (7,14], long >14.
inline int length_bucket(int gold_tokens) {
  if (gold_tokens <= 7) return 0;
  if (gold_tokens <= 14) return 1;
  return 2;
}

inline const char* length_bucket_name(int b) {
  static const std::array<const char*, 3> names{"short", "medium", "long"};
  return names.at(static_cast<std::size_t>(b));
}

// Train-frequency buckets of width 6, right-exclusive, clamped to the last.
inline constexpr int kNumFrequencyBuckets = 6;

inline int frequency_bucket(int freq) {
  const int b = freq / 6;
  return b >= kNumFrequencyBuckets ? kNumFrequencyBuckets - 1 : b;
}

inline std::string frequency_bucket_name(int b) {
  if (b == kNumFrequencyBuckets - 1)
    return std::to_string(6 * b) + "+";
  return std::to_string(6 * b) + "-" + std::to_string(6 * (b + 1));
}

struct BucketCell {
  int count = 0;
  double pm = 0.0;
  bool defined = false;
};

// 3 length buckets x kNumFrequencyBuckets frequency buckets, mean PM per cell.
inline std::array<std::array<BucketCell, kNumFrequencyBuckets>, 3> bucket_analysis(
    const std::vector<SpanPrediction>& predictions) {
  std::array<std::array<double, kNumFrequencyBuckets>, 3> sums{};
  std::array<std::array<int, kNumFrequencyBuckets>, 3> counts{};
  for (const auto& p : predictions) {
    const auto lb = static_cast<std::size_t>(
        length_bucket(static_cast<int>(p.gold.size())));
    const auto fb =
        static_cast<std::size_t>(frequency_bucket(p.outcome_train_frequency));
    sums[lb][fb] += detail::span_partial_match(p.predicted, p.gold);
    ++counts[lb][fb];
  }
  std::array<std::array<BucketCell, kNumFrequencyBuckets>, 3> grid{};
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t f = 0; f < kNumFrequencyBuckets; ++f) {
      grid[l][f].count = counts[l][f];
      if (counts[l][f] > 0) {
        grid[l][f].pm = 100.0 * sums[l][f] / counts[l][f];
        grid[l][f].defined = true;
      }
    }
  }
  return grid;
}

struct CurvePoint {
  int count = 0;
  double em = 0.0;
  double pm = 0.0;
};

// EM/PM per (prompt type, frequency bucket); bucket 0 with frequency 0 is
// the zero-shot cell, reported separately under key -1.
inline std::map<PromptType, std::map<int, CurvePoint>> fewshot_curves(
    const std::vector<SpanPrediction>& predictions) {
  std::map<PromptType, std::map<int, std::vector<SpanPrediction>>> groups;
  for (const auto& p : predictions) {
    const int key = p.outcome_train_frequency == 0
                        ? -1
                        : frequency_bucket(p.outcome_train_frequency);
    groups[p.prompt_type][key].push_back(p);
  }
  std::map<PromptType, std::map<int, CurvePoint>> out;
  for (auto& [t, buckets] : groups) {
    for (auto& [key, preds] : buckets) {
      CurvePoint pt;
      pt.count = static_cast<int>(preds.size());
      pt.em = exact_match(preds);
      pt.pm = partial_match(preds);
      out[t][key] = pt;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full report
// ---------------------------------------------------------------------------

struct EvalReport {
  double em = 0.0;
  double pm = 0.0;
  int total_spans = 0;
  std::map<PromptType, TypeRow> by_type;
  std::array<std::array<BucketCell, kNumFrequencyBuckets>, 3> grid{};
  std::map<PromptType, std::map<int, CurvePoint>> curves;
};

inline EvalReport build_report(const std::vector<SpanPrediction>& predictions) {
  EvalReport r;
  r.total_spans = static_cast<int>(predictions.size());
  r.em = exact_match(predictions);
  r.pm = partial_match(predictions);
  r.by_type = report_by_prompt_type(predictions);
  r.grid = bucket_analysis(predictions);
  r.curves = fewshot_curves(predictions);
  return r;
}

inline std::string render_report_text(const EvalReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "Overall  spans=" << r.total_spans << "  EM=" << r.em
     << "  PM=" << r.pm << "\n\n";
  os << "By prompt type\n";
  os << "  type      #      avg_len  EM       PM\n";
  for (const auto& [t, row] : r.by_type) {
    os << "  " << std::left << std::setw(9) << to_string(t) << std::right
       << std::setw(5) << row.count << "  ";
    if (row.defined) {
      os << std::setw(7) << row.avg_prompt_length << "  " << std::setw(7)
         << row.em << "  " << std::setw(7) << row.pm << "\n";
    } else {
      os << "      -        -        -\n";
    }
  }
  os << "\nPM by gold length x train frequency\n";
  os << "  length  ";
  for (int f = 0; f < kNumFrequencyBuckets; ++f)
    os << std::setw(10) << frequency_bucket_name(f);
  os << "\n";
  for (int l = 0; l < 3; ++l) {
    os << "  " << std::left << std::setw(8) << length_bucket_name(l)
       << std::right;
    for (int f = 0; f < kNumFrequencyBuckets; ++f) {
      const auto& cell =
          r.grid[static_cast<std::size_t>(l)][static_cast<std::size_t>(f)];
      if (cell.defined) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(1) << cell.pm << "/" << cell.count;
        os << std::setw(10) << c.str();
      } else {
        os << std::setw(10) << "-";
      }
    }
    os << "\n";
  }
  os << "\nFew/zero-shot curves (bucket: EM/PM/count; z = zero-shot)\n";
  for (const auto& [t, buckets] : r.curves) {
    os << "  " << std::left << std::setw(9) << to_string(t) << std::right;
    for (const auto& [key, pt] : buckets) {
      os << "  [" << (key < 0 ? std::string("z") : frequency_bucket_name(key))
         << "] " << pt.em << "/" << pt.pm << "/" << pt.count;
    }
    os << "\n";
  }
  return os.str();
}

// One structured record per (breakdown, cell).
inline std::string render_report_records(const EvalReport& r) {
  std::string out;
  auto emit = [&out](const nlohmann::json& j) {
    out += j.dump();
    out += '\n';
  };
  emit({{"breakdown", "overall"},
        {"spans", r.total_spans},
        {"em", r.em},
        {"pm", r.pm}});
  for (const auto& [t, row] : r.by_type) {
    nlohmann::json j{{"breakdown", "prompt_type"},
                     {"type", to_string(t)},
                     {"count", row.count}};
    if (row.defined) {
      j["avg_prompt_length"] = row.avg_prompt_length;
      j["em"] = row.em;
      j["pm"] = row.pm;
    }
    emit(j);
  }
  for (int l = 0; l < 3; ++l) {
    for (int f = 0; f < kNumFrequencyBuckets; ++f) {
      const auto& cell =
          r.grid[static_cast<std::size_t>(l)][static_cast<std::size_t>(f)];
      nlohmann::json j{{"breakdown", "length_frequency"},
                       {"length_bucket", length_bucket_name(l)},
                       {"frequency_bucket", frequency_bucket_name(f)},
                       {"count", cell.count}};
      if (cell.defined) j["pm"] = cell.pm;
      emit(j);
    }
  }
  for (const auto& [t, buckets] : r.curves) {
    for (const auto& [key, pt] : buckets) {
      emit({{"breakdown", "fewshot"},
            {"type", to_string(t)},
            {"frequency_bucket",
             key < 0 ? std::string("zero-shot") : frequency_bucket_name(key)},
            {"count", pt.count},
            {"em", pt.em},
            {"pm", pt.pm}});
    }
  }
  return out;
}

}  // namespace pbp

#endif  // PBP_EVALUATION_HPP
