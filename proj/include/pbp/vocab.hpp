#ifndef PBP_VOCAB_HPP
#define PBP_VOCAB_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "pbp/common.hpp"
#include "pbp/corpus.hpp"

namespace pbp {

// Closed token vocabulary. Index 0 is [MASK], index 1 is [UNK]; the rest
// is the sorted token set it was built from.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(const std::set<std::string>& tokens) {
    add(kMaskToken);
    add(kUnkToken);
    for (const auto& t : tokens)
      if (t != kMaskToken && t != kUnkToken) add(t);
  }

  static Vocabulary from_prompts(const std::vector<PromptInstance>& prompts) {
    std::set<std::string> tokens;
    for (const auto& p : prompts) {
      for (const auto& t : p.tokens)
        if (t != kMaskToken) tokens.insert(t);
      for (const auto& ans : p.gold_answers)
        for (const auto& t : ans) tokens.insert(t);
    }
    return Vocabulary(tokens);
  }

  static Vocabulary from_token_list(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) v.add(t);
    return v;
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  int mask_id() const { return 0; }
  int unk_id() const { return 1; }

  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_id() : it->second;
  }

  bool contains(const std::string& token) const {
    return index_.count(token) > 0;
  }

  // Hard error for tokens whose loss would be unrepresentable.
  int require_id(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end())
      throw std::runtime_error("token outside vocabulary: " + token);
    return it->second;
  }

  const std::string& token(int id) const {
    return tokens_.at(static_cast<std::size_t>(id));
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const std::vector<std::string>& toks) const {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id(t));
    return out;
  }

 private:
  void add(const std::string& t) {
    if (index_.emplace(t, static_cast<int>(tokens_.size())).second)
      tokens_.push_back(t);
  }

  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

}  // namespace pbp

#endif  // PBP_VOCAB_HPP
