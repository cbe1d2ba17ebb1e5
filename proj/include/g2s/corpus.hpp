#pragma once

// Article/comment ingestion: record parsing, sentence splitting, tokenization
// and the shared encoder/decoder vocabulary.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "g2s/error.hpp"
#include "g2s/utf8.hpp"

namespace g2s {

using Token = std::string;
using Tokens = std::vector<Token>;
using TokenSet = std::set<Token>;

struct RawRecord {
  std::string id;
  std::string title;
  std::string content;
  std::vector<std::string> comments;
};

struct Article {
  std::string id;
  Tokens title_tokens;
  std::vector<Tokens> sentences;
  std::vector<Tokens> comments;

  bool operator==(const Article&) const = default;
};

enum class TokenizerMode {
  kWhitespace,  // corpus is pre-segmented
  kCharacter,   // CJK runs split into characters, Latin/digit runs kept whole
};

struct TokenizerConfig {
  TokenizerMode mode = TokenizerMode::kWhitespace;
};

inline std::string to_string(TokenizerMode m) {
  return m == TokenizerMode::kWhitespace ? "whitespace" : "character";
}

inline TokenizerMode tokenizer_mode_from_string(std::string_view s) {
  if (s == "whitespace") return TokenizerMode::kWhitespace;
  if (s == "character" || s == "char") return TokenizerMode::kCharacter;
  throw Error("unknown tokenizer mode '" + std::string(s) + "'");
}

/// Splits on 。！？!?. keeping each terminator (and any run of terminators
/// directly after it) with its sentence. Whitespace-only fragments are dropped
/// and surrounding whitespace is trimmed.
inline std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    const auto first = current.find_first_not_of(" \t\r\n\f\v");
    if (first != std::string::npos) {
      const auto last = current.find_last_not_of(" \t\r\n\f\v");
      out.push_back(current.substr(first, last - first + 1));
    }
    current.clear();
  };
  const auto cps = utf8::chars(text);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    current.append(cps[i]);
    if (utf8::is_sentence_terminator(cps[i])) {
      while (i + 1 < cps.size() && utf8::is_sentence_terminator(cps[i + 1])) {
        current.append(cps[++i]);
      }
      flush();
    }
  }
  flush();
  return out;
}

inline Tokens tokenize(std::string_view text, const TokenizerConfig& cfg = {}) {
  Tokens out;
  if (cfg.mode == TokenizerMode::kWhitespace) {
    std::string cur;
    for (const auto ch : utf8::chars(text)) {
      if (utf8::is_space(ch)) {
        if (!cur.empty()) out.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.append(ch);
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
  }
  std::string run;
  for (const auto ch : utf8::chars(text)) {
    if (utf8::is_latin_word(ch)) {
      run.append(ch);
      continue;
    }
    if (!run.empty()) out.push_back(std::move(run));
    run.clear();
    if (!utf8::is_space(ch)) out.emplace_back(ch);
  }
  if (!run.empty()) out.push_back(std::move(run));
  return out;
}

inline Article to_article(const RawRecord& rec, const TokenizerConfig& tok = {}) {
  Article a;
  a.id = rec.id;
  a.title_tokens = tokenize(rec.title, tok);
  for (const auto& s : split_sentences(rec.content)) {
    auto toks = tokenize(s, tok);
    if (!toks.empty()) a.sentences.push_back(std::move(toks));
  }
  for (const auto& c : rec.comments) {
    auto toks = tokenize(c, tok);
    if (!toks.empty()) a.comments.push_back(std::move(toks));
  }
  return a;
}

/// Parses one corpus line. Throws DataError describing the first schema violation.
inline RawRecord parse_record(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record is not an object");
  auto str_field = [&](const char* key, bool required) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) {
      if (required) throw DataError(std::string("missing field '") + key + "'");
      return {};
    }
    if (!it->is_string()) throw DataError(std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
  };
  RawRecord rec;
  rec.id = str_field("id", true);
  if (rec.id.empty()) throw DataError("field 'id' is empty");
  rec.title = str_field("title", false);
  rec.content = str_field("content", true);
  if (auto it = j.find("comments"); it != j.end()) {
    if (!it->is_array()) throw DataError("field 'comments' is not an array");
    for (const auto& c : *it) {
      if (!c.is_string()) throw DataError("field 'comments' holds a non-string entry");
      rec.comments.push_back(c.get<std::string>());
    }
  }
  return rec;
}

struct LineIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct LoadOptions {
  bool lenient = false;                      // skip malformed lines instead of throwing
  std::vector<LineIssue>* issues = nullptr;  // receives skipped lines when lenient
};

inline std::vector<Article> load_corpus_stream(std::istream& in, const TokenizerConfig& tok,
                                               const LoadOptions& opts = {}) {
  std::vector<Article> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      auto rec = parse_record(line);
      if (!seen.insert(rec.id).second) throw DataError("duplicate id '" + rec.id + "'");
      out.push_back(to_article(rec, tok));
    } catch (const DataError& e) {
      const std::string msg = "line " + std::to_string(lineno) + ": " + e.what();
      if (!opts.lenient) throw DataError(msg);
      if (opts.issues) opts.issues->push_back({lineno, msg});
    }
  }
  return out;
}

inline std::vector<Article> load_corpus(const std::string& path, const TokenizerConfig& tok = {},
                                        const LoadOptions& opts = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus file '" + path + "'");
  return load_corpus_stream(in, tok, opts);
}

/// One token per line; blank lines ignored.
inline TokenSet load_token_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read token list '" + path + "'");
  TokenSet out;
  std::string line;
  while (std::getline(in, line)) {
    for (auto& t : tokenize(line)) out.insert(std::move(t));
  }
  return out;
}

using TokenId = std::int32_t;

class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocab() : Vocab(std::vector<Token>{}) {}

  /// Regular tokens in id order; specials are prepended automatically.
  explicit Vocab(const std::vector<Token>& regular) {
    for (const char* s : {"<pad>", "<unk>", "<bos>", "<eos>"}) add(s);
    for (const auto& t : regular) add(t);
  }

  static bool is_special(std::string_view t) {
    return t == "<pad>" || t == "<unk>" || t == "<bos>" || t == "<eos>";
  }

  std::size_t size() const { return id_to_token_.size(); }

  TokenId encode(const Token& t) const {
    auto it = token_to_id_.find(t);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  bool contains(const Token& t) const { return token_to_id_.count(t) != 0; }

  const Token& decode(TokenId id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }

  std::vector<TokenId> encode(const Tokens& toks) const {
    std::vector<TokenId> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(encode(t));
    return out;
  }

  std::vector<Token> regular_tokens() const {
    return {id_to_token_.begin() + kNumSpecials, id_to_token_.end()};
  }

  bool operator==(const Vocab& o) const { return id_to_token_ == o.id_to_token_; }

 private:
  void add(const Token& t) {
    if (token_to_id_.count(t)) throw DataError("duplicate vocabulary token '" + t + "'");
    token_to_id_.emplace(t, static_cast<TokenId>(id_to_token_.size()));
    id_to_token_.push_back(t);
  }

  std::vector<Token> id_to_token_;
  std::unordered_map<Token, TokenId> token_to_id_;
};

/// Frequency-ranked vocabulary over titles, contents and comments. Ties break
/// lexicographically. Keeps at most max_size entries including the 4 specials.
inline Vocab build_vocab(const std::vector<Article>& articles, std::size_t max_size) {
  if (max_size < Vocab::kNumSpecials) throw Error("vocabulary max_size must be at least 4");
  std::map<Token, std::size_t> freq;
  auto count = [&](const Tokens& toks) {
    for (const auto& t : toks) ++freq[t];
  };
  for (const auto& a : articles) {
    count(a.title_tokens);
    for (const auto& s : a.sentences) count(s);
    for (const auto& c : a.comments) count(c);
  }
  std::vector<std::pair<Token, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<Token> keep;
  const std::size_t room = max_size - Vocab::kNumSpecials;
  for (const auto& [tok, n] : ranked) {
    if (keep.size() >= room) break;
    if (Vocab::is_special(tok)) continue;
    keep.push_back(tok);
  }
  return Vocab(keep);
}

}  // namespace g2s
