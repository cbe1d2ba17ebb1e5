#pragma once

// Summary statistics over generated comments.

#include <cstddef>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "g2s/corpus.hpp"
#include "g2s/error.hpp"

namespace g2s {

struct GeneratedComment {
  std::string id;
  std::string comment;  // space-joined tokens
  double score = 0.0;
};

inline std::string join_tokens(const Tokens& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

inline std::string generation_line(const GeneratedComment& g) {
  return nlohmann::json{{"id", g.id}, {"comment", g.comment}, {"score", g.score}}.dump();
}

inline std::vector<GeneratedComment> load_generated(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read generated file '" + path + "'");
  std::vector<GeneratedComment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      GeneratedComment g;
      g.id = j.at("id").get<std::string>();
      g.comment = j.at("comment").get<std::string>();
      g.score = j.value("score", 0.0);
      out.push_back(std::move(g));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct CommentStats {
  std::size_t comments = 0;
  std::size_t unique_words = 0;  // distinct non-stop-word tokens
  double mean_length = 0.0;      // tokens per comment
  double distinct_ratio = 0.0;   // distinct comments / comments

  nlohmann::json to_json() const {
    return {{"comments", comments},
            {"unique_words", unique_words},
            {"mean_length", mean_length},
            {"distinct_ratio", distinct_ratio}};
  }
};

inline CommentStats comment_stats(const std::vector<std::string>& comments, const TokenSet& stopwords = {}) {
  CommentStats st;
  st.comments = comments.size();
  if (comments.empty()) return st;
  std::set<Token> words;
  std::set<std::string> distinct;
  std::size_t total = 0;
  for (const auto& c : comments) {
    const auto toks = tokenize(c);
    total += toks.size();
    for (const auto& t : toks)
      if (!stopwords.count(t)) words.insert(t);
    distinct.insert(join_tokens(toks));
  }
  st.unique_words = words.size();
  st.mean_length = static_cast<double>(total) / static_cast<double>(comments.size());
  st.distinct_ratio = static_cast<double>(distinct.size()) / static_cast<double>(comments.size());
  return st;
}

}  // namespace g2s
