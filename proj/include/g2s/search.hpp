#pragma once

// Greedy and beam decoding over any step model:
//
//   typename M::State;
//   M::State initial();
//   std::vector<double> next(State& s, std::size_t prev);  // consumes prev, returns p(next)
//
// Scores are length-normalized log-probabilities; the length counts the EOS
// step when one is produced.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace g2s {

inline constexpr double kProbFloor = 1e-12;

struct Hypothesis {
  std::vector<std::size_t> ids;  // without BOS/EOS
  double log_prob = 0.0;
  std::size_t length = 0;        // scored steps
  bool finished = false;

  double score() const { return length == 0 ? 0.0 : log_prob / static_cast<double>(length); }
};

inline double floored_log(double p) { return std::log(std::max(p, kProbFloor)); }

/// Lowest index among the maxima.
inline std::size_t argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

template <class M>
Hypothesis greedy_search(M& model, std::size_t bos, std::size_t eos, std::size_t max_len) {
  Hypothesis h;
  auto state = model.initial();
  std::size_t prev = bos;
  for (std::size_t step = 0; step < max_len; ++step) {
    const auto p = model.next(state, prev);
    const std::size_t tok = argmax(p);
    h.log_prob += floored_log(p[tok]);
    ++h.length;
    if (tok == eos) {
      h.finished = true;
      break;
    }
    h.ids.push_back(tok);
    prev = tok;
  }
  return h;
}

inline bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score() != b.score()) return a.score() > b.score();
  return a.ids < b.ids;
}

/// Keeps the beam_size best expansions by cumulative log-probability at every
/// step (ties: higher step probability, earlier parent, lower token id).
/// Expansions ending in EOS leave the beam as finished hypotheses. The greedy
/// hypothesis is always among the final candidates.
template <class M>
Hypothesis beam_search(M& model, std::size_t bos, std::size_t eos, std::size_t beam_size, std::size_t max_len) {
  struct Live {
    typename M::State state;
    std::size_t prev;
    Hypothesis hyp;
  };
  struct Candidate {
    double cum;
    double p;
    std::size_t parent;
    std::size_t tok;
  };
  auto order = [](const Candidate& a, const Candidate& b) {
    if (a.cum != b.cum) return a.cum > b.cum;
    if (a.p != b.p) return a.p > b.p;
    if (a.parent != b.parent) return a.parent < b.parent;
    return a.tok < b.tok;
  };

  std::vector<Hypothesis> finished;
  std::vector<Live> live;
  live.push_back({model.initial(), bos, {}});
  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<typename M::State> next_states;
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < live.size(); ++i) {
      auto s = live[i].state;
      const auto p = model.next(s, live[i].prev);
      next_states.push_back(std::move(s));
      for (std::size_t tok = 0; tok < p.size(); ++tok)
        cands.push_back({live[i].hyp.log_prob + floored_log(p[tok]), p[tok], i, tok});
    }
    const std::size_t keep = std::min(beam_size, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), order);
    std::vector<Live> next_live;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = cands[k];
      Hypothesis h = live[c.parent].hyp;
      h.log_prob = c.cum;
      ++h.length;
      if (c.tok == eos) {
        h.finished = true;
        finished.push_back(std::move(h));
      } else {
        h.ids.push_back(c.tok);
        next_live.push_back({next_states[c.parent], c.tok, std::move(h)});
      }
    }
    live = std::move(next_live);
  }
  for (auto& l : live) finished.push_back(std::move(l.hyp));
  finished.push_back(greedy_search(model, bos, eos, max_len));
  return *std::min_element(finished.begin(), finished.end(), better);
}

}  // namespace g2s
