#include "cxr/metrics/nlg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "cxr/data/tokenizer.hpp"
#include "cxr/error.hpp"

namespace cxr::metrics {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const Tokens& t, int n) {
  NgramCounts counts;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= t.size(); ++i) ++counts[Tokens(t.begin() + static_cast<long>(i), t.begin() + static_cast<long>(i + un))];
  return counts;
}

struct OrderStats {
  std::size_t clipped = 0;
  std::size_t total = 0;
};

OrderStats clipped_matches(const Tokens& candidate, const std::vector<Tokens>& references, int n) {
  const NgramCounts cand = ngrams(candidate, n);
  NgramCounts max_ref;
  for (const auto& ref : references) {
    for (const auto& [g, c] : ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], c);
  }
  OrderStats s;
  for (const auto& [g, c] : cand) {
    s.total += c;
    auto it = max_ref.find(g);
    if (it != max_ref.end()) s.clipped += std::min(c, it->second);
  }
  return s;
}

std::size_t closest_ref_length(std::size_t c, const std::vector<Tokens>& references) {
  std::size_t best = references.front().size();
  for (const auto& r : references) {
    const auto d = [&](std::size_t len) { return len > c ? len - c : c - len; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

std::vector<double> combine(const std::vector<OrderStats>& orders, std::size_t c, std::size_t r) {
  std::vector<double> out(orders.size(), 0.0);
  if (c == 0) return out;
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < orders.size(); ++n) {
    if (orders[n].clipped == 0 || orders[n].total == 0) {
      // A zero precision zeroes this and every higher cumulative order.
      break;
    }
    log_sum += std::log(static_cast<double>(orders[n].clipped) / static_cast<double>(orders[n].total));
    out[n] = bp * std::exp(log_sum / static_cast<double>(n + 1));
  }
  return out;
}

}  // namespace

std::vector<double> bleu(const Tokens& candidate, const std::vector<Tokens>& references, int max_n) {
  if (references.empty()) throw ValidationError("bleu: reference list must be nonempty");
  if (max_n < 1) throw ValidationError("bleu: max_n must be >= 1");
  std::vector<OrderStats> orders;
  for (int n = 1; n <= max_n; ++n) orders.push_back(clipped_matches(candidate, references, n));
  return combine(orders, candidate.size(), closest_ref_length(candidate.size(), references));
}

std::vector<double> corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
                                int max_n) {
  if (candidates.size() != references.size()) throw DimensionError("corpus_bleu: candidate/reference count mismatch");
  if (max_n < 1) throw ValidationError("bleu: max_n must be >= 1");
  std::vector<OrderStats> orders(static_cast<std::size_t>(max_n));
  std::size_t c = 0;
  std::size_t r = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (references[i].empty()) throw ValidationError("corpus_bleu: every candidate needs a reference");
    for (int n = 1; n <= max_n; ++n) {
      const auto s = clipped_matches(candidates[i], references[i], n);
      orders[static_cast<std::size_t>(n - 1)].clipped += s.clipped;
      orders[static_cast<std::size_t>(n - 1)].total += s.total;
    }
    c += candidates[i].size();
    r += closest_ref_length(candidates[i].size(), references[i]);
  }
  return combine(orders, c, r);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2 * p * r / (p + r);
}

std::string strip_suffix(const std::string& token) {
  static const std::array<std::string, 6> suffixes = {"ness", "ing", "ed", "ly", "es", "s"};
  for (const auto& s : suffixes) {
    if (token.size() >= s.size() + 3 && token.compare(token.size() - s.size(), s.size(), s) == 0) {
      return token.substr(0, token.size() - s.size());
    }
  }
  return token;
}

namespace {

// align[i] = reference index matched to candidate i, or -1.
void align_stage(const Tokens& cand, const Tokens& ref, std::vector<long>& align, std::vector<bool>& ref_used) {
  for (std::size_t i = 0; i < cand.size(); ++i) {
    if (align[i] >= 0) continue;
    const long prev = i > 0 ? align[i - 1] : -2;
    long chosen = -1;
    if (prev >= 0 && static_cast<std::size_t>(prev + 1) < ref.size() && !ref_used[static_cast<std::size_t>(prev + 1)] &&
        ref[static_cast<std::size_t>(prev + 1)] == cand[i]) {
      chosen = prev + 1;
    } else {
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!ref_used[j] && ref[j] == cand[i]) {
          chosen = static_cast<long>(j);
          break;
        }
      }
    }
    if (chosen >= 0) {
      align[i] = chosen;
      ref_used[static_cast<std::size_t>(chosen)] = true;
    }
  }
}

}  // namespace

MeteorDetail meteor_detail(const Tokens& candidate, const Tokens& reference) {
  MeteorDetail d;
  if (candidate.empty() || reference.empty()) return d;
  std::vector<long> align(candidate.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);
  align_stage(candidate, reference, align, ref_used);
  Tokens cand_stem, ref_stem;
  for (const auto& t : candidate) cand_stem.push_back(strip_suffix(t));
  for (const auto& t : reference) ref_stem.push_back(strip_suffix(t));
  align_stage(cand_stem, ref_stem, align, ref_used);

  long prev = -2;
  for (long a : align) {
    if (a >= 0) {
      ++d.matches;
      if (a != prev + 1 || prev < 0) ++d.chunks;
    }
    prev = a >= 0 ? a : -2;
  }
  if (d.matches == 0) return d;
  const double m = static_cast<double>(d.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  d.fmean = 10 * p * r / (r + 9 * p);
  d.penalty = 0.5 * std::pow(static_cast<double>(d.chunks) / m, 3);
  d.score = d.fmean * (1 - d.penalty);
  return d;
}

double meteor(const Tokens& candidate, const Tokens& reference) { return meteor_detail(candidate, reference).score; }

NlgScores score_corpus(const std::vector<std::string>& candidates, const std::vector<std::string>& references) {
  if (candidates.size() != references.size()) throw DimensionError("score_corpus: candidate/reference count mismatch");
  NlgScores s;
  if (candidates.empty()) return s;
  std::vector<Tokens> cands;
  std::vector<std::vector<Tokens>> refs;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cands.push_back(data::tokenize(candidates[i]));
    refs.push_back({data::tokenize(references[i])});
    s.meteor += meteor(cands.back(), refs.back()[0]);
    s.rouge_l += rouge_l(cands.back(), refs.back()[0]);
  }
  s.meteor /= static_cast<double>(candidates.size());
  s.rouge_l /= static_cast<double>(candidates.size());
  const auto b = corpus_bleu(cands, refs, 4);
  s.bleu1 = b[0];
  s.bleu2 = b[1];
  s.bleu3 = b[2];
  s.bleu4 = b[3];
  return s;
}

}  // namespace cxr::metrics
