#pragma once

#include <array>
#include <string>
#include <vector>

namespace cxr::metrics {

using Tokens = std::vector<std::string>;

struct NlgScores {
  double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0;
  double meteor = 0;
  double rouge_l = 0;
  double average() const { return (bleu1 + bleu2 + bleu3 + bleu4 + meteor + rouge_l) / 6.0; }
};

// Cumulative BLEU-1..max_n for one candidate: clipped n-gram precisions,
// geometric mean, brevity penalty exp(1 - r/c) when c < r where r is the
// reference length closest to c. An empty candidate scores 0.
std::vector<double> bleu(const Tokens& candidate, const std::vector<Tokens>& references, int max_n = 4);

// Corpus BLEU: clipped counts, candidate and reference lengths summed over
// the corpus before dividing.
std::vector<double> corpus_bleu(const std::vector<Tokens>& candidates, const std::vector<std::vector<Tokens>>& references,
                                int max_n = 4);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

// LCS precision/recall combined with beta = 1.
double rouge_l(const Tokens& candidate, const Tokens& reference);

// Light suffix stripping used by the METEOR stem stage.
std::string strip_suffix(const std::string& token);

struct MeteorDetail {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double fmean = 0;
  double penalty = 0;
  double score = 0;
};

// Unigram alignment on exact forms, then stripped forms, preferring
// alignments that extend the current chunk. Fmean = 10PR/(R+9P),
// penalty = 0.5 (chunks/matches)^3, score = Fmean (1 - penalty).
MeteorDetail meteor_detail(const Tokens& candidate, const Tokens& reference);
double meteor(const Tokens& candidate, const Tokens& reference);

// Tokenizes both sides; BLEU is corpus-level, METEOR and ROUGE-L are means over pairs.
NlgScores score_corpus(const std::vector<std::string>& candidates, const std::vector<std::string>& references);

}  // namespace cxr::metrics
