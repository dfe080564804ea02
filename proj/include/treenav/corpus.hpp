#pragma once

#include <map>
#include <optional>
#include <vector>

#include "treenav/doctree.hpp"

namespace treenav {

/// Desk-scale corpus generator. Documents are trees with answers planted in
/// a paragraph whose index follows a geometric-like distribution, questions
/// share rare terms with the answer paragraph and with the headings on its
/// root path, so both tf-idf retrieval and learned navigation are viable.
struct CorpusSpec {
    int num_docs = 200;
    int depth_min = 2, depth_max = 3;        // 2: title/section/paragraph; 3 adds subsections
    int branching_min = 4, branching_max = 6;
    double fao_bias = 0.07;                  // geometric parameter over node index
    int vocab_size = 400;                    // shared filler-word pool size
    std::uint64_t seed = 1;

    // Fractions of documents that carry tf-idf hard negatives.
    double distractor_rate = 0.35;   // lexical match without the answer
    double theme_spam_rate = 0.35;   // concentrated doc-theme decoy
    double echo_rate = 0.5;          // second answer occurrence deeper in the doc

    void validate() const;
};

/// Token that opens every answer-bearing paragraph, a corpus-wide stopping
/// regularity the navigation model can pick up (stands in for answer-bearing
/// phrasing in real text). Never appears in questions.
extern const char* const kAnswerCueToken;

std::vector<QASample> generate_corpus(const CorpusSpec& spec);

struct FaoHistogram {
    std::map<int, long> counts;  // FAO node index -> number of question-document pairs
    std::optional<int> median;   // lower median, absent when empty
    long total = 0;
};

FaoHistogram fao_histogram(const std::vector<QASample>& samples);

std::string fao_histogram_csv(const FaoHistogram& h);

}  // namespace treenav
