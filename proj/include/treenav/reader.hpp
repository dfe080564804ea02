#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "treenav/tokens.hpp"

namespace treenav {

/// Output of an answer extractor over one context.
struct AnswerPrediction {
    Tokens tokens;                          // z, the predicted span
    std::vector<double> span_distribution;  // sums to 1
    double top_logit = 0.0;                 // z_l, raw score of the top span
    double entropy = 0.0;                   // z_e, nats
    int context_token_count = 0;            // z_n
    double top_probability = 0.0;
};

struct ExtractQuery {
    const Tokens* question = nullptr;
    const Tokens* context = nullptr;
    std::string qid;      // used by the external adapter only
    int node_index = -1;  // ditto
};

/// Pluggable answer-extraction capability. Built-ins are pure and stateless;
/// callable concurrently. Returns nullopt when no prediction is available
/// (external adapter miss), which callers encode as phi_z = (0,0,0).
class Extractor {
  public:
    virtual ~Extractor() = default;
    virtual std::optional<AnswerPrediction> predict(const ExtractQuery& q) const = 0;
};

inline constexpr int kDefaultMaxSpanLen = 8;

/// Score every span of up to max_span_len tokens by question-token overlap
/// with a mild length penalty, softmax-normalize, return the argmax span
/// (ties: earliest start, then shortest). Case-insensitive matching.
AnswerPrediction extract_overlap(const Tokens& question, const Tokens& context,
                                 int max_span_len = kDefaultMaxSpanLen);

/// Peaked distribution (default 0.9) on the first alias occurrence when one
/// is present, residual mass uniform over the other candidate spans; uniform
/// when no alias occurs. Matching uses answer normalization.
AnswerPrediction extract_oracle(const Tokens& question, const Tokens& context,
                                const std::vector<std::string>& aliases,
                                double top_probability = 0.9);

class OverlapExtractor final : public Extractor {
  public:
    explicit OverlapExtractor(int max_span_len = kDefaultMaxSpanLen) : max_span_len_(max_span_len) {}
    std::optional<AnswerPrediction> predict(const ExtractQuery& q) const override {
        return extract_overlap(*q.question, *q.context, max_span_len_);
    }

  private:
    int max_span_len_;
};

/// Test extractor that knows the gold aliases per qid.
class OracleExtractor final : public Extractor {
  public:
    explicit OracleExtractor(std::map<std::string, std::vector<std::string>> aliases_by_qid,
                             double top_probability = 0.9)
        : aliases_by_qid_(std::move(aliases_by_qid)), top_probability_(top_probability) {}
    std::optional<AnswerPrediction> predict(const ExtractQuery& q) const override;

  private:
    std::map<std::string, std::vector<std::string>> aliases_by_qid_;
    double top_probability_;
};

/// Offline adapter: predictions preloaded from a JSON-lines file, one object
/// per line with keys qid, node_index, tokens, top_probability, top_logit,
/// entropy, context_token_count and optional span_distribution. Lookup
/// misses yield nullopt.
class ExternalExtractor final : public Extractor {
  public:
    explicit ExternalExtractor(const std::string& jsonl_path);
    std::optional<AnswerPrediction> predict(const ExtractQuery& q) const override;
    std::size_t size() const { return table_.size(); }

  private:
    std::map<std::pair<std::string, int>, AnswerPrediction> table_;
};

/// Build an extractor from the `reader.kind` config value.
std::unique_ptr<Extractor> make_extractor(const std::string& kind, const std::string& external_path,
                                          std::map<std::string, std::vector<std::string>> aliases_by_qid,
                                          int max_span_len = kDefaultMaxSpanLen);

/// Official-style EM/F1: EM after answer normalization against any alias;
/// F1 = max over aliases of token-level F1. Empty prediction scores (0, 0).
std::pair<int, double> score_em_f1(const std::string& prediction,
                                   const std::vector<std::string>& aliases);

/// Argmax over distinct normalized answer strings of summed probabilities;
/// ties broken lexicographically on the normalized string. Returns the first
/// original spelling seen in the winning group.
std::string aggregate_answer(const std::vector<std::pair<std::string, double>>& per_doc);

}  // namespace treenav
