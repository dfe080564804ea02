#pragma once

#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "treenav/env.hpp"
#include "treenav/nn.hpp"
#include "treenav/replay.hpp"
#include "treenav/rng.hpp"

namespace treenav {

struct EncoderConfig {
    int word_dim = 16;
    int char_dim = 8;
    int conv_filter_size = 3;
    int hidden_dim = 32;
    int ffnn1_dim = 64;
    int ffnn2_dim = 32;
    double dropout_rate = 0.0;
    int attn_hidden_dim = 32;  // scorer width, set to hidden_dim by presets
    std::string preset = "desk";

    static EncoderConfig paper();  // 300/20/5/300/512/256/0.2
    static EncoderConfig desk();   // 16/8/3/32/64/32/0.0

    void validate() const;
    int token_dim() const { return word_dim + char_dim; }
};

/// Word vocabulary. Id 0 is the trained UNK row, id 1 the null token used
/// for absent answer predictions. Lookup is over lowercased tokens.
class Vocab {
  public:
    Vocab();
    int add(const std::string& word);       // idempotent
    int id(const std::string& word) const;  // kUnkId when absent
    int size() const { return static_cast<int>(words_.size()); }
    const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& words() const { return words_; }

    static constexpr int kUnkId = 0;
    static constexpr int kNullId = 1;
    static const char* unk_token();
    static const char* null_token();

  private:
    std::vector<std::string> words_;
    std::map<std::string, int> index_;
};

inline constexpr int kCharVocab = 129;  // bytes 0..127 plus UNK at 128

struct LstmParams {
    nn::Param w, u, b;  // gates stacked i,f,o,g
};

struct AttnParams {
    nn::Param w1, b1, w2, b2;  // two-layer scorer, scalar logit out
};

/// All tensors of the action-value network. The registry order returned by
/// params() is the canonical order for the optimizer and checkpoints.
struct QNet {
    EncoderConfig cfg;
    int word_vocab = 0;

    nn::Param word_emb, char_emb, conv_w, conv_b;
    LstmParams q_fwd, q_bwd, obs, ans;
    AttnParams attn_q, attn_o;
    nn::Param w0, b0, w1v, b1v, w1a, b1a, w2v, b2v, w2a, b2a;

    std::vector<nn::Param*> params();
    std::vector<const nn::Param*> params() const;

    /// Allocate and seed every tensor: scaled-uniform fan-based init, +1
    /// forget-gate bias, small-uniform embeddings.
    static QNet make(const EncoderConfig& cfg, int word_vocab, Rng& rng);

    /// Deep value copy from another net of identical shape (target sync).
    void copy_values_from(const QNet& other);

    /// Optionally overwrite word-embedding rows from a text file of
    /// "word v1 v2 ..." lines; unseen words keep their random rows. Returns
    /// the number of rows loaded.
    int load_pretrained_words(const std::string& path, const Vocab& vocab);
};

struct QValues {
    std::array<double, kNumActions> q{};
    double v = 0.0;
    std::array<double, kNumActions> advantage{};
};

/// Batched forward pass; returns tape handles so callers can extend the
/// graph (loss) or just read values.
struct QForward {
    nn::Var q;    // 7 x B
    nn::Var v;    // 1 x B
    nn::Var adv;  // 7 x B
};

QForward qnet_forward(nn::Graph& g, QNet& net, const Vocab& vocab,
                      const std::vector<const NavState*>& states);

/// Single-state convenience (eval mode, dropout off). Throws on non-finite
/// activations.
QValues q_values(QNet& net, const Vocab& vocab, const NavState& state);

// Encoder stages exposed for verification; eval mode, single sequence.
nn::Mat embed_tokens(QNet& net, const Vocab& vocab, const Tokens& tokens);
Eigen::VectorXd encode_question(QNet& net, const Vocab& vocab, const Tokens& q);
Eigen::VectorXd encode_observation(QNet& net, const Vocab& vocab, const Tokens& o);
Eigen::VectorXd encode_answer_pred(QNet& net, const Vocab& vocab, const Tokens& z, const PhiZ& phi_z);

struct TdResult {
    double loss = 0.0;
    std::vector<double> td_abs;  // |TD error| per sample, for priorities
};

/// Double-Q (or plain max) TD loss over a batch; accumulates gradients into
/// the online net's params. Pass dropout_rng for training-mode dropout.
TdResult td_loss(QNet& online, QNet& target, const Vocab& vocab,
                 const std::vector<const Transition*>& batch, double gamma,
                 const std::vector<double>& is_weights, bool double_q, Rng* dropout_rng);

inline constexpr double kGradClipNorm = 10.0;

}  // namespace treenav
