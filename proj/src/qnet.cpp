#include "treenav/qnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace treenav {

EncoderConfig EncoderConfig::paper() {
    EncoderConfig c;
    c.word_dim = 300;
    c.char_dim = 20;
    c.conv_filter_size = 5;
    c.hidden_dim = 300;
    c.ffnn1_dim = 512;
    c.ffnn2_dim = 256;
    c.dropout_rate = 0.2;
    c.attn_hidden_dim = 300;
    c.preset = "paper";
    return c;
}

EncoderConfig EncoderConfig::desk() {
    EncoderConfig c;
    c.word_dim = 16;
    c.char_dim = 8;
    c.conv_filter_size = 3;
    c.hidden_dim = 32;
    c.ffnn1_dim = 64;
    c.ffnn2_dim = 32;
    c.dropout_rate = 0.0;
    c.attn_hidden_dim = 32;
    c.preset = "desk";
    return c;
}

void EncoderConfig::validate() const {
    for (int d : {word_dim, char_dim, conv_filter_size, hidden_dim, ffnn1_dim, ffnn2_dim, attn_hidden_dim})
        if (d < 1) throw std::invalid_argument("encoder: all dimensions must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw std::invalid_argument("encoder: dropout_rate must lie in [0, 1)");
}

const char* Vocab::unk_token() { return "<unk>"; }
const char* Vocab::null_token() { return "<null>"; }

Vocab::Vocab() {
    add(unk_token());
    add(null_token());
}

int Vocab::add(const std::string& word) {
    std::string w = lower(word);
    auto it = index_.find(w);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(words_.size());
    words_.push_back(w);
    index_.emplace(std::move(w), id);
    return id;
}

int Vocab::id(const std::string& word) const {
    auto it = index_.find(lower(word));
    return it == index_.end() ? kUnkId : it->second;
}

namespace {

void init_uniform(nn::Param& p, Rng& rng, double s) {
    for (Eigen::Index c = 0; c < p.value.cols(); ++c)
        for (Eigen::Index r = 0; r < p.value.rows(); ++r)
            p.value(r, c) = s * (2.0 * rng.uniform() - 1.0);
}

void init_xavier(nn::Param& p, Rng& rng) {
    double s = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
    init_uniform(p, rng, s);
}

LstmParams make_lstm(const std::string& name, int in, int hidden, Rng& rng) {
    LstmParams p;
    p.w = nn::Param(name + ".w", 4 * hidden, in);
    p.u = nn::Param(name + ".u", 4 * hidden, hidden);
    p.b = nn::Param(name + ".b", 4 * hidden, 1);
    init_xavier(p.w, rng);
    init_xavier(p.u, rng);
    p.b.value.middleRows(hidden, hidden).setConstant(1.0);  // forget-gate bias
    return p;
}

AttnParams make_attn(const std::string& name, int in, int hidden, Rng& rng) {
    AttnParams p;
    p.w1 = nn::Param(name + ".w1", hidden, in);
    p.b1 = nn::Param(name + ".b1", hidden, 1);
    p.w2 = nn::Param(name + ".w2", 1, hidden);
    p.b2 = nn::Param(name + ".b2", 1, 1);
    init_xavier(p.w1, rng);
    init_xavier(p.w2, rng);
    return p;
}

nn::Param make_linear(const std::string& name, int out, int in, Rng& rng) {
    nn::Param p(name, out, in);
    init_xavier(p, rng);
    return p;
}

}  // namespace

std::vector<nn::Param*> QNet::params() {
    return {&word_emb, &char_emb, &conv_w,   &conv_b,   &q_fwd.w,   &q_fwd.u,  &q_fwd.b,
            &q_bwd.w,  &q_bwd.u,  &q_bwd.b,  &obs.w,    &obs.u,     &obs.b,    &ans.w,
            &ans.u,    &ans.b,    &attn_q.w1, &attn_q.b1, &attn_q.w2, &attn_q.b2, &attn_o.w1,
            &attn_o.b1, &attn_o.w2, &attn_o.b2, &w0,      &b0,        &w1v,      &b1v,
            &w1a,      &b1a,      &w2v,      &b2v,      &w2a,       &b2a};
}

std::vector<const nn::Param*> QNet::params() const {
    auto mut = const_cast<QNet*>(this)->params();
    return {mut.begin(), mut.end()};
}

QNet QNet::make(const EncoderConfig& cfg, int word_vocab, Rng& rng) {
    cfg.validate();
    if (word_vocab < 2) throw std::invalid_argument("qnet: word vocab too small");
    QNet n;
    n.cfg = cfg;
    n.word_vocab = word_vocab;
    int in = cfg.token_dim(), h = cfg.hidden_dim;

    n.word_emb = nn::Param("word_emb", cfg.word_dim, word_vocab);
    n.char_emb = nn::Param("char_emb", cfg.char_dim, kCharVocab);
    init_uniform(n.word_emb, rng, 0.1);
    init_uniform(n.char_emb, rng, 0.1);
    n.conv_w = make_linear("conv.w", cfg.char_dim, cfg.conv_filter_size * cfg.char_dim, rng);
    n.conv_b = nn::Param("conv.b", cfg.char_dim, 1);

    n.q_fwd = make_lstm("q_fwd", in, h, rng);
    n.q_bwd = make_lstm("q_bwd", in, h, rng);
    n.obs = make_lstm("obs", in, h, rng);
    n.ans = make_lstm("ans", in, h, rng);
    n.attn_q = make_attn("attn_q", 2 * h, cfg.attn_hidden_dim, rng);
    n.attn_o = make_attn("attn_o", h, cfg.attn_hidden_dim, rng);

    int hs = 2 * h + h + h + 3;
    n.w0 = make_linear("w0", cfg.ffnn1_dim, hs, rng);
    n.b0 = nn::Param("b0", cfg.ffnn1_dim, 1);
    n.w1v = make_linear("w1v", cfg.ffnn2_dim, cfg.ffnn1_dim, rng);
    n.b1v = nn::Param("b1v", cfg.ffnn2_dim, 1);
    n.w1a = make_linear("w1a", cfg.ffnn2_dim, cfg.ffnn1_dim, rng);
    n.b1a = nn::Param("b1a", cfg.ffnn2_dim, 1);
    n.w2v = make_linear("w2v", 1, cfg.ffnn2_dim + 7, rng);
    n.b2v = nn::Param("b2v", 1, 1);
    n.w2a = make_linear("w2a", kNumActions, cfg.ffnn2_dim + 7, rng);
    n.b2a = nn::Param("b2a", kNumActions, 1);
    return n;
}

void QNet::copy_values_from(const QNet& other) {
    auto dst = params();
    auto src = const_cast<QNet&>(other).params();
    if (dst.size() != src.size()) throw std::logic_error("qnet: shape registry mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (dst[i]->value.rows() != src[i]->value.rows() ||
            dst[i]->value.cols() != src[i]->value.cols())
            throw std::logic_error("qnet: tensor shape mismatch at " + dst[i]->name);
        dst[i]->value = src[i]->value;
    }
}

int QNet::load_pretrained_words(const std::string& path, const Vocab& vocab) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("pretrained embeddings: cannot open " + path);
    std::string line;
    int loaded = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        int id = vocab.id(word);
        if (id == Vocab::kUnkId && lower(word) != Vocab::unk_token()) continue;
        Eigen::VectorXd v(cfg.word_dim);
        bool ok = true;
        for (int i = 0; i < cfg.word_dim; ++i)
            if (!(ss >> v(i))) { ok = false; break; }
        if (!ok)
            throw std::runtime_error("pretrained embeddings: bad row for '" + word + "'");
        word_emb.value.col(id) = v;
        ++loaded;
    }
    return loaded;
}

namespace {

struct TokenTable {
    std::vector<std::string> distinct;
    std::map<std::string, int> index;

    int intern(const std::string& tok) {
        std::string w = lower(tok);
        auto it = index.find(w);
        if (it != index.end()) return it->second;
        int id = static_cast<int>(distinct.size());
        distinct.push_back(w);
        index.emplace(std::move(w), id);
        return id;
    }
};

struct SeqBatch {
    int t_max = 0, b = 0;
    std::vector<std::vector<int>> word_ids;      // [t][b], pad = unk
    std::vector<std::vector<int>> distinct_idx;  // [t][b], pad = 0
    nn::Mat mask;                                // t_max x b
    std::vector<Eigen::RowVectorXd> step_mask;
};

SeqBatch build_seq_batch(const std::vector<const Tokens*>& seqs, const Vocab& vocab,
                         TokenTable& table) {
    SeqBatch sb;
    sb.b = static_cast<int>(seqs.size());
    for (const Tokens* s : seqs) sb.t_max = std::max(sb.t_max, static_cast<int>(s->size()));
    sb.t_max = std::max(sb.t_max, 1);
    sb.mask = nn::Mat::Zero(sb.t_max, sb.b);
    sb.word_ids.assign(static_cast<std::size_t>(sb.t_max), std::vector<int>(static_cast<std::size_t>(sb.b), Vocab::kUnkId));
    sb.distinct_idx.assign(static_cast<std::size_t>(sb.t_max), std::vector<int>(static_cast<std::size_t>(sb.b), 0));
    static const std::string null_tok = Vocab::null_token();
    for (int b = 0; b < sb.b; ++b) {
        const Tokens* s = seqs[static_cast<std::size_t>(b)];
        if (s->empty()) {
            sb.word_ids[0][static_cast<std::size_t>(b)] = Vocab::kNullId;
            sb.distinct_idx[0][static_cast<std::size_t>(b)] = table.intern(null_tok);
            sb.mask(0, b) = 1.0;
            continue;
        }
        for (int t = 0; t < static_cast<int>(s->size()); ++t) {
            const std::string& tok = (*s)[static_cast<std::size_t>(t)];
            sb.word_ids[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] = vocab.id(tok);
            sb.distinct_idx[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] = table.intern(tok);
            sb.mask(t, b) = 1.0;
        }
    }
    sb.step_mask.reserve(static_cast<std::size_t>(sb.t_max));
    for (int t = 0; t < sb.t_max; ++t) sb.step_mask.push_back(sb.mask.row(t));
    return sb;
}

/// Char-CNN over the distinct tokens of a batch: one column per token.
nn::Var char_vectors(nn::Graph& g, QNet& net, const TokenTable& table) {
    int w = net.cfg.conv_filter_size;
    long total = 0;
    for (const auto& tok : table.distinct) total += std::max<long>(static_cast<long>(tok.size()), 1);
    Eigen::MatrixXi idx(w, std::max<long>(total, 1));
    idx.setConstant(-1);
    std::vector<std::pair<int, int>> segments;
    int col = 0;
    for (const auto& tok : table.distinct) {
        int len = static_cast<int>(tok.size());
        int start = col;
        for (int j = 0; j < std::max(len, 1); ++j) {
            for (int k = 0; k < w; ++k) {
                int pos = j + k;
                if (pos < len) {
                    unsigned char c = static_cast<unsigned char>(tok[static_cast<std::size_t>(pos)]);
                    idx(k, col) = c < 128 ? c : 128;
                }
            }
            ++col;
        }
        segments.emplace_back(start, col);
    }
    idx.conservativeResize(w, std::max(col, 1));
    nn::Var windows = g.char_windows(net.char_emb, std::move(idx));
    nn::Var conv = g.tanh_(g.affine(net.conv_w, windows, net.conv_b));
    return g.segment_max(conv, std::move(segments));
}

nn::Var embed_step(nn::Graph& g, QNet& net, nn::Var chars, const SeqBatch& sb, int t) {
    nn::Var ew = g.gather(net.word_emb, sb.word_ids[static_cast<std::size_t>(t)]);
    nn::Var ec = g.gather_cols(chars, sb.distinct_idx[static_cast<std::size_t>(t)]);
    return g.concat_rows({ew, ec});
}

struct LstmState {
    nn::Var h, c;
};

nn::Var lstm_step(nn::Graph& g, LstmParams& p, nn::Var x, LstmState& s,
                  const Eigen::RowVectorXd& mask, int h) {
    nn::Var z = g.add(g.affine(p.w, x, p.b), g.matmul(p.u, s.h));
    nn::Var gi = g.sigmoid_(g.slice_rows(z, 0, h));
    nn::Var gf = g.sigmoid_(g.slice_rows(z, h, h));
    nn::Var go = g.sigmoid_(g.slice_rows(z, 2 * h, h));
    nn::Var gg = g.tanh_(g.slice_rows(z, 3 * h, h));
    nn::Var c_new = g.add(g.mul(gi, gg), g.mul(gf, s.c));
    nn::Var h_new = g.mul(go, g.tanh_(c_new));
    s.c = g.lerp_rows(c_new, s.c, mask);
    s.h = g.lerp_rows(h_new, s.h, mask);
    return s.h;
}

LstmState zero_state(nn::Graph& g, int h, int b) {
    return {g.input(nn::Mat::Zero(h, b)), g.input(nn::Mat::Zero(h, b))};
}

nn::Var attn_pool(nn::Graph& g, AttnParams& p, const std::vector<nn::Var>& us,
                  const nn::Mat& mask) {
    std::vector<nn::Var> logits;
    logits.reserve(us.size());
    for (nn::Var u : us)
        logits.push_back(g.affine(p.w2, g.tanh_(g.affine(p.w1, u, p.b1)), p.b2));
    nn::Var stacked = us.size() == 1 ? logits[0] : g.concat_rows(logits);
    nn::Var alpha = g.softmax_cols(stacked, mask);
    return g.weighted_sum(us, alpha);
}

std::vector<nn::Var> run_lstm(nn::Graph& g, QNet& net, LstmParams& p, nn::Var chars,
                              const SeqBatch& sb, bool reverse) {
    int h = net.cfg.hidden_dim;
    LstmState s = zero_state(g, h, sb.b);
    std::vector<nn::Var> outs(static_cast<std::size_t>(sb.t_max));
    for (int k = 0; k < sb.t_max; ++k) {
        int t = reverse ? sb.t_max - 1 - k : k;
        nn::Var x = embed_step(g, net, chars, sb, t);
        outs[static_cast<std::size_t>(t)] = lstm_step(g, p, x, s, sb.step_mask[static_cast<std::size_t>(t)], h);
    }
    return outs;
}

struct EncodeOut {
    nn::Var h_q, h_o, h_z;
};

EncodeOut encode_states(nn::Graph& g, QNet& net, const Vocab& vocab,
                        const std::vector<const NavState*>& states) {
    static const Tokens kNullSeq = {Vocab::null_token()};
    std::vector<const Tokens*> qs, os, zs;
    for (const NavState* s : states) {
        if (!s->question || s->question->empty())
            throw std::invalid_argument("qnet: empty question sequence");
        qs.push_back(s->question.get());
        os.push_back(&s->observation);
        if (s->answer_pred && !s->answer_pred->tokens.empty())
            zs.push_back(&s->answer_pred->tokens);
        else
            zs.push_back(&kNullSeq);
    }
    TokenTable table;
    SeqBatch qb = build_seq_batch(qs, vocab, table);
    SeqBatch ob = build_seq_batch(os, vocab, table);
    SeqBatch zb = build_seq_batch(zs, vocab, table);
    nn::Var chars = char_vectors(g, net, table);

    // Question: BiLSTM then self-attention.
    std::vector<nn::Var> uf = run_lstm(g, net, net.q_fwd, chars, qb, false);
    std::vector<nn::Var> ub = run_lstm(g, net, net.q_bwd, chars, qb, true);
    std::vector<nn::Var> uq(static_cast<std::size_t>(qb.t_max));
    for (int t = 0; t < qb.t_max; ++t)
        uq[static_cast<std::size_t>(t)] = g.concat_rows({uf[static_cast<std::size_t>(t)], ub[static_cast<std::size_t>(t)]});
    nn::Var h_q = attn_pool(g, net.attn_q, uq, qb.mask);

    // Observation: LSTM then self-attention.
    std::vector<nn::Var> uo = run_lstm(g, net, net.obs, chars, ob, false);
    nn::Var h_o = attn_pool(g, net.attn_o, uo, ob.mask);

    // Answer prediction: LSTM, last hidden state, concat phi_z.
    std::vector<nn::Var> uz = run_lstm(g, net, net.ans, chars, zb, false);
    nn::Mat phi_z(3, static_cast<Eigen::Index>(states.size()));
    for (std::size_t b = 0; b < states.size(); ++b)
        for (int i = 0; i < 3; ++i) phi_z(i, static_cast<Eigen::Index>(b)) = states[b]->phi_z[static_cast<std::size_t>(i)];
    nn::Var h_z = g.concat_rows({uz.back(), g.input(std::move(phi_z))});
    return {h_q, h_o, h_z};
}

}  // namespace

QForward qnet_forward(nn::Graph& g, QNet& net, const Vocab& vocab,
                      const std::vector<const NavState*>& states) {
    if (states.empty()) throw std::invalid_argument("qnet: empty state batch");
    EncodeOut enc = encode_states(g, net, vocab, states);
    nn::Var h_s = g.concat_rows({enc.h_q, enc.h_o, enc.h_z});

    nn::Mat phi_n(7, static_cast<Eigen::Index>(states.size()));
    for (std::size_t b = 0; b < states.size(); ++b)
        for (int i = 0; i < 7; ++i) phi_n(i, static_cast<Eigen::Index>(b)) = states[b]->phi_n[static_cast<std::size_t>(i)];
    nn::Var phin = g.input(std::move(phi_n));

    double rate = net.cfg.dropout_rate;
    nn::Var hs_d = g.dropout(h_s, rate);
    nn::Var v0 = g.tanh_(g.affine(net.w0, hs_d, net.b0));
    nn::Var v0d = g.dropout(v0, rate);
    nn::Var v1v = g.tanh_(g.affine(net.w1v, v0d, net.b1v));
    nn::Var v1a = g.tanh_(g.affine(net.w1a, v0d, net.b1a));
    nn::Var v2v = g.affine(net.w2v, g.concat_rows({v1v, phin}), net.b2v);
    nn::Var v2a = g.affine(net.w2a, g.concat_rows({v1a, phin}), net.b2a);
    nn::Var q = g.add_rowbcast(g.sub_rowbcast(v2a, g.mean_rows(v2a)), v2v);
    return {q, v2v, v2a};
}

QValues q_values(QNet& net, const Vocab& vocab, const NavState& state) {
    nn::Graph g(false);
    QForward f = qnet_forward(g, net, vocab, {&state});
    QValues out;
    const nn::Mat& q = g.value(f.q);
    const nn::Mat& v = g.value(f.v);
    const nn::Mat& a = g.value(f.adv);
    for (int i = 0; i < kNumActions; ++i) {
        out.q[static_cast<std::size_t>(i)] = q(i, 0);
        out.advantage[static_cast<std::size_t>(i)] = a(i, 0);
    }
    out.v = v(0, 0);
    if (!q.allFinite() || !v.allFinite() || !a.allFinite())
        throw std::runtime_error("qnet: non-finite activations (divergence)");
    return out;
}

nn::Mat embed_tokens(QNet& net, const Vocab& vocab, const Tokens& tokens) {
    if (tokens.empty()) throw std::invalid_argument("embed_tokens: empty sequence");
    nn::Graph g(false);
    TokenTable table;
    std::vector<int> word_ids, didx;
    for (const auto& tok : tokens) {
        word_ids.push_back(vocab.id(tok));
        didx.push_back(table.intern(tok));
    }
    nn::Var chars = char_vectors(g, net, table);
    nn::Var ew = g.gather(net.word_emb, word_ids);
    nn::Var ec = g.gather_cols(chars, didx);
    return g.value(g.concat_rows({ew, ec}));
}

namespace {

Eigen::VectorXd encode_single(QNet& net, const Vocab& vocab, const Tokens& seq, bool bidi,
                              const std::optional<PhiZ>& phi_z) {
    nn::Graph g(false);
    TokenTable table;
    std::vector<const Tokens*> seqs = {&seq};
    SeqBatch sb = build_seq_batch(seqs, vocab, table);
    nn::Var chars = char_vectors(g, net, table);
    if (bidi) {
        std::vector<nn::Var> uf = run_lstm(g, net, net.q_fwd, chars, sb, false);
        std::vector<nn::Var> ub = run_lstm(g, net, net.q_bwd, chars, sb, true);
        std::vector<nn::Var> uq(uf.size());
        for (std::size_t t = 0; t < uf.size(); ++t) uq[t] = g.concat_rows({uf[t], ub[t]});
        return g.value(attn_pool(g, net.attn_q, uq, sb.mask)).col(0);
    }
    if (phi_z) {
        std::vector<nn::Var> uz = run_lstm(g, net, net.ans, chars, sb, false);
        nn::Mat pz(3, 1);
        for (int i = 0; i < 3; ++i) pz(i, 0) = (*phi_z)[static_cast<std::size_t>(i)];
        return g.value(g.concat_rows({uz.back(), g.input(std::move(pz))})).col(0);
    }
    std::vector<nn::Var> uo = run_lstm(g, net, net.obs, chars, sb, false);
    return g.value(attn_pool(g, net.attn_o, uo, sb.mask)).col(0);
}

}  // namespace

Eigen::VectorXd encode_question(QNet& net, const Vocab& vocab, const Tokens& q) {
    if (q.empty()) throw std::invalid_argument("encode_question: empty sequence");
    return encode_single(net, vocab, q, true, std::nullopt);
}

Eigen::VectorXd encode_observation(QNet& net, const Vocab& vocab, const Tokens& o) {
    if (o.empty()) throw std::invalid_argument("encode_observation: empty sequence");
    return encode_single(net, vocab, o, false, std::nullopt);
}

Eigen::VectorXd encode_answer_pred(QNet& net, const Vocab& vocab, const Tokens& z,
                                   const PhiZ& phi_z) {
    static const Tokens kNullSeq = {Vocab::null_token()};
    return encode_single(net, vocab, z.empty() ? kNullSeq : z, false, phi_z);
}

TdResult td_loss(QNet& online, QNet& target, const Vocab& vocab,
                 const std::vector<const Transition*>& batch, double gamma,
                 const std::vector<double>& is_weights, bool double_q, Rng* dropout_rng) {
    if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
    if (gamma < 0.0 || gamma >= 1.0) throw std::invalid_argument("td_loss: gamma must lie in [0,1)");
    if (is_weights.size() != batch.size())
        throw std::invalid_argument("td_loss: weights size mismatch");
    const int b_total = static_cast<int>(batch.size());

    std::vector<double> y(batch.size());
    std::vector<const NavState*> nexts;
    std::vector<int> pos;
    for (int b = 0; b < b_total; ++b) {
        y[static_cast<std::size_t>(b)] = batch[static_cast<std::size_t>(b)]->reward;
        if (!batch[static_cast<std::size_t>(b)]->terminal) {
            nexts.push_back(&batch[static_cast<std::size_t>(b)]->next_state);
            pos.push_back(b);
        }
    }
    if (!nexts.empty()) {
        nn::Graph gt(false);
        QForward ft = qnet_forward(gt, target, vocab, nexts);
        const nn::Mat& qt = gt.value(ft.q);
        std::vector<int> astar(nexts.size(), 0);
        if (double_q) {
            nn::Graph go(false);
            QForward fo = qnet_forward(go, online, vocab, nexts);
            const nn::Mat& qo = go.value(fo.q);
            for (std::size_t j = 0; j < nexts.size(); ++j) {
                Eigen::Index best;
                qo.col(static_cast<Eigen::Index>(j)).maxCoeff(&best);
                astar[j] = static_cast<int>(best);
            }
        } else {
            for (std::size_t j = 0; j < nexts.size(); ++j) {
                Eigen::Index best;
                qt.col(static_cast<Eigen::Index>(j)).maxCoeff(&best);
                astar[j] = static_cast<int>(best);
            }
        }
        for (std::size_t j = 0; j < nexts.size(); ++j)
            y[static_cast<std::size_t>(pos[j])] += gamma * qt(astar[j], static_cast<Eigen::Index>(j));
    }

    nn::Graph g(true, dropout_rng);
    std::vector<const NavState*> cur;
    std::vector<int> act;
    for (const Transition* t : batch) {
        cur.push_back(&t->state);
        act.push_back(static_cast<int>(t->action));
    }
    QForward f = qnet_forward(g, online, vocab, cur);
    nn::Var qsa = g.select_rows(f.q, act);

    nn::Mat ym(1, b_total), wm(1, b_total);
    for (int b = 0; b < b_total; ++b) {
        ym(0, b) = y[static_cast<std::size_t>(b)];
        wm(0, b) = is_weights[static_cast<std::size_t>(b)];
    }
    nn::Var diff = g.sub(qsa, g.input(std::move(ym)));
    nn::Var loss = g.scaled_sum(g.mul(g.mul(diff, g.input(std::move(wm))), diff),
                                1.0 / static_cast<double>(b_total));
    g.backward(loss);

    TdResult out;
    out.loss = g.value(loss)(0, 0);
    const nn::Mat& d = g.value(diff);
    out.td_abs.resize(batch.size());
    for (int b = 0; b < b_total; ++b) out.td_abs[static_cast<std::size_t>(b)] = std::abs(d(0, b));
    return out;
}

}  // namespace treenav
