#include <doctest/doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treenav/dataset.hpp"
#include "treenav/doctree.hpp"
#include "treenav/env.hpp"
#include "treenav/qnet.hpp"
#include "treenav/tokens.hpp"

using namespace treenav;
using doctest::Approx;
using nlohmann::json;

namespace {

json load_fixture(const char* name) {
    std::ifstream in(std::string(TREENAV_FIXTURES) + "/" + name);
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

DocTree phuket_annotated() {
    return annotate_answers(ingest_document(load_fixture("phuket.json")), {"Thailand"});
}

EncoderConfig tiny() {
    EncoderConfig c;
    c.word_dim = 3;
    c.char_dim = 2;
    c.conv_filter_size = 2;
    c.hidden_dim = 3;
    c.ffnn1_dim = 4;
    c.ffnn2_dim = 3;
    c.attn_hidden_dim = 3;
    c.dropout_rate = 0.0;
    c.preset = "tiny";
    return c;
}

Vocab small_vocab() {
    Vocab v;
    for (const char* w : {"which", "country", "holds", "phuket", "province", "island",
                          "thailand", "history", "geography", "the", "rain", "falls"})
        v.add(w);
    return v;
}

std::shared_ptr<const Tokens> question() {
    return std::make_shared<const Tokens>(Tokens{"Which", "country", "holds", "Phuket", "?"});
}

AnswerPrediction sample_pred() {
    AnswerPrediction p;
    p.tokens = {"Thailand"};
    p.span_distribution = {0.9, 0.1};
    p.top_logit = 1.7;
    p.entropy = 0.42;
    p.context_token_count = 9;
    p.top_probability = 0.9;
    return p;
}

// ---------------------------------------------------------------------------
// Straight-line recomputation of the encoder, one sequence and one token at a
// time. Deliberately shares no code with the batched tape implementation.

Eigen::VectorXd char_vec(const QNet& net, const std::string& raw) {
    std::string tok = lower(raw);
    int w = net.cfg.conv_filter_size, cd = net.cfg.char_dim;
    int len = static_cast<int>(tok.size());
    Eigen::VectorXd best;
    for (int j = 0; j < std::max(len, 1); ++j) {
        Eigen::VectorXd window = Eigen::VectorXd::Zero(w * cd);
        for (int k = 0; k < w; ++k) {
            int pos = j + k;
            if (pos >= len) continue;
            unsigned char c = static_cast<unsigned char>(tok[static_cast<std::size_t>(pos)]);
            window.segment(k * cd, cd) = net.char_emb.value.col(c < 128 ? c : 128);
        }
        Eigen::VectorXd conv =
            ((net.conv_w.value * window + net.conv_b.value).array().tanh()).matrix();
        best = j == 0 ? conv : best.cwiseMax(conv).eval();
    }
    return best;
}

Eigen::VectorXd embed_vec(const QNet& net, const Vocab& vocab, const std::string& tok) {
    Eigen::VectorXd out(net.cfg.token_dim());
    out.head(net.cfg.word_dim) = net.word_emb.value.col(vocab.id(tok));
    out.tail(net.cfg.char_dim) = char_vec(net, tok);
    return out;
}

std::vector<Eigen::VectorXd> embed_seq(const QNet& net, const Vocab& vocab, const Tokens& seq) {
    std::vector<Eigen::VectorXd> xs;
    for (const auto& tok : seq) xs.push_back(embed_vec(net, vocab, tok));
    return xs;
}

std::vector<Eigen::VectorXd> lstm_pass(const QNet& net, const LstmParams& p,
                                       const std::vector<Eigen::VectorXd>& xs, bool reverse) {
    int h = net.cfg.hidden_dim;
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    Eigen::VectorXd hh = Eigen::VectorXd::Zero(h), cc = Eigen::VectorXd::Zero(h);
    std::vector<Eigen::VectorXd> outs(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) {
        std::size_t t = reverse ? xs.size() - 1 - k : k;
        Eigen::VectorXd z = p.w.value * xs[t] + p.b.value + p.u.value * hh;
        Eigen::VectorXd gi = z.segment(0, h).unaryExpr(sig);
        Eigen::VectorXd gf = z.segment(h, h).unaryExpr(sig);
        Eigen::VectorXd go = z.segment(2 * h, h).unaryExpr(sig);
        Eigen::VectorXd gg = z.segment(3 * h, h).array().tanh().matrix();
        cc = (gi.cwiseProduct(gg) + gf.cwiseProduct(cc)).eval();
        hh = go.cwiseProduct(cc.array().tanh().matrix());
        outs[t] = hh;
    }
    return outs;
}

Eigen::VectorXd attn_vec(const AttnParams& p, const std::vector<Eigen::VectorXd>& us) {
    Eigen::VectorXd logits(static_cast<Eigen::Index>(us.size()));
    for (std::size_t t = 0; t < us.size(); ++t) {
        Eigen::VectorXd hidden = (p.w1.value * us[t] + p.b1.value).array().tanh().matrix();
        logits(static_cast<Eigen::Index>(t)) = (p.w2.value * hidden + p.b2.value)(0, 0);
    }
    Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    e /= e.sum();
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(us.front().size());
    for (std::size_t t = 0; t < us.size(); ++t)
        pooled += e(static_cast<Eigen::Index>(t)) * us[t];
    return pooled;
}

Eigen::VectorXd question_vec(const QNet& net, const Vocab& vocab, const Tokens& q) {
    auto xs = embed_seq(net, vocab, q);
    auto uf = lstm_pass(net, net.q_fwd, xs, false);
    auto ub = lstm_pass(net, net.q_bwd, xs, true);
    std::vector<Eigen::VectorXd> us(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
        us[t].resize(uf[t].size() + ub[t].size());
        us[t] << uf[t], ub[t];
    }
    return attn_vec(net.attn_q, us);
}

Eigen::VectorXd observation_vec(const QNet& net, const Vocab& vocab, const Tokens& o) {
    return attn_vec(net.attn_o, lstm_pass(net, net.obs, embed_seq(net, vocab, o), false));
}

Eigen::VectorXd answer_vec(const QNet& net, const Vocab& vocab, const Tokens& z,
                           const PhiZ& phi_z) {
    Tokens seq = z.empty() ? Tokens{Vocab::null_token()} : z;
    auto outs = lstm_pass(net, net.ans, embed_seq(net, vocab, seq), false);
    Eigen::VectorXd out(outs.back().size() + 3);
    out << outs.back(), phi_z[0], phi_z[1], phi_z[2];
    return out;
}

struct HeadOut {
    Eigen::VectorXd q, adv;
    double v = 0.0;
};

HeadOut head_vec(const QNet& net, const Vocab& vocab, const NavState& s) {
    Eigen::VectorXd hq = question_vec(net, vocab, *s.question);
    Eigen::VectorXd ho = observation_vec(net, vocab, s.observation);
    Tokens z = s.answer_pred ? s.answer_pred->tokens : Tokens{};
    Eigen::VectorXd hz = answer_vec(net, vocab, z, s.phi_z);
    Eigen::VectorXd hs(hq.size() + ho.size() + hz.size());
    hs << hq, ho, hz;
    Eigen::VectorXd v0 = (net.w0.value * hs + net.b0.value).array().tanh().matrix();
    Eigen::VectorXd v1v = (net.w1v.value * v0 + net.b1v.value).array().tanh().matrix();
    Eigen::VectorXd v1a = (net.w1a.value * v0 + net.b1a.value).array().tanh().matrix();
    Eigen::VectorXd pn(7);
    for (int i = 0; i < 7; ++i) pn(i) = s.phi_n[static_cast<std::size_t>(i)];
    Eigen::VectorXd cv(v1v.size() + 7), ca(v1a.size() + 7);
    cv << v1v, pn;
    ca << v1a, pn;
    HeadOut out;
    out.v = (net.w2v.value * cv + net.b2v.value)(0, 0);
    out.adv = net.w2a.value * ca + net.b2a.value;
    out.q = (out.adv.array() - out.adv.mean() + out.v).matrix();
    return out;
}

void check_close(const Eigen::VectorXd& got, const Eigen::VectorXd& want, double eps) {
    REQUIRE(got.size() == want.size());
    for (Eigen::Index i = 0; i < got.size(); ++i)
        CHECK(got(i) == Approx(want(i)).epsilon(eps));
}

}  // namespace

TEST_CASE("vocab interns lowercase and reserves unk and null") {
    Vocab v;
    CHECK(v.size() == 2);
    CHECK(v.id(Vocab::unk_token()) == Vocab::kUnkId);
    CHECK(v.id(Vocab::null_token()) == Vocab::kNullId);
    CHECK(v.word(0) == "<unk>");
    CHECK(v.word(1) == "<null>");

    int paris = v.add("Paris");
    CHECK(paris == 2);
    CHECK(v.add("PARIS") == paris);
    CHECK(v.add("paris") == paris);
    CHECK(v.size() == 3);
    CHECK(v.word(paris) == "paris");

    CHECK(v.id("pArIs") == paris);
    CHECK(v.id("berlin") == Vocab::kUnkId);
}

TEST_CASE("encoder config presets and validation") {
    EncoderConfig d = EncoderConfig::desk();
    CHECK(d.word_dim == 16);
    CHECK(d.char_dim == 8);
    CHECK(d.conv_filter_size == 3);
    CHECK(d.hidden_dim == 32);
    CHECK(d.ffnn1_dim == 64);
    CHECK(d.ffnn2_dim == 32);
    CHECK(d.dropout_rate == 0.0);
    CHECK(d.attn_hidden_dim == 32);
    CHECK(d.preset == "desk");
    CHECK(d.token_dim() == 24);
    CHECK_NOTHROW(d.validate());

    EncoderConfig p = EncoderConfig::paper();
    CHECK(p.word_dim == 300);
    CHECK(p.char_dim == 20);
    CHECK(p.conv_filter_size == 5);
    CHECK(p.hidden_dim == 300);
    CHECK(p.ffnn1_dim == 512);
    CHECK(p.ffnn2_dim == 256);
    CHECK(p.dropout_rate == 0.2);
    CHECK(p.attn_hidden_dim == 300);
    CHECK(p.preset == "paper");
    CHECK_NOTHROW(p.validate());

    auto reject = [](auto mutate) {
        EncoderConfig c = EncoderConfig::desk();
        mutate(c);
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    };
    reject([](EncoderConfig& c) { c.word_dim = 0; });
    reject([](EncoderConfig& c) { c.char_dim = 0; });
    reject([](EncoderConfig& c) { c.conv_filter_size = -1; });
    reject([](EncoderConfig& c) { c.hidden_dim = 0; });
    reject([](EncoderConfig& c) { c.ffnn1_dim = 0; });
    reject([](EncoderConfig& c) { c.ffnn2_dim = 0; });
    reject([](EncoderConfig& c) { c.attn_hidden_dim = 0; });
    reject([](EncoderConfig& c) { c.dropout_rate = 1.0; });
    reject([](EncoderConfig& c) { c.dropout_rate = -0.1; });
}

TEST_CASE("fresh nets are seeded reproducibly with documented shapes") {
    EncoderConfig cfg = EncoderConfig::desk();
    Rng rng(7);
    QNet net = QNet::make(cfg, 40, rng);

    auto ps = net.params();
    REQUIRE(ps.size() == 34);
    const std::vector<std::string> want = {
        "word_emb", "char_emb", "conv.w",    "conv.b",    "q_fwd.w",   "q_fwd.u",   "q_fwd.b",
        "q_bwd.w",  "q_bwd.u",  "q_bwd.b",   "obs.w",     "obs.u",     "obs.b",     "ans.w",
        "ans.u",    "ans.b",    "attn_q.w1", "attn_q.b1", "attn_q.w2", "attn_q.b2", "attn_o.w1",
        "attn_o.b1", "attn_o.w2", "attn_o.b2", "w0",       "b0",        "w1v",       "b1v",
        "w1a",      "b1a",      "w2v",       "b2v",       "w2a",       "b2a"};
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(ps[i]->name == want[i]);

    CHECK(net.word_emb.value.rows() == 16);
    CHECK(net.word_emb.value.cols() == 40);
    CHECK(net.char_emb.value.rows() == 8);
    CHECK(net.char_emb.value.cols() == kCharVocab);
    CHECK(net.conv_w.value.rows() == 8);
    CHECK(net.conv_w.value.cols() == 24);
    CHECK(net.q_fwd.w.value.rows() == 128);
    CHECK(net.q_fwd.w.value.cols() == 24);
    CHECK(net.q_fwd.u.value.rows() == 128);
    CHECK(net.q_fwd.u.value.cols() == 32);
    CHECK(net.attn_q.w1.value.cols() == 64);   // question states are bidirectional
    CHECK(net.attn_o.w1.value.cols() == 32);
    CHECK(net.w0.value.rows() == 64);
    CHECK(net.w0.value.cols() == 2 * 32 + 32 + 32 + 3);
    CHECK(net.w2v.value.rows() == 1);
    CHECK(net.w2v.value.cols() == 32 + 7);
    CHECK(net.w2a.value.rows() == kNumActions);
    CHECK(net.w2a.value.cols() == 32 + 7);

    // Forget-gate rows of every LSTM bias start at one, the rest at zero.
    for (const LstmParams* l : {&net.q_fwd, &net.q_bwd, &net.obs, &net.ans}) {
        CHECK(l->b.value.middleRows(0, 32).isZero());
        CHECK((l->b.value.middleRows(32, 32).array() == 1.0).all());
        CHECK(l->b.value.middleRows(64, 64).isZero());
    }
    for (const nn::Param* b : {&net.conv_b, &net.b0, &net.b1v, &net.b1a, &net.b2v, &net.b2a,
                               &net.attn_q.b1, &net.attn_q.b2, &net.attn_o.b1, &net.attn_o.b2})
        CHECK(b->value.isZero());

    CHECK(net.word_emb.value.cwiseAbs().maxCoeff() <= 0.1);
    CHECK(net.char_emb.value.cwiseAbs().maxCoeff() <= 0.1);
    CHECK(net.word_emb.value.cwiseAbs().maxCoeff() > 0.0);
    double bound = std::sqrt(6.0 / (128.0 + 24.0));
    CHECK(net.q_fwd.w.value.cwiseAbs().maxCoeff() <= bound);
    CHECK(net.q_fwd.w.value.cwiseAbs().maxCoeff() > 0.5 * bound);

    Rng rng2(7);
    QNet twin = QNet::make(cfg, 40, rng2);
    CHECK(twin.word_emb.value == net.word_emb.value);
    CHECK(twin.w2a.value == net.w2a.value);
    Rng rng3(8);
    QNet other = QNet::make(cfg, 40, rng3);
    CHECK(other.word_emb.value != net.word_emb.value);

    Rng r4(1);
    CHECK_THROWS_AS(QNet::make(cfg, 1, r4), std::invalid_argument);
}

TEST_CASE("copy_values_from mirrors every tensor and rejects shape mismatch") {
    Rng ra(1), rb(2);
    QNet a = QNet::make(tiny(), 10, ra);
    QNet b = QNet::make(tiny(), 10, rb);
    REQUIRE(a.w0.value != b.w0.value);
    b.copy_values_from(a);
    auto pa = a.params();
    auto pb = b.params();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);

    Rng rc(3);
    QNet c = QNet::make(EncoderConfig::desk(), 10, rc);
    CHECK_THROWS_AS(c.copy_values_from(a), std::logic_error);
}

TEST_CASE("embed_tokens concatenates word and char channels") {
    Rng rng(11);
    QNet net = QNet::make(tiny(), 14, rng);
    Vocab vocab = small_vocab();

    Tokens toks = {"Phuket", "province", "?", "phuket"};
    nn::Mat e = embed_tokens(net, vocab, toks);
    REQUIRE(e.rows() == net.cfg.token_dim());
    REQUIRE(e.cols() == 4);
    for (int i = 0; i < 4; ++i)
        check_close(e.col(i), embed_vec(net, vocab, toks[static_cast<std::size_t>(i)]), 1e-12);

    // Lookup is case-insensitive end to end.
    CHECK(e.col(0) == e.col(3));
    // Unknown words share the unk row but keep their own char vectors.
    nn::Mat u = embed_tokens(net, vocab, {"berlin", "munich"});
    CHECK(u.col(0).head(3) == u.col(1).head(3));
    CHECK(u.col(0).head(3) == net.word_emb.value.col(Vocab::kUnkId));
    CHECK(u.col(0).tail(2) != u.col(1).tail(2));
    // Bytes outside ASCII fold onto one char id, so two all-high-byte tokens
    // of equal length embed identically.
    nn::Mat hb = embed_tokens(net, vocab, {"\xC3\xA9", "\xF0\x9F"});
    CHECK(hb.col(0) == hb.col(1));

    CHECK_THROWS_AS(embed_tokens(net, vocab, {}), std::invalid_argument);
}

TEST_CASE("question encoding matches a straight-line recomputation") {
    Rng rng(21);
    QNet net = QNet::make(EncoderConfig::desk(), 20, rng);
    Vocab vocab = small_vocab();
    Tokens q = *question();

    Eigen::VectorXd got = encode_question(net, vocab, q);
    REQUIRE(got.size() == 2 * net.cfg.hidden_dim);
    check_close(got, question_vec(net, vocab, q), 1e-9);

    Tokens single = {"thailand"};
    check_close(encode_question(net, vocab, single), question_vec(net, vocab, single), 1e-9);

    // Token order matters to the recurrence.
    Tokens swapped = q;
    std::swap(swapped[0], swapped[1]);
    Eigen::VectorXd other = encode_question(net, vocab, swapped);
    CHECK((got - other).cwiseAbs().maxCoeff() > 1e-8);

    CHECK_THROWS_AS(encode_question(net, vocab, {}), std::invalid_argument);
}

TEST_CASE("observation encoding matches a straight-line recomputation") {
    Rng rng(22);
    QNet net = QNet::make(EncoderConfig::desk(), 20, rng);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();

    Tokens o = observation_tokens(tree, 7);
    Eigen::VectorXd got = encode_observation(net, vocab, o);
    REQUIRE(got.size() == net.cfg.hidden_dim);
    check_close(got, observation_vec(net, vocab, o), 1e-9);

    CHECK_THROWS_AS(encode_observation(net, vocab, {}), std::invalid_argument);
}

TEST_CASE("answer encoding carries phi_z and the null sentinel") {
    Rng rng(23);
    QNet net = QNet::make(EncoderConfig::desk(), 20, rng);
    Vocab vocab = small_vocab();
    PhiZ stats = {0.42, 1.7, 9.0};

    Eigen::VectorXd got = encode_answer_pred(net, vocab, {"Thailand"}, stats);
    REQUIRE(got.size() == net.cfg.hidden_dim + 3);
    check_close(got, answer_vec(net, vocab, {"Thailand"}, stats), 1e-9);
    CHECK(got(net.cfg.hidden_dim + 0) == 0.42);
    CHECK(got(net.cfg.hidden_dim + 1) == 1.7);
    CHECK(got(net.cfg.hidden_dim + 2) == 9.0);

    // No prediction encodes the null token with zero stats.
    Eigen::VectorXd absent = encode_answer_pred(net, vocab, {}, PhiZ{});
    Tokens null_seq = {Vocab::null_token()};
    check_close(absent, answer_vec(net, vocab, {}, PhiZ{}), 1e-9);
    check_close(absent.head(net.cfg.hidden_dim),
                encode_answer_pred(net, vocab, null_seq, PhiZ{}).head(net.cfg.hidden_dim), 1e-12);
    CHECK(absent.tail(3).isZero());
}

TEST_CASE("q_values match the straight-line head") {
    Rng rng(31);
    QNet net = QNet::make(EncoderConfig::desk(), 20, rng);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();
    auto q = question();

    NavState plain = state_at(tree, 4, q);
    NavState with_pred = make_state(tree, 7, q, 3, sample_pred());

    for (const NavState* s : {&plain, &with_pred}) {
        QValues qv = q_values(net, vocab, *s);
        HeadOut want = head_vec(net, vocab, *s);
        CHECK(qv.v == Approx(want.v).epsilon(1e-9));
        for (int i = 0; i < kNumActions; ++i) {
            CHECK(qv.q[static_cast<std::size_t>(i)] == Approx(want.q(i)).epsilon(1e-9));
            CHECK(qv.advantage[static_cast<std::size_t>(i)] ==
                  Approx(want.adv(i)).epsilon(1e-9));
        }
    }

    // The two fixture states should not collapse to one value row.
    QValues qa = q_values(net, vocab, plain);
    QValues qb = q_values(net, vocab, with_pred);
    CHECK(std::abs(qa.q[0] - qb.q[0]) > 1e-10);
}

TEST_CASE("dueling identity and advantage shift invariance") {
    Rng rng(32);
    QNet net = QNet::make(EncoderConfig::desk(), 20, rng);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();
    NavState s = state_at(tree, 1, question());

    QValues qv = q_values(net, vocab, s);
    double mean_adv = 0.0;
    for (double a : qv.advantage) mean_adv += a;
    mean_adv /= kNumActions;
    for (int i = 0; i < kNumActions; ++i)
        CHECK(qv.q[static_cast<std::size_t>(i)] ==
              Approx(qv.v + qv.advantage[static_cast<std::size_t>(i)] - mean_adv).epsilon(1e-12));

    // A constant added to every advantage logit cancels in Q.
    QNet shifted = QNet::make(EncoderConfig::desk(), 20, rng);
    shifted.copy_values_from(net);
    shifted.b2a.value.array() += 3.7;
    QValues qs = q_values(shifted, vocab, s);
    CHECK(qs.v == Approx(qv.v).epsilon(1e-12));
    for (int i = 0; i < kNumActions; ++i) {
        CHECK(qs.advantage[static_cast<std::size_t>(i)] ==
              Approx(qv.advantage[static_cast<std::size_t>(i)] + 3.7).epsilon(1e-12));
        CHECK(qs.q[static_cast<std::size_t>(i)] ==
              Approx(qv.q[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }
}

TEST_CASE("batched forward equals single-state passes") {
    Rng rng(33);
    QNet net = QNet::make(EncoderConfig::desk(), 20, rng);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();

    auto q1 = question();
    auto q2 = std::make_shared<const Tokens>(Tokens{"where", "is", "tin"});
    NavState s1 = state_at(tree, 0, q1);
    NavState s2 = make_state(tree, 7, q2, 4, sample_pred());
    NavState s3 = state_at(tree, 9, q1);

    nn::Graph g(false);
    QForward f = qnet_forward(g, net, vocab, {&s1, &s2, &s3});
    const nn::Mat& qm = g.value(f.q);
    const nn::Mat& vm = g.value(f.v);
    REQUIRE(qm.rows() == kNumActions);
    REQUIRE(qm.cols() == 3);
    REQUIRE(vm.rows() == 1);

    const NavState* states[] = {&s1, &s2, &s3};
    for (int b = 0; b < 3; ++b) {
        QValues qv = q_values(net, vocab, *states[b]);
        CHECK(vm(0, b) == Approx(qv.v).epsilon(1e-12));
        for (int i = 0; i < kNumActions; ++i)
            CHECK(qm(i, b) == Approx(qv.q[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
}

TEST_CASE("zeroed parameters give a flat value surface") {
    Rng rng(34);
    QNet net = QNet::make(tiny(), 10, rng);
    for (nn::Param* p : net.params()) p->value.setZero();
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();

    QValues qv = q_values(net, vocab, state_at(tree, 4, question()));
    CHECK(qv.v == 0.0);
    for (int i = 0; i < kNumActions; ++i) {
        CHECK(qv.q[static_cast<std::size_t>(i)] == 0.0);
        CHECK(qv.advantage[static_cast<std::size_t>(i)] == 0.0);
    }
}

TEST_CASE("non-finite activations are reported as divergence") {
    Rng rng(35);
    QNet net = QNet::make(tiny(), 10, rng);
    net.b2v.value(0, 0) = std::numeric_limits<double>::infinity();
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();
    CHECK_THROWS_AS(q_values(net, vocab, state_at(tree, 0, question())), std::runtime_error);
}

TEST_CASE("qnet_forward validates its inputs") {
    Rng rng(36);
    QNet net = QNet::make(tiny(), 10, rng);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();

    nn::Graph g(false);
    CHECK_THROWS_AS(qnet_forward(g, net, vocab, {}), std::invalid_argument);

    NavState s = state_at(tree, 0, std::make_shared<const Tokens>(Tokens{}));
    nn::Graph g2(false);
    CHECK_THROWS_AS(qnet_forward(g2, net, vocab, {&s}), std::invalid_argument);
    NavState s2 = state_at(tree, 0, question());
    s2.question = nullptr;
    nn::Graph g3(false);
    CHECK_THROWS_AS(qnet_forward(g3, net, vocab, {&s2}), std::invalid_argument);
}

namespace {

std::vector<Transition> td_fixture(const DocTree& tree) {
    auto q = question();
    std::vector<Transition> ts(3);
    ts[0].state = state_at(tree, 0, q);
    ts[0].action = Action::Down;
    ts[0].reward = -0.02;
    ts[0].next_state = state_at(tree, 1, q);
    ts[0].terminal = false;

    ts[1].state = state_at(tree, 4, q);
    ts[1].action = Action::Answer;
    ts[1].reward = -0.06;
    ts[1].next_state = make_state(tree, 4, q, 2, sample_pred());
    ts[1].terminal = false;

    ts[2].state = make_state(tree, 7, q, 3, sample_pred());
    ts[2].action = Action::Stop;
    ts[2].reward = 2.0;
    ts[2].terminal = true;
    return ts;
}

struct TdOracle {
    double loss = 0.0;
    std::vector<double> td_abs;
};

TdOracle td_oracle(const QNet& online, const QNet& target, const Vocab& vocab,
                   const std::vector<const Transition*>& batch, double gamma,
                   const std::vector<double>& w, bool double_q) {
    TdOracle out;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Transition& t = *batch[b];
        double y = t.reward;
        if (!t.terminal) {
            HeadOut ht = head_vec(target, vocab, t.next_state);
            Eigen::Index astar;
            if (double_q) {
                head_vec(online, vocab, t.next_state).q.maxCoeff(&astar);
            } else {
                ht.q.maxCoeff(&astar);
            }
            y += gamma * ht.q(astar);
        }
        double qsa = head_vec(online, vocab, t.state).q(static_cast<int>(t.action));
        out.td_abs.push_back(std::abs(qsa - y));
        out.loss += w[b] * (qsa - y) * (qsa - y);
    }
    out.loss /= static_cast<double>(batch.size());
    return out;
}

}  // namespace

TEST_CASE("td loss matches a brute-force target computation") {
    Rng ro(41), rt(42);
    QNet online = QNet::make(tiny(), 14, ro);
    QNet target = QNet::make(tiny(), 14, rt);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();

    std::vector<Transition> ts = td_fixture(tree);
    std::vector<const Transition*> batch = {&ts[0], &ts[1], &ts[2]};
    std::vector<double> w = {1.0, 0.5, 0.25};

    for (bool double_q : {false, true}) {
        CAPTURE(double_q);
        for (nn::Param* p : online.params()) p->zero_grad();
        TdResult got = td_loss(online, target, vocab, batch, 0.9, w, double_q, nullptr);
        TdOracle want = td_oracle(online, target, vocab, batch, 0.9, w, double_q);
        CHECK(got.loss == Approx(want.loss).epsilon(1e-9));
        REQUIRE(got.td_abs.size() == 3);
        for (int b = 0; b < 3; ++b)
            CHECK(got.td_abs[static_cast<std::size_t>(b)] ==
                  Approx(want.td_abs[static_cast<std::size_t>(b)]).epsilon(1e-9));
    }

    // The double-Q target picks a different bootstrap action here, so the
    // losses should not coincide.
    TdResult plain = td_loss(online, target, vocab, batch, 0.9, w, false, nullptr);
    TdResult dbl = td_loss(online, target, vocab, batch, 0.9, w, true, nullptr);
    TdOracle oplain = td_oracle(online, target, vocab, batch, 0.9, w, false);
    TdOracle odbl = td_oracle(online, target, vocab, batch, 0.9, w, true);
    CHECK(plain.loss == Approx(oplain.loss).epsilon(1e-9));
    CHECK(dbl.loss == Approx(odbl.loss).epsilon(1e-9));
}

TEST_CASE("td loss validates its arguments") {
    Rng ro(43), rt(44);
    QNet online = QNet::make(tiny(), 14, ro);
    QNet target = QNet::make(tiny(), 14, rt);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();
    std::vector<Transition> ts = td_fixture(tree);
    std::vector<const Transition*> batch = {&ts[0]};

    CHECK_THROWS_AS(td_loss(online, target, vocab, {}, 0.9, {}, false, nullptr),
                    std::invalid_argument);
    CHECK_THROWS_AS(td_loss(online, target, vocab, batch, -0.1, {1.0}, false, nullptr),
                    std::invalid_argument);
    CHECK_THROWS_AS(td_loss(online, target, vocab, batch, 1.0, {1.0}, false, nullptr),
                    std::invalid_argument);
    CHECK_THROWS_AS(td_loss(online, target, vocab, batch, 0.9, {1.0, 2.0}, false, nullptr),
                    std::invalid_argument);
}

TEST_CASE("td loss accumulates gradients only into the online net") {
    Rng ro(45), rt(46);
    QNet online = QNet::make(tiny(), 14, ro);
    QNet target = QNet::make(tiny(), 14, rt);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();
    std::vector<Transition> ts = td_fixture(tree);
    std::vector<const Transition*> batch = {&ts[0], &ts[1], &ts[2]};

    for (nn::Param* p : online.params()) p->zero_grad();
    for (nn::Param* p : target.params()) p->zero_grad();
    td_loss(online, target, vocab, batch, 0.9, {1.0, 1.0, 1.0}, true, nullptr);

    CHECK(online.w2a.grad.norm() > 0.0);
    CHECK(online.w0.grad.norm() > 0.0);
    CHECK(online.word_emb.grad.norm() > 0.0);
    for (const nn::Param* p : target.params()) CHECK(p->grad.isZero());

    // A second call adds on top instead of overwriting.
    nn::Mat before = online.w2a.grad;
    td_loss(online, target, vocab, batch, 0.9, {1.0, 1.0, 1.0}, true, nullptr);
    CHECK(online.w2a.grad == 2.0 * before);
}

TEST_CASE("training dropout requires a generator and is seed-stable") {
    EncoderConfig cfg = tiny();
    cfg.dropout_rate = 0.5;
    Rng ro(47), rt(48);
    QNet online = QNet::make(cfg, 14, ro);
    QNet target = QNet::make(cfg, 14, rt);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();
    std::vector<Transition> ts = td_fixture(tree);
    std::vector<const Transition*> batch = {&ts[0], &ts[2]};
    std::vector<double> w = {1.0, 1.0};

    CHECK_THROWS_AS(td_loss(online, target, vocab, batch, 0.9, w, false, nullptr),
                    std::logic_error);

    Rng d1(5), d2(5), d3(6);
    double a = td_loss(online, target, vocab, batch, 0.9, w, false, &d1).loss;
    double b = td_loss(online, target, vocab, batch, 0.9, w, false, &d2).loss;
    double c = td_loss(online, target, vocab, batch, 0.9, w, false, &d3).loss;
    CHECK(a == b);
    CHECK(a != c);

    // Evaluation-mode passes ignore the dropout rate entirely.
    QValues qv1 = q_values(online, vocab, ts[0].state);
    QValues qv2 = q_values(online, vocab, ts[0].state);
    CHECK(qv1.q == qv2.q);
}

TEST_CASE("finite differences confirm td gradients end to end") {
    Rng ro(51), rt(52);
    QNet online = QNet::make(tiny(), 14, ro);
    QNet target = QNet::make(tiny(), 14, rt);
    Vocab vocab = small_vocab();
    DocTree tree = phuket_annotated();

    auto q = std::make_shared<const Tokens>(Tokens{"which", "island"});
    std::vector<Transition> ts(2);
    ts[0].state = state_at(tree, 0, q);
    ts[0].action = Action::Down;
    ts[0].reward = -0.02;
    ts[0].next_state = state_at(tree, 1, q);
    ts[0].terminal = false;
    ts[1].state = state_at(tree, 1, q);
    ts[1].action = Action::Stop;
    ts[1].reward = 2.0;
    ts[1].terminal = true;
    std::vector<const Transition*> batch = {&ts[0], &ts[1]};
    std::vector<double> w = {0.8, 1.2};

    auto loss_at = [&]() {
        return td_loss(online, target, vocab, batch, 0.9, w, false, nullptr).loss;
    };

    for (nn::Param* p : online.params()) p->zero_grad();
    td_loss(online, target, vocab, batch, 0.9, w, false, nullptr);
    std::vector<nn::Mat> analytic;
    for (nn::Param* p : online.params()) analytic.push_back(p->grad);

    const double h = 1e-5;
    auto ps = online.params();
    for (std::size_t pi = 0; pi < ps.size(); ++pi) {
        nn::Param* p = ps[pi];
        Eigen::Index rows = p->value.rows();
        Eigen::Index n = p->value.size();
        Eigen::Index stride = std::max<Eigen::Index>(1, n / 8);
        for (Eigen::Index i = 0; i < n; i += stride) {
            Eigen::Index r = i % rows, c = i / rows;
            double saved = p->value(r, c);
            p->value(r, c) = saved + h;
            double up = loss_at();
            p->value(r, c) = saved - h;
            double down = loss_at();
            p->value(r, c) = saved;
            double fd = (up - down) / (2.0 * h);
            CAPTURE(p->name);
            CAPTURE(i);
            CHECK(analytic[pi](r, c) == Approx(fd).epsilon(5e-6));
        }
    }
}
