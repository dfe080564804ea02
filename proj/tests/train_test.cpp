#include <doctest/doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treenav/checkpoint.hpp"
#include "treenav/corpus.hpp"
#include "treenav/dataset.hpp"
#include "treenav/env.hpp"
#include "treenav/qnet.hpp"
#include "treenav/train.hpp"

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

QASample phuket_sample() {
    QASample s;
    s.question_id = "q1";
    s.question = "Which country holds Phuket ?";
    s.question_tokens = tokenize(s.question);
    s.answer_aliases = {"Thailand"};
    s.documents = {phuket_annotated()};
    return s;
}

EncoderConfig micro_encoder() {
    EncoderConfig c;
    c.word_dim = 6;
    c.char_dim = 4;
    c.conv_filter_size = 2;
    c.hidden_dim = 8;
    c.ffnn1_dim = 12;
    c.ffnn2_dim = 8;
    c.attn_hidden_dim = 8;
    c.dropout_rate = 0.0;
    return c;
}

/// Smallest trainer setup that still exercises warm-up, updates and target
/// syncs within a couple hundred steps.
TrainConfig fast_cfg(std::uint64_t seed) {
    TrainConfig c = TrainConfig::desk();
    c.encoder = micro_encoder();
    c.max_steps = 260;
    c.anneal_steps = 260;
    c.memory_init = 32;
    c.memory_max = 128;
    c.batch = 8;
    c.target_period = 64;
    c.metrics_period = 100;
    c.budget_train = 8;
    c.k_samples = 3;
    c.lr = 1e-3;
    c.seed = seed;
    return c;
}

std::vector<QASample> small_corpus(std::uint64_t seed) {
    CorpusSpec spec;
    spec.num_docs = 10;
    spec.depth_min = 2;
    spec.depth_max = 2;
    spec.branching_min = 3;
    spec.branching_max = 4;
    spec.seed = seed;
    return generate_corpus(spec);
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("treenav_train_" + std::to_string(std::rand()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

QValues qv_from(const std::vector<double>& q) {
    QValues v;
    for (int i = 0; i < kNumActions; ++i) v.q[static_cast<std::size_t>(i)] = q[static_cast<std::size_t>(i)];
    return v;
}

/// Nodes reachable from any annotated answer paragraph in at most `moves`
/// movement actions.
std::set<NodeId> backward_closure(const DocTree& tree, int moves) {
    std::set<NodeId> frontier;
    for (const DocNode& n : tree.nodes)
        if (n.kind == NodeKind::Paragraph && tree.answer_node_ids.count(n.id))
            frontier.insert(n.id);
    std::set<NodeId> seen = frontier;
    for (int i = 0; i < moves; ++i) {
        std::set<NodeId> next;
        for (NodeId u : frontier)
            for (Action a : {Action::Down, Action::Right, Action::Left, Action::UpRight,
                             Action::UpLeft})
                next.insert(move_action(tree, u, a));
        frontier = std::move(next);
        seen.insert(frontier.begin(), frontier.end());
    }
    return seen;
}

}  // namespace

TEST_CASE("linear schedule hits both endpoints exactly") {
    LinearSchedule s{1.0, 0.1, 100};
    CHECK(s.at(0) == 1.0);
    CHECK(s.at(-5) == 1.0);
    CHECK(s.at(100) == 0.1);
    CHECK(s.at(100000) == 0.1);
    CHECK(s.at(50) == Approx(0.55).epsilon(1e-12));
    CHECK(s.at(25) == Approx(1.0 + (0.1 - 1.0) * 0.25).epsilon(1e-12));

    LinearSchedule flat{0.5, 0.5, 7};
    CHECK(flat.at(3) == 0.5);
}

TEST_CASE("sampling distribution names round-trip") {
    for (SamplingDistribution d : {SamplingDistribution::Sequential, SamplingDistribution::UniformTree,
                                   SamplingDistribution::Backward, SamplingDistribution::Mixture}) {
        auto back = sampling_distribution_from_name(sampling_distribution_name(d));
        REQUIRE(back.has_value());
        CHECK(*back == d);
    }
    CHECK(sampling_distribution_name(SamplingDistribution::UniformTree) == std::string("uniform"));
    CHECK(!sampling_distribution_from_name("gaussian").has_value());
}

TEST_CASE("f_U picks sentences a fifth of the time, uniform within pools") {
    DocTree tree = phuket_annotated();
    // Nodes 2, 5 and 8 are the sentences of the fixture.
    std::map<NodeId, long> counts;
    Rng rng(17);
    const long n = 140000;
    for (long i = 0; i < n; ++i) ++counts[sample_f_U(tree, rng)];

    long sentence_draws = counts[2] + counts[5] + counts[8];
    CHECK(static_cast<double>(sentence_draws) / n == Approx(0.2).epsilon(0.05));
    for (NodeId leaf : {2, 5, 8})
        CHECK(static_cast<double>(counts[leaf]) / n == Approx(0.2 / 3.0).epsilon(0.08));
    for (NodeId inner : {0, 1, 3, 4, 6, 7, 9})
        CHECK(static_cast<double>(counts[inner]) / n == Approx(0.8 / 7.0).epsilon(0.08));
}

TEST_CASE("f_U with no sentences falls back to the inner pool") {
    // Hand-built arena: a title with two sentence-less paragraphs.
    DocTree flat;
    flat.doc_id = "flat";
    for (int i = 0; i < 3; ++i) {
        DocNode n;
        n.id = i;
        n.kind = i == 0 ? NodeKind::Title : NodeKind::Paragraph;
        n.label_tokens = {"word" + std::to_string(i)};
        n.label = n.label_tokens.front();
        n.parent = i == 0 ? kNoNode : 0;
        if (i > 0) flat.nodes[0].children.push_back(i);
        flat.nodes.push_back(std::move(n));
    }
    refresh_stats(flat);

    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        NodeId u = sample_f_U(flat, rng);
        CHECK(flat.node(u).kind != NodeKind::Sentence);
    }
}

TEST_CASE("f_B stays within three moves of an answer paragraph") {
    DocTree tree = phuket_annotated();
    std::set<NodeId> closure = backward_closure(tree, 3);
    REQUIRE(closure.count(7) == 1);
    REQUIRE(closure.count(9) == 1);

    Rng rng(19);
    std::set<NodeId> seen;
    for (int i = 0; i < 20000; ++i) {
        NodeId u = sample_f_B(tree, rng);
        CHECK(closure.count(u) == 1);
        seen.insert(u);
    }
    // More than just the anchors themselves show up.
    CHECK(seen.size() > 2);

    DocTree bare = ingest_document(load_fixture("phuket.json"));
    Rng rng2(20);
    CHECK_THROWS_AS(sample_f_B(bare, rng2), std::logic_error);
}

TEST_CASE("greedy action selection is deterministic and respects legality") {
    QValues q = qv_from({0.1, 0.2, 0.3, 0.4, 0.5, 9.0, 0.7});

    Rng rng(1);
    CHECK(select_action(q, false, 0.0, rng) == Action::Answer);
    CHECK(select_action(q, true, 0.0, rng) == Action::Stop);

    // Epsilon zero consumes no randomness at all.
    Rng a(9), b(9);
    select_action(q, false, 0.0, a);
    CHECK(a.next_u64() == b.next_u64());

    // Exact ties resolve to the first legal action.
    QValues flat = qv_from({1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
    Rng rng2(2);
    CHECK(select_action(flat, false, 0.0, rng2) == Action::Down);
    QValues later = qv_from({1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1.0});
    CHECK(select_action(later, false, 0.0, rng2) == Action::Left);
}

TEST_CASE("full exploration draws uniformly over the legal set") {
    QValues q = qv_from({0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0});
    Rng rng(23);
    std::map<Action, long> counts;
    const long n = 70000;
    for (long i = 0; i < n; ++i) ++counts[select_action(q, false, 1.0, rng)];
    for (Action a : legal_actions(false))
        CHECK(static_cast<double>(counts[a]) / n == Approx(1.0 / 7.0).epsilon(0.05));

    std::map<Action, long> coupled_counts;
    for (long i = 0; i < n; ++i) ++coupled_counts[select_action(q, true, 1.0, rng)];
    CHECK(coupled_counts.count(Action::Answer) == 0);
    for (Action a : legal_actions(true))
        CHECK(static_cast<double>(coupled_counts[a]) / n == Approx(1.0 / 6.0).epsilon(0.05));
}

TEST_CASE("sequential episodes chain transitions through the env") {
    QASample sample = phuket_sample();
    const DocTree& tree = sample.documents[0];
    std::map<std::string, std::vector<std::string>> table{{"q1", {"Thailand"}}};
    OracleExtractor ex(table);
    Env env(tree, sample.question_id, sample.question_tokens, &ex, 6, false);

    Vocab vocab = build_vocab({sample});
    Rng init(3);
    QNet net = QNet::make(micro_encoder(), vocab.size(), init);

    Rng rng(11);
    std::vector<Transition> ts = run_episode_sequential(env, net, vocab, 0.7, rng);
    REQUIRE(!ts.empty());
    CHECK(ts.size() <= 6);
    CHECK(ts.front().state.node == 0);
    CHECK(ts.back().terminal);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const Transition& t = ts[i];
        CHECK(t.reward == action_reward(tree, t.state.node, t.action));
        CHECK(t.terminal == (t.action == Action::Stop));
        if (i + 1 < ts.size()) {
            REQUIRE(!t.terminal);
            CHECK(ts[i + 1].state.node == t.next_state.node);
            CHECK(ts[i + 1].state.step == t.next_state.step);
        }
    }
    double total = 0.0;
    for (const Transition& t : ts) total += t.reward;
    CHECK(env.episode().total_reward == Approx(total).epsilon(1e-12));
}

TEST_CASE("sampled episodes emit exactly k one-step transitions") {
    QASample sample = phuket_sample();
    const DocTree& tree = sample.documents[0];
    std::map<std::string, std::vector<std::string>> table{{"q1", {"Thailand"}}};
    OracleExtractor ex(table);
    Env env(tree, sample.question_id, sample.question_tokens, &ex, 30, false);

    Vocab vocab = build_vocab({sample});
    Rng init(4);
    QNet net = QNet::make(micro_encoder(), vocab.size(), init);

    Rng rng(13);
    std::vector<Transition> ts =
        run_episode_sampled(env, net, vocab, SamplingDistribution::Mixture, 0.5, 5, 1.0, rng);
    REQUIRE(ts.size() == 5);
    for (const Transition& t : ts) {
        CHECK(t.reward == action_reward(tree, t.state.node, t.action));
        CHECK(t.terminal == (t.action == Action::Stop));
        if (t.action == Action::Answer) {
            CHECK(t.next_state.node == t.state.node);
            CHECK(t.next_state.answer_pred.has_value());
            CHECK(t.next_state.step == t.state.step + 1);
        } else if (!t.terminal) {
            CHECK(t.next_state.node == move_action(tree, t.state.node, t.action));
        }
    }

    CHECK(run_episode_sampled(env, net, vocab, SamplingDistribution::UniformTree, 0.5, 0, 1.0, rng)
              .empty());
    CHECK_THROWS_AS(run_episode_sampled(env, net, vocab, SamplingDistribution::Sequential, 0.5, 5,
                                        1.0, rng),
                    std::invalid_argument);
}

TEST_CASE("backward sampling starts inside the reachable closure") {
    QASample sample = phuket_sample();
    const DocTree& tree = sample.documents[0];
    Env env(tree, sample.question_id, sample.question_tokens, nullptr, 30, false);
    Vocab vocab = build_vocab({sample});
    Rng init(5);
    QNet net = QNet::make(micro_encoder(), vocab.size(), init);
    std::set<NodeId> closure = backward_closure(tree, 3);

    Rng rng(29);
    bool sentence_start = false;
    for (int e = 0; e < 40; ++e) {
        auto ts = run_episode_sampled(env, net, vocab, SamplingDistribution::Backward, 0.0, 4,
                                      1.0, rng);
        for (const Transition& t : ts) CHECK(closure.count(t.state.node) == 1);
    }
    for (int e = 0; e < 40 && !sentence_start; ++e) {
        auto ts = run_episode_sampled(env, net, vocab, SamplingDistribution::UniformTree, 1.0, 4,
                                      1.0, rng);
        for (const Transition& t : ts)
            sentence_start |= tree.node(t.state.node).kind == NodeKind::Sentence;
    }
    CHECK(sentence_start);
}

TEST_CASE("config validation names the offending key") {
    auto message_of = [](TrainConfig c) {
        try {
            c.validate();
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };

    TrainConfig c = TrainConfig::desk();
    CHECK_NOTHROW(c.validate());
    CHECK_NOTHROW(TrainConfig::paper().validate());

    c = TrainConfig::desk();
    c.gamma = 1.0;
    CHECK(message_of(c).find("'gamma'") != std::string::npos);
    c = TrainConfig::desk();
    c.batch = 0;
    CHECK(message_of(c).find("'batch'") != std::string::npos);
    c = TrainConfig::desk();
    c.memory_init = 4;
    c.batch = 8;
    CHECK(message_of(c).find("'memory_init'") != std::string::npos);
    c = TrainConfig::desk();
    c.mode = "sarsa";
    CHECK(message_of(c).find("'mode'") != std::string::npos);
    c = TrainConfig::desk();
    c.distribution = SamplingDistribution::Sequential;
    CHECK(message_of(c).find("'distribution'") != std::string::npos);
    c = TrainConfig::desk();
    c.reader_kind = "external";
    c.reader_path = "";
    CHECK(message_of(c).find("'reader_path'") != std::string::npos);
    c = TrainConfig::desk();
    c.encoder.hidden_dim = 0;
    CHECK(message_of(c).find("'encoder'") != std::string::npos);
}

TEST_CASE("config json applies the preset before overrides") {
    json j = {{"lr", 5e-4}, {"preset", "desk"}};
    TrainConfig c = TrainConfig::from_json(j);
    CHECK(c.preset == "desk");
    CHECK(c.lr == 5e-4);
    CHECK(c.max_steps == 12000);       // desk default survives
    CHECK(c.encoder.hidden_dim == 32); // desk encoder
    CHECK(c.target_period == 100);

    TrainConfig p = TrainConfig::from_json(json::object());
    CHECK(p.preset == "paper");
    CHECK(p.max_steps == 1200000);
    CHECK(p.encoder.hidden_dim == 300);
}

TEST_CASE("config json rejects unknown keys and wrong types") {
    CHECK_THROWS_AS(TrainConfig::from_json(json::array()), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"verbosity", 3}}), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"preset", "prod"}}), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"distribution", "gaussian"}}), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"encoder", {{"layers", 2}}}}), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json({{"encoder", 7}}), ConfigError);

    try {
        TrainConfig::from_json({{"gamma", "high"}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("'gamma'") != std::string::npos);
    }
    try {
        TrainConfig::from_json({{"coupled", 1}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("'coupled'") != std::string::npos);
    }
    // Range violations surface through validate with the same error type.
    CHECK_THROWS_AS(TrainConfig::from_json({{"gamma", 1.5}}), ConfigError);
}

TEST_CASE("config json round-trips through to_json") {
    TrainConfig c = TrainConfig::desk();
    c.mode = "dqn";
    c.seed = 77;
    c.lambda = 0.25;
    c.distribution = SamplingDistribution::Backward;
    c.encoder.ffnn1_dim = 48;
    TrainConfig back = TrainConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.mode == "dqn");
    CHECK(back.seed == 77);
    CHECK(back.distribution == SamplingDistribution::Backward);
    CHECK(back.encoder.ffnn1_dim == 48);
}

TEST_CASE("metrics csv shape") {
    CHECK(metrics_csv_header() ==
          "step,episode,loss,mean_return,epsilon,epsilon_s,beta,stop_index_median,"
          "sampled_episode_frac");
    MetricsRow r;
    r.step = 1000;
    r.episode = 42;
    r.loss = 0.25;
    r.mean_return = -0.5;
    r.epsilon = 0.775;
    r.epsilon_s = 1.0;
    r.beta = 0.4;
    r.stop_index_median = -1.0;
    r.sampled_episode_frac = 1.0 / 3.0;
    CHECK(metrics_csv_row(r) == "1000,42,0.25,-0.5,0.775,1,0.4,-1,0.3333333333");
}

TEST_CASE("vocab building keeps encounter order and skips sentence labels") {
    QASample s = phuket_sample();
    // Plant a token that only exists on a sentence node; it must not leak in.
    s.documents[0].nodes[2].label_tokens.push_back("zzzsentinel");

    Vocab v = build_vocab({s});
    CHECK(v.word(0) == "<unk>");
    CHECK(v.word(1) == "<null>");
    CHECK(v.word(2) == "which");
    CHECK(v.word(3) == "country");
    CHECK(v.word(4) == "holds");
    CHECK(v.word(5) == "phuket");
    CHECK(v.word(6) == "?");
    CHECK(v.word(7) == "thailand");
    CHECK(v.id("monsoon") != Vocab::kUnkId);
    CHECK(v.id("zzzsentinel") == Vocab::kUnkId);

    Vocab again = build_vocab({s});
    CHECK(again.words() == v.words());
}

TEST_CASE("trainer rejects unusable datasets") {
    CHECK_THROWS_AS(Trainer(fast_cfg(1), {}), std::invalid_argument);
    QASample no_docs = phuket_sample();
    no_docs.documents.clear();
    std::vector<QASample> data = {no_docs};
    CHECK_THROWS_AS(Trainer(fast_cfg(1), data), std::invalid_argument);
}

TEST_CASE("trainer smoke run fills memory, updates and syncs") {
    std::vector<QASample> data = small_corpus(5);
    TrainConfig cfg = fast_cfg(21);
    Trainer trainer(cfg, data);

    Checkpoint before = trainer.make_checkpoint();
    long sink_rows = 0;
    TrainResult res = trainer.run([&](const MetricsRow&) { ++sink_rows; });

    CHECK(res.steps >= cfg.max_steps);
    CHECK(res.episodes > 0);
    CHECK(res.updates > 0);
    CHECK(trainer.replay().size() > 0);
    CHECK(trainer.replay().size() <= static_cast<std::size_t>(cfg.memory_max));
    CHECK(static_cast<long>(res.metrics.size()) == sink_rows);
    REQUIRE(res.metrics.size() >= 2);

    for (std::size_t i = 0; i + 1 < res.metrics.size(); ++i) {
        const MetricsRow& r = res.metrics[i];
        CHECK(r.step == static_cast<long>(i + 1) * cfg.metrics_period);
        CHECK(r.epsilon == Approx(LinearSchedule{cfg.epsilon_start, cfg.epsilon_end,
                                                 cfg.anneal_steps}
                                      .at(r.step)));
        CHECK(r.epsilon_s == Approx(LinearSchedule{cfg.epsilon_s_start, cfg.epsilon_s_end,
                                                   cfg.anneal_steps}
                                        .at(r.step)));
        CHECK(r.beta == Approx(LinearSchedule{cfg.beta_start, cfg.beta_end, cfg.anneal_steps}
                                   .at(r.step)));
        CHECK(r.sampled_episode_frac >= 0.0);
        CHECK(r.sampled_episode_frac <= 1.0);
    }

    // Online weights moved during training; params stay finite.
    Checkpoint after = trainer.make_checkpoint();
    CHECK(before.tensor("online/w0") != after.tensor("online/w0"));
    for (const nn::Param* p : trainer.online().params()) CHECK(p->value.allFinite());
    // target_period 64 < max_steps, so the target must have resynced away
    // from its initial copy.
    CHECK(before.tensor("target/w0") != after.tensor("target/w0"));
}

TEST_CASE("a long target period freezes the target net") {
    std::vector<QASample> data = small_corpus(6);
    TrainConfig cfg = fast_cfg(22);
    cfg.target_period = 1000000;
    Trainer trainer(cfg, data);
    Checkpoint before = trainer.make_checkpoint();
    TrainResult res = trainer.run();
    REQUIRE(res.updates > 0);
    Checkpoint after = trainer.make_checkpoint();
    CHECK(before.tensor("target/w0") == after.tensor("target/w0"));
    CHECK(before.tensor("online/w0") != after.tensor("online/w0"));
}

TEST_CASE("dqn mode never samples episodes") {
    std::vector<QASample> data = small_corpus(7);
    TrainConfig cfg = fast_cfg(23);
    cfg.mode = "dqn";
    Trainer trainer(cfg, data);
    TrainResult res = trainer.run();
    CHECK(res.sampled_episodes == 0);
    for (const MetricsRow& r : res.metrics) {
        CHECK(r.epsilon_s == 0.0);
        CHECK(r.sampled_episode_frac == 0.0);
    }
}

TEST_CASE("docqn with a pinned sampling gate samples every episode") {
    std::vector<QASample> data = small_corpus(8);
    TrainConfig cfg = fast_cfg(24);
    cfg.epsilon_s_start = 1.0;
    cfg.epsilon_s_end = 1.0;
    Trainer trainer(cfg, data);
    TrainResult res = trainer.run();
    CHECK(res.sampled_episodes == res.episodes);
    CHECK(res.metrics.back().sampled_episode_frac == 1.0);
    // Sampled episodes contribute k transitions each.
    CHECK(res.steps == res.episodes * cfg.k_samples);
    // No sequential episode finished, so no stop index was recorded.
    for (const MetricsRow& r : res.metrics) CHECK(r.stop_index_median == -1.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
    std::vector<QASample> data = small_corpus(9);
    TrainConfig cfg = fast_cfg(31);

    Trainer t1(cfg, data);
    TrainResult r1 = t1.run();
    Trainer t2(cfg, data);
    TrainResult r2 = t2.run();

    CHECK(r1.steps == r2.steps);
    CHECK(r1.episodes == r2.episodes);
    CHECK(r1.updates == r2.updates);
    CHECK(r1.sampled_episodes == r2.sampled_episodes);
    CHECK(r1.final_loss == r2.final_loss);
    REQUIRE(r1.metrics.size() == r2.metrics.size());
    for (std::size_t i = 0; i < r1.metrics.size(); ++i)
        CHECK(metrics_csv_row(r1.metrics[i]) == metrics_csv_row(r2.metrics[i]));

    auto p1 = t1.online().params();
    auto p2 = t2.online().params();
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value == p2[i]->value);

    TrainConfig other = cfg;
    other.seed = 32;
    Trainer t3(other, data);
    TrainResult r3 = t3.run();
    bool any_diff = r3.final_loss != r1.final_loss ||
                    t3.online().w0.value != t1.online().w0.value;
    CHECK(any_diff);
}

TEST_CASE("checkpoints round-trip the model bit-exactly") {
    std::vector<QASample> data = small_corpus(10);
    TrainConfig cfg = fast_cfg(41);
    Trainer trainer(cfg, data);
    trainer.run();

    Checkpoint ck = trainer.make_checkpoint();
    CHECK(ck.meta.at("version") == "treenav 0.1.0");
    CHECK(ck.meta.at("train_config") == cfg.to_json());
    CHECK(ck.meta.at("vocab").get<std::vector<std::string>>() == trainer.vocab().words());
    CHECK(ck.meta.at("steps").get<long>() >= cfg.max_steps);
    CHECK(ck.has("online/word_emb"));
    CHECK(ck.has("target/word_emb"));
    CHECK(ck.has("opt/w0"));
    CHECK(!ck.has("online/missing"));

    TempDir tmp;
    std::string path = (tmp.path / "model.ckpt").string();
    trainer.save_checkpoint(path);

    Checkpoint back = Checkpoint::load(path);
    CHECK(back.meta.at("train_config") == cfg.to_json());
    for (const auto& [name, tensor] : ck.tensors) CHECK(back.tensor(name) == tensor);

    LoadedModel model = load_model(path);
    CHECK(model.cfg.to_json() == cfg.to_json());
    CHECK(model.vocab.words() == trainer.vocab().words());
    auto got = model.net.params();
    auto want = trainer.online().params();
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i]->value == want[i]->value);

    // A loaded model plays greedily exactly like the trainer's own net.
    const QASample& sample = data.front();
    auto ex = make_extractor_for(cfg, data);
    Episode a = greedy_episode(sample.documents[0], sample, trainer.online(), trainer.vocab(),
                               ex.get(), cfg.budget_eval, cfg.coupled);
    Episode b = greedy_episode(sample.documents[0], sample, model.net, model.vocab, ex.get(),
                               cfg.budget_eval, cfg.coupled);
    CHECK(a.stop_node == b.stop_node);
    CHECK(a.total_reward == b.total_reward);
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i)
        CHECK(a.trace[i].node_id == b.trace[i].node_id);
}

TEST_CASE("model loading rejects non-canonical checkpoints") {
    TempDir tmp;

    Checkpoint bad;
    bad.meta["version"] = "treenav 0.1.0";
    bad.meta["train_config"] = fast_cfg(1).to_json();
    bad.meta["vocab"] = std::vector<std::string>{"<unk>", "<null>", "a", "A"};
    std::string dup = (tmp.path / "dup.ckpt").string();
    bad.save(dup);
    CHECK_THROWS_AS(load_model(dup), std::runtime_error);

    // Tensor shapes must match the config the checkpoint itself declares.
    std::vector<QASample> data = small_corpus(11);
    TrainConfig cfg = fast_cfg(42);
    Trainer trainer(cfg, data);
    Checkpoint ck = trainer.make_checkpoint();
    TrainConfig other = cfg;
    other.encoder.hidden_dim = 16;
    ck.meta["train_config"] = other.to_json();
    std::string mismatched = (tmp.path / "mismatch.ckpt").string();
    ck.save(mismatched);
    CHECK_THROWS_AS(load_model(mismatched), std::runtime_error);
}

TEST_CASE("greedy evaluation is deterministic and respects the budget") {
    QASample sample = phuket_sample();
    Vocab vocab = build_vocab({sample});
    Rng init(6);
    QNet net = QNet::make(micro_encoder(), vocab.size(), init);
    std::map<std::string, std::vector<std::string>> table{{"q1", {"Thailand"}}};
    OracleExtractor ex(table);

    Episode e1 = greedy_episode(sample.documents[0], sample, net, vocab, &ex, 5, false);
    Episode e2 = greedy_episode(sample.documents[0], sample, net, vocab, &ex, 5, false);
    CHECK(e1.step_count <= 5);
    CHECK(e1.stop_node != kNoNode);
    REQUIRE(e1.trace.size() == e2.trace.size());
    for (std::size_t i = 0; i < e1.trace.size(); ++i) {
        CHECK(e1.trace[i].node_id == e2.trace[i].node_id);
        CHECK(e1.trace[i].action == e2.trace[i].action);
    }
    CHECK(e1.total_reward == e2.total_reward);
}
