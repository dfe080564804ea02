#include "treenav/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace treenav {

const char* sampling_distribution_name(SamplingDistribution d) {
    switch (d) {
        case SamplingDistribution::Sequential: return "sequential";
        case SamplingDistribution::UniformTree: return "uniform";
        case SamplingDistribution::Backward: return "backward";
        case SamplingDistribution::Mixture: return "mixture";
    }
    return "?";
}

std::optional<SamplingDistribution> sampling_distribution_from_name(const std::string& s) {
    if (s == "sequential") return SamplingDistribution::Sequential;
    if (s == "uniform") return SamplingDistribution::UniformTree;
    if (s == "backward") return SamplingDistribution::Backward;
    if (s == "mixture") return SamplingDistribution::Mixture;
    return std::nullopt;
}

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
    TrainConfig c;
    c.max_steps = 12000;
    c.target_period = 100;
    c.memory_init = 500;
    c.memory_max = 3000;
    c.anneal_steps = 12000;
    c.lr = 1e-3;
    c.batch = 32;
    c.metrics_period = 500;
    c.preset = "desk";
    c.encoder = EncoderConfig::desk();
    return c;
}

namespace {

void require(bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

}  // namespace

void TrainConfig::validate() const {
    require(episodes >= 0, "episodes", "must be >= 0");
    require(max_steps >= 1 || episodes >= 1, "max_steps", "must be >= 1 when episodes is 0");
    require(budget_train >= 1, "budget_train", "must be >= 1");
    require(budget_eval >= 1, "budget_eval", "must be >= 1");
    require(gamma >= 0.0 && gamma < 1.0, "gamma", "must lie in [0, 1)");
    require(lr > 0.0, "lr", "must be > 0");
    require(batch >= 1, "batch", "must be >= 1");
    require(target_period >= 1, "target_period", "must be >= 1");
    require(memory_init >= 1, "memory_init", "must be >= 1");
    require(memory_max >= memory_init, "memory_max", "must be >= memory_init");
    require(memory_init >= batch, "memory_init", "must be >= batch");
    require(epsilon_start >= 0.0 && epsilon_start <= 1.0, "epsilon_start", "must lie in [0, 1]");
    require(epsilon_end >= 0.0 && epsilon_end <= 1.0, "epsilon_end", "must lie in [0, 1]");
    require(epsilon_s_start >= 0.0 && epsilon_s_start <= 1.0, "epsilon_s_start", "must lie in [0, 1]");
    require(epsilon_s_end >= 0.0 && epsilon_s_end <= 1.0, "epsilon_s_end", "must lie in [0, 1]");
    require(anneal_steps >= 1, "anneal_steps", "must be >= 1");
    require(k_samples >= 0, "k_samples", "must be >= 0");
    require(alpha >= 0.0, "alpha", "must be >= 0");
    require(beta_start >= 0.0 && beta_start <= 1.0, "beta_start", "must lie in [0, 1]");
    require(beta_end >= 0.0 && beta_end <= 1.0, "beta_end", "must lie in [0, 1]");
    require(lambda >= 0.0 && lambda <= 1.0, "lambda", "must lie in [0, 1]");
    require(mode == "dqn" || mode == "docqn", "mode", "must be 'dqn' or 'docqn'");
    require(updates_per_episode >= 0, "updates_per_episode", "must be >= 0");
    require(preset == "paper" || preset == "desk", "preset", "must be 'paper' or 'desk'");
    require(reader_kind == "overlap" || reader_kind == "oracle" || reader_kind == "external",
            "reader_kind", "must be 'overlap', 'oracle' or 'external'");
    require(reader_kind != "external" || !reader_path.empty(), "reader_path",
            "required when reader_kind is 'external'");
    require(oracle_top_probability > 0.0 && oracle_top_probability <= 1.0,
            "oracle_top_probability", "must lie in (0, 1]");
    require(metrics_period >= 1, "metrics_period", "must be >= 1");
    // A sequential node sampler is not defined; sequential rollouts are the
    // non-sampled branch of every episode already.
    require(distribution != SamplingDistribution::Sequential, "distribution",
            "'sequential' is not a node sampler; it is the default non-sampled branch");
    try {
        encoder.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config key 'encoder': ") + e.what());
    }
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json e = {{"word_dim", encoder.word_dim},
                        {"char_dim", encoder.char_dim},
                        {"conv_filter_size", encoder.conv_filter_size},
                        {"hidden_dim", encoder.hidden_dim},
                        {"ffnn1_dim", encoder.ffnn1_dim},
                        {"ffnn2_dim", encoder.ffnn2_dim},
                        {"dropout_rate", encoder.dropout_rate},
                        {"attn_hidden_dim", encoder.attn_hidden_dim}};
    return nlohmann::json{{"preset", preset},
                          {"episodes", episodes},
                          {"max_steps", max_steps},
                          {"budget_train", budget_train},
                          {"budget_eval", budget_eval},
                          {"gamma", gamma},
                          {"lr", lr},
                          {"batch", batch},
                          {"target_period", target_period},
                          {"memory_init", memory_init},
                          {"memory_max", memory_max},
                          {"epsilon_start", epsilon_start},
                          {"epsilon_end", epsilon_end},
                          {"epsilon_s_start", epsilon_s_start},
                          {"epsilon_s_end", epsilon_s_end},
                          {"anneal_steps", anneal_steps},
                          {"k_samples", k_samples},
                          {"alpha", alpha},
                          {"beta_start", beta_start},
                          {"beta_end", beta_end},
                          {"lambda", lambda},
                          {"seed", seed},
                          {"mode", mode},
                          {"coupled", coupled},
                          {"distribution", sampling_distribution_name(distribution)},
                          {"double_q", double_q},
                          {"updates_per_episode", updates_per_episode},
                          {"reader_kind", reader_kind},
                          {"reader_path", reader_path},
                          {"oracle_top_probability", oracle_top_probability},
                          {"metrics_period", metrics_period},
                          {"tfidf_formula", tfidf_formula},
                          {"encoder", std::move(e)}};
}

namespace {

template <typename T>
T typed(const nlohmann::json& v, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError("");
        } else {
            if (!v.is_number()) throw ConfigError("");
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': wrong type (" + v.dump() + ")");
    }
}

void apply_encoder(EncoderConfig& e, const nlohmann::json& j) {
    for (const auto& [key, v] : j.items()) {
        if (key == "word_dim") e.word_dim = typed<int>(v, key);
        else if (key == "char_dim") e.char_dim = typed<int>(v, key);
        else if (key == "conv_filter_size") e.conv_filter_size = typed<int>(v, key);
        else if (key == "hidden_dim") e.hidden_dim = typed<int>(v, key);
        else if (key == "ffnn1_dim") e.ffnn1_dim = typed<int>(v, key);
        else if (key == "ffnn2_dim") e.ffnn2_dim = typed<int>(v, key);
        else if (key == "dropout_rate") e.dropout_rate = typed<double>(v, key);
        else if (key == "attn_hidden_dim") e.attn_hidden_dim = typed<double>(v, key);
        else throw ConfigError("unknown config key 'encoder." + key + "'");
    }
}

}  // namespace

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    std::string preset = "paper";
    if (j.contains("preset")) preset = typed<std::string>(j.at("preset"), "preset");
    TrainConfig c;
    if (preset == "desk") c = TrainConfig::desk();
    else if (preset == "paper") c = TrainConfig::paper();
    else throw ConfigError("config key 'preset': must be 'paper' or 'desk'");

    for (const auto& [key, v] : j.items()) {
        if (key == "preset") continue;
        else if (key == "episodes") c.episodes = typed<long>(v, key);
        else if (key == "max_steps") c.max_steps = typed<long>(v, key);
        else if (key == "budget_train") c.budget_train = typed<int>(v, key);
        else if (key == "budget_eval") c.budget_eval = typed<int>(v, key);
        else if (key == "gamma") c.gamma = typed<double>(v, key);
        else if (key == "lr") c.lr = typed<double>(v, key);
        else if (key == "batch") c.batch = typed<int>(v, key);
        else if (key == "target_period") c.target_period = typed<long>(v, key);
        else if (key == "memory_init") c.memory_init = typed<long>(v, key);
        else if (key == "memory_max") c.memory_max = typed<long>(v, key);
        else if (key == "epsilon_start") c.epsilon_start = typed<double>(v, key);
        else if (key == "epsilon_end") c.epsilon_end = typed<double>(v, key);
        else if (key == "epsilon_s_start") c.epsilon_s_start = typed<double>(v, key);
        else if (key == "epsilon_s_end") c.epsilon_s_end = typed<double>(v, key);
        else if (key == "anneal_steps") c.anneal_steps = typed<long>(v, key);
        else if (key == "k_samples") c.k_samples = typed<int>(v, key);
        else if (key == "alpha") c.alpha = typed<double>(v, key);
        else if (key == "beta_start") c.beta_start = typed<double>(v, key);
        else if (key == "beta_end") c.beta_end = typed<double>(v, key);
        else if (key == "lambda") c.lambda = typed<double>(v, key);
        else if (key == "seed") c.seed = typed<std::uint64_t>(v, key);
        else if (key == "mode") c.mode = typed<std::string>(v, key);
        else if (key == "coupled") c.coupled = typed<bool>(v, key);
        else if (key == "double_q") c.double_q = typed<bool>(v, key);
        else if (key == "updates_per_episode") c.updates_per_episode = typed<int>(v, key);
        else if (key == "reader_kind") c.reader_kind = typed<std::string>(v, key);
        else if (key == "reader_path") c.reader_path = typed<std::string>(v, key);
        else if (key == "oracle_top_probability") c.oracle_top_probability = typed<double>(v, key);
        else if (key == "metrics_period") c.metrics_period = typed<long>(v, key);
        else if (key == "tfidf_formula") c.tfidf_formula = typed<std::string>(v, key);
        else if (key == "distribution") {
            auto d = sampling_distribution_from_name(typed<std::string>(v, key));
            if (!d) throw ConfigError("config key 'distribution': unknown value " + v.dump());
            c.distribution = *d;
        } else if (key == "encoder") {
            if (!v.is_object()) throw ConfigError("config key 'encoder': must be an object");
            apply_encoder(c.encoder, v);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

NodeId sample_f_U(const DocTree& tree, Rng& rng) {
    std::vector<NodeId> leaves, inner;
    for (const DocNode& n : tree.nodes)
        (n.kind == NodeKind::Sentence ? leaves : inner).push_back(n.id);
    bool pick_leaf = rng.bernoulli(0.2);
    const std::vector<NodeId>& pool =
        pick_leaf ? (leaves.empty() ? inner : leaves) : (inner.empty() ? leaves : inner);
    return pool[rng.below(pool.size())];
}

NodeId sample_f_B(const DocTree& tree, Rng& rng) {
    std::vector<NodeId> anchors;
    for (const DocNode& n : tree.nodes)
        if (n.kind == NodeKind::Paragraph && tree.answer_node_ids.count(n.id))
            anchors.push_back(n.id);
    if (anchors.empty()) throw std::logic_error("sample_f_B: tree has no answer paragraph");
    NodeId u = anchors[rng.below(anchors.size())];
    static constexpr Action kMoves[5] = {Action::Down, Action::Right, Action::Left,
                                         Action::UpRight, Action::UpLeft};
    long b = 1 + static_cast<long>(rng.below(3));
    for (long i = 0; i < b; ++i) u = move_action(tree, u, kMoves[rng.below(5)]);
    return u;
}

Action select_action(const QValues& q, bool coupled, double epsilon, Rng& rng) {
    std::vector<Action> legal = legal_actions(coupled);
    if (epsilon > 0.0 && rng.bernoulli(epsilon))
        return legal[rng.below(legal.size())];
    Action best = legal[0];
    double best_v = q.q[static_cast<std::size_t>(legal[0])];
    for (Action a : legal) {
        double v = q.q[static_cast<std::size_t>(a)];
        if (v > best_v) {
            best = a;
            best_v = v;
        }
    }
    return best;
}

std::vector<Transition> run_episode_sequential(Env& env, QNet& net, const Vocab& vocab,
                                               double epsilon, Rng& rng) {
    std::vector<Transition> out;
    env.reset();
    while (!env.done()) {
        NavState s = env.state();
        QValues q = q_values(net, vocab, s);
        Action a = select_action(q, env.coupled(), epsilon, rng);
        StepResult r = env.step(a);
        Transition t;
        t.state = std::move(s);
        t.action = r.action_taken;
        t.reward = r.reward;
        t.terminal = r.terminal;
        if (!r.terminal) t.next_state = std::move(r.next_state);
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

Transition one_step(const DocTree& tree, NavState s, Action a, const Extractor* ex,
                    const std::string& qid) {
    Transition t;
    t.action = a;
    t.reward = action_reward(tree, s.node, a);
    t.terminal = (a == Action::Stop);
    if (a == Action::Answer) {
        std::optional<AnswerPrediction> pred;
        if (ex) {
            NodeId ctx = context_node(tree, s.node);
            const Tokens& context = tree.node(ctx).label_tokens;
            if (!context.empty()) {
                ExtractQuery q;
                q.question = s.question.get();
                q.context = &context;
                q.qid = qid;
                q.node_index = tree.node(ctx).index;
                pred = ex->predict(q);
            }
        }
        t.next_state = make_state(tree, s.node, s.question, s.step + 1, std::move(pred));
    } else if (!t.terminal) {
        NodeId dest = move_action(tree, s.node, a);
        t.next_state = make_state(tree, dest, s.question, s.step + 1, std::nullopt);
    }
    t.state = std::move(s);
    return t;
}

}  // namespace

std::vector<Transition> run_episode_sampled(Env& env, QNet& net, const Vocab& vocab,
                                            SamplingDistribution f, double lambda, int k,
                                            double epsilon, Rng& rng) {
    if (f == SamplingDistribution::Sequential)
        throw std::invalid_argument("run_episode_sampled: sequential is not a node sampler");
    std::vector<Transition> out;
    const DocTree& tree = env.tree();
    for (int i = 0; i < k; ++i) {
        SamplingDistribution d = f;
        if (f == SamplingDistribution::Mixture)
            d = rng.bernoulli(lambda) ? SamplingDistribution::UniformTree
                                      : SamplingDistribution::Backward;
        NodeId u = d == SamplingDistribution::UniformTree ? sample_f_U(tree, rng)
                                                          : sample_f_B(tree, rng);
        NavState s = state_at(tree, u, env.question());
        QValues q = q_values(net, vocab, s);
        Action a = select_action(q, env.coupled(), epsilon, rng);
        out.push_back(one_step(tree, std::move(s), a, env.extractor(), env.qid()));
    }
    return out;
}

std::string metrics_csv_header() {
    return "step,episode,loss,mean_return,epsilon,epsilon_s,beta,stop_index_median,"
           "sampled_episode_frac";
}

namespace {

std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string metrics_csv_row(const MetricsRow& r) {
    std::ostringstream os;
    os << r.step << ',' << r.episode << ',' << fmt_g(r.loss) << ',' << fmt_g(r.mean_return)
       << ',' << fmt_g(r.epsilon) << ',' << fmt_g(r.epsilon_s) << ',' << fmt_g(r.beta) << ','
       << fmt_g(r.stop_index_median) << ',' << fmt_g(r.sampled_episode_frac);
    return os.str();
}

Vocab build_vocab(const std::vector<QASample>& data) {
    Vocab v;
    for (const QASample& s : data) {
        for (const auto& t : s.question_tokens) v.add(t);
        for (const auto& alias : s.answer_aliases)
            for (const auto& t : tokenize(alias)) v.add(t);
        for (const DocTree& doc : s.documents)
            for (const DocNode& n : doc.nodes) {
                if (n.kind == NodeKind::Sentence) continue;  // duplicates the paragraph
                for (const auto& t : n.label_tokens) v.add(t);
            }
    }
    return v;
}

std::unique_ptr<Extractor> make_extractor_for(const TrainConfig& cfg,
                                              const std::vector<QASample>& data) {
    std::map<std::string, std::vector<std::string>> aliases;
    for (const QASample& s : data) aliases[s.question_id] = s.answer_aliases;
    return make_extractor(cfg.reader_kind, cfg.reader_path, std::move(aliases));
}

Trainer::Trainer(TrainConfig cfg, const std::vector<QASample>& data)
    : cfg_(std::move(cfg)),
      data_(&data),
      opt_(cfg_.lr),
      replay_(static_cast<std::size_t>(cfg_.memory_max), cfg_.alpha) {
    cfg_.validate();
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    for (int i = 0; i < static_cast<int>(data.size()); ++i)
        for (int d = 0; d < static_cast<int>(data[static_cast<std::size_t>(i)].documents.size()); ++d)
            pairs_.emplace_back(i, d);
    if (pairs_.empty()) throw std::invalid_argument("train: no (question, document) pairs");

    vocab_ = build_vocab(data);
    Rng root(cfg_.seed);
    Rng init_rng = root.fork("qnet-init");
    online_ = QNet::make(cfg_.encoder, vocab_.size(), init_rng);
    Rng target_rng = root.fork("qnet-init");
    target_ = QNet::make(cfg_.encoder, vocab_.size(), target_rng);
    target_.copy_values_from(online_);
    extractor_ = make_extractor_for(cfg_, data);

    eps_ = {cfg_.epsilon_start, cfg_.epsilon_end, cfg_.anneal_steps};
    eps_s_ = {cfg_.epsilon_s_start, cfg_.epsilon_s_end, cfg_.anneal_steps};
    beta_ = {cfg_.beta_start, cfg_.beta_end, cfg_.anneal_steps};
    episode_rng_ = root.fork("episodes");
    replay_rng_ = root.fork("replay");
    dropout_rng_ = root.fork("dropout");
}

void Trainer::maybe_sync_target() {
    if (steps_ - last_sync_ >= cfg_.target_period) {
        target_.copy_values_from(online_);
        last_sync_ = steps_;
    }
}

void Trainer::update_once(Rng& rng) {
    if (replay_.size() < static_cast<std::size_t>(cfg_.batch)) return;
    auto batch = replay_.sample(static_cast<std::size_t>(cfg_.batch), beta_.at(steps_), rng);
    TdResult td = td_loss(online_, target_, vocab_, batch.transitions, cfg_.gamma,
                          batch.is_weights, cfg_.double_q, &dropout_rng_);
    if (!std::isfinite(td.loss)) {
        for (nn::Param* p : online_.params()) p->zero_grad();
        throw DivergenceError("train: non-finite loss at step " + std::to_string(steps_));
    }
    nn::clip_global_norm(online_.params(), kGradClipNorm);
    opt_.step(online_.params());
    replay_.update_priorities(batch.ticket, td.td_abs);
    last_loss_ = td.loss;
    ++updates_;
}

TrainResult Trainer::run(const std::function<void(const MetricsRow&)>& sink) {
    TrainResult res;
    long next_metrics = cfg_.metrics_period;
    auto emit = [&](long at_step) {
        MetricsRow r;
        r.step = at_step;
        r.episode = episodes_;
        r.loss = last_loss_;
        if (!window_returns_.empty()) {
            double s = 0.0;
            for (double x : window_returns_) s += x;
            r.mean_return = s / static_cast<double>(window_returns_.size());
        }
        r.epsilon = eps_.at(at_step);
        r.epsilon_s = cfg_.mode == "dqn" ? 0.0 : eps_s_.at(at_step);
        r.beta = beta_.at(at_step);
        if (!window_stops_.empty()) {
            std::vector<int> v = window_stops_;
            std::sort(v.begin(), v.end());
            r.stop_index_median = v[(v.size() - 1) / 2];
        }
        r.sampled_episode_frac =
            episodes_ == 0 ? 0.0
                           : static_cast<double>(sampled_) / static_cast<double>(episodes_);
        res.metrics.push_back(r);
        if (sink) sink(r);
        window_returns_.clear();
        window_stops_.clear();
    };

    bool done = false;
    while (!done) {
        if (cfg_.episodes > 0 && episodes_ >= cfg_.episodes) break;
        if (cfg_.episodes == 0 && steps_ >= cfg_.max_steps) break;

        const auto& [si, di] = pairs_[episode_rng_.below(pairs_.size())];
        const QASample& sample = (*data_)[static_cast<std::size_t>(si)];
        const DocTree& tree = sample.documents[static_cast<std::size_t>(di)];
        Env env(tree, sample.question_id, sample.question_tokens, extractor_.get(), cfg_.budget_train,
                cfg_.coupled);

        double eps_s = cfg_.mode == "dqn" ? 0.0 : eps_s_.at(steps_);
        bool sampled = episode_rng_.bernoulli(eps_s);
        double eps = eps_.at(steps_);

        std::vector<Transition> transitions =
            sampled ? run_episode_sampled(env, online_, vocab_, cfg_.distribution, cfg_.lambda,
                                          cfg_.k_samples, eps, episode_rng_)
                    : run_episode_sequential(env, online_, vocab_, eps, episode_rng_);
        for (Transition& t : transitions) {
            replay_.push(std::move(t));
            ++steps_;
        }
        ++episodes_;
        if (sampled) {
            ++sampled_;
        } else {
            window_returns_.push_back(env.episode().total_reward);
            window_stops_.push_back(tree.node(env.episode().stop_node).index);
        }
        maybe_sync_target();

        if (replay_.size() >= static_cast<std::size_t>(cfg_.memory_init))
            for (int u = 0; u < cfg_.updates_per_episode; ++u) update_once(replay_rng_);

        while (steps_ >= next_metrics) {
            emit(next_metrics);
            next_metrics += cfg_.metrics_period;
        }
    }
    emit(steps_);
    res.steps = steps_;
    res.episodes = episodes_;
    res.updates = updates_;
    res.sampled_episodes = sampled_;
    res.final_loss = last_loss_;
    return res;
}

Checkpoint Trainer::make_checkpoint() const {
    Checkpoint ck;
    ck.meta["version"] = "treenav 0.1.0";
    ck.meta["train_config"] = cfg_.to_json();
    ck.meta["vocab"] = vocab_.words();
    ck.meta["steps"] = steps_;
    ck.meta["episodes"] = episodes_;
    ck.meta["updates"] = updates_;
    auto online = online_.params();
    for (const nn::Param* p : online) ck.add("online/" + p->name, p->value);
    for (const nn::Param* p : target_.params()) ck.add("target/" + p->name, p->value);
    const auto& cache = opt_.cache();
    for (std::size_t i = 0; i < cache.size() && i < online.size(); ++i)
        ck.add("opt/" + online[i]->name, cache[i]);
    return ck;
}

void Trainer::save_checkpoint(const std::string& path) const { make_checkpoint().save(path); }

Episode greedy_episode(const DocTree& tree, const QASample& sample, QNet& net,
                       const Vocab& vocab, const Extractor* extractor, int budget,
                       bool coupled) {
    Env env(tree, sample.question_id, sample.question_tokens, extractor, budget, coupled);
    env.reset();
    Rng dummy(0);
    while (!env.done()) {
        QValues q = q_values(net, vocab, env.state());
        env.step(select_action(q, coupled, 0.0, dummy));
    }
    return env.episode();
}

LoadedModel load_model(const std::string& checkpoint_path) {
    Checkpoint ck = Checkpoint::load(checkpoint_path);
    LoadedModel m;
    m.cfg = TrainConfig::from_json(ck.meta.at("train_config"));
    std::vector<std::string> words = ck.meta.at("vocab").get<std::vector<std::string>>();
    for (const auto& w : words) m.vocab.add(w);
    if (m.vocab.size() != static_cast<int>(words.size()))
        throw std::runtime_error("checkpoint: vocab list is not canonical");
    Rng rng(0);
    m.net = QNet::make(m.cfg.encoder, m.vocab.size(), rng);
    for (nn::Param* p : m.net.params()) {
        const nn::Mat& t = ck.tensor("online/" + p->name);
        if (t.rows() != p->value.rows() || t.cols() != p->value.cols())
            throw std::runtime_error("checkpoint: tensor shape mismatch at " + p->name);
        p->value = t;
    }
    return m;
}

}  // namespace treenav
