#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treenav/checkpoint.hpp"
#include "treenav/env.hpp"
#include "treenav/qnet.hpp"
#include "treenav/replay.hpp"
#include "treenav/rng.hpp"

namespace treenav {

enum class SamplingDistribution { Sequential, UniformTree, Backward, Mixture };

const char* sampling_distribution_name(SamplingDistribution d);
std::optional<SamplingDistribution> sampling_distribution_from_name(const std::string& s);

/// Linear anneal from `start` at step 0 to `end` at step >= horizon. Both
/// endpoints are hit exactly.
struct LinearSchedule {
    double start = 1.0;
    double end = 0.0;
    long horizon = 1;

    double at(long step) const {
        if (step >= horizon) return end;
        if (step <= 0) return start;
        return start + (end - start) * static_cast<double>(step) / static_cast<double>(horizon);
    }
};

struct TrainConfig {
    long episodes = 0;    // 0 = run until max_steps
    long max_steps = 1200000;
    int budget_train = 30;
    int budget_eval = 100;
    double gamma = 0.996;
    double lr = 1e-4;
    int batch = 64;
    long target_period = 10000;
    long memory_init = 50000;
    long memory_max = 300000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.1;
    double epsilon_s_start = 1.0;
    double epsilon_s_end = 0.5;
    long anneal_steps = 1200000;
    int k_samples = 5;
    double alpha = 0.6;
    double beta_start = 0.4;
    double beta_end = 1.0;
    double lambda = 0.5;  // f_{U+B} mixture coefficient
    std::uint64_t seed = 1;
    std::string mode = "docqn";  // dqn | docqn
    bool coupled = false;
    SamplingDistribution distribution = SamplingDistribution::Mixture;
    bool double_q = true;
    int updates_per_episode = 1;
    std::string preset = "paper";  // paper | desk
    EncoderConfig encoder = EncoderConfig::paper();
    std::string reader_kind = "oracle";  // overlap | oracle | external
    std::string reader_path;
    double oracle_top_probability = 0.9;
    long metrics_period = 1000;  // steps between metrics rows
    // Recorded so baseline runs driven by the same config are auditable.
    std::string tfidf_formula = "tf=count; idf=ln((N+1)/(df+1))+1; stopwords=none";

    static TrainConfig paper();
    /// Paper config with every horizon divided by 100 and the small encoder.
    static TrainConfig desk();

    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep preset defaults; unknown keys and type or range
    /// violations raise ConfigError naming the key.
    static TrainConfig from_json(const nlohmann::json& j);
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised by the trainer on non-finite loss after saving a checkpoint of the
/// last finite state.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

NodeId sample_f_U(const DocTree& tree, Rng& rng);
NodeId sample_f_B(const DocTree& tree, Rng& rng);

/// Epsilon-greedy over the legal action set (ties to the lowest action id).
Action select_action(const QValues& q, bool coupled, double epsilon, Rng& rng);

std::vector<Transition> run_episode_sequential(Env& env, QNet& net, const Vocab& vocab,
                                               double epsilon, Rng& rng);

/// K independent one-step transitions from nodes drawn from f.
std::vector<Transition> run_episode_sampled(Env& env, QNet& net, const Vocab& vocab,
                                            SamplingDistribution f, double lambda, int k,
                                            double epsilon, Rng& rng);

struct MetricsRow {
    long step = 0;
    long episode = 0;
    double loss = 0.0;
    double mean_return = 0.0;
    double epsilon = 0.0;
    double epsilon_s = 0.0;
    double beta = 0.0;
    double stop_index_median = -1.0;
    double sampled_episode_frac = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& r);

struct TrainResult {
    long steps = 0;
    long episodes = 0;
    long updates = 0;
    long sampled_episodes = 0;
    double final_loss = 0.0;
    std::vector<MetricsRow> metrics;
};

class Trainer {
  public:
    Trainer(TrainConfig cfg, const std::vector<QASample>& data);

    /// Run the full loop; metrics rows stream through `sink` as they are
    /// produced (pass nullptr to only collect them in the result).
    TrainResult run(const std::function<void(const MetricsRow&)>& sink = nullptr);

    Checkpoint make_checkpoint() const;
    void save_checkpoint(const std::string& path) const;

    QNet& online() { return online_; }
    const Vocab& vocab() const { return vocab_; }
    const TrainConfig& config() const { return cfg_; }
    const PrioritizedBuffer& replay() const { return replay_; }

  private:
    void update_once(Rng& rng);
    void maybe_sync_target();

    TrainConfig cfg_;
    const std::vector<QASample>* data_;
    std::vector<std::pair<int, int>> pairs_;  // (sample, doc) episode pool
    Vocab vocab_;
    QNet online_, target_;
    nn::RmsProp opt_;
    PrioritizedBuffer replay_;
    std::unique_ptr<Extractor> extractor_;
    LinearSchedule eps_, eps_s_, beta_;
    Rng episode_rng_, replay_rng_, dropout_rng_;
    long steps_ = 0, episodes_ = 0, updates_ = 0, sampled_ = 0, last_sync_ = 0;
    double last_loss_ = 0.0;
    std::vector<double> window_returns_;
    std::vector<int> window_stops_;
};

/// Vocabulary over every question, label and alias token in the data, in
/// deterministic encounter order.
Vocab build_vocab(const std::vector<QASample>& data);

std::unique_ptr<Extractor> make_extractor_for(const TrainConfig& cfg,
                                              const std::vector<QASample>& data);

/// Greedy (epsilon=0) evaluation rollout; returns the finished episode.
Episode greedy_episode(const DocTree& tree, const QASample& sample, QNet& net,
                       const Vocab& vocab, const Extractor* extractor, int budget, bool coupled);

/// Rebuild a trained net + vocab from a checkpoint.
struct LoadedModel {
    TrainConfig cfg;
    Vocab vocab;
    QNet net;
};
LoadedModel load_model(const std::string& checkpoint_path);

}  // namespace treenav
