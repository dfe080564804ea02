#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "treenav/doctree.hpp"
#include "treenav/reader.hpp"

namespace treenav {

enum class Action { Down, Right, Left, UpRight, UpLeft, Answer, Stop };
inline constexpr int kNumActions = 7;

const char* action_name(Action a);
std::optional<Action> action_from_name(const std::string& name);

/// Movements + Answer + Stop, or movements + Stop when coupled.
std::vector<Action> legal_actions(bool coupled);

inline constexpr int kNodePrefixTokens = 20;  // per-node contribution to o
inline constexpr int kObservationCap = 120;   // total length of o

using PhiN = std::array<double, 7>;  // height, depth, hds, hde, parent hds/hde, step
using PhiZ = std::array<double, 3>;  // entropy, top logit, context token count

struct NavState {
    NodeId node = 0;
    std::shared_ptr<const Tokens> question;
    Tokens observation;
    std::optional<AnswerPrediction> answer_pred;
    PhiN phi_n{};
    PhiZ phi_z{};
    int step = 0;  // navigation_step, duplicated in phi_n[6]
};

struct StepResult {
    NavState next_state;
    double reward = 0.0;
    bool terminal = false;
    std::optional<AnswerPrediction> emitted_answer;
    Action action_taken = Action::Stop;  // differs from the request on forced stop
};

/// Node whose label the extractor reads at u: the containing paragraph for
/// sentences, u itself otherwise.
NodeId context_node(const DocTree& tree, NodeId id);

/// Concatenation along the root->node path of first-20-token label prefixes,
/// truncated to the final 120 tokens (deepest context wins).
Tokens observation_tokens(const DocTree& tree, NodeId id);

PhiN nav_features(const DocTree& tree, NodeId id, int step);
PhiZ answer_features(const std::optional<AnswerPrediction>& pred);

NavState make_state(const DocTree& tree, NodeId id, std::shared_ptr<const Tokens> question,
                    int step, std::optional<AnswerPrediction> answer_pred);

/// Memory-less state for sampled starts: step approximated by depth(node),
/// no answer prediction.
NavState state_at(const DocTree& tree, NodeId id, std::shared_ptr<const Tokens> question);

/// Destination of a movement action (no-op stay when illegal). Answer/Stop
/// return the node unchanged.
NodeId move_action(const DocTree& tree, NodeId id, Action a);

/// Index distance from node id to the nearest answer node (ties toward the
/// smaller index feed the same distance, so the value is unambiguous).
int answer_distance(const DocTree& tree, NodeId id);

/// Stop at distance 0 -> 2; otherwise 1 - d / max_index. Movement -> -0.02,
/// Answer -> -0.06.
double action_reward(const DocTree& tree, NodeId id, Action a);

struct TraceEntry {
    int node_index = 0;
    NodeId node_id = 0;
    Action action = Action::Stop;
    double reward = 0.0;
};

struct Episode {
    std::string qid;
    std::string doc_id;
    int budget = 0;
    int step_count = 0;
    std::vector<TraceEntry> trace;
    double total_reward = 0.0;
    NodeId stop_node = kNoNode;
    std::optional<AnswerPrediction> emitted_answer;
    long observation_tokens_read = 0;  // sum of |o| over visited states
    long rc_tokens_read = 0;           // extractor input tokens, cache misses only
};

/// One navigation episode over an immutable tree. Predictions are cached per
/// effective context node for the life of the episode: the state's z is the
/// cached prediction for the current node's context, null elsewhere. Budget
/// exhaustion forces Stop in place of the requested action.
class Env {
  public:
    Env(const DocTree& tree, std::string qid, Tokens question, const Extractor* extractor,
        int budget, bool coupled = false);

    NavState reset();
    StepResult step(Action a);

    bool done() const { return done_; }
    const NavState& state() const { return state_; }
    const DocTree& tree() const { return *tree_; }
    const Episode& episode() const { return episode_; }
    bool coupled() const { return coupled_; }
    int budget() const { return budget_; }
    const Extractor* extractor() const { return extractor_; }
    const std::string& qid() const { return qid_; }
    const std::shared_ptr<const Tokens>& question() const { return question_; }

  private:
    std::optional<AnswerPrediction> cached_pred(NodeId id) const;
    std::optional<AnswerPrediction> run_extractor(NodeId id);

    const DocTree* tree_;
    std::string qid_;
    std::shared_ptr<const Tokens> question_;
    const Extractor* extractor_;
    int budget_;
    bool coupled_;
    NavState state_;
    bool done_ = true;
    std::map<NodeId, AnswerPrediction> pred_cache_;
    Episode episode_;
};

}  // namespace treenav
