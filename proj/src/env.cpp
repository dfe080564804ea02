#include "treenav/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace treenav {

const char* action_name(Action a) {
    switch (a) {
        case Action::Down: return "down";
        case Action::Right: return "right";
        case Action::Left: return "left";
        case Action::UpRight: return "up_right";
        case Action::UpLeft: return "up_left";
        case Action::Answer: return "answer";
        case Action::Stop: return "stop";
    }
    return "?";
}

std::optional<Action> action_from_name(const std::string& name) {
    for (int i = 0; i < kNumActions; ++i) {
        Action a = static_cast<Action>(i);
        if (name == action_name(a)) return a;
    }
    return std::nullopt;
}

std::vector<Action> legal_actions(bool coupled) {
    std::vector<Action> out = {Action::Down, Action::Right, Action::Left, Action::UpRight,
                               Action::UpLeft};
    if (!coupled) out.push_back(Action::Answer);
    out.push_back(Action::Stop);
    return out;
}

NodeId context_node(const DocTree& tree, NodeId id) {
    const DocNode& n = tree.node(id);
    return n.kind == NodeKind::Sentence ? n.parent : id;
}

Tokens observation_tokens(const DocTree& tree, NodeId id) {
    std::vector<NodeId> path;
    for (NodeId cur = id; cur != kNoNode; cur = tree.node(cur).parent) path.push_back(cur);
    std::reverse(path.begin(), path.end());
    Tokens o;
    for (NodeId nid : path) {
        const Tokens& lt = tree.node(nid).label_tokens;
        std::size_t take = std::min<std::size_t>(lt.size(), kNodePrefixTokens);
        o.insert(o.end(), lt.begin(), lt.begin() + static_cast<std::ptrdiff_t>(take));
    }
    if (o.size() > kObservationCap)
        o.erase(o.begin(), o.end() - kObservationCap);
    return o;
}

PhiN nav_features(const DocTree& tree, NodeId id, int step) {
    PhiN f{};
    f[0] = tree.height(id);
    f[1] = tree.depth(id);
    f[2] = tree.h_dist_start(id);
    f[3] = tree.h_dist_end(id);
    NodeId p = tree.node(id).parent;
    f[4] = p == kNoNode ? 0.0 : tree.h_dist_start(p);
    f[5] = p == kNoNode ? 0.0 : tree.h_dist_end(p);
    f[6] = step;
    return f;
}

PhiZ answer_features(const std::optional<AnswerPrediction>& pred) {
    if (!pred) return {0.0, 0.0, 0.0};
    return {pred->entropy, pred->top_logit, static_cast<double>(pred->context_token_count)};
}

NavState make_state(const DocTree& tree, NodeId id, std::shared_ptr<const Tokens> question,
                    int step, std::optional<AnswerPrediction> answer_pred) {
    NavState s;
    s.node = id;
    s.question = std::move(question);
    s.observation = observation_tokens(tree, id);
    s.answer_pred = std::move(answer_pred);
    s.phi_n = nav_features(tree, id, step);
    s.phi_z = answer_features(s.answer_pred);
    s.step = step;
    return s;
}

NavState state_at(const DocTree& tree, NodeId id, std::shared_ptr<const Tokens> question) {
    return make_state(tree, id, std::move(question), tree.depth(id), std::nullopt);
}

namespace {

NodeId sibling(const DocTree& tree, NodeId id, int offset) {
    NodeId p = tree.node(id).parent;
    if (p == kNoNode) return kNoNode;
    const auto& sib = tree.node(p).children;
    auto it = std::find(sib.begin(), sib.end(), id);
    auto pos = static_cast<int>(it - sib.begin()) + offset;
    if (pos < 0 || pos >= static_cast<int>(sib.size())) return kNoNode;
    return sib[static_cast<std::size_t>(pos)];
}

}  // namespace

NodeId move_action(const DocTree& tree, NodeId id, Action a) {
    NodeId dest = kNoNode;
    switch (a) {
        case Action::Down: {
            const auto& ch = tree.node(id).children;
            dest = ch.empty() ? kNoNode : ch.front();
            break;
        }
        case Action::Right: dest = sibling(tree, id, +1); break;
        case Action::Left: dest = sibling(tree, id, -1); break;
        case Action::UpRight: {
            NodeId p = tree.node(id).parent;
            dest = p == kNoNode ? kNoNode : sibling(tree, p, +1);
            break;
        }
        case Action::UpLeft: {
            NodeId p = tree.node(id).parent;
            dest = p == kNoNode ? kNoNode : sibling(tree, p, -1);
            break;
        }
        case Action::Answer:
        case Action::Stop: dest = id; break;
    }
    return dest == kNoNode ? id : dest;  // illegal moves are lawful no-op stays
}

int answer_distance(const DocTree& tree, NodeId id) {
    if (tree.answer_node_ids.empty())
        throw std::logic_error("answer_distance: document has no answer nodes");
    int here = tree.node(id).index;
    int best = -1;
    for (NodeId a : tree.answer_node_ids) {
        int d = std::abs(here - tree.node(a).index);
        if (best < 0 || d < best) best = d;
    }
    return best;
}

double action_reward(const DocTree& tree, NodeId id, Action a) {
    switch (a) {
        case Action::Stop: {
            int d = answer_distance(tree, id);
            if (d == 0) return 2.0;
            return 1.0 - static_cast<double>(d) / static_cast<double>(tree.max_index);
        }
        case Action::Answer: return -0.06;
        default: return -0.02;
    }
}

Env::Env(const DocTree& tree, std::string qid, Tokens question, const Extractor* extractor,
         int budget, bool coupled)
    : tree_(&tree),
      qid_(std::move(qid)),
      question_(std::make_shared<const Tokens>(std::move(question))),
      extractor_(extractor),
      budget_(budget),
      coupled_(coupled) {
    if (budget_ < 1) throw std::invalid_argument("env: budget must be >= 1");
}

NavState Env::reset() {
    pred_cache_.clear();
    episode_ = Episode{};
    episode_.qid = qid_;
    episode_.doc_id = tree_->doc_id;
    episode_.budget = budget_;
    state_ = make_state(*tree_, tree_->root().id, question_, 0, std::nullopt);
    episode_.observation_tokens_read += static_cast<long>(state_.observation.size());
    done_ = false;
    return state_;
}

std::optional<AnswerPrediction> Env::cached_pred(NodeId id) const {
    auto it = pred_cache_.find(context_node(*tree_, id));
    if (it == pred_cache_.end()) return std::nullopt;
    return it->second;
}

std::optional<AnswerPrediction> Env::run_extractor(NodeId id) {
    NodeId ctx = context_node(*tree_, id);
    if (auto hit = cached_pred(id)) return hit;
    if (extractor_ == nullptr) return std::nullopt;
    const Tokens& context = tree_->node(ctx).label_tokens;
    if (context.empty()) return std::nullopt;
    ExtractQuery q;
    q.question = question_.get();
    q.context = &context;
    q.qid = qid_;
    q.node_index = tree_->node(ctx).index;
    auto pred = extractor_->predict(q);
    if (pred) {
        episode_.rc_tokens_read += static_cast<long>(context.size());
        pred_cache_[ctx] = *pred;
    }
    return pred;
}

StepResult Env::step(Action a) {
    if (done_) throw std::logic_error("env: step after terminal state");
    if (coupled_ && a == Action::Answer)
        throw std::logic_error("env: Answer is not legal in coupled mode");
    if (episode_.step_count == budget_ - 1 && a != Action::Stop) a = Action::Stop;

    StepResult res;
    res.action_taken = a;
    res.reward = action_reward(*tree_, state_.node, a);

    NodeId dest = state_.node;
    std::optional<AnswerPrediction> pred;
    switch (a) {
        case Action::Answer:
            pred = run_extractor(state_.node);
            break;
        case Action::Stop:
            pred = run_extractor(state_.node);
            res.terminal = true;
            res.emitted_answer = pred;
            break;
        default:
            dest = move_action(*tree_, state_.node, a);
            pred = cached_pred(dest);
            break;
    }

    episode_.trace.push_back({tree_->node(state_.node).index, state_.node, a, res.reward});
    episode_.total_reward += res.reward;
    ++episode_.step_count;

    res.next_state = make_state(*tree_, dest, question_, state_.step + 1, std::move(pred));
    if (!res.terminal)
        episode_.observation_tokens_read += static_cast<long>(res.next_state.observation.size());
    state_ = res.next_state;
    if (res.terminal) {
        done_ = true;
        episode_.stop_node = state_.node;
        episode_.emitted_answer = res.emitted_answer;
    }
    return res;
}

}  // namespace treenav
