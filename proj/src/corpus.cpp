#include "treenav/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include "treenav/rng.hpp"

namespace treenav {

const char* const kAnswerCueToken = "notably";

void CorpusSpec::validate() const {
    if (num_docs < 1) throw std::invalid_argument("corpus: num_docs must be >= 1");
    if (depth_min < 2 || depth_min > depth_max || depth_max > 4)
        throw std::invalid_argument("corpus: depth range must satisfy 2 <= min <= max <= 4");
    if (branching_min < 2 || branching_min > branching_max)
        throw std::invalid_argument("corpus: branching range must satisfy 2 <= min <= max");
    if (!(fao_bias > 0.0 && fao_bias <= 1.0))
        throw std::invalid_argument("corpus: fao_bias must lie in (0, 1]");
    if (vocab_size < 50) throw std::invalid_argument("corpus: vocab_size must be >= 50");
    for (double r : {distractor_rate, theme_spam_rate, echo_rate})
        if (r < 0.0 || r > 1.0) throw std::invalid_argument("corpus: rates must lie in [0, 1]");
}

namespace {

const char* kBaseFillers[] = {
    "the",  "of",    "and",   "in",    "for",   "with",  "from",  "into",  "over",  "under",
    "near", "after", "before","during","about", "along", "above", "below", "toward","between",
    "city", "river", "valley","region","coast", "island","harbor","forest","plain", "ridge",
    "trade","market","season","harvest","stone", "bridge","temple","castle","village","road",
    "north","south", "east",  "west",  "early", "late",  "broad", "narrow","upper", "lower",
    "grew", "built", "moved", "became","formed","raised","opened","closed","joined","spread",
    "people","records","houses","fields","walls","gates", "ships", "routes","goods", "crops",
    "long", "short", "old",   "new",   "small", "large", "quiet", "busy",  "dry",   "wet",
};

const char* kQuestionWords[] = {"what", "which", "where", "who", "how"};

class WordMint {
  public:
    explicit WordMint(Rng& rng) : rng_(rng) {
        for (const char* w : kBaseFillers) used_.insert(w);
        for (const char* w : kQuestionWords) used_.insert(w);
        used_.insert(kAnswerCueToken);
    }

    std::string fresh() {
        static const char* cons[] = {"b","d","f","g","k","l","m","n","p","r","s","t","v","z"};
        static const char* vows[] = {"a","e","i","o","u"};
        for (;;) {
            std::string w;
            int syllables = 2 + static_cast<int>(rng_.below(2));
            for (int s = 0; s < syllables; ++s) {
                w += cons[rng_.below(14)];
                w += vows[rng_.below(5)];
                if (rng_.bernoulli(0.3)) w += cons[rng_.below(14)];
            }
            if (used_.insert(w).second) return w;
        }
    }

  private:
    Rng& rng_;
    std::set<std::string> used_;
};

struct Slot {
    NodeKind kind;
    NodeId parent;
};

NodeId add_node(DocTree& tree, NodeKind kind, NodeId parent) {
    DocNode n;
    n.id = static_cast<NodeId>(tree.nodes.size());
    n.kind = kind;
    n.parent = parent;
    if (parent != kNoNode) tree.nodes[static_cast<std::size_t>(parent)].children.push_back(n.id);
    tree.nodes.push_back(std::move(n));
    return tree.nodes.back().id;
}

void set_label(DocTree& tree, NodeId id, const Tokens& toks) {
    DocNode& n = tree.nodes[static_cast<std::size_t>(id)];
    n.label = join(toks);
    n.label_tokens = toks;
}

/// Geometric draw over eligible paragraph slots: 1 = the first paragraph.
int sample_paragraph_slot(Rng& rng, double bias) {
    int t = 1;
    while (t < 400 && !rng.bernoulli(bias)) ++t;
    return t;
}

Tokens pick_fillers(Rng& rng, const std::vector<std::string>& pool, int count) {
    Tokens out;
    for (int i = 0; i < count; ++i) out.push_back(pool[rng.below(pool.size())]);
    return out;
}

}  // namespace

std::vector<QASample> generate_corpus(const CorpusSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    Rng words_rng = rng.fork("words");
    WordMint mint(words_rng);

    std::vector<std::string> fillers;
    for (const char* w : kBaseFillers) {
        fillers.push_back(w);
        if (static_cast<int>(fillers.size()) >= spec.vocab_size) break;
    }
    while (static_cast<int>(fillers.size()) < spec.vocab_size) fillers.push_back(mint.fresh());

    std::vector<std::string> heading_pool;
    for (int i = 0; i < 40; ++i) heading_pool.push_back(mint.fresh());

    std::vector<QASample> samples;
    int docs_left = spec.num_docs;
    int doc_counter = 0;
    int sample_counter = 0;

    while (docs_left > 0) {
        ++sample_counter;
        QASample sample;
        {
            std::ostringstream qid;
            qid << "q" << sample_counter;
            sample.question_id = qid.str();
        }

        Tokens themes = {mint.fresh(), mint.fresh(), mint.fresh()};
        Tokens hs = {mint.fresh(), mint.fresh()};  // heading words on the answer path
        std::string rare = mint.fresh();           // question term unique to this sample
        Tokens alias_toks = {mint.fresh(), mint.fresh()};
        std::string alias = join(alias_toks);
        sample.answer_aliases = {alias};

        Tokens q;
        q.push_back(kQuestionWords[rng.below(5)]);
        for (const auto& t : themes) q.push_back(t);
        q.push_back(hs[0]);
        q.push_back(hs[1]);
        q.push_back(rare);
        Tokens qfill = pick_fillers(rng, fillers, 2);
        q.insert(q.end(), qfill.begin(), qfill.end());
        sample.question = join(q);
        sample.question_tokens = q;

        int n_docs = 1 + static_cast<int>(rng.below(3));
        n_docs = std::min(n_docs, docs_left);
        docs_left -= n_docs;

        for (int d = 0; d < n_docs; ++d) {
            ++doc_counter;
            DocTree tree;
            {
                std::ostringstream did;
                did << "d" << doc_counter;
                tree.doc_id = did.str();
            }

            int depth = static_cast<int>(rng.range(spec.depth_min, spec.depth_max));
            int n_sections = static_cast<int>(rng.range(spec.branching_min, spec.branching_max));

            NodeId root = add_node(tree, NodeKind::Title, kNoNode);
            set_label(tree, root, {mint.fresh(), mint.fresh()});

            std::vector<NodeId> paragraphs;  // in construction (= pre-order) order
            std::vector<bool> has_sub(static_cast<std::size_t>(n_sections), false);
            if (depth >= 3) {
                bool any = false;
                for (int s = 0; s < n_sections; ++s) {
                    has_sub[static_cast<std::size_t>(s)] = rng.bernoulli(0.5);
                    any = any || has_sub[static_cast<std::size_t>(s)];
                }
                if (!any) has_sub[rng.below(static_cast<std::uint64_t>(n_sections))] = true;
            }
            for (int s = 0; s < n_sections; ++s) {
                NodeId sec = add_node(tree, NodeKind::Section, root);
                set_label(tree, sec, {heading_pool[rng.below(heading_pool.size())],
                                      heading_pool[rng.below(heading_pool.size())]});
                std::vector<NodeId> para_parents;
                if (has_sub[static_cast<std::size_t>(s)]) {
                    int n_sub = static_cast<int>(rng.range(2, 3));
                    for (int u = 0; u < n_sub; ++u) {
                        NodeId sub = add_node(tree, NodeKind::Subsection, sec);
                        set_label(tree, sub, {heading_pool[rng.below(heading_pool.size())]});
                        para_parents.push_back(sub);
                    }
                } else {
                    para_parents.push_back(sec);
                }
                for (NodeId pp : para_parents) {
                    int n_par = static_cast<int>(rng.range(spec.branching_min, spec.branching_max));
                    if (para_parents.size() > 1) n_par = std::max(2, n_par / 2);
                    for (int p = 0; p < n_par; ++p) paragraphs.push_back(add_node(tree, NodeKind::Paragraph, pp));
                }
            }
            assign_indices(tree);

            int slot = sample_paragraph_slot(rng, spec.fao_bias);
            NodeId answer_para = slot <= static_cast<int>(paragraphs.size())
                                     ? paragraphs[static_cast<std::size_t>(slot - 1)]
                                     : paragraphs.back();

            NodeId echo_para = kNoNode;
            if (rng.bernoulli(spec.echo_rate)) {
                std::vector<NodeId> later;
                for (NodeId p : paragraphs)
                    if (tree.node(p).index > tree.node(answer_para).index) later.push_back(p);
                if (!later.empty()) echo_para = later[rng.below(later.size())];
            }
            NodeId spam_para = kNoNode, rare_para = kNoNode;
            {
                std::vector<NodeId> free;
                for (NodeId p : paragraphs)
                    if (p != answer_para && p != echo_para) free.push_back(p);
                if (!free.empty() && rng.bernoulli(spec.theme_spam_rate)) {
                    std::size_t i = rng.below(free.size());
                    spam_para = free[i];
                    free.erase(free.begin() + static_cast<std::ptrdiff_t>(i));
                }
                if (!free.empty() && rng.bernoulli(spec.distractor_rate))
                    rare_para = free[rng.below(free.size())];
            }

            // Plant the shared heading words along the answer path.
            {
                NodeId cur = tree.node(answer_para).parent;
                int hi = 0;
                while (cur != kNoNode && cur != root && hi < 2) {
                    Tokens lt = tree.node(cur).label_tokens;
                    lt.back() = hs[static_cast<std::size_t>(hi++)];
                    set_label(tree, cur, lt);
                    cur = tree.node(cur).parent;
                }
            }

            for (NodeId p : paragraphs) {
                Tokens body;
                bool single_sentence = false;
                if (p == answer_para || p == echo_para) {
                    body.push_back(kAnswerCueToken);
                    body.insert(body.end(), alias_toks.begin(), alias_toks.end());
                    body.push_back(rare);
                    body.insert(body.end(), themes.begin(), themes.end());
                    Tokens f = pick_fillers(rng, fillers, 2);
                    body.insert(body.end(), f.begin(), f.end());
                    single_sentence = true;
                } else if (p == spam_para) {
                    for (int rep = 0; rep < 3; ++rep)
                        body.insert(body.end(), themes.begin(), themes.end());
                    body.push_back(mint.fresh());
                } else if (p == rare_para) {
                    body.push_back(rare);
                    body.push_back(rare);
                    body.insert(body.end(), themes.begin(), themes.end());
                    Tokens f = pick_fillers(rng, fillers, 3);
                    body.insert(body.end(), f.begin(), f.end());
                } else {
                    body.insert(body.end(), themes.begin(), themes.end());
                    Tokens f = pick_fillers(rng, fillers, 4 + static_cast<int>(rng.below(3)));
                    body.insert(body.end(), f.begin(), f.end());
                }
                set_label(tree, p, body);
                std::size_t cut = 0;
                if (!single_sentence && body.size() >= 8 && rng.bernoulli(0.5))
                    cut = 3 + rng.below(body.size() - 5);
                if (cut > 0) {
                    NodeId s1 = add_node(tree, NodeKind::Sentence, p);
                    set_label(tree, s1, Tokens(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(cut)));
                    NodeId s2 = add_node(tree, NodeKind::Sentence, p);
                    set_label(tree, s2, Tokens(body.begin() + static_cast<std::ptrdiff_t>(cut), body.end()));
                } else {
                    NodeId s1 = add_node(tree, NodeKind::Sentence, p);
                    set_label(tree, s1, body);
                }
            }

            tree = reorder_preorder(tree);
            validate_tree(tree);
            sample.documents.push_back(annotate_answers(tree, sample.answer_aliases));
        }
        samples.push_back(std::move(sample));
    }
    return samples;
}

FaoHistogram fao_histogram(const std::vector<QASample>& samples) {
    FaoHistogram h;
    std::vector<int> faos;
    for (const auto& s : samples)
        for (const auto& d : s.documents)
            if (auto f = d.fao()) {
                ++h.counts[*f];
                faos.push_back(*f);
            }
    h.total = static_cast<long>(faos.size());
    if (!faos.empty()) {
        std::sort(faos.begin(), faos.end());
        h.median = faos[(faos.size() - 1) / 2];
    }
    return h;
}

std::string fao_histogram_csv(const FaoHistogram& h) {
    std::ostringstream out;
    out << "fao_index,count\n";
    for (const auto& [idx, cnt] : h.counts) out << idx << "," << cnt << "\n";
    return out.str();
}

}  // namespace treenav
