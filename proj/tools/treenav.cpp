#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "treenav/baselines.hpp"
#include "treenav/corpus.hpp"
#include "treenav/dataset.hpp"
#include "treenav/env.hpp"
#include "treenav/eval.hpp"
#include "treenav/log.hpp"
#include "treenav/manifest.hpp"
#include "treenav/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace treenav;

namespace {

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "dev") return Split::Dev;
    if (s == "test") return Split::Test;
    if (s == "all") return Split::All;
    throw ConfigError("unknown split '" + s + "' (train|dev|test|all)");
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
    try {
        return json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
}

std::map<std::string, std::vector<std::string>> aliases_of(const Dataset& ds) {
    std::map<std::string, std::vector<std::string>> out;
    for (const QASample& s : ds.samples) out[s.question_id] = s.answer_aliases;
    return out;
}

std::map<std::pair<std::string, std::string>, int> fao_of(const Dataset& ds) {
    std::map<std::pair<std::string, std::string>, int> out;
    for (const QASample& s : ds.samples)
        for (const DocTree& d : s.documents)
            if (auto f = d.fao()) out[{s.question_id, d.doc_id}] = *f;
    return out;
}

json trace_to_json(const DocTree& tree, const Episode& ep) {
    json steps = json::array();
    for (const TraceEntry& t : ep.trace) {
        const DocNode& n = tree.node(t.node_id);
        Tokens obs = observation_tokens(tree, t.node_id);
        if (obs.size() > 8) obs.resize(8);
        steps.push_back({{"step", static_cast<int>(steps.size())},
                         {"index", n.index},
                         {"kind", kind_name(n.kind)},
                         {"obs_prefix", join(obs)},
                         {"action", action_name(t.action)},
                         {"reward", t.reward}});
    }
    return steps;
}

void write_outcomes(const std::string& path,
                    const std::vector<std::pair<NavOutcome, json>>& rows, bool with_trace) {
    if (auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& [o, trace] : rows) {
        json j = outcome_to_json(o);
        if (with_trace && !trace.is_null()) j["trace"] = trace;
        out << j.dump() << "\n";
    }
}

std::vector<NavOutcome> read_outcomes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open traces file: " + path);
    std::vector<NavOutcome> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(outcome_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

struct PairRef {
    const QASample* sample;
    const DocTree* doc;
};

std::vector<PairRef> split_pairs(const Dataset& ds, Split split) {
    std::vector<PairRef> out;
    for (const QASample* s : select_split(ds, split))
        for (const DocTree& d : s->documents) out.push_back({s, &d});
    return out;
}

int cmd_gen_corpus(const std::string& out_dir, const CorpusSpec& spec) {
    std::vector<QASample> samples = generate_corpus(spec);
    Dataset ds;
    ds.samples = std::move(samples);
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        ds.sample_by_qid[ds.samples[i].question_id] = i;
    fs::create_directories(out_dir);
    save_dataset(ds, out_dir);

    FaoHistogram h = fao_histogram(ds.samples);
    std::ofstream csv(fs::path(out_dir) / "fao_histogram.csv");
    csv << fao_histogram_csv(h);

    RunManifest m;
    m.config = {{"command", "gen-corpus"},
                {"num_docs", spec.num_docs},
                {"fao_bias", spec.fao_bias},
                {"vocab_size", spec.vocab_size},
                {"depth", {spec.depth_min, spec.depth_max}},
                {"branching", {spec.branching_min, spec.branching_max}},
                {"distractor_rate", spec.distractor_rate},
                {"theme_spam_rate", spec.theme_spam_rate},
                {"echo_rate", spec.echo_rate}};
    m.seed = spec.seed;
    m.data_hash = hash_dataset_dir(out_dir);
    m.created_utc = utc_timestamp();
    m.write(out_dir);

    json summary = {{"samples", ds.samples.size()},
                    {"fao_median", h.median ? json(*h.median) : json()},
                    {"pairs", h.total}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_ingest(const std::string& docs_path, const std::string& qa_path,
               const std::string& out_dir, bool keep_preface) {
    std::ifstream din(docs_path);
    if (!din) throw ConfigError("cannot open docs file: " + docs_path);
    std::map<std::string, DocTree> docs;
    std::string line;
    long lineno = 0;
    while (std::getline(din, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            DocTree t = ingest_document(line);
            docs[t.doc_id] = std::move(t);
        } catch (const std::exception& e) {
            throw std::runtime_error(docs_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }

    std::ifstream qin(qa_path);
    if (!qin) throw ConfigError("cannot open qa file: " + qa_path);
    Dataset ds;
    json rejected = json::array();
    lineno = 0;
    while (std::getline(qin, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        QARecord rec;
        try {
            rec = parse_qa_record(json::parse(line));
        } catch (const std::exception& e) {
            throw std::runtime_error(qa_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        QASample s;
        s.question_id = rec.qid;
        s.question = rec.question;
        s.question_tokens = tokenize(rec.question);
        s.answer_aliases = rec.answers;
        for (const std::string& id : rec.doc_ids) {
            auto it = docs.find(id);
            if (it == docs.end()) {
                log::warn("qa " + rec.qid + ": unknown doc_id " + id);
                continue;
            }
            DocTree t = keep_preface ? it->second : remove_preface(it->second);
            s.documents.push_back(annotate_answers(t, s.answer_aliases));
        }
        FilterResult fr = filter_sample(s);
        for (const Rejection& r : fr.rejections)
            rejected.push_back({{"qid", r.question_id},
                                {"doc_id", r.doc_id},
                                {"reason", reject_reason_name(r.reason)}});
        if (fr.sample) {
            ds.sample_by_qid[fr.sample->question_id] = ds.samples.size();
            ds.samples.push_back(std::move(*fr.sample));
        }
    }

    fs::create_directories(out_dir);
    save_dataset(ds, out_dir);
    std::ofstream rej(fs::path(out_dir) / "rejected.json");
    rej << rejected.dump(2) << "\n";

    RunManifest m;
    m.config = {{"command", "ingest"}, {"keep_preface", keep_preface}};
    m.data_hash = hash_dataset_dir(out_dir);
    m.created_utc = utc_timestamp();
    m.write(out_dir);

    json summary = {{"samples", ds.samples.size()}, {"rejections", rejected.size()}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_stats(const std::string& data_dir, const std::string& out_file) {
    Dataset ds = load_dataset(data_dir);
    long pairs = 0, nodes = 0;
    std::map<std::string, long> kinds;
    for (const QASample& s : ds.samples)
        for (const DocTree& d : s.documents) {
            ++pairs;
            nodes += d.size();
            for (const DocNode& n : d.nodes) ++kinds[kind_name(n.kind)];
        }
    FaoHistogram h = fao_histogram(ds.samples);
    long split_counts[3] = {0, 0, 0};
    for (const QASample& s : ds.samples)
        ++split_counts[static_cast<int>(split_of(s.question_id))];
    json report = {{"samples", ds.samples.size()},
                   {"pairs", pairs},
                   {"nodes", nodes},
                   {"nodes_by_kind", kinds},
                   {"fao_median", h.median ? json(*h.median) : json()},
                   {"split", {{"train", split_counts[0]}, {"dev", split_counts[1]}, {"test", split_counts[2]}}}};
    std::cout << report.dump(2) << "\n";
    if (!out_file.empty()) {
        std::ofstream out(out_file);
        out << report.dump(2) << "\n";
        std::ofstream csv(out_file + ".fao.csv");
        csv << fao_histogram_csv(h);
    }
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::string& mode_flag, bool coupled_flag,
              std::optional<std::uint64_t> seed_flag, std::optional<long> steps_flag,
              const std::string& preset_flag) {
    json cfg_json = config_path.empty() ? json::object() : load_json_file(config_path);
    if (!preset_flag.empty()) cfg_json["preset"] = preset_flag;
    TrainConfig cfg = TrainConfig::from_json(cfg_json);
    if (!mode_flag.empty()) cfg.mode = mode_flag;
    if (coupled_flag) cfg.coupled = true;
    if (seed_flag) cfg.seed = *seed_flag;
    if (steps_flag) {
        cfg.max_steps = *steps_flag;
        cfg.episodes = 0;
    }
    cfg.validate();

    Dataset ds = load_dataset(data_dir);
    std::vector<const QASample*> train_split = select_split(ds, Split::Train);
    std::vector<QASample> data;
    for (const QASample* s : train_split) data.push_back(*s);
    if (data.empty()) throw ConfigError("train: no samples in the train split of " + data_dir);

    fs::create_directories(out_dir);
    RunManifest m;
    m.config = cfg.to_json();
    m.config["command"] = "train";
    m.seed = cfg.seed;
    m.data_hash = hash_dataset_dir(data_dir);
    m.created_utc = utc_timestamp();
    m.write(out_dir);

    std::ofstream csv(fs::path(out_dir) / "metrics.csv");
    csv << metrics_csv_header() << "\n";
    Trainer trainer(cfg, data);
    log::info("training: " + std::to_string(data.size()) + " samples, mode=" + cfg.mode +
              ", seed=" + std::to_string(cfg.seed));
    try {
        TrainResult res = trainer.run([&](const MetricsRow& r) {
            csv << metrics_csv_row(r) << "\n";
            csv.flush();
        });
        trainer.save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string());
        json summary = {{"steps", res.steps},
                        {"episodes", res.episodes},
                        {"updates", res.updates},
                        {"sampled_episodes", res.sampled_episodes},
                        {"final_loss", res.final_loss}};
        std::cout << summary.dump(2) << "\n";
    } catch (const DivergenceError& e) {
        trainer.save_checkpoint((fs::path(out_dir) / "checkpoint.diverged.bin").string());
        log::error(std::string(e.what()) + " (checkpoint of last finite state saved)");
        return 2;
    }
    return 0;
}

int cmd_navigate(const std::string& checkpoint, const std::string& data_dir,
                 const std::string& out_file, const std::string& split_name,
                 std::optional<int> budget_flag, bool with_trace) {
    LoadedModel model = load_model(checkpoint);
    Dataset ds = load_dataset(data_dir);
    std::vector<PairRef> pairs = split_pairs(ds, parse_split(split_name));
    if (pairs.empty()) throw ConfigError("navigate: empty split '" + split_name + "'");

    std::vector<QASample> all(ds.samples.begin(), ds.samples.end());
    auto extractor = make_extractor_for(model.cfg, all);
    int budget = budget_flag.value_or(model.cfg.budget_eval);

    std::vector<std::pair<NavOutcome, json>> rows;
    for (const PairRef& p : pairs) {
        Episode ep = greedy_episode(*p.doc, *p.sample, model.net, model.vocab, extractor.get(),
                                    budget, model.cfg.coupled);
        rows.emplace_back(outcome_from_episode(*p.doc, ep),
                          with_trace ? trace_to_json(*p.doc, ep) : json());
    }
    write_outcomes(out_file, rows, with_trace);
    std::cout << json{{"pairs", rows.size()}, {"out", out_file}}.dump(2) << "\n";
    return 0;
}

int cmd_baseline(const std::string& kind, const std::string& data_dir,
                 const std::string& out_file, const std::string& split_name,
                 std::uint64_t seed, int budget, const std::string& ensemble,
                 int threshold_l, const std::string& agent_file,
                 const std::string& reader_kind) {
    Dataset ds = load_dataset(data_dir);
    std::vector<PairRef> pairs = split_pairs(ds, parse_split(split_name));
    if (pairs.empty()) throw ConfigError("baseline: empty split '" + split_name + "'");

    std::map<std::string, std::vector<std::string>> aliases = aliases_of(ds);
    auto extractor = make_extractor(reader_kind, "", aliases);
    Rng root(seed);

    // Corpus-level index over the sample's own candidate documents.
    auto corpus_docs = [&]() {
        std::vector<const DocTree*> all;
        for (const PairRef& p : pairs) all.push_back(p.doc);
        return all;
    };

    auto outcome_at = [&](const PairRef& p, NodeId stop, bool fallback) {
        Episode ep;
        ep.qid = p.sample->question_id;
        ep.doc_id = p.doc->doc_id;
        ep.stop_node = stop;
        ep.step_count = 1;
        ep.trace.push_back({p.doc->node(stop).index, stop, Action::Stop, 0.0});
        NodeId ctx = context_node(*p.doc, stop);
        const Tokens& context = p.doc->node(ctx).label_tokens;
        if (!context.empty()) {
            ExtractQuery q;
            q.question = &p.sample->question_tokens;
            q.context = &context;
            q.qid = p.sample->question_id;
            q.node_index = p.doc->node(ctx).index;
            ep.emitted_answer = extractor->predict(q);
            ep.rc_tokens_read = static_cast<long>(context.size());
        }
        NavOutcome o = outcome_from_episode(*p.doc, ep);
        if (fallback) log::debug("fallback selection for qid " + o.qid);
        return o;
    };

    std::vector<std::pair<NavOutcome, json>> rows;

    if (ensemble == "threshold") {
        if (agent_file.empty())
            throw ConfigError("--ensemble threshold requires --agent TRACES");
        std::vector<NavOutcome> agent = read_outcomes(agent_file);
        std::map<std::pair<std::string, std::string>, const NavOutcome*> by_pair;
        for (const NavOutcome& o : agent) by_pair[{o.qid, o.doc_id}] = &o;
        TfIdfIndex corpus = TfIdfIndex::over_corpus(corpus_docs());
        for (const PairRef& p : pairs) {
            TfIdfChoice tf = kind == "tfidf"
                                 ? global_tfidf_select(p.sample->question_tokens, *p.doc, corpus)
                                 : doc_tfidf_select(p.sample->question_tokens, *p.doc);
            auto it = by_pair.find({p.sample->question_id, p.doc->doc_id});
            if (it == by_pair.end()) {
                rows.emplace_back(outcome_at(p, tf.node, tf.fallback), json());
                continue;
            }
            // Map the agent's stop index back to a node of this document.
            NodeId agent_node = tf.node;
            for (const DocNode& n : p.doc->nodes)
                if (n.index == it->second->stop_index && n.kind != NodeKind::Sentence) {
                    agent_node = n.id;
                    break;
                }
            NodeId chosen = ensemble_threshold(*p.doc, agent_node, tf.node, threshold_l);
            rows.emplace_back(outcome_at(p, chosen, false), json());
        }
    } else if (ensemble == "answer") {
        if (agent_file.empty()) throw ConfigError("--ensemble answer requires --agent TRACES");
        std::vector<NavOutcome> agent = read_outcomes(agent_file);
        std::map<std::string, std::vector<std::pair<std::string, double>>> agent_preds;
        for (const NavOutcome& o : agent)
            if (o.final_answer) agent_preds[o.qid].emplace_back(*o.final_answer, o.final_probability);
        TfIdfIndex corpus = TfIdfIndex::over_corpus(corpus_docs());
        std::map<std::string, std::vector<std::pair<std::string, double>>> tfidf_preds;
        for (const PairRef& p : pairs) {
            TfIdfChoice tf = kind == "tfidf"
                                 ? global_tfidf_select(p.sample->question_tokens, *p.doc, corpus)
                                 : doc_tfidf_select(p.sample->question_tokens, *p.doc);
            NavOutcome o = outcome_at(p, tf.node, tf.fallback);
            if (o.final_answer)
                tfidf_preds[o.qid].emplace_back(*o.final_answer, o.final_probability);
        }
        std::ofstream out(out_file);
        if (!out) throw std::runtime_error("cannot write " + out_file);
        double em = 0.0, f1 = 0.0;
        long n = 0;
        std::set<std::string> qids;
        for (const PairRef& p : pairs) qids.insert(p.sample->question_id);
        for (const std::string& qid : qids) {
            std::string ans = ensemble_answer(agent_preds[qid], tfidf_preds[qid]);
            out << json{{"qid", qid}, {"answer", ans}}.dump() << "\n";
            auto [e, f] = score_em_f1(ans, aliases[qid]);
            em += e;
            f1 += f;
            ++n;
        }
        json summary = {{"questions", n},
                        {"em", n ? em / static_cast<double>(n) : 0.0},
                        {"f1", n ? f1 / static_cast<double>(n) : 0.0}};
        std::cout << summary.dump(2) << "\n";
        return 0;
    } else if (kind == "randomwalk") {
        Rng rng = root.fork("randomwalk");
        for (const PairRef& p : pairs) {
            Env env(*p.doc, p.sample->question_id, p.sample->question_tokens, extractor.get(),
                    budget, false);
            random_walk(env, rng);
            rows.emplace_back(outcome_from_episode(*p.doc, env.episode()), json());
        }
    } else if (kind == "randompara") {
        Rng rng = root.fork("randompara");
        for (const PairRef& p : pairs)
            rows.emplace_back(outcome_at(p, random_para(*p.doc, rng), false), json());
    } else if (kind == "tfidf") {
        TfIdfIndex corpus = TfIdfIndex::over_corpus(corpus_docs());
        for (const PairRef& p : pairs) {
            TfIdfChoice c = global_tfidf_select(p.sample->question_tokens, *p.doc, corpus);
            rows.emplace_back(outcome_at(p, c.node, c.fallback), json());
        }
    } else if (kind == "doctfidf") {
        for (const PairRef& p : pairs) {
            TfIdfChoice c = doc_tfidf_select(p.sample->question_tokens, *p.doc);
            rows.emplace_back(outcome_at(p, c.node, c.fallback), json());
        }
    } else if (kind == "readtop") {
        for (const PairRef& p : pairs) {
            auto pred = read_top(*p.doc, p.sample->question_tokens, *extractor,
                                 p.sample->question_id);
            NavOutcome o;
            o.qid = p.sample->question_id;
            o.doc_id = p.doc->doc_id;
            Tokens prefix = read_top_prefix(*p.doc);
            o.stop_index = 0;
            o.stop_kind = NodeKind::Title;
            // Correct iff the prefix contains an alias, mirroring paragraph
            // judging for navigators.
            Tokens hay = normalize_tokens(prefix);
            for (const std::string& alias : p.sample->answer_aliases) {
                Tokens needle = normalize_text(alias);
                if (!needle.empty() && contains_subsequence(hay, needle)) {
                    o.has_answer = true;
                    break;
                }
            }
            o.path_length = 1;
            o.tokens_consumed = static_cast<long>(prefix.size());
            long doc_tokens = 0;
            for (const DocNode& n : p.doc->nodes)
                if (n.kind != NodeKind::Sentence)
                    doc_tokens += static_cast<long>(n.label_tokens.size());
            o.tokens_fraction = doc_tokens > 0 ? std::min(
                                                     1.0, static_cast<double>(o.tokens_consumed) /
                                                              static_cast<double>(doc_tokens))
                                               : 0.0;
            if (pred) {
                o.final_answer = join(pred->tokens);
                o.final_probability = pred->top_probability;
            }
            if (auto f = p.doc->fao()) o.fao = *f;
            rows.emplace_back(std::move(o), json());
        }
    } else {
        throw ConfigError("unknown baseline kind '" + kind + "'");
    }

    write_outcomes(out_file, rows, false);
    std::vector<NavOutcome> outs;
    for (const auto& [o, t] : rows) outs.push_back(o);
    json summary = {{"pairs", rows.size()},
                    {"navigation_accuracy", navigation_accuracy(outs)},
                    {"out", out_file}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::vector<std::string>& trace_files, const std::string& data_dir,
             const std::string& report_file, const std::string& edges_arg) {
    std::vector<NavOutcome> outcomes;
    for (const std::string& f : trace_files) {
        std::vector<NavOutcome> part = read_outcomes(f);
        outcomes.insert(outcomes.end(), part.begin(), part.end());
    }
    if (outcomes.empty()) throw ConfigError("eval: no outcomes in the given trace files");

    Dataset ds = load_dataset(data_dir);
    auto aliases = aliases_of(ds);
    auto fao = fao_of(ds);

    std::vector<int> edges;
    {
        std::string item;
        std::istringstream ss(edges_arg);
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            edges.push_back(std::stoi(item));
        }
    }

    PathStats ps = path_stats(outcomes);
    FaoHistogram hist = stop_index_histogram(outcomes);
    auto buckets = accuracy_by_fao(outcomes, fao, edges);
    auto [em, f1] = qa_metrics(outcomes, aliases);

    json report = {{"pairs", outcomes.size()},
                   {"navigation_accuracy", navigation_accuracy(outcomes)},
                   {"aggregated_accuracy", aggregated_accuracy(outcomes)},
                   {"em", em},
                   {"f1", f1},
                   {"path_stats",
                    {{"path_length_avg", ps.path_length_avg},
                     {"path_length_range", {ps.path_length_min, ps.path_length_max}},
                     {"answer_actions_avg", ps.answer_actions_avg},
                     {"tokens_fraction_avg", ps.tokens_fraction_avg},
                     {"stop_kind_frac", ps.stop_kind_frac}}},
                   {"stop_index_median", hist.median ? json(*hist.median) : json()}};

    if (auto dir = fs::path(report_file).parent_path(); !dir.empty())
        fs::create_directories(dir);
    std::ofstream out(report_file);
    if (!out) throw std::runtime_error("cannot write " + report_file);
    out << report.dump(2) << "\n";
    std::ofstream hcsv(report_file + ".stop_hist.csv");
    hcsv << histogram_csv(hist);
    std::ofstream fcsv(report_file + ".fao.csv");
    fcsv << fao_buckets_csv(buckets);
    std::cout << report.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"treenav: document-tree navigation toolkit"};
    app.require_subcommand(1);

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic QA corpus");
    std::string gen_out;
    CorpusSpec spec;
    gen->add_option("--out", gen_out, "Output dataset directory")->required();
    gen->add_option("--docs", spec.num_docs, "Number of documents");
    gen->add_option("--seed", spec.seed, "Corpus seed");
    gen->add_option("--fao-bias", spec.fao_bias, "Geometric bias for the answer index");
    gen->add_option("--depth-min", spec.depth_min);
    gen->add_option("--depth-max", spec.depth_max);
    gen->add_option("--branching-min", spec.branching_min);
    gen->add_option("--branching-max", spec.branching_max);
    gen->add_option("--vocab", spec.vocab_size, "Filler vocabulary size");
    gen->add_option("--distractor-rate", spec.distractor_rate);
    gen->add_option("--theme-spam-rate", spec.theme_spam_rate);
    gen->add_option("--echo-rate", spec.echo_rate);

    // ingest
    auto* ing = app.add_subcommand("ingest", "Ingest raw docs.jsonl + qa.jsonl");
    std::string ing_docs, ing_qa, ing_out;
    bool ing_keep_preface = false;
    ing->add_option("--docs", ing_docs, "Raw documents JSONL")->required();
    ing->add_option("--qa", ing_qa, "Raw QA JSONL")->required();
    ing->add_option("--out", ing_out, "Output dataset directory")->required();
    ing->add_flag("--keep-preface", ing_keep_preface, "Skip preface removal");

    // stats
    auto* st = app.add_subcommand("stats", "Dataset statistics");
    std::string st_data, st_out;
    st->add_option("--data", st_data, "Dataset directory")->required();
    st->add_option("--out", st_out, "Optional report file");

    // train
    auto* tr = app.add_subcommand("train", "Train a navigation model");
    std::string tr_config, tr_data, tr_out, tr_mode, tr_preset;
    bool tr_coupled = false;
    std::uint64_t tr_seed_v = 0;
    long tr_steps_v = 0;
    tr->add_option("--config", tr_config, "JSON config file");
    tr->add_option("--data", tr_data, "Dataset directory")->required();
    tr->add_option("--out", tr_out, "Output directory")->required();
    tr->add_option("--mode", tr_mode, "dqn | docqn");
    tr->add_flag("--coupled", tr_coupled, "Use the coupled action set");
    auto* tr_seed = tr->add_option("--seed", tr_seed_v, "Root seed");
    auto* tr_steps = tr->add_option("--steps", tr_steps_v, "Stop after this many env steps");
    tr->add_option("--preset", tr_preset, "paper | desk");

    // navigate
    auto* nav = app.add_subcommand("navigate", "Greedy rollout of a trained model");
    std::string nav_ckpt, nav_data, nav_out, nav_split = "dev";
    int nav_budget_v = 0;
    bool nav_trace = false;
    nav->add_option("--checkpoint", nav_ckpt, "Checkpoint file")->required();
    nav->add_option("--data", nav_data, "Dataset directory")->required();
    nav->add_option("--out", nav_out, "Output traces JSONL")->required();
    nav->add_option("--split", nav_split, "train|dev|test|all");
    auto* nav_budget = nav->add_option("--budget", nav_budget_v, "Navigation budget");
    nav->add_flag("--trace", nav_trace, "Include per-step traces");

    // baseline
    auto* bl = app.add_subcommand("baseline", "Non-learned baselines and ensembles");
    std::string bl_kind, bl_data, bl_out, bl_split = "dev", bl_ensemble, bl_agent;
    std::string bl_reader = "oracle";
    std::uint64_t bl_seed = 1;
    int bl_budget = 100, bl_l = kEnsembleThresholdDefault;
    bl->add_option("--kind", bl_kind, "randomwalk|randompara|tfidf|doctfidf|readtop")
        ->required();
    bl->add_option("--data", bl_data, "Dataset directory")->required();
    bl->add_option("--out", bl_out, "Output traces JSONL")->required();
    bl->add_option("--split", bl_split, "train|dev|test|all");
    bl->add_option("--seed", bl_seed, "Seed for the random baselines");
    bl->add_option("--budget", bl_budget, "RandomWalk budget");
    bl->add_option("--ensemble", bl_ensemble, "threshold | answer");
    bl->add_option("--l", bl_l, "Threshold ensemble node-index cutoff");
    bl->add_option("--agent", bl_agent, "Agent traces JSONL for ensembles");
    bl->add_option("--reader", bl_reader, "overlap | oracle");

    // eval
    auto* ev = app.add_subcommand("eval", "Metrics over trace files");
    std::vector<std::string> ev_traces;
    std::string ev_data, ev_report, ev_edges = "5,10,20,40";
    ev->add_option("--traces", ev_traces, "Outcome JSONL files")->required();
    ev->add_option("--data", ev_data, "Dataset directory")->required();
    ev->add_option("--report", ev_report, "Report JSON path")->required();
    ev->add_option("--fao-edges", ev_edges, "Comma-separated bucket edges");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);  // 0 for --help, 1 ("usage") otherwise
    }

    try {
        if (gen->parsed()) {
            spec.validate();
            return cmd_gen_corpus(gen_out, spec);
        }
        if (ing->parsed()) return cmd_ingest(ing_docs, ing_qa, ing_out, ing_keep_preface);
        if (st->parsed()) return cmd_stats(st_data, st_out);
        if (tr->parsed())
            return cmd_train(tr_config, tr_data, tr_out, tr_mode, tr_coupled,
                             tr_seed->count() ? std::optional<std::uint64_t>(tr_seed_v)
                                              : std::nullopt,
                             tr_steps->count() ? std::optional<long>(tr_steps_v) : std::nullopt,
                             tr_preset);
        if (nav->parsed())
            return cmd_navigate(nav_ckpt, nav_data, nav_out, nav_split,
                                nav_budget->count() ? std::optional<int>(nav_budget_v)
                                                    : std::nullopt,
                                nav_trace);
        if (bl->parsed())
            return cmd_baseline(bl_kind, bl_data, bl_out, bl_split, bl_seed, bl_budget,
                                bl_ensemble, bl_l, bl_agent, bl_reader);
        if (ev->parsed()) return cmd_eval(ev_traces, ev_data, ev_report, ev_edges);
    } catch (const ConfigError& e) {
        log::error(e.what());
        return 1;
    } catch (const ParseError& e) {
        log::error(e.what());
        return 1;
    } catch (const ValidationError& e) {
        log::error(e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        log::error(e.what());
        return 1;
    } catch (const std::exception& e) {
        log::error(e.what());
        return 2;
    }
    return 1;
}
