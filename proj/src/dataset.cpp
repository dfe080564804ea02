#include "treenav/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace treenav {

namespace {

using nlohmann::json;

NodeKind parse_kind(const std::string& s, const std::string& path) {
    if (s == "title") return NodeKind::Title;
    if (s == "section") return NodeKind::Section;
    if (s == "subsection") return NodeKind::Subsection;
    if (s == "paragraph") return NodeKind::Paragraph;
    if (s == "sentence") return NodeKind::Sentence;
    throw ParseError(path + ": unknown node kind '" + s + "'");
}

void ingest_node(const json& j, const std::string& path, DocTree& tree, NodeId parent) {
    if (!j.is_object()) throw ParseError(path + ": node must be an object");
    if (!j.contains("kind") || !j["kind"].is_string())
        throw ParseError(path + ": missing string field 'kind'");
    if (!j.contains("text") || !j["text"].is_string())
        throw ParseError(path + ": missing string field 'text'");

    NodeKind kind = parse_kind(j["kind"].get<std::string>(), path);
    NodeKind parent_kind = tree.node(parent).kind;
    if (kind_level(kind) <= kind_level(parent_kind))
        throw ValidationError(path + ": illegal nesting: " + kind_name(kind) + " under " +
                              kind_name(parent_kind));
    if (kind == NodeKind::Sentence && parent_kind != NodeKind::Paragraph)
        throw ValidationError(path + ": sentence under " + std::string(kind_name(parent_kind)));

    DocNode node;
    node.id = static_cast<NodeId>(tree.nodes.size());
    node.kind = kind;
    node.label = j["text"].get<std::string>();
    node.label_tokens = tokenize(node.label);
    node.parent = parent;
    tree.nodes.push_back(std::move(node));
    NodeId nid = tree.nodes.back().id;
    tree.nodes[static_cast<std::size_t>(parent)].children.push_back(nid);

    if (j.contains("children")) {
        if (!j["children"].is_array())
            throw ParseError(path + ".children: must be an array");
        if (kind == NodeKind::Sentence && !j["children"].empty())
            throw ValidationError(path + ": sentence node with children");
        std::size_t i = 0;
        for (const auto& c : j["children"]) {
            ingest_node(c, path + ".children[" + std::to_string(i) + "]", tree, nid);
            ++i;
        }
    }
}

}  // namespace

DocTree ingest_document(const json& record) {
    if (!record.is_object()) throw ParseError("$: document record must be an object");
    if (!record.contains("title") || !record["title"].is_string())
        throw ParseError("$: missing string field 'title'");

    DocTree tree;
    tree.doc_id = record.value("doc_id", std::string());
    DocNode root;
    root.id = 0;
    root.kind = NodeKind::Title;
    root.label = record["title"].get<std::string>();
    root.label_tokens = tokenize(root.label);
    root.parent = kNoNode;
    tree.nodes.push_back(std::move(root));

    if (record.contains("nodes")) {
        if (!record["nodes"].is_array()) throw ParseError("$.nodes: must be an array");
        std::size_t i = 0;
        for (const auto& c : record["nodes"]) {
            ingest_node(c, "$.nodes[" + std::to_string(i) + "]", tree, 0);
            ++i;
        }
    }
    assign_indices(tree);
    validate_tree(tree);
    return tree;
}

DocTree ingest_document(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ParseError("$: invalid JSON");
    return ingest_document(j);
}

namespace {

json node_to_json(const DocTree& tree, NodeId id) {
    const DocNode& n = tree.node(id);
    json j;
    j["kind"] = kind_name(n.kind);
    j["text"] = n.label;
    if (!n.children.empty()) {
        json kids = json::array();
        for (NodeId c : n.children) kids.push_back(node_to_json(tree, c));
        j["children"] = std::move(kids);
    }
    return j;
}

}  // namespace

json document_to_json(const DocTree& tree) {
    json j;
    j["doc_id"] = tree.doc_id;
    j["title"] = tree.root().label;
    json kids = json::array();
    for (NodeId c : tree.root().children) kids.push_back(node_to_json(tree, c));
    j["nodes"] = std::move(kids);
    return j;
}

QARecord parse_qa_record(const json& j) {
    if (!j.is_object()) throw ParseError("$: qa record must be an object");
    for (const char* key : {"qid", "question"})
        if (!j.contains(key) || !j[key].is_string())
            throw ParseError(std::string("$: missing string field '") + key + "'");
    for (const char* key : {"answers", "doc_ids"})
        if (!j.contains(key) || !j[key].is_array())
            throw ParseError(std::string("$: missing array field '") + key + "'");
    QARecord r;
    r.qid = j["qid"].get<std::string>();
    r.question = j["question"].get<std::string>();
    for (const auto& a : j["answers"]) r.answers.push_back(a.get<std::string>());
    for (const auto& d : j["doc_ids"]) r.doc_ids.push_back(d.get<std::string>());
    return r;
}

json qa_record_to_json(const QARecord& r) {
    return json{{"qid", r.qid},
                {"question", r.question},
                {"answers", r.answers},
                {"doc_ids", r.doc_ids}};
}

void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream docs(fs::path(dir) / "docs.jsonl");
    std::ofstream qa(fs::path(dir) / "qa.jsonl");
    if (!docs || !qa) throw std::runtime_error("cannot write dataset to " + dir);
    for (const QASample& s : ds.samples) {
        QARecord r;
        r.qid = s.question_id;
        r.question = s.question;
        r.answers = s.answer_aliases;
        for (const DocTree& d : s.documents) {
            r.doc_ids.push_back(d.doc_id);
            docs << document_to_json(d).dump() << "\n";
        }
        qa << qa_record_to_json(r).dump() << "\n";
    }
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream docs_in(fs::path(dir) / "docs.jsonl");
    std::ifstream qa_in(fs::path(dir) / "qa.jsonl");
    if (!docs_in || !qa_in)
        throw std::runtime_error("cannot read dataset from " + dir +
                                 " (expected docs.jsonl and qa.jsonl)");

    std::map<std::string, DocTree> docs;
    std::string line;
    while (std::getline(docs_in, line)) {
        if (line.empty()) continue;
        DocTree t = ingest_document(line);
        docs[t.doc_id] = std::move(t);
    }

    Dataset ds;
    while (std::getline(qa_in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError("qa.jsonl: invalid JSON line");
        QARecord r = parse_qa_record(j);
        QASample s;
        s.question_id = r.qid;
        s.question = r.question;
        s.question_tokens = tokenize(r.question);
        s.answer_aliases = r.answers;
        for (const auto& did : r.doc_ids) {
            auto it = docs.find(did);
            if (it == docs.end())
                throw ParseError("qa.jsonl: unknown doc_id '" + did + "' for qid " + r.qid);
            s.documents.push_back(annotate_answers(it->second, s.answer_aliases));
        }
        ds.sample_by_qid[s.question_id] = ds.samples.size();
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

Split split_of(const std::string& qid) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : qid) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t bucket = h % 10;
    if (bucket == 8) return Split::Dev;
    if (bucket == 9) return Split::Test;
    return Split::Train;
}

std::vector<const QASample*> select_split(const Dataset& ds, Split split) {
    std::vector<const QASample*> out;
    for (const QASample& s : ds.samples) {
        if (split == Split::All || split_of(s.question_id) == split) out.push_back(&s);
    }
    return out;
}

}  // namespace treenav
