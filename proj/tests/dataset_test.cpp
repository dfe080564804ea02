#include <doctest/doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "treenav/corpus.hpp"
#include "treenav/dataset.hpp"

using namespace treenav;
using nlohmann::json;

namespace {

std::string fixture_path(const char* name) {
    return std::string(TREENAV_FIXTURES) + "/" + name;
}

json load_fixture(const char* name) {
    std::ifstream in(fixture_path(name));
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("treenav_test_" + std::to_string(std::rand()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("document json round-trip") {
    DocTree t = ingest_document(load_fixture("phuket.json"));
    DocTree back = ingest_document(document_to_json(t));
    REQUIRE(back.size() == t.size());
    for (int i = 0; i < t.size(); ++i) {
        CHECK(back.node(i).kind == t.node(i).kind);
        CHECK(back.node(i).label == t.node(i).label);
        CHECK(back.node(i).index == t.node(i).index);
        CHECK(back.node(i).parent == t.node(i).parent);
        CHECK(back.node(i).children == t.node(i).children);
    }
    CHECK(back.doc_id == t.doc_id);
    CHECK(back.max_index == t.max_index);
    CHECK(back.token_count == t.token_count);
}

TEST_CASE("qa record round-trip") {
    QARecord r;
    r.qid = "q7";
    r.question = "where does rain fall";
    r.answers = {"Thailand", "Kingdom of Thailand"};
    r.doc_ids = {"phuket"};
    QARecord back = parse_qa_record(qa_record_to_json(r));
    CHECK(back.qid == r.qid);
    CHECK(back.question == r.question);
    CHECK(back.answers == r.answers);
    CHECK(back.doc_ids == r.doc_ids);
}

TEST_CASE("qa record requires fields") {
    CHECK_THROWS_AS(parse_qa_record(json{{"question", "q"}}), ParseError);
    CHECK_THROWS_AS(parse_qa_record(json::array()), ParseError);
}

TEST_CASE("dataset save/load round-trip") {
    CorpusSpec spec;
    spec.num_docs = 10;
    spec.seed = 3;
    Dataset ds;
    ds.samples = generate_corpus(spec);
    REQUIRE_FALSE(ds.samples.empty());
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        ds.sample_by_qid[ds.samples[i].question_id] = i;

    TempDir tmp;
    save_dataset(ds, tmp.path.string());
    CHECK(std::filesystem::exists(tmp.path / "docs.jsonl"));
    CHECK(std::filesystem::exists(tmp.path / "qa.jsonl"));
    Dataset back = load_dataset(tmp.path.string());
    REQUIRE(back.samples.size() == ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const QASample& a = ds.samples[i];
        const QASample& b = back.samples[i];
        CHECK(a.question_id == b.question_id);
        CHECK(a.question == b.question);
        CHECK(a.answer_aliases == b.answer_aliases);
        REQUIRE(a.documents.size() == b.documents.size());
        for (std::size_t d = 0; d < a.documents.size(); ++d) {
            CHECK(a.documents[d].doc_id == b.documents[d].doc_id);
            CHECK(a.documents[d].max_index == b.documents[d].max_index);
            CHECK(a.documents[d].token_count == b.documents[d].token_count);
            CHECK(a.documents[d].answer_node_ids == b.documents[d].answer_node_ids);
        }
        CHECK(back.sample_by_qid.at(a.question_id) == i);
    }
}

TEST_CASE("split assignment is stable and partitions") {
    CHECK(split_of("q-anything") == split_of("q-anything"));

    CorpusSpec spec;
    spec.num_docs = 200;
    spec.seed = 5;
    Dataset ds;
    ds.samples = generate_corpus(spec);
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        ds.sample_by_qid[ds.samples[i].question_id] = i;
    auto train = select_split(ds, Split::Train);
    auto dev = select_split(ds, Split::Dev);
    auto test = select_split(ds, Split::Test);
    auto all = select_split(ds, Split::All);
    CHECK(all.size() == ds.samples.size());
    CHECK(train.size() + dev.size() + test.size() == ds.samples.size());
    CHECK_FALSE(train.empty());
    CHECK_FALSE(dev.empty());
    CHECK_FALSE(test.empty());
    double n = static_cast<double>(ds.samples.size());
    CHECK(static_cast<double>(train.size()) / n > 0.6);
    CHECK(static_cast<double>(train.size()) / n < 0.95);
    for (const QASample* s : train) CHECK(split_of(s->question_id) == Split::Train);
    for (const QASample* s : dev) CHECK(split_of(s->question_id) == Split::Dev);
}

TEST_CASE("load_dataset rejects malformed lines") {
    TempDir tmp;
    {
        std::ofstream docs(tmp.path / "docs.jsonl");
        docs << "{not json}\n";
        std::ofstream qa(tmp.path / "qa.jsonl");
        qa << R"({"qid":"a","question":"x","answers":["yz"],"doc_ids":["d"]})" << "\n";
    }
    CHECK_THROWS_AS(load_dataset(tmp.path.string()), ParseError);
}
