#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "treenav/doctree.hpp"

namespace treenav {

/// Parse one structured document record:
///   {"doc_id": ..., "title": ..., "nodes": [{"kind","text","children":[...]}]}
/// Nesting must be legal (title > section > subsection > paragraph > sentence,
/// with levels skippable downward). Malformed input raises ParseError with a
/// JSON path to the offending node; illegal nesting raises ValidationError.
DocTree ingest_document(const nlohmann::json& record);
DocTree ingest_document(const std::string& json_text);

nlohmann::json document_to_json(const DocTree& tree);

struct QARecord {
    std::string qid;
    std::string question;
    std::vector<std::string> answers;
    std::vector<std::string> doc_ids;
};

QARecord parse_qa_record(const nlohmann::json& j);
nlohmann::json qa_record_to_json(const QARecord& r);

/// A processed dataset directory: docs.jsonl + qa.jsonl.
struct Dataset {
    std::vector<QASample> samples;
    std::map<std::string, std::size_t> sample_by_qid;
};

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

/// 80/10/10 split by a stable hash of the question id.
enum class Split { Train, Dev, Test, All };
Split split_of(const std::string& qid);
std::vector<const QASample*> select_split(const Dataset& ds, Split split);

}  // namespace treenav
