#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ftlab::corpus {

struct Document {
    std::int64_t doc_id{0};
    std::string text;
};

// Desk-scale corpora fit in memory. Input is either newline-delimited JSON
// records {"id": int, "text": string} or a directory with one document per
// file (ids assigned over the sorted file names). Malformed records are
// skipped per document and reported through `warnings`.
class Corpus {
public:
    static Corpus from_jsonl(const std::filesystem::path& path);
    static Corpus from_dir(const std::filesystem::path& path);
    static Corpus from_texts(const std::vector<std::string>& texts);

    // Dispatches on whether `path` is a file or a directory.
    static Corpus open(const std::filesystem::path& path);

    void to_jsonl(const std::filesystem::path& path) const;

    const std::vector<Document>& docs() const { return docs_; }
    std::size_t size() const { return docs_.size(); }
    const std::vector<std::string>& warnings() const { return warnings_; }

    void add(Document d) { docs_.push_back(std::move(d)); }

private:
    std::vector<Document> docs_;
    std::vector<std::string> warnings_;
};

}  // namespace ftlab::corpus
