#include "ftlab/corpus/document.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"

namespace ftlab::corpus {

Corpus Corpus::from_jsonl(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw ConfigError("corpus file not found: " + path.string());
    }
    Corpus c;
    std::set<std::int64_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("id") || !rec.contains("text") ||
            !rec["id"].is_number_integer() || !rec["text"].is_string()) {
            c.warnings_.push_back("skipped malformed record at line " + std::to_string(line_no));
            continue;
        }
        Document d;
        d.doc_id = rec["id"].get<std::int64_t>();
        d.text = rec["text"].get<std::string>();
        if (!seen.insert(d.doc_id).second) {
            c.warnings_.push_back("skipped duplicate doc_id " + std::to_string(d.doc_id) + " at line " +
                                  std::to_string(line_no));
            continue;
        }
        c.docs_.push_back(std::move(d));
    }
    return c;
}

Corpus Corpus::from_dir(const std::filesystem::path& path) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(path)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    Corpus c;
    std::int64_t next_id = 0;
    for (const auto& p : files) {
        std::ifstream f(p, std::ios::binary);
        if (!f) {
            c.warnings_.push_back("skipped unreadable file " + p.string());
            continue;
        }
        std::stringstream ss;
        ss << f.rdbuf();
        c.docs_.push_back(Document{next_id++, ss.str()});
    }
    return c;
}

Corpus Corpus::from_texts(const std::vector<std::string>& texts) {
    Corpus c;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        c.docs_.push_back(Document{static_cast<std::int64_t>(i), texts[i]});
    }
    return c;
}

Corpus Corpus::open(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) return from_dir(path);
    if (std::filesystem::is_regular_file(path)) return from_jsonl(path);
    throw ConfigError("corpus path not found: " + path.string());
}

void Corpus::to_jsonl(const std::filesystem::path& path) const {
    std::string out;
    for (const auto& d : docs_) {
        nlohmann::json rec{{"id", d.doc_id}, {"text", d.text}};
        out += rec.dump();
        out += '\n';
    }
    io::write_file_atomic(path, out.data(), out.size());
}

}  // namespace ftlab::corpus
