#include "ftlab/io/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ftlab/errors.hpp"
#include "ftlab/io/container.hpp"

namespace ftlab::io {

namespace {

bool needs_quotes(const std::string& s) {
    return s.find(',') != std::string::npos || s.find('"') != std::string::npos;
}

std::string quote(const std::string& s) {
    if (!needs_quotes(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

void split_line(const std::string& line, std::vector<std::string>& out) {
    out.clear();
    std::string field;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(field);
}

int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

}  // namespace

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::comment(const std::string& line) { comments_.push_back(line); }

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != header_.size()) {
        throw DomainError("csv row width mismatch");
    }
    rows_.push_back(fields);
}

std::string CsvWriter::str() const {
    std::string out;
    for (const auto& c : comments_) {
        out += "# " + c + "\n";
    }
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (i) out += ',';
        out += quote(header_[i]);
    }
    out += '\n';
    for (const auto& r : rows_) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out += ',';
            out += quote(r[i]);
        }
        out += '\n';
    }
    return out;
}

void CsvWriter::write(const std::filesystem::path& path) const {
    std::string s = str();
    write_file_atomic(path, s.data(), s.size());
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream is(text);
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            t.comments.push_back(line.size() > 2 ? line.substr(2) : "");
            continue;
        }
        std::vector<std::string> fields;
        split_line(line, fields);
        if (!have_header) {
            t.header = fields;
            have_header = true;
        } else {
            t.rows.push_back(fields);
        }
    }
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DomainError("cannot open: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

std::string escape_token(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (unsigned char c : raw) {
        if (c == '\n') out += "\\n";
        else if (c == '\t') out += "\\t";
        else if (c == '\\') out += "\\\\";
        else if (c < 0x20 || c >= 0x7f) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\x%02x", c);
            out += buf;
        } else {
            out += static_cast<char>(c);
        }
    }
    return out;
}

std::string unescape_token(const std::string& escaped) {
    std::string out;
    for (std::size_t i = 0; i < escaped.size(); ++i) {
        char c = escaped[i];
        if (c != '\\') {
            out += c;
            continue;
        }
        if (i + 1 >= escaped.size()) {
            out += c;
            break;
        }
        char n = escaped[++i];
        if (n == 'n') out += '\n';
        else if (n == 't') out += '\t';
        else if (n == '\\') out += '\\';
        else if (n == 'x' && i + 2 < escaped.size()) {
            int hi = hex_val(escaped[i + 1]);
            int lo = hex_val(escaped[i + 2]);
            if (hi >= 0 && lo >= 0) {
                out += static_cast<char>(hi * 16 + lo);
                i += 2;
            } else {
                out += 'x';
            }
        } else {
            out += n;
        }
    }
    return out;
}

std::string fmt_f6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string fmt_int(long long v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld", v);
    return buf;
}

}  // namespace ftlab::io
