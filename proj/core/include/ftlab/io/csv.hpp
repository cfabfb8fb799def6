#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ftlab::io {

// CSV with "#"-prefixed provenance comments before the header row. Every
// report embeds the run config and version string that produced it.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void comment(const std::string& line);
    void row(const std::vector<std::string>& fields);

    std::string str() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

struct CsvTable {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

// Token surfaces can hold arbitrary bytes; control and non-ASCII bytes are
// escaped as \xNN (plus \n, \t, \\) so reports stay printable and
// deterministic. csv_unescape_token inverts it.
std::string escape_token(const std::string& raw);
std::string unescape_token(const std::string& escaped);

std::string fmt_f6(double v);     // fixed, 6 decimals
std::string fmt_g(double v);      // shortest reasonable, deterministic
std::string fmt_int(long long v);

}  // namespace ftlab::io
