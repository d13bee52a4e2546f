#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace shallowbayes {

// Provenance block written at the top of every output file.
struct OutputMeta {
    std::string command;
    std::string config_hash;
    std::string code_version;
    nlohmann::json config = nlohmann::json::object();
};

// CSV with '#'-prefixed header lines (command, config_hash, code_version, config as JSON), then a column row.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const OutputMeta& meta, const std::vector<std::string>& columns,
              bool append = false);
    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& values);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::size_t ncols_;
};

std::string format_double(double x);

// Writes body plus a "meta" object carrying the provenance fields.
void write_json(const std::string& path, const OutputMeta& meta, nlohmann::json body);

// Reads a CSV written by CsvWriter: header comments into meta fields, rows as strings.
struct CsvTable {
    std::string config_hash;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);

}  // namespace shallowbayes
