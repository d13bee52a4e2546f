#include "shallowbayes/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "shallowbayes/errors.hpp"

namespace shallowbayes {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const OutputMeta& meta, const std::vector<std::string>& columns,
                     bool append)
    : path_(path), ncols_(columns.size()) {
    if (append) {
        std::ifstream probe(path);
        if (probe.good()) return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "# command: " << meta.command << "\n";
    out << "# config_hash: " << meta.config_hash << "\n";
    out << "# code_version: " << meta.code_version << "\n";
    out << "# config: " << meta.config.dump() << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != ncols_) throw std::logic_error("CsvWriter: row width does not match the header");
    std::ofstream out(path_, std::ios::app);
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << "\n";
    if (!out) throw std::runtime_error("cannot append to " + path_);
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row(cells);
}

void write_json(const std::string& path, const OutputMeta& meta, nlohmann::json body) {
    body["meta"] = {{"command", meta.command},
                    {"config_hash", meta.config_hash},
                    {"code_version", meta.code_version},
                    {"config", meta.config}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body.dump(2) << "\n";
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    CsvTable t;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string key = "# config_hash: ";
            if (line.rfind(key, 0) == 0) t.config_hash = line.substr(key.size());
            continue;
        }
        if (t.columns.empty())
            t.columns = split(line);
        else
            t.rows.push_back(split(line));
    }
    return t;
}

}  // namespace shallowbayes
