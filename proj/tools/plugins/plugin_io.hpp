#pragma once

// Minimal helpers shared by the reference plugins. Plugins only depend on the
// file protocol, not on the platform libraries.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace plugin {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        out.push_back(cell);
    }
    return out;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline Table read_csv(const std::filesystem::path& p) {
    std::istringstream in(read_file(p));
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty csv " + p.string());
    t.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        for (const auto& c : split(line)) row.push_back(std::stod(c));
        if (row.size() != t.header.size()) throw std::runtime_error("ragged csv " + p.string());
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace plugin
