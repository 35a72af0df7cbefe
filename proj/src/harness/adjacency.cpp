#include <sstream>

#include "cb/core/error.hpp"
#include "cb/harness/harness.hpp"

namespace cb {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

Adjacency parse_adjacency_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    Adjacency a;
    if (!std::getline(in, line)) throw Error(ErrorCode::ShapeMismatch, "adjacency csv is empty");
    a.names = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<int> row;
        for (const auto& cell : split_csv_line(line)) {
            if (cell != "0" && cell != "1") throw Error(ErrorCode::ShapeMismatch, "adjacency entry '" + cell + "' is not 0/1");
            row.push_back(cell == "1");
        }
        if (row.size() != a.names.size()) throw Error(ErrorCode::ShapeMismatch, "adjacency row width differs from header");
        a.matrix.push_back(std::move(row));
    }
    if (a.matrix.size() != a.names.size()) throw Error(ErrorCode::ShapeMismatch, "adjacency matrix is not square");
    return a;
}

std::string adjacency_csv(const Adjacency& a) {
    std::string out;
    for (std::size_t i = 0; i < a.names.size(); ++i) out += (i ? "," : "") + a.names[i];
    out += "\n";
    for (const auto& row : a.matrix) {
        for (std::size_t j = 0; j < row.size(); ++j) out += (j ? "," : "") + std::to_string(row[j]);
        out += "\n";
    }
    return out;
}

double reference_metric_shd(const std::vector<std::vector<int>>& predicted, const std::vector<std::vector<int>>& truth) {
    const std::size_t n = truth.size();
    if (predicted.size() != n) throw Error(ErrorCode::ShapeMismatch, "graphs have different sizes");
    for (std::size_t i = 0; i < n; ++i) {
        if (predicted[i].size() != n || truth[i].size() != n) throw Error(ErrorCode::ShapeMismatch, "adjacency is not square");
    }
    int diff = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j && (predicted[i][j] != 0) != (truth[i][j] != 0)) ++diff;
        }
    }
    return diff;
}

}  // namespace cb
